"""Machine semantics: relabeling, emission, and an independent interpreter oracle."""

import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from daia.features import NAME_TO_INDEX
from daia.fst import Machine, RelabelEvent
from daia.guard_dsl import DEFAULT_FST_TEXT, INTENT_BIT, FstSpec, Temporal, compile_spec, parse
from daia.states import EngagementState
from test_guard_dsl import oracle_eval

D, A, I, X = (
    EngagementState.Disengagement,
    EngagementState.Attention,
    EngagementState.Intention,
    EngagementState.Action,
)


def bit(name):
    return 1 << NAME_TO_INDEX[name]

FACING = bit("facing_sensor")
SPECIAL = bit("hands_folded")
INTENT = 1 << INTENT_BIT
STOPPED = bit("r_speed_stopped") | bit("l_speed_stopped")
MOVING = bit("r_speed_slow") | bit("l_speed_slow")


def sym(facing=True, special=False, intent=False, moving=False):
    """One reduced-alphabet input as (mask for the machine, signal set for the oracle)."""
    mask = (FACING if facing else 0) | (SPECIAL if special else 0) | (INTENT if intent else 0)
    names = set()
    if facing:
        names.add("facing")
    if special:
        names.add("special_any")
    if intent:
        names.add("intent")
    if moving:
        mask |= MOVING
        names.add("any_moving")
    else:
        mask |= STOPPED
        names.add("both_stopped")
    return mask, frozenset(names)


def relabel_spec(window):
    return parse(
        "initial Attention\n"
        "state Disengagement { }\n"
        f"state Attention {{ on sustained(any_moving, {window}) -> Action relabel speed_onset }}\n"
        "state Intention { }\n"
        "state Action { }\n"
    )


def run_machine(table, masks, depth=60):
    m = Machine(table, buffer_depth=depth)
    finalized = {}
    results = []
    for t, mask in enumerate(masks):
        r = m.step(mask, t)
        results.append(r)
        for f in r.emitted:
            assert f.finalized
            finalized[f.frame_index] = f.state
    for f in m.flush():
        assert f.finalized
        finalized[f.frame_index] = f.state
    assert sorted(finalized) == list(range(len(masks)))
    return [finalized[i] for i in range(len(masks))], results


def test_relabel_scan_stops_at_last_stopped_frame():
    # stopped, moving, moving, transition -> the three trailing frames repaint
    table = compile_spec(relabel_spec(3))
    masks = [sym()[0], sym(moving=True)[0], sym(moving=True)[0], sym(moving=True)[0]]
    labels, results = run_machine(table, masks)
    assert labels == [A, X, X, X]
    assert results[3].relabel == RelabelEvent(start=1, end=3)
    assert results[2].relabel is None


def test_relabel_single_frame_buffer():
    table = compile_spec(relabel_spec(1))
    labels, results = run_machine(table, [sym(moving=True)[0]])
    assert labels == [X]
    assert results[0].relabel == RelabelEvent(start=0, end=0)


def test_relabel_without_stopped_frame_repaints_everything():
    table = compile_spec(relabel_spec(5))
    masks = [sym(moving=True)[0]] * 5
    labels, results = run_machine(table, masks)
    assert labels == [X] * 5
    assert results[4].relabel == RelabelEvent(start=0, end=4)


def test_relabel_cannot_touch_finalized_frames():
    # the guard needs intent, which only arrives at t=5; by then frames 0..1
    # are finalized and keep their Attention label even though the motion
    # started at frame 0; the repaint reaches only the still-buffered frames
    spec = parse(
        "initial Attention\n"
        "state Disengagement { }\n"
        "state Attention { on intent && any_moving -> Action relabel speed_onset }\n"
        "state Intention { }\n"
        "state Action { }\n"
    )
    m = Machine(compile_spec(spec), buffer_depth=3)
    emitted = {}
    results = []
    for t in range(6):
        r = m.step(sym(moving=True, intent=(t == 5))[0], t)
        results.append(r)
        for f in r.emitted:
            emitted[f.frame_index] = f.state
    for f in m.flush():
        emitted[f.frame_index] = f.state
    assert [emitted[i] for i in range(6)] == [A, A, X, X, X, X]
    assert results[5].relabel == RelabelEvent(start=2, end=5)


def test_flush_emits_buffered_frames_once():
    table = compile_spec(relabel_spec(2))
    m = Machine(table)
    assert m.flush() == ()
    for t in range(7):
        assert m.step(sym()[0], t).emitted == ()
    out = m.flush()
    assert [f.frame_index for f in out] == list(range(7))
    assert all(f.finalized for f in out)
    assert m.flush() == ()


def test_default_table_happy_path():
    table = compile_spec(parse(DEFAULT_FST_TEXT))
    masks = (
        [sym(facing=False)[0]] * 3      # turned away: stay Disengagement
        + [sym()[0]] * 5                 # facing, still: Attention
        + [sym(intent=True)[0]] * 3      # intent posture while recently stopped: Intention
        + [sym(intent=True, moving=True)[0]] * 6   # sustained movement: Action
        + [sym(intent=True)[0]] * 12     # stopped again: back to Intention after 10
        + [sym(special=True)[0]] * 2     # special posture: Disengagement
    )
    labels, results = run_machine(table, masks)
    assert labels[:3] == [D] * 3
    assert labels[3] is A
    assert labels[8] is I
    # relabel repaints the whole movement burst back to its onset
    assert labels[11:17] == [X] * 6
    assert results[15].relabel is not None and results[15].relabel.start == 11
    assert labels[26] is I  # ten stopped frames after the burst
    assert labels[-1] is D and labels[-2] is D


def test_ordered_chain_from_disengagement():
    # From Disengagement the machine can only stay or advance to Attention.
    table = compile_spec(parse(DEFAULT_FST_TEXT))
    rng = np.random.default_rng(1)
    for _ in range(200):
        m = Machine(table)
        for t in range(40):
            mask, _ = sym(
                facing=bool(rng.integers(2)),
                special=bool(rng.integers(2)),
                intent=bool(rng.integers(2)),
                moving=bool(rng.integers(2)),
            )
            r = m.step(mask, t)
            if r.state_before is D:
                assert r.state in (D, A)


def test_window_bounded_memory():
    table = compile_spec(parse(DEFAULT_FST_TEXT))
    rng = np.random.default_rng(7)
    masks = [
        sym(
            facing=bool(rng.integers(2)),
            special=rng.integers(10) == 0,
            intent=bool(rng.integers(2)),
            moving=bool(rng.integers(2)),
        )[0]
        for _ in range(120)
    ]
    m = Machine(table)
    states = []
    for t, mask in enumerate(masks):
        states.append(m.step(mask, t).state)
    w = table.max_window
    for t0 in (30, 60, 90):
        clone = Machine(table)
        clone.state = states[t0]
        clone.history = masks[t0 - w + 1 : t0 + 1]
        for t in range(t0 + 1, len(masks)):
            assert clone.step(masks[t], t).state == states[t], t


# --------------------------------------------------------------------------
# Independent interpreter oracle over the reduced alphabet
# --------------------------------------------------------------------------

SHRUNK_FST_TEXT = """\
initial Disengagement
state Disengagement { on facing && !special_any -> Attention }
state Attention {
  on !facing || special_any -> Disengagement
  on intent && any_in(both_stopped, 2) -> Intention
  on intent && sustained(any_moving, 2) -> Action relabel speed_onset
}
state Intention {
  on !facing || special_any -> Disengagement
  on sustained(!intent, 3) -> Attention
  on intent && sustained(any_moving, 2) -> Action relabel speed_onset
}
state Action {
  on !facing || special_any -> Disengagement
  on intent && sustained(both_stopped, 2) -> Intention
}
"""


def oracle_run(spec: FstSpec, stream, depth):
    """Reference interpreter: walks the AST directly, models the M-frame buffer."""
    state_name = spec.initial
    labels = []
    hist = []
    for t, names in enumerate(stream):
        hist.append(names)
        target, relabel = state_name, None
        for rule in spec.state(state_name).rules:
            if oracle_eval(rule.guard, hist):
                target, relabel = rule.target, rule.relabel
                break
        state_name = target
        labels.append(EngagementState[target])
        if relabel == "speed_onset":
            window_lo = max(0, t - depth)  # still-buffered frames
            start = window_lo
            for p in range(t - 1, window_lo - 1, -1):
                if "both_stopped" in stream[p]:
                    start = p + 1
                    break
            for p in range(start, t + 1):
                labels[p] = EngagementState[target]
    return labels


ALPHABET = [
    sym(facing=f, special=s, intent=i, moving=v)
    for f, s, i, v in itertools.product((False, True), repeat=4)
]


def machine_vs_oracle(spec, stream_syms, depth):
    table = compile_spec(spec)
    masks = [m for m, _ in stream_syms]
    names = [n for _, n in stream_syms]
    got, _ = run_machine(table, masks, depth=depth)
    want = oracle_run(spec, names, depth)
    assert got == want, (names, [s.code for s in got], [s.code for s in want])


def test_machine_matches_oracle_exhaustive_short_streams():
    spec = parse(SHRUNK_FST_TEXT)
    for stream in itertools.product(ALPHABET, repeat=3):
        machine_vs_oracle(spec, list(stream), depth=60)


def test_machine_matches_oracle_random_streams():
    rng = np.random.default_rng(42)
    shrunk = parse(SHRUNK_FST_TEXT)
    canonical = parse(DEFAULT_FST_TEXT)
    for spec in (shrunk, canonical):
        for _ in range(700):
            length = int(rng.integers(4, 13))
            stream = [ALPHABET[rng.integers(len(ALPHABET))] for _ in range(length)]
            machine_vs_oracle(spec, stream, depth=60)


def test_machine_matches_oracle_tight_buffer():
    # finalization limits how far the repaint reaches; the oracle models that too
    rng = np.random.default_rng(3)
    spec = parse(SHRUNK_FST_TEXT)
    for _ in range(500):
        length = int(rng.integers(4, 13))
        stream = [ALPHABET[rng.integers(len(ALPHABET))] for _ in range(length)]
        machine_vs_oracle(spec, stream, depth=4)


def test_machine_rejects_bad_buffer_depth():
    with pytest.raises(ValueError):
        Machine(buffer_depth=0)
