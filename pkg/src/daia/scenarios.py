"""Scenario composition: training game, fixed evaluation suite, demo session.

The game alternates ready / play / stop phases of a statues-style game and
tags every frame with its phase, which is what the intent trainer consumes.
The evaluation suite is a fixed battery of seeded multi-minute sessions
mixing approach, attentive rest, raised-hand holds with micro-motion, swipe
bursts, and several disengagement endings.

Gesture step durations are always ceil(travel / speed) so every frame of a
gesture step actually moves; stillness is modelled as explicit idle steps.
A short zero-amplitude "settle" idle follows each gesture so the stopped
window after a gesture is unambiguous.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .skeleton import (
    BASE_POSE,
    RAISED_HAND,
    SWIPE_EXTENT_MM,
    Frame,
    JointId,
    Scenario,
    ScenarioStep,
    generate_scenario,
)
from .states import EngagementState

RAISE_TRAVEL_MM = float(np.linalg.norm(RAISED_HAND["right"] - BASE_POSE[JointId.RightHand]))
LOWER_TRAVEL_MM = 800.0  # upper bound; covers swiped-out and on-head hand positions

# Raises stay below 60 mm/frame so the intent classifier flips while the hand
# is still travelling; otherwise the movement window can close before the
# intent bit arrives and no Action transition fires.
RAISE_SPEED = (32.0, 55.0)
SWIPE_SPEED = (45.0, 85.0)
LOWER_SPEED = (45.0, 70.0)
REST_AMP = (12.0, 22.0)
HOLD_AMP = (18.0, 28.0)
SUITE_BURST_GAP = (6, 12)  # dense idle micro-motion; a memoryless labeller trips on it

GAME_PHASES = ("ready", "play", "stop")


def _ri(rng, lo: int, hi: int) -> int:
    return int(rng.integers(lo, hi + 1))


def _ru(rng, bounds: tuple[float, float]) -> float:
    return float(rng.uniform(*bounds))


def _raise_step(rng) -> ScenarioStep:
    kind = "raise_right_hand" if rng.random() < 0.65 else "raise_left_hand"
    v = _ru(rng, RAISE_SPEED)
    return ScenarioStep(kind, math.ceil(RAISE_TRAVEL_MM / v), round(v, 1))


def _swipe_step(rng, leftward: bool) -> ScenarioStep:
    v = _ru(rng, SWIPE_SPEED)
    kind = "swipe_lr" if leftward else "swipe_rl"
    return ScenarioStep(kind, math.ceil(SWIPE_EXTENT_MM / v), round(v, 1))


def _lower_step(rng) -> ScenarioStep:
    v = _ru(rng, LOWER_SPEED)
    return ScenarioStep("lower_hand", math.ceil(LOWER_TRAVEL_MM / v), round(v, 1))


def _idle(rng, lo: int, hi: int, amp: tuple[float, float]) -> ScenarioStep:
    return ScenarioStep("idle", _ri(rng, lo, hi), round(_ru(rng, amp), 1))


def _settle(rng) -> ScenarioStep:
    # still long enough for a 10-frame stopped window to complete
    return ScenarioStep("idle", _ri(rng, 13, 16), 0.0)


# --------------------------------------------------------------------------
# Training game
# --------------------------------------------------------------------------

def _game_cycle(rng) -> list[tuple[ScenarioStep, str]]:
    out: list[tuple[ScenarioStep, str]] = [(_idle(rng, 30, 60, REST_AMP), "ready")]
    if rng.random() < 0.35:
        # hover half-raised before committing; teaches the classifier that a
        # hand between torso and shoulder height already signals intent
        kind = "raise_right_hand" if rng.random() < 0.65 else "raise_left_hand"
        v = _ru(rng, RAISE_SPEED)
        frac = _ru(rng, (0.62, 0.80))
        out += [
            (ScenarioStep(kind, math.ceil(frac * RAISE_TRAVEL_MM / v), round(v, 1)), "play"),
            (_idle(rng, 20, 50, (8.0, 16.0)), "play"),
            (ScenarioStep(kind, math.ceil((1.0 - frac) * RAISE_TRAVEL_MM / v) + 1, round(v, 1)), "play"),
        ]
    else:
        out.append((_raise_step(rng), "play"))
    out += [(_settle(rng), "play"), (_idle(rng, 50, 120, HOLD_AMP), "play")]
    leftward = bool(rng.integers(2))
    for _ in range(_ri(rng, 0, 2)):
        out += [(_swipe_step(rng, leftward), "play"), (_idle(rng, 15, 40, HOLD_AMP), "play")]
        leftward = not leftward
    out.append((_lower_step(rng), "stop"))
    r = rng.random()
    if r < 0.5:
        out.append((_idle(rng, 30, 70, REST_AMP), "stop"))
    elif r < 0.8:
        out += [
            (ScenarioStep("turn_away", _ri(rng, 10, 14)), "stop"),
            (_idle(rng, 25, 60, REST_AMP), "stop"),
            (ScenarioStep("face_sensor", _ri(rng, 10, 14)), "stop"),
        ]
    else:
        out += [
            (ScenarioStep("fold_hands", _ri(rng, 10, 14)), "stop"),
            (_idle(rng, 25, 60, REST_AMP), "stop"),
            (ScenarioStep("unfold", _ri(rng, 8, 12)), "stop"),
            (_idle(rng, 10, 25, REST_AMP), "stop"),
        ]
    return out


def game_scenario(
    seed: int, n_frames: int, jitter_sigma_mm: float = 15.0
) -> tuple[list[Frame], list[str]]:
    """Synthesize `n_frames` of gameplay plus the per-frame phase tags."""
    rng = np.random.default_rng(seed)
    pairs: list[tuple[ScenarioStep, str]] = [
        (ScenarioStep("face_sensor", 12), "ready"),
    ]
    while sum(s.duration_frames for s, _ in pairs) < n_frames:
        pairs.extend(_game_cycle(rng))
    scenario = Scenario(
        seed=int(rng.integers(2**31)),
        steps=tuple(s for s, _ in pairs),
        jitter_sigma_mm=jitter_sigma_mm,
    )
    frames, _ = generate_scenario(scenario)
    phases = [phase for step, phase in pairs for _ in range(step.duration_frames)]
    return frames[:n_frames], phases[:n_frames]


# --------------------------------------------------------------------------
# Evaluation suite
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SuiteCase:
    name: str
    scenario: Scenario
    frames: tuple[Frame, ...]
    truth: tuple[EngagementState, ...]


def _engagement_block(rng, hold_lo: int, hold_hi: int, n_swipes: int) -> list[ScenarioStep]:
    steps = [_raise_step(rng), _settle(rng), _idle(rng, hold_lo, hold_hi, HOLD_AMP)]
    leftward = bool(rng.integers(2))
    for _ in range(n_swipes):
        steps += [_swipe_step(rng, leftward), _settle(rng), _idle(rng, 20, 50, HOLD_AMP)]
        leftward = not leftward
    return steps


def _suite_steps(rng) -> list[ScenarioStep]:
    steps = [
        _idle(rng, 120, 220, REST_AMP),  # starts turned away
        ScenarioStep("face_sensor", _ri(rng, 10, 14)),
        _idle(rng, 300, 480, REST_AMP),
    ]
    steps += _engagement_block(rng, 600, 780, _ri(rng, 2, 4))
    if rng.random() < 0.5:  # disengage fully, then come back for more
        steps += [
            _lower_step(rng),
            _idle(rng, 8, 18, REST_AMP),
            ScenarioStep("turn_away", _ri(rng, 10, 14)),
            _idle(rng, 60, 130, REST_AMP),
            ScenarioStep("face_sensor", _ri(rng, 10, 14)),
            _idle(rng, 90, 180, REST_AMP),
        ]
        steps += _engagement_block(rng, 280, 420, _ri(rng, 1, 2))
    r = rng.random()
    if r < 0.40:  # walk off mid-hold; short turn so the leave wins the race
        steps += [
            ScenarioStep("turn_away", _ri(rng, 8, 10)),
            _idle(rng, 120, 240, REST_AMP),
        ]
    elif r < 0.70:  # put the hand down first, then leave
        steps += [
            _lower_step(rng),
            _idle(rng, 8, 18, REST_AMP),
            ScenarioStep("turn_away", _ri(rng, 10, 14)),
            _idle(rng, 100, 200, REST_AMP),
        ]
    elif r < 0.90:  # fold up, then relax facing the sensor
        steps += [
            ScenarioStep("fold_hands", _ri(rng, 10, 14)),
            _idle(rng, 60, 120, REST_AMP),
            ScenarioStep("unfold", _ri(rng, 8, 12)),
            _idle(rng, 40, 90, REST_AMP),
        ]
    else:  # hands on head, recover, leave
        steps += [
            ScenarioStep("hands_on_head", _ri(rng, 10, 14)),
            _idle(rng, 50, 100, REST_AMP),
            _lower_step(rng),
            _idle(rng, 8, 14, REST_AMP),
            ScenarioStep("turn_away", _ri(rng, 10, 14)),
            _idle(rng, 40, 90, REST_AMP),
        ]
    return steps


def acceptance_suite(
    seed: int = 42, jitter_sigma_mm: float = 15.0, count: int = 30
) -> list[SuiteCase]:
    """The fixed evaluation battery: `count` seeded sessions, ~2,000 frames each."""
    master = np.random.default_rng(seed)
    cases = []
    for k in range(count):
        rng = np.random.default_rng(int(master.integers(2**31)))
        scenario = Scenario(
            seed=int(master.integers(2**31)),
            steps=tuple(_suite_steps(rng)),
            jitter_sigma_mm=jitter_sigma_mm,
            burst_gap=SUITE_BURST_GAP,
        )
        frames, truth = generate_scenario(scenario)
        cases.append(SuiteCase(f"session-{k:02d}", scenario, tuple(frames), tuple(truth)))
    return cases


# --------------------------------------------------------------------------
# Demo + relabel probes
# --------------------------------------------------------------------------

def demo_scenario(seed: int = 11, jitter_sigma_mm: float = 5.0) -> SuiteCase:
    """A 600-frame raise-and-swipe session that ends inside an Action segment."""
    raise_dur = math.ceil(RAISE_TRAVEL_MM / 48.0)
    swipe_dur = math.ceil(SWIPE_EXTENT_MM / 25.0)
    hold = 600 - (12 + 215 + raise_dur + 14 + swipe_dur)
    steps = (
        ScenarioStep("face_sensor", 12),
        ScenarioStep("idle", 215, 16.0),
        ScenarioStep("raise_right_hand", raise_dur, 48.0),
        ScenarioStep("idle", 14, 0.0),
        ScenarioStep("idle", hold, 22.0),
        ScenarioStep("swipe_lr", swipe_dur, 25.0),
    )
    scenario = Scenario(seed=seed, steps=steps, jitter_sigma_mm=jitter_sigma_mm)
    frames, truth = generate_scenario(scenario)
    assert len(frames) == 600
    return SuiteCase("demo", scenario, tuple(frames), tuple(truth))


def relabel_cases(seed: int = 7, count: int = 20) -> list[tuple[Scenario, int]]:
    """Noiseless raise-hand probes: (scenario, scripted motion onset frame)."""
    rng = np.random.default_rng(seed)
    cases = []
    for _ in range(count):
        v = _ru(rng, RAISE_SPEED)
        dur = math.ceil(RAISE_TRAVEL_MM / v) + _ri(rng, 0, 6)
        pre = [
            ScenarioStep("idle", _ri(rng, 6, 14), 0.0),
            ScenarioStep("face_sensor", _ri(rng, 10, 14)),
            ScenarioStep("idle", _ri(rng, 15, 30), 0.0),
        ]
        onset = sum(s.duration_frames for s in pre)
        kind = "raise_right_hand" if rng.random() < 0.5 else "raise_left_hand"
        steps = tuple(pre + [ScenarioStep(kind, dur, round(v, 1)), ScenarioStep("idle", 20, 0.0)])
        cases.append((Scenario(seed=int(rng.integers(2**31)), steps=steps, jitter_sigma_mm=0.0), onset))
    return cases
