"""Label-stream evaluation: accuracies, confusion, action boundary error.

Per-state accuracy is recall against ground truth: of the frames whose true
state is S, the fraction predicted S.  Boundary error measures gesture
segmentation: true and predicted Action segments are matched greedily by
nearest start, matched pairs contribute their absolute start and end offsets,
and unmatched segments contribute their whole length as a penalty.

``memoryless_labels`` is the ablation baseline: the same per-frame inputs
mapped straight to a state with no transducer, no windows, and no relabeling.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .guard_dsl import Signal, compile_guard
from .intent import LengthMismatch
from .states import STATE_ORDER, EngagementState


class EmptyInput(ValueError):
    """Nothing to evaluate."""


@dataclass(frozen=True)
class EvalReport:
    per_state_accuracy: dict[EngagementState, float]
    total_accuracy: float
    confusion: np.ndarray  # [true state, predicted state] in STATE_ORDER
    action_boundary_mae_frames: float
    frame_count: int


def _segments(labels: Sequence[EngagementState], state: EngagementState) -> list[tuple[int, int]]:
    """Maximal runs of `state` as (start, end) inclusive positions."""
    out = []
    start = None
    for i, s in enumerate(labels):
        if s is state and start is None:
            start = i
        elif s is not state and start is not None:
            out.append((start, i - 1))
            start = None
    if start is not None:
        out.append((start, len(labels) - 1))
    return out


def _boundary_mae(pred: Sequence[EngagementState], truth: Sequence[EngagementState]) -> float:
    true_segs = _segments(truth, EngagementState.Action)
    pred_segs = _segments(pred, EngagementState.Action)
    errors: list[float] = []
    unmatched = list(pred_segs)
    for ts, te in true_segs:
        if not unmatched:
            errors.append(float(te - ts + 1))
            continue
        best = min(unmatched, key=lambda seg: (abs(seg[0] - ts), seg[0]))
        unmatched.remove(best)
        errors.append(abs(best[0] - ts))
        errors.append(abs(best[1] - te))
    errors.extend(float(e - s + 1) for s, e in unmatched)
    return float(np.mean(errors)) if errors else 0.0


def evaluate(pred: Sequence[EngagementState], truth: Sequence[EngagementState]) -> EvalReport:
    """Compare aligned label sequences."""
    if len(pred) != len(truth):
        raise LengthMismatch(f"{len(pred)} predicted vs {len(truth)} true labels")
    if not truth:
        raise EmptyInput("no frames to evaluate")
    index = {s: i for i, s in enumerate(STATE_ORDER)}
    confusion = np.zeros((4, 4), dtype=np.int64)
    for p, t in zip(pred, truth):
        confusion[index[t], index[p]] += 1
    per_state = {}
    for s in STATE_ORDER:
        row = confusion[index[s]]
        total = int(row.sum())
        # vacuous 1.0 when the state never occurs in truth
        per_state[s] = float(row[index[s]] / total) if total else 1.0
    return EvalReport(
        per_state_accuracy=per_state,
        total_accuracy=float(np.trace(confusion) / len(truth)),
        confusion=confusion,
        action_boundary_mae_frames=_boundary_mae(pred, truth),
        frame_count=len(truth),
    )


def render_report(r: EvalReport) -> str:
    lines = [f"{'State':<16}{'Accuracy':>10}"]
    for s in STATE_ORDER:
        lines.append(f"{s.name:<16}{100 * r.per_state_accuracy[s]:>9.1f}%")
    lines.append(f"{'Total':<16}{100 * r.total_accuracy:>9.1f}%")
    lines.append("")
    lines.append(f"action boundary MAE: {r.action_boundary_mae_frames:.2f} frames")
    lines.append(f"frames: {r.frame_count}")
    return "\n".join(lines) + "\n"


def render_report_kv(r: EvalReport) -> str:
    """Machine-readable newline-delimited key/value form."""
    lines = [f"total_accuracy {r.total_accuracy!r}"]
    for s in STATE_ORDER:
        lines.append(f"accuracy_{s.code} {r.per_state_accuracy[s]!r}")
    for i, t in enumerate(STATE_ORDER):
        for j, p in enumerate(STATE_ORDER):
            lines.append(f"confusion_{t.code}_{p.code} {int(r.confusion[i, j])}")
    lines.append(f"action_boundary_mae_frames {r.action_boundary_mae_frames!r}")
    lines.append(f"frame_count {r.frame_count}")
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# Memoryless ablation baseline
# --------------------------------------------------------------------------

_DISENGAGED = compile_guard(Signal("special_any"))
_FACING = compile_guard(Signal("facing"))
_INTENT = compile_guard(Signal("intent"))
_MOVING = compile_guard(Signal("any_moving"))


def memoryless_label(mask: int) -> EngagementState:
    h = [mask]
    if _DISENGAGED(h) or not _FACING(h):
        return EngagementState.Disengagement
    if _INTENT(h):
        return EngagementState.Action if _MOVING(h) else EngagementState.Intention
    return EngagementState.Attention


def memoryless_labels(masks: Sequence[int]) -> list[EngagementState]:
    return [memoryless_label(m) for m in masks]
