"""Engagement transducer runtime: stepping, retroactive relabeling, emission.

A Machine owns a compiled transition table, the current state, a short input
history for temporal guards, and a buffer of the last M labeled frames that
are still allowed to change.  Each step appends the new frame labeled with
the post-transition state, applies the fired rule's relabel policy (if any)
to the buffered frames, and finalizes whatever falls off the M-frame window.
Finalized frames never change, so output latency is bounded by M frames.

The one relabel policy, ``speed_onset``, scans backward from the transition
frame to the most recent buffered frame where both hands were stopped and
repaints everything after it with the transition's target state: the label
stream then shows the action starting where the hand actually started moving,
not where the guard finally fired.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

from .guard_dsl import Signal, TransitionTable, compile_guard, default_table
from .states import EngagementState

DEFAULT_BUFFER_DEPTH = 60  # two seconds at 30 fps


@dataclass
class LabeledFrame:
    frame_index: int
    state: EngagementState
    finalized: bool = False


@dataclass(frozen=True)
class RelabelEvent:
    start: int  # first rewritten frame index
    end: int    # the transition frame index


@dataclass(frozen=True)
class StepResult:
    state: EngagementState
    emitted: tuple[LabeledFrame, ...]
    relabel: Optional[RelabelEvent]
    fired_rule: Optional[int]
    state_before: EngagementState


class Machine:
    """Single-stream transducer instance; never share one across streams."""

    def __init__(
        self,
        table: Optional[TransitionTable] = None,
        buffer_depth: int = DEFAULT_BUFFER_DEPTH,
        stopped_fn: Optional[Callable[[int], bool]] = None,
    ):
        if buffer_depth < 1:
            raise ValueError("buffer_depth must be >= 1")
        self.table = table if table is not None else default_table()
        self.buffer_depth = buffer_depth
        self.state = self.table.initial
        self.history: list[int] = []
        self.buffer: list[LabeledFrame] = []
        self._stopped_flags: list[bool] = []  # parallel to buffer
        if stopped_fn is None:
            guard = compile_guard(Signal("both_stopped"))
            stopped_fn = lambda mask: guard([mask])  # noqa: E731
        self._stopped = stopped_fn

    def step(self, input_mask: int, frame_index: int) -> StepResult:
        """Advance one frame; returns the new state and newly finalized frames."""
        before = self.state
        self.history.append(input_mask)
        if len(self.history) > self.table.max_window:
            del self.history[0]
        target, relabel_policy, rule_idx = self.table.next_state(self.state, self.history)
        self.state = target

        self.buffer.append(LabeledFrame(frame_index, target))
        self._stopped_flags.append(bool(self._stopped(input_mask)))

        event = None
        if relabel_policy == "speed_onset":
            event = self._apply_speed_onset(target)

        emitted = []
        while len(self.buffer) > self.buffer_depth:
            frame = self.buffer.pop(0)
            self._stopped_flags.pop(0)
            frame.finalized = True
            emitted.append(frame)
        return StepResult(target, tuple(emitted), event, rule_idx, before)

    def _apply_speed_onset(self, target: EngagementState) -> RelabelEvent:
        # scan the frames before the transition frame; the most recent
        # both-stopped frame keeps its label, everything after it is repainted
        start_pos = 0
        for i in range(len(self.buffer) - 2, -1, -1):
            if self._stopped_flags[i]:
                start_pos = i + 1
                break
        for frame in self.buffer[start_pos:]:
            frame.state = target
        return RelabelEvent(self.buffer[start_pos].frame_index, self.buffer[-1].frame_index)

    def flush(self) -> tuple[LabeledFrame, ...]:
        """Finalize and emit everything still buffered, in index order."""
        for frame in self.buffer:
            frame.finalized = True
        out = tuple(self.buffer)
        self.buffer = []
        self._stopped_flags = []
        return out
