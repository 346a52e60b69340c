"""Per-frame pipeline: skeleton frame -> posture bank -> intent -> transducer.

One Engine serves a whole stream, keeping an independent Machine and
predecessor frame per user_id, so interleaved multi-user streams work.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

from .features import ClassifierVector, ThresholdConfig, evaluate_bank, extract_features
from .fst import DEFAULT_BUFFER_DEPTH, LabeledFrame, Machine, RelabelEvent
from .guard_dsl import TransitionTable, default_table, make_input
from .intent import IntentModel, classify_intent, score
from .skeleton import Frame
from .states import EngagementState


@dataclass(frozen=True)
class FrameOutput:
    frame_index: int
    user_id: int
    state: EngagementState
    state_before: EngagementState
    score: float
    intent: int
    g: ClassifierVector
    r_speed: float
    l_speed: float
    relabel: Optional[RelabelEvent]
    emitted: tuple[LabeledFrame, ...]
    fired_rule: Optional[int]


class Engine:
    def __init__(
        self,
        model: IntentModel,
        table: Optional[TransitionTable] = None,
        cfg: ThresholdConfig = ThresholdConfig(),
        buffer_depth: int = DEFAULT_BUFFER_DEPTH,
    ):
        self.model = model
        self.table = table if table is not None else default_table()
        self.cfg = cfg
        self.buffer_depth = buffer_depth
        self._prev: dict[int, Frame] = {}
        self._machines: dict[int, Machine] = {}

    def machine_for(self, user_id: int) -> Machine:
        if user_id not in self._machines:
            self._machines[user_id] = Machine(self.table, self.buffer_depth)
        return self._machines[user_id]

    def process(self, frame: Frame) -> FrameOutput:
        machine = self.machine_for(frame.user_id)
        feats = extract_features(frame, self._prev.get(frame.user_id))
        g = evaluate_bank(feats, self.cfg)
        s = score(g, self.model)
        intent_bit = classify_intent(s, self.model)
        result = machine.step(make_input(g.mask, intent_bit), frame.frame_index)
        self._prev[frame.user_id] = frame
        return FrameOutput(
            frame_index=frame.frame_index,
            user_id=frame.user_id,
            state=result.state,
            state_before=result.state_before,
            score=s.value,
            intent=intent_bit,
            g=g,
            r_speed=feats.r_speed,
            l_speed=feats.l_speed,
            relabel=result.relabel,
            emitted=result.emitted,
            fired_rule=result.fired_rule,
        )

    def flush(self) -> list[LabeledFrame]:
        out: list[LabeledFrame] = []
        for machine in self._machines.values():
            out.extend(machine.flush())
        out.sort(key=lambda f: f.frame_index)
        return out


def trace_line(out: FrameOutput) -> str:
    rule = "-" if out.fired_rule is None else str(out.fired_rule)
    span = "-" if out.relabel is None else f"{out.relabel.start}:{out.relabel.end}"
    return f"{out.frame_index} {out.state_before.code} {rule} {out.state.code} {span}"


def run_pipeline(
    frames: Sequence[Frame],
    model: IntentModel,
    table: Optional[TransitionTable] = None,
    cfg: ThresholdConfig = ThresholdConfig(),
    buffer_depth: int = DEFAULT_BUFFER_DEPTH,
) -> tuple[list[tuple[int, EngagementState]], list[FrameOutput]]:
    """Run the full pipeline; returns finalized (index, label) pairs + per-frame outputs."""
    engine = Engine(model, table=table, cfg=cfg, buffer_depth=buffer_depth)
    outputs = [engine.process(f) for f in frames]
    labeled: list[LabeledFrame] = []
    for out in outputs:
        labeled.extend(out.emitted)
    labeled.extend(engine.flush())
    labeled.sort(key=lambda f: f.frame_index)
    return [(f.frame_index, f.state) for f in labeled], outputs
