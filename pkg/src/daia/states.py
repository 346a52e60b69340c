"""The four engagement states and their single-letter file codes."""

from __future__ import annotations

import enum


class EngagementState(enum.Enum):
    Disengagement = "D"
    Attention = "A"
    Intention = "I"
    Action = "X"

    @property
    def code(self) -> str:
        return self.value


STATE_BY_CODE = {s.value: s for s in EngagementState}

STATE_ORDER = (
    EngagementState.Disengagement,
    EngagementState.Attention,
    EngagementState.Intention,
    EngagementState.Action,
)
