"""Real-time engagement detection from 3D skeleton streams."""

from .states import EngagementState

__all__ = ["EngagementState"]
__version__ = "0.1.0"
