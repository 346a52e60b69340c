"""Per-frame pose features and the 37-classifier posture bank.

``extract_features`` reduces a skeleton frame (plus its predecessor, for hand
speed) to body-frame geometry; ``evaluate_bank`` thresholds that geometry into
the fixed bank of 37 binary posture classifiers.  The bank layout is frozen by
``bank_registry`` because downstream weight vectors index into it by position.

Banded groups (hand horizontal/vertical/depth/speed, leaning) partition one
continuous quantity each, so at most one bit per group is set for a hand, and
speed bits are all zero on a frame with no predecessor (speed unknown).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import Iterable, Optional

import numpy as np

from .skeleton import Frame, JointId, Malformed

DEGENERATE_AREA_MM2 = 1e3
BANK_SIZE = 37


class DegenerateBody(ValueError):
    """Shoulders and torso are near-collinear; the body plane is undefined."""


@dataclass(frozen=True)
class ThresholdConfig:
    """Tunable geometry thresholds for the classifier bank."""

    speed_stopped: float = 10.0  # mm/frame; at or below is "stopped"
    speed_slow: float = 40.0
    speed_fast: float = 100.0  # above this is "too fast"
    facing_deg: float = 30.0
    lean_deg: float = 15.0
    depth_margin_mm: float = 150.0
    folded_hands_mm: float = 150.0
    folded_torso_mm: float = 250.0
    on_head_mm: float = 200.0
    on_torso_mm: float = 200.0


def read_threshold_config(lines: Iterable[str]) -> ThresholdConfig:
    """Parse `key value` lines; unspecified keys keep their defaults."""
    known = {f.name for f in fields(ThresholdConfig)}
    values: dict[str, float] = {}
    for n, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2 or parts[0] not in known:
            raise Malformed(f"threshold line {n}: expected '<key> <value>', got {line!r}")
        try:
            values[parts[0]] = float(parts[1])
        except ValueError as e:
            raise Malformed(f"threshold line {n}: {e}") from e
    return ThresholdConfig(**values)


def write_threshold_config(cfg: ThresholdConfig) -> str:
    return "".join(f"{f.name} {getattr(cfg, f.name):g}\n" for f in fields(ThresholdConfig))


@dataclass(frozen=True)
class FeatureFrame:
    """Body-frame geometry of one frame, ready for thresholding.

    Axes are orthonormal: ``right_axis`` points to the person's right,
    ``up_axis`` along the spine, ``forward_axis`` out of the chest (toward the
    sensor when facing it).  Hand body coordinates are (right, up, forward)
    components relative to the torso.
    """

    frame_index: int
    body_origin: np.ndarray
    right_axis: np.ndarray
    up_axis: np.ndarray
    forward_axis: np.ndarray
    r_hand_body: np.ndarray
    l_hand_body: np.ndarray
    r_speed: float
    l_speed: float
    has_predecessor: bool
    lean_angle_deg: float
    facing_angle_deg: float
    shoulder_half_width: float
    heights: tuple[float, float, float, float]  # camera y of hip, torso, shoulder, head
    r_hand_y: float
    l_hand_y: float
    hands_gap_mm: float
    r_head_mm: float
    l_head_mm: float
    r_torso_mm: float
    l_torso_mm: float


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


def extract_features(frame: Frame, prev: Optional[Frame] = None) -> FeatureFrame:
    """Compute body axes, hand body-frame positions, speeds, and angles."""
    j = frame.joints
    rs, ls, torso = j[JointId.RightShoulder], j[JointId.LeftShoulder], j[JointId.Torso]
    plane_normal = np.cross(rs - torso, ls - torso)  # toward the sensor on a facing body
    if 0.5 * float(np.linalg.norm(plane_normal)) < DEGENERATE_AREA_MM2:
        raise DegenerateBody(f"frame {frame.frame_index}: shoulder/torso triangle is degenerate")

    right = _unit(rs - ls)
    mid = 0.5 * (rs + ls)
    up_raw = (mid - torso) - float(np.dot(mid - torso, right)) * right
    if float(np.linalg.norm(up_raw)) < 1e-9:
        raise DegenerateBody(f"frame {frame.frame_index}: spine direction is degenerate")
    up = _unit(up_raw)
    forward = np.cross(right, up)

    facing_angle = math.degrees(
        math.acos(max(-1.0, min(1.0, float(np.dot(_unit(plane_normal), np.array([0.0, 0.0, -1.0]))))))
    )

    head = j[JointId.Head]
    spine = head - torso
    f_h = np.array([forward[0], 0.0, forward[2]])
    if float(np.linalg.norm(f_h)) < 1e-9:
        lean_angle = 0.0
    else:
        # negative when the head tips toward the forward direction
        lean_angle = -math.degrees(math.atan2(float(np.dot(spine, _unit(f_h))), float(spine[1])))

    rh, lh = j[JointId.RightHand], j[JointId.LeftHand]
    if prev is not None:
        r_speed = float(np.linalg.norm(rh - prev.joints[JointId.RightHand]))
        l_speed = float(np.linalg.norm(lh - prev.joints[JointId.LeftHand]))
    else:
        r_speed = l_speed = 0.0

    def body_coords(p: np.ndarray) -> np.ndarray:
        rel = p - torso
        return np.array([float(np.dot(rel, right)), float(np.dot(rel, up)), float(np.dot(rel, forward))])

    return FeatureFrame(
        frame_index=frame.frame_index,
        body_origin=torso.copy(),
        right_axis=right,
        up_axis=up,
        forward_axis=forward,
        r_hand_body=body_coords(rh),
        l_hand_body=body_coords(lh),
        r_speed=r_speed,
        l_speed=l_speed,
        has_predecessor=prev is not None,
        lean_angle_deg=lean_angle,
        facing_angle_deg=facing_angle,
        shoulder_half_width=0.5 * float(np.linalg.norm(rs - ls)),
        heights=(
            0.5 * float(j[JointId.LeftHip][1] + j[JointId.RightHip][1]),
            float(torso[1]),
            0.5 * float(ls[1] + rs[1]),
            float(head[1]),
        ),
        r_hand_y=float(rh[1]),
        l_hand_y=float(lh[1]),
        hands_gap_mm=float(np.linalg.norm(lh - rh)),
        r_head_mm=float(np.linalg.norm(rh - head)),
        l_head_mm=float(np.linalg.norm(lh - head)),
        r_torso_mm=float(np.linalg.norm(rh - torso)),
        l_torso_mm=float(np.linalg.norm(lh - torso)),
    )


# --------------------------------------------------------------------------
# Classifier bank
# --------------------------------------------------------------------------

def _hand_entries(p: str) -> list[tuple[str, str]]:
    return [
        (f"{p}_hand_right_of_body", "hand-horizontal"),
        (f"{p}_hand_close_to_body", "hand-horizontal"),
        (f"{p}_hand_left_of_body", "hand-horizontal"),
        (f"{p}_hand_below_hip", "hand-vertical"),
        (f"{p}_hand_below_torso", "hand-vertical"),
        (f"{p}_hand_below_shoulder", "hand-vertical"),
        (f"{p}_hand_below_head", "hand-vertical"),
        (f"{p}_hand_back_of_body", "hand-depth"),
        (f"{p}_hand_close_depth", "hand-depth"),
        (f"{p}_hand_front_of_body", "hand-depth"),
        (f"{p}_speed_stopped", "hand-speed"),
        (f"{p}_speed_slow", "hand-speed"),
        (f"{p}_speed_fast", "hand-speed"),
        (f"{p}_speed_too_fast", "hand-speed"),
    ]


_REGISTRY: tuple[tuple[str, str], ...] = tuple(
    _hand_entries("r")
    + _hand_entries("l")
    + [
        ("facing_sensor", "body-direction"),
        ("lean_back", "leaning"),
        ("no_lean", "leaning"),
        ("lean_forward", "leaning"),
        ("hands_folded", "special"),
        ("r_hand_on_head", "special"),
        ("l_hand_on_head", "special"),
        ("r_hand_on_torso", "special"),
        ("l_hand_on_torso", "special"),
    ]
)

assert len(_REGISTRY) == BANK_SIZE

NAME_TO_INDEX = {name: i for i, (name, _) in enumerate(_REGISTRY)}


def bank_registry() -> list[tuple[int, str, str]]:
    """The frozen (index, classifier name, group) layout of the bank."""
    return [(i, name, group) for i, (name, group) in enumerate(_REGISTRY)]


@dataclass(frozen=True)
class ClassifierVector:
    """The 37 posture bits of one frame, packed into an int mask (bit i = classifier i)."""

    mask: int

    @classmethod
    def from_bits(cls, bits: Iterable[bool]) -> "ClassifierVector":
        bits = list(bits)
        if len(bits) != BANK_SIZE:
            raise ValueError(f"expected {BANK_SIZE} bits, got {len(bits)}")
        return cls(sum(1 << i for i, b in enumerate(bits) if b))

    @classmethod
    def from_bitstring(cls, s: str) -> "ClassifierVector":
        if len(s) != BANK_SIZE or set(s) - {"0", "1"}:
            raise ValueError("bitstring must be 37 chars of 0/1")
        return cls.from_bits(c == "1" for c in s)

    def bit(self, i: int) -> int:
        return (self.mask >> i) & 1

    def __getitem__(self, i: int) -> int:
        return self.bit(i)

    @property
    def bits(self) -> tuple[int, ...]:
        return tuple(self.bit(i) for i in range(BANK_SIZE))

    @property
    def bitstring(self) -> str:
        return "".join(str(self.bit(i)) for i in range(BANK_SIZE))

    def named(self) -> dict[str, int]:
        return {name: self.bit(i) for i, name, _ in bank_registry()}

    def _group(self, group: str) -> tuple[int, ...]:
        return tuple(self.bit(i) for i, _, g in bank_registry() if g == group)

    @property
    def hand_horizontal(self) -> tuple[int, ...]:
        return self._group("hand-horizontal")

    @property
    def hand_vertical(self) -> tuple[int, ...]:
        return self._group("hand-vertical")

    @property
    def hand_depth(self) -> tuple[int, ...]:
        return self._group("hand-depth")

    @property
    def hand_speed(self) -> tuple[int, ...]:
        return self._group("hand-speed")

    @property
    def body_direction(self) -> tuple[int, ...]:
        return self._group("body-direction")

    @property
    def leaning(self) -> tuple[int, ...]:
        return self._group("leaning")

    @property
    def special_postures(self) -> tuple[int, ...]:
        return self._group("special")


def _speed_band(speed: float, cfg: ThresholdConfig) -> tuple[bool, bool, bool, bool]:
    if speed <= cfg.speed_stopped:
        return True, False, False, False
    if speed <= cfg.speed_slow:
        return False, True, False, False
    if speed <= cfg.speed_fast:
        return False, False, True, False
    return False, False, False, True


def evaluate_bank(f: FeatureFrame, cfg: ThresholdConfig) -> ClassifierVector:
    """Threshold a FeatureFrame into the 37-bit classifier vector."""
    y_hip, y_torso, y_shoulder, y_head = f.heights
    folded = (
        f.hands_gap_mm < cfg.folded_hands_mm
        and f.r_torso_mm < cfg.folded_torso_mm
        and f.l_torso_mm < cfg.folded_torso_mm
    )

    def hand_bits(body: np.ndarray, speed: float, hand_y: float) -> list[bool]:
        s = f.shoulder_half_width
        x, z = float(body[0]), float(body[2])
        horizontal = [x > s, -s <= x <= s, x < -s]  # toward person's right / close / left
        # first matching boundary wins, so the group stays exclusive even on
        # contorted skeletons whose reference heights are out of order
        vertical = [False] * 4
        for i, bound in enumerate((y_hip, y_torso, y_shoulder, y_head)):
            if hand_y < bound:
                vertical[i] = True
                break
        d = cfg.depth_margin_mm
        depth = [z < -d, -d <= z <= d, z > d]
        speed_bits = list(_speed_band(speed, cfg)) if f.has_predecessor else [False] * 4
        return horizontal + vertical + depth + speed_bits

    bits = hand_bits(f.r_hand_body, f.r_speed, f.r_hand_y)
    bits += hand_bits(f.l_hand_body, f.l_speed, f.l_hand_y)
    bits.append(f.facing_angle_deg <= cfg.facing_deg)
    bits += [f.lean_angle_deg > cfg.lean_deg, abs(f.lean_angle_deg) <= cfg.lean_deg, f.lean_angle_deg < -cfg.lean_deg]
    bits += [
        folded,
        f.r_head_mm < cfg.on_head_mm,
        f.l_head_mm < cfg.on_head_mm,
        not folded and f.r_torso_mm < cfg.on_torso_mm,
        not folded and f.l_torso_mm < cfg.on_torso_mm,
    ]
    return ClassifierVector.from_bits(bits)
