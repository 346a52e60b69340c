"""Skeleton data model, frame-stream file IO, and the synthetic scenario generator.

A frame stream is newline-delimited JSON, one record per frame:
``{"i": <frame_index>, "t": <timestamp_ms>, "u": <user_id>, "j": [[x,y,z] * 10]}``
with joints in :class:`JointId` order and coordinates in millimeters of camera
space (x right, y up, z depth away from the sensor).

The generator turns a :class:`Scenario` script into a deterministic stream of
frames plus a ground-truth engagement label per frame.  Motion primitives move
a hand at constant commanded speed; pose primitives (facing, folding, ...)
smoothstep from whatever pose is live, so trajectories are always continuous.
Sensor noise is modeled as an AR(1) per-joint jitter process whose stationary
standard deviation is ``jitter_sigma_mm``; consecutive-frame jitter is highly
correlated, like the slowly drifting bias of a real skeleton tracker.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from .states import STATE_BY_CODE, EngagementState


class Malformed(ValueError):
    """Record does not parse as a stream/label/scenario line."""


class MissingJoint(ValueError):
    """Frame record carries fewer than the 10 required joints."""


class NonFinite(ValueError):
    """Frame record carries a NaN or infinite coordinate."""


class UnknownPrimitive(ValueError):
    """Scenario step kind is not one of the supported primitives."""


class JointId(enum.IntEnum):
    Head = 0
    LeftShoulder = 1
    RightShoulder = 2
    LeftElbow = 3
    RightElbow = 4
    LeftHand = 5
    RightHand = 6
    Torso = 7
    LeftHip = 8
    RightHip = 9


JOINT_COUNT = len(JointId)


@dataclass
class Frame:
    """One timestamped skeleton sample for one user.

    ``joints`` is a float64 array of shape (10, 3) indexed by :class:`JointId`.
    """

    frame_index: int
    timestamp_ms: int
    user_id: int
    joints: np.ndarray

    def joint(self, jid: JointId) -> np.ndarray:
        return self.joints[int(jid)]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Frame):
            return NotImplemented
        return (
            self.frame_index == other.frame_index
            and self.timestamp_ms == other.timestamp_ms
            and self.user_id == other.user_id
            and np.array_equal(self.joints, other.joints)
        )


def parse_frame_record(line: str) -> Frame:
    """Parse one NDJSON stream record into a validated Frame."""
    try:
        rec = json.loads(line)
    except json.JSONDecodeError as e:
        raise Malformed(f"bad record syntax: {e}") from e
    if not isinstance(rec, dict):
        raise Malformed("record is not an object")
    try:
        idx = rec["i"]
        ts = rec["t"]
        uid = rec["u"]
        joints = rec["j"]
    except KeyError as e:
        raise Malformed(f"record missing key {e}") from e
    if not (isinstance(idx, int) and isinstance(ts, int) and isinstance(uid, int)):
        raise Malformed("i, t, u must be integers")
    if idx < 0 or ts < 0:
        raise Malformed("frame_index and timestamp_ms must be non-negative")
    if not isinstance(joints, list) or len(joints) != JOINT_COUNT:
        raise MissingJoint(f"expected {JOINT_COUNT} joints, got {len(joints) if isinstance(joints, list) else 'non-list'}")
    for triple in joints:
        if not isinstance(triple, list) or len(triple) != 3:
            raise MissingJoint("each joint must be an [x, y, z] triple")
    arr = np.asarray(joints, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise NonFinite("joint coordinates must be finite")
    return Frame(frame_index=idx, timestamp_ms=ts, user_id=uid, joints=arr)


def write_frame_record(frame: Frame) -> str:
    """Serialize a Frame to its canonical record; round-trips bit-exactly."""
    j = [[float(v) for v in row] for row in frame.joints]
    rec = {"i": frame.frame_index, "t": frame.timestamp_ms, "u": frame.user_id, "j": j}
    return json.dumps(rec, separators=(",", ":"))


def read_stream(lines: Iterable[str]) -> list[Frame]:
    """Parse a whole stream, enforcing index/timestamp ordering."""
    frames: list[Frame] = []
    last_idx, last_ts = -1, -1
    for n, line in enumerate(lines, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            f = parse_frame_record(line)
        except ValueError as e:
            raise type(e)(f"line {n}: {e}") from e
        if f.frame_index <= last_idx:
            raise Malformed(f"line {n}: frame_index {f.frame_index} not strictly increasing")
        if f.timestamp_ms < last_ts:
            raise Malformed(f"line {n}: timestamp_ms {f.timestamp_ms} decreased")
        last_idx, last_ts = f.frame_index, f.timestamp_ms
        frames.append(f)
    return frames


def write_stream(frames: Iterable[Frame]) -> str:
    return "".join(write_frame_record(f) + "\n" for f in frames)


def read_labels(lines: Iterable[str]) -> list[tuple[int, EngagementState]]:
    out: list[tuple[int, EngagementState]] = []
    for n, line in enumerate(lines, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            rec = json.loads(line)
            idx = rec["i"]
            state = STATE_BY_CODE[rec["state"]]
        except (json.JSONDecodeError, KeyError, TypeError) as e:
            raise Malformed(f"label line {n}: {e}") from e
        out.append((idx, state))
    return out


def write_labels(labels: Iterable[tuple[int, EngagementState]]) -> str:
    return "".join(
        json.dumps({"i": i, "state": s.code}, separators=(",", ":")) + "\n"
        for i, s in labels
    )


# --------------------------------------------------------------------------
# Scenario scripts
# --------------------------------------------------------------------------

MOTION_KINDS = frozenset({"raise_right_hand", "raise_left_hand", "lower_hand", "swipe_lr", "swipe_rl"})
POSE_KINDS = frozenset({"face_sensor", "turn_away", "fold_hands", "hands_on_head", "unfold"})
PRIMITIVE_KINDS = frozenset({"idle"}) | MOTION_KINDS | POSE_KINDS


@dataclass(frozen=True)
class ScenarioStep:
    kind: str
    duration_frames: int
    peak_speed: float = 0.0  # mm/frame; gesture speed, or jiggle amplitude for idle

    def __post_init__(self):
        if self.kind not in PRIMITIVE_KINDS:
            raise UnknownPrimitive(f"unknown primitive {self.kind!r}")
        if self.duration_frames < 0:
            raise ValueError("duration_frames must be >= 0")


@dataclass(frozen=True)
class Scenario:
    seed: int
    steps: tuple[ScenarioStep, ...]
    fps: int = 30
    jitter_sigma_mm: float = 5.0
    # idle micro-motion cadence: frames between burst starts, inclusive range
    burst_gap: tuple[int, int] = (8, 18)

    def __post_init__(self):
        lo, hi = self.burst_gap
        if lo < 2 or hi < lo:
            raise ValueError("burst_gap must satisfy 2 <= lo <= hi")


def read_scenario_script(lines: Iterable[str]) -> Scenario:
    """Parse the line-oriented scenario format.

    Header lines ``seed N`` / ``fps N`` / ``jitter MM`` / ``burst LO HI`` may
    appear anywhere before the first primitive; each other line is
    ``<kind> <frames> [speed]``.
    """
    seed, fps, jitter, burst = 0, 30, 5.0, (8, 18)
    steps: list[ScenarioStep] = []
    for n, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            if parts[0] == "seed" and len(parts) == 2:
                seed = int(parts[1])
            elif parts[0] == "fps" and len(parts) == 2:
                fps = int(parts[1])
            elif parts[0] == "jitter" and len(parts) == 2:
                jitter = float(parts[1])
            elif parts[0] == "burst" and len(parts) == 3:
                burst = (int(parts[1]), int(parts[2]))
            elif len(parts) in (2, 3):
                speed = float(parts[2]) if len(parts) == 3 else 0.0
                steps.append(ScenarioStep(parts[0], int(parts[1]), speed))
            else:
                raise Malformed(f"scenario line {n}: expected '<kind> <frames> [speed]'")
        except (ValueError, UnknownPrimitive) as e:
            if isinstance(e, (Malformed, UnknownPrimitive)):
                raise
            raise Malformed(f"scenario line {n}: {e}") from e
    return Scenario(seed=seed, steps=tuple(steps), fps=fps, jitter_sigma_mm=jitter, burst_gap=burst)


def write_scenario_script(s: Scenario) -> str:
    out = [
        f"seed {s.seed}",
        f"fps {s.fps}",
        f"jitter {s.jitter_sigma_mm:g}",
        f"burst {s.burst_gap[0]} {s.burst_gap[1]}",
    ]
    for st in s.steps:
        if st.peak_speed:
            out.append(f"{st.kind} {st.duration_frames} {st.peak_speed:g}")
        else:
            out.append(f"{st.kind} {st.duration_frames}")
    return "\n".join(out) + "\n"


# --------------------------------------------------------------------------
# Puppet body: scripted pose trajectories with ground-truth labels
# --------------------------------------------------------------------------

# Base standing pose, facing the sensor, in camera-space millimeters.
# The person's right side is at negative camera x when facing.
BASE_POSE = np.array(
    [
        [0.0, 1650.0, 2000.0],     # Head
        [200.0, 1450.0, 2000.0],   # LeftShoulder
        [-200.0, 1450.0, 2000.0],  # RightShoulder
        [260.0, 1190.0, 2010.0],   # LeftElbow
        [-260.0, 1190.0, 2010.0],  # RightElbow
        [180.0, 980.0, 2015.0],    # LeftHand
        [-180.0, 980.0, 2015.0],   # RightHand
        [0.0, 1250.0, 2000.0],     # Torso
        [150.0, 950.0, 2000.0],    # LeftHip
        [-150.0, 950.0, 2000.0],   # RightHip
    ]
)

RAISED_HAND = {"right": np.array([-260.0, 1560.0, 1780.0]), "left": np.array([260.0, 1560.0, 1780.0])}
RAISED_ELBOW = {"right": np.array([-240.0, 1320.0, 1900.0]), "left": np.array([240.0, 1320.0, 1900.0])}
FOLDED_HAND = {"right": np.array([-35.0, 1140.0, 1890.0]), "left": np.array([35.0, 1140.0, 1890.0])}
FOLDED_ELBOW = {"right": np.array([-190.0, 1180.0, 1950.0]), "left": np.array([190.0, 1180.0, 1950.0])}
ON_HEAD_HAND = {"right": np.array([-70.0, 1620.0, 1960.0]), "left": np.array([70.0, 1620.0, 1960.0])}
ON_HEAD_ELBOW = {"right": np.array([-240.0, 1430.0, 1970.0]), "left": np.array([240.0, 1430.0, 1970.0])}

HAND_JOINT = {"right": JointId.RightHand, "left": JointId.LeftHand}
ELBOW_JOINT = {"right": JointId.RightElbow, "left": JointId.LeftElbow}

TURNED_YAW_DEG = 140.0
SWIPE_EXTENT_MM = 400.0
# Frame-to-frame jitter correlation.  At stationary std sigma the apparent
# per-frame speed noise is sigma*sqrt(2*(1-rho)) per axis, so 0.995 keeps a
# resting hand well under the 10 mm/frame stopped threshold even at sigma 15.
JITTER_RHO = 0.995

# Ground-truth geometry constants; mirror the default posture thresholds.
TRUTH_FACING_DEG = 30.0
TRUTH_FOLDED_HANDS_MM = 150.0
TRUTH_FOLDED_TORSO_MM = 250.0
TRUTH_ON_HEAD_MM = 200.0
TRUTH_ON_TORSO_MM = 200.0

_SMOOTH = lambda t: t * t * (3.0 - 2.0 * t)  # noqa: E731


@dataclass
class Commanded:
    """Noiseless pose for one frame plus the facts the truth label needs."""

    pose: np.ndarray
    facing: bool
    special: bool
    raised: bool
    motion: bool

    @property
    def label(self) -> EngagementState:
        if self.special or not self.facing:
            return EngagementState.Disengagement
        if self.motion:
            return EngagementState.Action
        if self.raised:
            return EngagementState.Intention
        return EngagementState.Attention


def _rot_y(deg: float) -> np.ndarray:
    a = math.radians(deg)
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


class PuppetBody:
    """Scripted body advancing one frame per tick through queued primitives.

    Hand primitives mutate a body-local pose; facing is a separate yaw about
    the vertical axis through the torso, applied when a frame is emitted.
    """

    def __init__(
        self,
        rng: np.random.Generator,
        start_yaw_deg: float = TURNED_YAW_DEG,
        burst_gap: tuple[int, int] = (8, 18),
    ):
        self.rng = rng
        self.pose = BASE_POSE.copy()  # body-local (yaw 0)
        self.yaw = start_yaw_deg
        self.burst_gap = burst_gap
        self.queue: list[ScenarioStep] = []
        self._active: Optional[dict] = None

    def push(self, step: ScenarioStep) -> None:
        self.queue.append(step)

    def push_joint_target(self, joint: JointId, target, frames: int) -> None:
        """Queue a direct smooth move of one joint to a body-local target.

        Interactive-session control; not expressible as a scripted primitive.
        """
        if frames < 1:
            raise ValueError("frames must be >= 1")
        t = np.asarray(target, dtype=np.float64)
        if t.shape != (3,) or not np.all(np.isfinite(t)):
            raise NonFinite("target must be 3 finite coordinates")
        self.queue.append({"kind": "joint_move", "t": 0, "d": int(frames), "joint": int(joint), "p1": t})

    def pending(self) -> bool:
        return self._active is not None or bool(self.queue)

    # -- primitive setup -------------------------------------------------

    def _start(self, step: ScenarioStep) -> dict:
        kind, d = step.kind, step.duration_frames
        st = {"kind": kind, "t": 0, "d": d, "speed": step.peak_speed}
        if kind == "face_sensor":
            st["yaw0"], st["yaw1"] = self.yaw, 0.0
        elif kind == "turn_away":
            st["yaw0"], st["yaw1"] = self.yaw, TURNED_YAW_DEG
        elif kind in ("raise_right_hand", "raise_left_hand"):
            hand = "right" if kind == "raise_right_hand" else "left"
            st["moves"] = [self._const_speed_move(hand, RAISED_HAND[hand], RAISED_ELBOW[hand], step.peak_speed)]
        elif kind == "lower_hand":
            st["moves"] = [
                self._const_speed_move(h, BASE_POSE[HAND_JOINT[h]], BASE_POSE[ELBOW_JOINT[h]], step.peak_speed)
                for h in ("right", "left")
                if np.linalg.norm(self.pose[HAND_JOINT[h]] - BASE_POSE[HAND_JOINT[h]]) > 1.0
            ]
        elif kind in ("swipe_lr", "swipe_rl"):
            hand = self._gesture_hand()
            direction = np.array([1.0, 0.0, 0.0]) if kind == "swipe_lr" else np.array([-1.0, 0.0, 0.0])
            extent = min(SWIPE_EXTENT_MM, step.peak_speed * d) if step.peak_speed > 0 else 0.0
            target = self.pose[HAND_JOINT[hand]] + direction * extent
            st["moves"] = [self._const_speed_move(hand, target, None, step.peak_speed)]
        elif kind in ("fold_hands", "hands_on_head", "unfold"):
            tgt_h = {"fold_hands": FOLDED_HAND, "hands_on_head": ON_HEAD_HAND}.get(kind)
            tgt_e = {"fold_hands": FOLDED_ELBOW, "hands_on_head": ON_HEAD_ELBOW}.get(kind)
            st["pose0"] = self.pose.copy()
            pose1 = self.pose.copy()
            for h in ("right", "left"):
                pose1[HAND_JOINT[h]] = tgt_h[h] if tgt_h is not None else BASE_POSE[HAND_JOINT[h]]
                pose1[ELBOW_JOINT[h]] = tgt_e[h] if tgt_e is not None else BASE_POSE[ELBOW_JOINT[h]]
            st["pose1"] = pose1
        elif kind == "idle":
            st["offsets"] = self._jiggle_offsets(d, step.peak_speed)
        return st

    def _gesture_hand(self) -> str:
        dr = np.linalg.norm(self.pose[JointId.RightHand] - BASE_POSE[JointId.RightHand])
        dl = np.linalg.norm(self.pose[JointId.LeftHand] - BASE_POSE[JointId.LeftHand])
        return "left" if dl > dr else "right"

    def _const_speed_move(self, hand: str, target: np.ndarray, elbow_target, speed: float) -> dict:
        start = self.pose[HAND_JOINT[hand]].copy()
        dist = float(np.linalg.norm(target - start))
        return {
            "hand": hand,
            "start": start,
            "dir": (target - start) / dist if dist > 0 else np.zeros(3),
            "dist": dist,
            "speed": max(speed, 0.0),
            "estart": self.pose[ELBOW_JOINT[hand]].copy(),
            "etarget": None if elbow_target is None else np.asarray(elbow_target, dtype=float),
        }

    def _jiggle_offsets(self, d: int, amp: float) -> list:
        """Sparse 2-frame out-and-back hand adjustments, one hand at a time."""
        offsets: list = [None] * d
        if amp <= 0.0 or d <= 0:
            return offsets
        lo, hi = self.burst_gap
        t = int(self.rng.integers(4, 12))
        while t + 1 < d:
            hand = "right" if self.rng.integers(2) == 0 else "left"
            v = self.rng.standard_normal(3)
            n = np.linalg.norm(v)
            if n > 1e-9:
                offsets[t] = (hand, v / n * amp)
            t += int(self.rng.integers(lo, hi + 1))
        return offsets

    # -- per-frame advance ------------------------------------------------

    def tick(self) -> Commanded:
        while self._active is None and self.queue:
            step = self.queue.pop(0)
            if isinstance(step, dict):  # queued joint move
                self._active = {**step, "p0": self.pose[step["joint"]].copy()}
            elif step.duration_frames > 0:
                self._active = self._start(step)
        st = self._active
        motion = False
        jiggle_offset = None
        if st is not None:
            kind, t, d = st["kind"], st["t"], st["d"]
            if kind in ("face_sensor", "turn_away"):
                p = _SMOOTH((t + 1) / d)
                self.yaw = st["yaw0"] + (st["yaw1"] - st["yaw0"]) * p
            elif kind in ("fold_hands", "hands_on_head", "unfold"):
                p = _SMOOTH((t + 1) / d)
                self.pose = st["pose0"] + (st["pose1"] - st["pose0"]) * p
            elif kind == "joint_move":
                p = _SMOOTH((t + 1) / d)
                before = self.pose[st["joint"]].copy()
                self.pose[st["joint"]] = st["p0"] + (st["p1"] - st["p0"]) * p
                if np.linalg.norm(self.pose[st["joint"]] - before) > 1e-9:
                    motion = True
            elif kind == "idle":
                off = st["offsets"][t]
                if off is not None:
                    jiggle_offset = off
            else:  # constant-speed hand moves
                for mv in st["moves"]:
                    travelled = min(mv["speed"] * (t + 1), mv["dist"])
                    prev = min(mv["speed"] * t, mv["dist"])
                    if travelled > prev:
                        motion = True
                    self.pose[HAND_JOINT[mv["hand"]]] = mv["start"] + mv["dir"] * travelled
                    if mv["etarget"] is not None and mv["dist"] > 0:
                        frac = travelled / mv["dist"]
                        self.pose[ELBOW_JOINT[mv["hand"]]] = mv["estart"] + (mv["etarget"] - mv["estart"]) * frac
            st["t"] += 1
            if st["t"] >= st["d"]:
                self._active = None

        cam = self._camera_pose(jiggle_offset)
        return Commanded(
            pose=cam,
            facing=abs(self.yaw) <= TRUTH_FACING_DEG,
            special=_special_posture(cam),
            raised=bool(
                self.pose[JointId.RightHand][1] >= self.pose[JointId.Torso][1]
                or self.pose[JointId.LeftHand][1] >= self.pose[JointId.Torso][1]
            ),
            motion=motion,
        )

    def _camera_pose(self, jiggle_offset) -> np.ndarray:
        local = self.pose
        if jiggle_offset is not None:
            hand, off = jiggle_offset
            local = local.copy()
            local[HAND_JOINT[hand]] = local[HAND_JOINT[hand]] + off
        center = np.array([BASE_POSE[JointId.Torso][0], 0.0, BASE_POSE[JointId.Torso][2]])
        return (local - center) @ _rot_y(self.yaw).T + center

    def reset(self) -> None:
        self.pose = BASE_POSE.copy()
        self.yaw = TURNED_YAW_DEG
        self.queue.clear()
        self._active = None


def _special_posture(pose: np.ndarray) -> bool:
    rh, lh = pose[JointId.RightHand], pose[JointId.LeftHand]
    torso, head = pose[JointId.Torso], pose[JointId.Head]
    if (
        np.linalg.norm(lh - rh) < TRUTH_FOLDED_HANDS_MM
        and np.linalg.norm(rh - torso) < TRUTH_FOLDED_TORSO_MM
        and np.linalg.norm(lh - torso) < TRUTH_FOLDED_TORSO_MM
    ):
        return True
    for h in (rh, lh):
        if np.linalg.norm(h - head) < TRUTH_ON_HEAD_MM:
            return True
        if np.linalg.norm(h - torso) < TRUTH_ON_TORSO_MM:
            return True
    return False


class JitterProcess:
    """Per-joint AR(1) positional noise with stationary std sigma."""

    def __init__(self, sigma: float, rng: np.random.Generator, rho: float = JITTER_RHO):
        self.sigma = sigma
        self.rho = rho
        self.rng = rng
        self.state = sigma * rng.standard_normal((JOINT_COUNT, 3)) if sigma > 0 else np.zeros((JOINT_COUNT, 3))

    def step(self) -> np.ndarray:
        if self.sigma > 0:
            self.state = self.rho * self.state + math.sqrt(1.0 - self.rho**2) * self.sigma * self.rng.standard_normal(
                (JOINT_COUNT, 3)
            )
        return self.state


def generate_scenario(s: Scenario) -> tuple[list[Frame], list[EngagementState]]:
    """Expand a Scenario into frames + per-frame ground-truth labels.

    Identical (seed, steps, fps, jitter) input produces a bit-identical stream.
    """
    # Separate streams so the commanded trajectory is invariant under the
    # jitter setting: seed S at sigma 0 is the noiseless twin of seed S.
    puppet_rng, jitter_rng = np.random.default_rng(s.seed).spawn(2)
    puppet = PuppetBody(puppet_rng, burst_gap=s.burst_gap)
    jitter = JitterProcess(s.jitter_sigma_mm, jitter_rng)
    for step in s.steps:
        puppet.push(step)

    frames: list[Frame] = []
    labels: list[EngagementState] = []
    i = 0
    while puppet.pending():
        cmd = puppet.tick()
        joints = cmd.pose + jitter.step()
        frames.append(
            Frame(frame_index=i, timestamp_ms=round(i * 1000 / s.fps), user_id=0, joints=joints)
        )
        labels.append(cmd.label)
        i += 1
    return frames, labels
