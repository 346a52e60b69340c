"""Linear intention-to-act classifier over the 37-bit posture vector.

The score is ``logistic(W . G + bias)``, a monotone squash of the linear
margin into [0, 1]; the decision thresholds the score (default 0.5, which is
exactly margin >= 0).  Training is subgradient descent on L2-regularized
hinge loss, deterministic for a fixed seed: boolean 37-dimensional features
neither need nor reward anything heavier.

Training data comes from game-style phase recordings: frames from the "play"
phase (user actively gesturing at the display) are positive, frames from
"ready" or "stop" phases are negative.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .features import BANK_SIZE, ClassifierVector, ThresholdConfig, evaluate_bank, extract_features
from .skeleton import Frame, Malformed


class DegenerateData(ValueError):
    """Training data is empty or contains a single class."""


class LengthMismatch(ValueError):
    """Aligned sequences have different lengths."""


PHASES = ("play", "ready", "stop")


@dataclass(frozen=True)
class IntentModel:
    weights: np.ndarray  # shape (37,)
    bias: float
    threshold: float = 0.5

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.shape != (BANK_SIZE,):
            raise ValueError(f"weights must have shape ({BANK_SIZE},)")
        if not (np.all(np.isfinite(w)) and math.isfinite(self.bias) and math.isfinite(self.threshold)):
            raise ValueError("model parameters must be finite")
        if not 0.0 < self.threshold < 1.0:
            raise ValueError("threshold must be in (0, 1)")
        object.__setattr__(self, "weights", w)

    def margin(self, g: ClassifierVector) -> float:
        total = self.bias
        mask = g.mask
        i = 0
        while mask:
            if mask & 1:
                total += float(self.weights[i])
            mask >>= 1
            i += 1
        return total


@dataclass(frozen=True)
class EngagementScore:
    value: float

    def __post_init__(self):
        if not 0.0 <= self.value <= 1.0:
            raise ValueError("score must lie in [0, 1]")


def _logistic(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-min(x, 500.0)))
    return 1.0 - 1.0 / (1.0 + math.exp(max(x, -500.0)))


def score(g: ClassifierVector, m: IntentModel) -> EngagementScore:
    return EngagementScore(_logistic(m.margin(g)))


def classify_intent(s: EngagementScore, m: IntentModel) -> int:
    return 1 if s.value >= m.threshold else 0


@dataclass(frozen=True)
class Hyperparams:
    epochs: int = 50
    learning_rate: float = 0.1  # decays as lr / (1 + epoch)
    l2: float = 1e-4
    seed: int = 42


def train(data: Sequence[tuple[ClassifierVector, int]], hp: Hyperparams = Hyperparams()) -> IntentModel:
    """Fit the max-margin model; identical (data, hp) gives identical weights."""
    if not data:
        raise DegenerateData("no training samples")
    labels = {label for _, label in data}
    if labels - {0, 1}:
        raise ValueError("labels must be 0 or 1")
    if len(labels) < 2:
        raise DegenerateData("training data contains a single class")

    x = np.array([g.bits for g, _ in data], dtype=np.float64)
    y = np.array([1.0 if label else -1.0 for _, label in data])
    n = len(data)
    rng = np.random.default_rng(hp.seed)
    w = np.zeros(BANK_SIZE)
    b = 0.0
    for epoch in range(hp.epochs):
        eta = hp.learning_rate / (1.0 + epoch)
        for i in rng.permutation(n):
            if y[i] * (float(x[i] @ w) + b) < 1.0:
                w += eta * (y[i] * x[i] - hp.l2 * w)
                b += eta * y[i]
            else:
                w -= eta * hp.l2 * w
    return IntentModel(weights=w, bias=b)


def build_training_set(
    frames: Sequence[Frame],
    phases: Sequence[str],
    cfg: ThresholdConfig = ThresholdConfig(),
) -> list[tuple[ClassifierVector, int]]:
    """Pair each frame's classifier vector with its phase-derived label."""
    if len(frames) != len(phases):
        raise LengthMismatch(f"{len(frames)} frames vs {len(phases)} phase labels")
    out: list[tuple[ClassifierVector, int]] = []
    prev: Optional[Frame] = None
    for frame, phase in zip(frames, phases):
        if phase not in PHASES:
            raise Malformed(f"unknown phase {phase!r}")
        g = evaluate_bank(extract_features(frame, prev), cfg)
        out.append((g, 1 if phase == "play" else 0))
        prev = frame
    return out


# --------------------------------------------------------------------------
# File formats
# --------------------------------------------------------------------------

def write_model(m: IntentModel) -> str:
    lines = [f"w{i} {float(m.weights[i])!r}" for i in range(BANK_SIZE)]
    lines.append(f"bias {float(m.bias)!r}")
    lines.append(f"threshold {float(m.threshold)!r}")
    return "\n".join(lines) + "\n"


def read_model(lines: Iterable[str]) -> IntentModel:
    values: dict[str, float] = {}
    for n, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise Malformed(f"model line {n}: expected '<key> <value>'")
        try:
            values[parts[0]] = float(parts[1])
        except ValueError as e:
            raise Malformed(f"model line {n}: {e}") from e
    try:
        weights = np.array([values.pop(f"w{i}") for i in range(BANK_SIZE)])
        bias = values.pop("bias")
    except KeyError as e:
        raise Malformed(f"model file missing {e}") from e
    threshold = values.pop("threshold", 0.5)
    if values:
        raise Malformed(f"model file has unknown keys: {sorted(values)}")
    return IntentModel(weights=weights, bias=bias, threshold=threshold)


def write_phases(phases: Iterable[tuple[int, str]]) -> str:
    return "".join(json.dumps({"i": i, "phase": p}, separators=(",", ":")) + "\n" for i, p in phases)


def read_phases(lines: Iterable[str]) -> list[tuple[int, str]]:
    out: list[tuple[int, str]] = []
    for n, line in enumerate(lines, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            rec = json.loads(line)
            idx, phase = rec["i"], rec["phase"]
        except (json.JSONDecodeError, KeyError, TypeError) as e:
            raise Malformed(f"phase line {n}: {e}") from e
        if phase not in PHASES:
            raise Malformed(f"phase line {n}: unknown phase {phase!r}")
        out.append((idx, phase))
    return out
