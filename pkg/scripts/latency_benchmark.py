"""Measure per-frame pipeline latency over a long synthetic stream."""

import argparse
import time

import numpy as np

from daia.engine import Engine
from daia.intent import Hyperparams, build_training_set, train
from daia.scenarios import game_scenario


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--frames", type=int, default=10_000)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()

    model = train(build_training_set(*game_scenario(42, 5_000)), Hyperparams(seed=42))
    frames, _ = game_scenario(args.seed, args.frames)

    engine = Engine(model)
    times = np.empty(len(frames))
    t0 = time.perf_counter()
    for k, frame in enumerate(frames):
        t = time.perf_counter()
        engine.process(frame)
        times[k] = time.perf_counter() - t
    wall = time.perf_counter() - t0

    ms = times * 1000.0
    print(f"frames            {len(frames)}")
    print(f"wall time         {wall:.2f} s ({len(frames) / wall:,.0f} frames/s)")
    for q in (50, 90, 99):
        print(f"p{q:<2} latency       {np.percentile(ms, q):.3f} ms")
    print(f"max latency       {ms.max():.3f} ms")


if __name__ == "__main__":
    main()
