"""Run the built-in demo session end to end and print its label timeline.

Trains a quick intent model (or loads one with --model), replays the demo
scenario through the engine, and prints the accuracy report plus a run-length
timeline of predicted vs true states.
"""

import argparse
from pathlib import Path

from daia.engine import run_pipeline, trace_line
from daia.evaluate import evaluate, render_report
from daia.intent import Hyperparams, build_training_set, read_model, train
from daia.scenarios import demo_scenario, game_scenario


def runs(labels):
    out = []
    for i, state in enumerate(labels):
        if out and out[-1][2] is state:
            out[-1][1] = i
        else:
            out.append([i, i, state])
    return out


def timeline(title, labels):
    print(f"{title}:")
    print("  " + " | ".join(f"{a:04d}-{b:04d} {s.code}" for a, b, s in runs(labels)))


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--model", help="intent model file (default: train a fresh one)")
    ap.add_argument("--trace", help="write the per-frame transition trace here")
    args = ap.parse_args()

    if args.model:
        model = read_model(Path(args.model).read_text().splitlines())
    else:
        print("training intent model on a 5,000-frame synthetic game...")
        model = train(build_training_set(*game_scenario(42, 5_000)), Hyperparams(seed=42))

    case = demo_scenario()
    labels, outputs = run_pipeline(list(case.frames), model)
    pred = [s for _, s in labels]

    print(render_report(evaluate(pred, list(case.truth))))
    timeline("predicted", pred)
    timeline("truth", list(case.truth))
    relabels = [o.relabel for o in outputs if o.relabel]
    for ev in relabels:
        print(f"retro-label: frames {ev.start}..{ev.end} repainted at frame {ev.end}")

    if args.trace:
        Path(args.trace).write_text("".join(trace_line(o) + "\n" for o in outputs))
        print(f"trace written to {args.trace}")


if __name__ == "__main__":
    main()
