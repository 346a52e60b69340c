"""Score the fixed 30-session battery and compare against the memoryless baseline.

Prints one row per session plus suite-level totals, per-state accuracy, and
the accuracy gained by running the transducer instead of labeling each frame
independently from its classifier bits.
"""

import argparse
import statistics

from daia.evaluate import evaluate, memoryless_labels
from daia.engine import run_pipeline
from daia.guard_dsl import make_input
from daia.intent import Hyperparams, build_training_set, train
from daia.scenarios import acceptance_suite, game_scenario
from daia.states import STATE_ORDER


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--jitter", type=float, default=15.0, help="sensor noise sigma in mm")
    ap.add_argument("--count", type=int, default=30)
    args = ap.parse_args()

    model = train(build_training_set(*game_scenario(42, 5_000)), Hyperparams(seed=42))

    print(f"{'session':<14}{'frames':>8}{'engine':>10}{'baseline':>10}")
    pred, truth, baseline, maes = [], [], [], []
    for case in acceptance_suite(args.seed, args.jitter, args.count):
        labels, outputs = run_pipeline(list(case.frames), model)
        case_pred = [s for _, s in labels]
        case_base = memoryless_labels([make_input(o.g.mask, o.intent) for o in outputs])
        case_truth = list(case.truth)
        case_report = evaluate(case_pred, case_truth)
        base = evaluate(case_base, case_truth).total_accuracy
        print(f"{case.name:<14}{len(case_truth):>8}{case_report.total_accuracy:>9.1%}{base:>9.1%}")
        maes.append(case_report.action_boundary_mae_frames)
        pred += case_pred
        truth += case_truth
        baseline += case_base

    # accuracies aggregate cleanly over the concatenation; boundary error
    # does not (session splices would pair up), so that one is averaged
    report = evaluate(pred, truth)
    base_total = evaluate(baseline, truth).total_accuracy
    print()
    for state in STATE_ORDER:
        print(f"{state.name:<16}{report.per_state_accuracy[state]:>9.1%}")
    print(f"{'Total':<16}{report.total_accuracy:>9.1%}  ({report.frame_count} frames)")
    print(f"mean per-session action boundary MAE: {statistics.mean(maes):.2f} frames")
    print(f"memoryless baseline: {base_total:.2%}")
    print(f"transducer gain:     +{(report.total_accuracy - base_total) * 100:.2f} pp")


if __name__ == "__main__":
    main()
