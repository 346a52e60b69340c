"""Command-line entry point wiring the whole pipeline.

    daia run       label a recorded stream, report per-frame latency
    daia train     fit the intent model, report held-out accuracy
    daia eval      compare a predicted label file against ground truth
    daia synth     generate a synthetic stream plus truth labels
    daia fst-check parse, compile, and pretty-print a transducer spec
    daia serve     interactive session server (newline JSON / WebSocket)

Exit codes: 0 ok, 1 validation error, 2 IO error, 3 protocol error.
"""

from __future__ import annotations

import argparse
import dataclasses
import errno
import os
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .engine import Engine, trace_line
from .evaluate import evaluate, render_report, render_report_kv
from .features import ThresholdConfig, read_threshold_config
from .fst import DEFAULT_BUFFER_DEPTH
from .guard_dsl import compile_spec, default_table, format_spec, parse
from .intent import (
    Hyperparams,
    build_training_set,
    classify_intent,
    read_model,
    read_phases,
    score,
    train,
    write_model,
)
from .scenarios import demo_scenario, game_scenario
from .serve import ProtocolError, SessionServer
from .skeleton import (
    generate_scenario,
    read_labels,
    read_scenario_script,
    read_stream,
    write_labels,
    write_stream,
)


@dataclass(frozen=True)
class PipelineConfig:
    """Resolved invocation: artifact paths plus runtime knobs."""

    stream: Optional[str] = None
    model: Optional[str] = None
    fst: Optional[str] = None
    thresholds: Optional[str] = None
    out: Optional[str] = None
    trace: Optional[str] = None
    fps: int = 30
    buffer_depth: int = DEFAULT_BUFFER_DEPTH
    port: int = 7641
    seed: int = 42

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> "PipelineConfig":
        return cls(
            stream=getattr(args, "input", None),
            model=getattr(args, "model", None),
            fst=getattr(args, "fst", None),
            thresholds=getattr(args, "thresholds", None),
            out=getattr(args, "out", None),
            trace=getattr(args, "trace", None),
            fps=getattr(args, "fps", 30),
            port=getattr(args, "port", 7641),
            seed=getattr(args, "seed", 42),
        )

    def require(self, **flags: str) -> None:
        for field, flag in flags.items():
            if getattr(self, field) is None:
                raise ValueError(f"{flag} is required")

    def check_inputs_exist(self, *extra: Optional[str]) -> None:
        for path in (self.stream, self.model, self.fst, self.thresholds, *extra):
            if path is not None and not os.path.exists(path):
                raise FileNotFoundError(errno.ENOENT, "no such file", path)


def _load_model(path: str):
    return read_model(Path(path).read_text().splitlines())


def _load_table(path: Optional[str]):
    if path is None:
        return default_table()
    return compile_spec(parse(Path(path).read_text()))


def _load_thresholds(path: Optional[str]) -> ThresholdConfig:
    if path is None:
        return ThresholdConfig()
    return read_threshold_config(Path(path).read_text().splitlines())


# --------------------------------------------------------------------------
# Commands
# --------------------------------------------------------------------------

def cmd_run(args: argparse.Namespace) -> int:
    cfg = PipelineConfig.from_args(args)
    cfg.require(stream="--input", model="--model", out="--out")
    cfg.check_inputs_exist()
    model = _load_model(cfg.model)
    table = _load_table(cfg.fst)
    thresholds = _load_thresholds(cfg.thresholds)
    frames = read_stream(Path(cfg.stream).read_text().splitlines())

    engine = Engine(model, table=table, cfg=thresholds, buffer_depth=cfg.buffer_depth)
    outputs = []
    timings = np.empty(len(frames))
    for k, frame in enumerate(frames):
        t0 = time.perf_counter()
        outputs.append(engine.process(frame))
        timings[k] = time.perf_counter() - t0
    labeled = [lf for out in outputs for lf in out.emitted]
    labeled.extend(engine.flush())
    labeled.sort(key=lambda lf: lf.frame_index)

    Path(cfg.out).write_text(write_labels((lf.frame_index, lf.state) for lf in labeled))
    if cfg.trace:
        Path(cfg.trace).write_text("".join(trace_line(o) + "\n" for o in outputs))
    p50, p90, p99 = np.percentile(timings * 1000.0, [50, 90, 99]) if len(frames) else (0, 0, 0)
    print(f"frames {len(frames)}")
    print(f"latency_ms p50 {p50:.3f} p90 {p90:.3f} p99 {p99:.3f}")
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    cfg = PipelineConfig.from_args(args)
    cfg.require(out="--out")
    thresholds = _load_thresholds(cfg.thresholds)
    if cfg.stream is not None:
        phases_path = cfg.stream + ".phases"
        cfg.check_inputs_exist(phases_path)
        frames = read_stream(Path(cfg.stream).read_text().splitlines())
        pairs = read_phases(Path(phases_path).read_text().splitlines())
        if [i for i, _ in pairs] != [f.frame_index for f in frames]:
            raise ValueError("phase records do not line up with the stream")
        phases = [p for _, p in pairs]
    else:
        frames, phases = game_scenario(cfg.seed, 6000)
    data = build_training_set(frames, phases, thresholds)

    rng = np.random.default_rng(cfg.seed)
    perm = rng.permutation(len(data))
    cut = int(0.8 * len(data))
    model = train([data[k] for k in perm[:cut]], Hyperparams(seed=cfg.seed))
    held_out = [data[k] for k in perm[cut:]]
    hits = sum(1 for g, y in held_out if classify_intent(score(g, model), model) == y)
    Path(cfg.out).write_text(write_model(model))
    print(f"trained on {cut} samples")
    print(f"held-out accuracy {hits / len(held_out):.4f} ({len(held_out)} samples)")
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    cfg = PipelineConfig.from_args(args)
    for path in (args.pred, args.truth):
        if not os.path.exists(path):
            raise FileNotFoundError(errno.ENOENT, "no such file", path)
    pred = read_labels(Path(args.pred).read_text().splitlines())
    truth = read_labels(Path(args.truth).read_text().splitlines())
    if [i for i, _ in pred] != [i for i, _ in truth]:
        raise ValueError("label files cover different frame indices")
    report = evaluate([s for _, s in pred], [s for _, s in truth])
    print(render_report(report), end="")
    if cfg.out:
        Path(cfg.out).write_text(render_report_kv(report))
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    cfg = PipelineConfig.from_args(args)
    cfg.require(out="--out")
    cfg.check_inputs_exist()
    if cfg.stream is not None:
        scenario = read_scenario_script(Path(cfg.stream).read_text().splitlines())
    else:
        scenario = demo_scenario().scenario
    if args.seed is not None:
        scenario = dataclasses.replace(scenario, seed=args.seed)
    if args.fps is not None:
        scenario = dataclasses.replace(scenario, fps=args.fps)
    frames, truth = generate_scenario(scenario)
    Path(cfg.out).write_text(write_stream(frames))
    labels_path = cfg.out + ".labels"
    Path(labels_path).write_text(write_labels((f.frame_index, s) for f, s in zip(frames, truth)))
    print(f"wrote {len(frames)} frames to {cfg.out}")
    print(f"wrote truth labels to {labels_path}")
    return 0


def cmd_fst_check(args: argparse.Namespace) -> int:
    cfg = PipelineConfig.from_args(args)
    cfg.require(fst="--fst")
    cfg.check_inputs_exist()
    spec = parse(Path(cfg.fst).read_text())
    compile_spec(spec)  # resolves signals and relabel policies
    print(format_spec(spec), end="")
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    cfg = PipelineConfig.from_args(args)
    cfg.require(model="--model")
    cfg.check_inputs_exist()
    server = SessionServer(
        _load_model(cfg.model),
        table=_load_table(cfg.fst),
        cfg=_load_thresholds(cfg.thresholds),
        port=cfg.port,
        fps=cfg.fps,
        seed=cfg.seed,
        buffer_depth=cfg.buffer_depth,
    )
    print(f"listening on {server.host}:{server.port}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.close()
    return 0


# --------------------------------------------------------------------------
# Parser
# --------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # bad usage is a validation error, not IO
        self.print_usage(sys.stderr)
        self.exit(1, f"error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="daia", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="cmd", required=True)

    def common(p: argparse.ArgumentParser, *, fps_default=30, seed_default=42):
        p.add_argument("--input", help="input stream / script path")
        p.add_argument("--model", help="intent model file")
        p.add_argument("--fst", help="transducer spec file (default: built-in)")
        p.add_argument("--thresholds", help="threshold config file")
        p.add_argument("--out", help="output path")
        p.add_argument("--trace", help="per-frame transition trace output")
        p.add_argument("--port", type=int, default=7641)
        p.add_argument("--fps", type=int, default=fps_default)
        p.add_argument("--seed", type=int, default=seed_default)

    p_run = sub.add_parser("run", help="label a stream file")
    common(p_run)
    p_run.set_defaults(func=cmd_run)

    p_train = sub.add_parser("train", help="fit the intent model")
    common(p_train)
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="score predicted labels against truth")
    p_eval.add_argument("pred")
    p_eval.add_argument("truth")
    common(p_eval)
    p_eval.set_defaults(func=cmd_eval)

    p_synth = sub.add_parser("synth", help="generate a synthetic stream + labels")
    common(p_synth, fps_default=None, seed_default=None)
    p_synth.set_defaults(func=cmd_synth)

    p_check = sub.add_parser("fst-check", help="validate and format a transducer spec")
    common(p_check)
    p_check.set_defaults(func=cmd_fst_check)

    p_serve = sub.add_parser("serve", help="interactive session server")
    common(p_serve, seed_default=0)
    p_serve.set_defaults(func=cmd_serve)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:  # argparse exits for usage errors and --help
        return int(e.code or 0)
    try:
        return args.func(args)
    except ProtocolError as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
