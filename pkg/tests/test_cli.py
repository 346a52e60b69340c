"""End-to-end tests for the command-line interface.

Commands are invoked in-process through main() so exit codes and printed
output can be asserted directly.
"""

import contextlib
import io

import pytest

from daia.cli import main
from daia.intent import read_model, write_phases
from daia.scenarios import game_scenario
from daia.skeleton import read_labels, write_stream


def run_cli(argv):
    out, err = io.StringIO(), io.StringIO()
    with contextlib.redirect_stdout(out), contextlib.redirect_stderr(err):
        rc = main(argv)
    return rc, out.getvalue(), err.getvalue()


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    return tmp_path_factory.mktemp("cli")


@pytest.fixture(scope="module")
def trained_model(workdir):
    path = workdir / "model.txt"
    rc, out, _ = run_cli(["train", "--out", str(path), "--seed", "42"])
    assert rc == 0
    return path, out


@pytest.fixture(scope="module")
def demo_stream(workdir):
    path = workdir / "demo.stream"
    rc, _, _ = run_cli(["synth", "--out", str(path)])
    assert rc == 0
    return path


def test_train_reports_held_out_accuracy(trained_model):
    path, out = trained_model
    line = next(l for l in out.splitlines() if l.startswith("held-out accuracy"))
    assert float(line.split()[2]) >= 0.86
    model = read_model(path.read_text().splitlines())
    assert model.weights.shape == (37,)


def test_train_from_stream_with_phase_sidecar(workdir):
    frames, phases = game_scenario(3, 900)
    stream = workdir / "game.stream"
    stream.write_text(write_stream(frames))
    (workdir / "game.stream.phases").write_text(
        write_phases((f.frame_index, p) for f, p in zip(frames, phases))
    )
    out = workdir / "model-from-file.txt"
    rc, text, _ = run_cli(["train", "--input", str(stream), "--out", str(out)])
    assert rc == 0
    assert "held-out accuracy" in text
    assert out.exists()


def test_synth_writes_stream_and_truth_sidecar(demo_stream):
    labels_path = demo_stream.with_name(demo_stream.name + ".labels")
    assert labels_path.exists()
    stream_lines = [l for l in demo_stream.read_text().splitlines() if l.strip()]
    labels = read_labels(labels_path.read_text().splitlines())
    assert len(labels) == len(stream_lines) == 600


def test_synth_is_deterministic(workdir, demo_stream):
    again = workdir / "demo2.stream"
    rc, _, _ = run_cli(["synth", "--out", str(again)])
    assert rc == 0
    assert again.read_bytes() == demo_stream.read_bytes()


def test_run_labels_every_frame_and_reports_latency(workdir, trained_model, demo_stream):
    out = workdir / "pred.labels"
    trace = workdir / "trace.txt"
    rc, text, _ = run_cli([
        "run", "--input", str(demo_stream), "--model", str(trained_model[0]),
        "--out", str(out), "--trace", str(trace),
    ])
    assert rc == 0
    assert "latency_ms p50" in text
    labels = read_labels(out.read_text().splitlines())
    assert [i for i, _ in labels] == list(range(600))
    assert len(trace.read_text().splitlines()) == 600


def test_run_is_byte_deterministic(workdir, trained_model, demo_stream):
    paths = [workdir / f"det{k}.labels" for k in (0, 1)]
    for p in paths:
        rc, _, _ = run_cli([
            "run", "--input", str(demo_stream),
            "--model", str(trained_model[0]), "--out", str(p),
        ])
        assert rc == 0
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_eval_identity_scores_hundred(workdir, trained_model, demo_stream):
    truth = str(demo_stream) + ".labels"
    kv = workdir / "report.kv"
    rc, text, _ = run_cli(["eval", truth, truth, "--out", str(kv)])
    assert rc == 0
    assert "Total               100.0%" in text
    pairs = dict(l.split(" ", 1) for l in kv.read_text().splitlines())
    assert float(pairs["total_accuracy"]) == 1.0


def test_eval_rejects_mismatched_indices(workdir, demo_stream):
    truth = demo_stream.with_name(demo_stream.name + ".labels")
    short = workdir / "short.labels"
    short.write_text("".join(truth.read_text().splitlines(keepends=True)[:10]))
    rc, _, err = run_cli(["eval", str(short), str(truth)])
    assert rc == 1
    assert "frame indices" in err


def test_fst_check_output_is_reparseable(workdir):
    from daia.guard_dsl import DEFAULT_FST_TEXT, format_spec, parse

    spec_path = workdir / "machine.fst"
    spec_path.write_text(DEFAULT_FST_TEXT)
    rc, text, _ = run_cli(["fst-check", "--fst", str(spec_path)])
    assert rc == 0
    assert format_spec(parse(text)) == text


def test_missing_input_file_is_io_error(workdir, trained_model):
    rc, _, err = run_cli([
        "run", "--input", str(workdir / "absent.stream"),
        "--model", str(trained_model[0]), "--out", str(workdir / "x"),
    ])
    assert rc == 2
    assert "absent.stream" in err


@pytest.mark.parametrize("argv", [
    ["run", "--model", "m", "--out", "x"],        # missing --input
    ["train"],                                    # missing --out
    ["fst-check"],                                # missing --fst
    ["frobnicate"],                               # unknown subcommand
    ["run", "--fps", "not-a-number"],             # bad flag value
])
def test_usage_errors_exit_one(argv):
    rc, _, _ = run_cli(argv)
    assert rc == 1
