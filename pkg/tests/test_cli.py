"""Tests for the command-line interface."""

import json

import numpy as np
from click.testing import CliRunner

from resexp import __version__
from resexp.cli import cli

KMEANS_SMALL = ["--n", "60", "--k", "3", "--T", "5", "--trials", "1"]


def test_version() -> None:
    result = CliRunner().invoke(cli, ["--version"])
    assert result.exit_code == 0
    assert __version__ in result.output


def test_kmeans_writes_jsonl_to_stdout() -> None:
    result = CliRunner().invoke(cli, ["kmeans", "--quiet", *KMEANS_SMALL])
    assert result.exit_code == 0, result.output
    rows = [json.loads(line) for line in result.output.splitlines()]
    assert [r["arm"] for r in rows] == ["kmeans++", "lloyd-random", "hartigan", "re"]
    assert all(r["T"] == 5 for r in rows)


def test_kmeans_summary_and_file_output(tmp_path) -> None:
    out = tmp_path / "runs" / "kmeans.jsonl"
    result = CliRunner().invoke(cli, ["kmeans", *KMEANS_SMALL, "--out", str(out)])
    assert result.exit_code == 0, result.output
    assert "Wrote 4 reports" in result.output
    assert len(out.read_text().splitlines()) == 4


def test_register_csv_output(tmp_path) -> None:
    out = tmp_path / "register.csv"
    args = ["register", "--quiet", "--n", "60", "--angle", "30", "--angle", "45", "--T", "5"]
    args += ["--trials", "1", "--format", "csv", "-o", str(out)]
    result = CliRunner().invoke(cli, args)
    assert result.exit_code == 0, result.output
    lines = out.read_text().splitlines()
    assert len(lines) == 1 + 2 * 2
    assert lines[0].startswith("problem,arm,trial,seed,setting")


def test_opq_small_run() -> None:
    args = ["opq", "--quiet", "--n", "100", "--d", "4", "-M", "2", "-k", "4", "--T", "3"]
    result = CliRunner().invoke(cli, [*args, "--trials", "1"])
    assert result.exit_code == 0, result.output
    assert [json.loads(line)["arm"] for line in result.output.splitlines()] == [
        "alternating",
        "re",
    ]


def test_deconv_small_run() -> None:
    args = ["deconv", "--quiet", "--n", "32", "-L", "3", "--T", "5", "--trials", "1"]
    result = CliRunner().invoke(cli, args)
    assert result.exit_code == 0, result.output
    assert [json.loads(line)["arm"] for line in result.output.splitlines()] == ["alg1", "alg2"]


def test_quartic_sweep_output(tmp_path) -> None:
    sweep = tmp_path / "sweep.csv"
    args = ["quartic", "--quiet", "--instances", "20", "--sweep-out", str(sweep)]
    result = CliRunner().invoke(cli, [*args, "--T", "5", "--trials", "1"])
    assert result.exit_code == 0, result.output
    assert len(sweep.read_text().splitlines()) == 21


def test_invalid_penalty_aborts() -> None:
    result = CliRunner().invoke(cli, ["kmeans", "--quiet", "--mu0", "1.5", *KMEANS_SMALL])
    assert result.exit_code != 0
    assert "Error" in result.output


def test_missing_data_file_is_rejected(tmp_path) -> None:
    result = CliRunner().invoke(cli, ["kmeans", "--data", str(tmp_path / "nope.csv")])
    assert result.exit_code != 0


def test_trace_out_writes_every_iteration(tmp_path) -> None:
    trace = tmp_path / "trace.jsonl"
    args = ["quartic", "--quiet", "--instances", "0", "--T", "5", "--trials", "1"]
    result = CliRunner().invoke(cli, [*args, "--trace-out", str(trace)])
    assert result.exit_code == 0, result.output
    rows = [json.loads(line) for line in trace.read_text().splitlines()]
    reports = [json.loads(line) for line in result.output.splitlines() if line.startswith("{")]
    assert len(rows) == sum(r["iterations"] for r in reports)
    assert {"t", "mu", "expanded_objective", "true_objective"} <= set(rows[0])


def test_deconv_signals_out(tmp_path) -> None:
    signals = tmp_path / "signals"
    args = ["deconv", "--quiet", "--n", "32", "-L", "3", "--T", "5", "--trials", "1"]
    result = CliRunner().invoke(cli, [*args, "--signals-out", str(signals)])
    assert result.exit_code == 0, result.output
    assert sorted(p.name for p in signals.iterdir()) == [
        "trial0_alg1_kernel.csv",
        "trial0_alg1_signal.csv",
        "trial0_alg2_kernel.csv",
        "trial0_alg2_signal.csv",
    ]
    assert signals.joinpath("trial0_alg2_signal.csv").read_text().startswith("observed,signal,fit")


def test_limit_reads_fvecs_prefix(tmp_path) -> None:
    data = tmp_path / "base.fvecs"
    vectors = np.random.default_rng(0).normal(size=(50, 4)).astype("<f4")
    np.hstack([np.full((50, 1), 4, dtype="<i4"), vectors.view("<i4")]).tofile(data)
    args = ["opq", "--quiet", "--data", str(data), "--limit", "20", "-M", "2", "-k", "4"]
    result = CliRunner().invoke(cli, [*args, "--T", "3", "--trials", "1"])
    assert result.exit_code == 0, result.output
    rows = [json.loads(line) for line in result.output.splitlines()]
    assert [r["arm"] for r in rows] == ["alternating", "re"]
    assert not any(r["error"] for r in rows)


def test_register_fit_only_expansion() -> None:
    args = ["register", "--quiet", "--n", "60", "--angle", "30", "--T", "5", "--trials", "1"]
    result = CliRunner().invoke(cli, [*args, "--fit-only-expansion"])
    assert result.exit_code == 0, result.output
    assert [json.loads(line)["arm"] for line in result.output.splitlines()] == ["icp", "re"]
