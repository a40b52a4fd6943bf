"""Tests for the experiment runner."""

import math

import numpy as np
import pytest

from resexp.core.config import ExperimentConfig
from resexp.core.errors import ParameterDomainError
from resexp.models.report import TrialReport
from resexp.problems.quartic import find_local_minima
from resexp.services.experiment_service import (
    ARMS,
    ExperimentService,
    attach_relative_errors,
    build_jobs,
    run_experiment,
    run_trial,
    sample_quartic,
    summarize,
)

SMALL = {
    "kmeans": {"n": 120, "d": 2, "k": 4, "mu0": 0.05, "T": 20},
    "register": {"n": 80, "angles": (0.3,), "mu0": 0.1, "T": 5},
    "opq": {"n": 200, "d": 4, "subspaces": 2, "codebook_size": 4, "mu0": 0.5, "T": 5},
    "deconv": {"n": 32, "kernel_length": 3, "mu0": 0.1, "T": 5},
    "quartic": {"mu0": 0.1, "T": 20},
}


def _config(problem: str, **overrides) -> ExperimentConfig:
    settings = {"trials": 2, **SMALL[problem], **overrides}
    return ExperimentConfig(problem=problem, **settings)


@pytest.mark.parametrize("problem", sorted(SMALL))
def test_every_arm_reports(problem: str) -> None:
    config = _config(problem)
    reports = run_experiment(config, show_progress=False)
    arms = ARMS[problem]
    assert len(reports) == config.trials * len(arms)
    assert [r.arm for r in reports[: len(arms)]] == list(arms)
    assert not any(r.failed for r in reports)
    assert all(math.isfinite(r.final_objective) for r in reports)
    assert all(r.seed == config.seed + r.trial for r in reports)


def test_kmeans_relative_error_is_against_kmeanspp() -> None:
    reports = run_experiment(_config("kmeans", trials=3), show_progress=False)
    baseline = [r.relative_error for r in reports if r.arm == "kmeans++"]
    assert np.mean(baseline) == pytest.approx(1.0)
    assert all(r.relative_error is not None for r in reports)


def test_unit_schedule_matches_kmeanspp_arm() -> None:
    config = _config("kmeans", trials=1, mu0=1.0, init="kmeanspp")
    reports = {r.arm: r for r in run_trial(build_jobs(config)[0], config).reports}
    assert reports["re"].final_objective == pytest.approx(reports["kmeans++"].final_objective)


def test_hartigan_arm_not_worse_than_kmeanspp() -> None:
    config = _config("kmeans", trials=3)
    reports = run_experiment(config, show_progress=False)
    for trial in range(3):
        by_arm = {r.arm: r for r in reports if r.trial == trial}
        assert by_arm["hartigan"].final_objective <= by_arm["kmeans++"].final_objective + 1e-9


def test_registration_reports_success_per_angle() -> None:
    config = _config("register", angles=(0.2, 0.4))
    reports = run_experiment(config, show_progress=False)
    assert {r.setting for r in reports} == {"phi=0.2", "phi=0.4"}
    assert all(isinstance(r.success, bool) for r in reports)


def test_workers_keep_report_order() -> None:
    config = _config("kmeans", trials=4)
    sequential = run_experiment(config, show_progress=False)
    config.workers = 2
    parallel = run_experiment(config, show_progress=False)

    def key(r: TrialReport):
        return (r.trial, r.arm, r.final_objective, r.iterations)

    assert [key(r) for r in parallel] == [key(r) for r in sequential]


def test_failing_arm_is_recorded(tmp_path, capsys) -> None:
    data = tmp_path / "few.csv"
    data.write_text("\n".join(f"{i},{i % 3}" for i in range(6)) + "\n")
    config = _config("kmeans", trials=1, k=10, data_path=data)
    reports = run_experiment(config, show_progress=False)
    assert len(reports) == 4
    assert all(r.failed for r in reports)
    assert all(math.isnan(r.final_objective) for r in reports)
    assert all(r.relative_error is None for r in reports)
    assert "runs failed" in capsys.readouterr().err


def test_failing_trial_setup_is_recorded(tmp_path, capsys) -> None:
    data = tmp_path / "flat.csv"
    data.write_text("\n".join(f"{i},{i % 3}" for i in range(20)) + "\n")
    config = _config("register", trials=2, data_path=data)
    reports = run_experiment(config, show_progress=False)
    assert [r.arm for r in reports] == ["icp", "re", "icp", "re"]
    assert all(r.failed for r in reports)
    assert all("DimensionMismatchError" in r.error for r in reports)
    assert "runs failed" in capsys.readouterr().err


def test_limit_truncates_loaded_data(tmp_path) -> None:
    data = tmp_path / "points.csv"
    data.write_text("\n".join(f"{i},{i % 7}" for i in range(40)) + "\n")
    config = _config("kmeans", trials=1, k=10, data_path=data, limit=8)
    reports = run_experiment(config, show_progress=False)
    assert all(r.failed for r in reports)


def test_traces_are_collected_when_requested(tmp_path) -> None:
    config = _config("quartic", trials=2, trace_out=tmp_path / "trace.jsonl")
    service = ExperimentService(config)
    reports = service.run(show_progress=False)
    for r in reports:
        rows = [t for t in service.traces if (t.arm, t.trial) == (r.arm, r.trial)]
        assert len(rows) == r.iterations
        assert [t.t for t in rows] == list(range(len(rows)))
    re_rows = [t for t in service.traces if t.arm == "re" and t.trial == 0]
    assert re_rows[0].mu == pytest.approx(0.1)
    assert re_rows[-1].mu == 1.0


def test_traces_are_skipped_by_default() -> None:
    service = ExperimentService(_config("quartic"))
    service.run(show_progress=False)
    assert service.traces == []
    assert service.signals == []


def test_service_saves_every_requested_output(tmp_path) -> None:
    config = _config(
        "deconv",
        trials=1,
        out=tmp_path / "reports.csv",
        fmt="csv",
        trace_out=tmp_path / "trace.csv",
        signals_out=tmp_path / "signals",
    )
    service = ExperimentService(config)
    reports = service.run(show_progress=False)
    written = service.save(reports)

    assert written[:2] == [config.out, config.trace_out]
    assert sorted(p.name for p in written[2:]) == [
        "trial0_alg1_kernel.csv",
        "trial0_alg1_signal.csv",
        "trial0_alg2_kernel.csv",
        "trial0_alg2_signal.csv",
    ]
    assert len(service.files.read(config.out)) == 2
    signal = service.signals[0]
    assert signal.observed.shape == signal.signal.shape == signal.fit.shape == (32,)
    assert signal.kernel.shape == (3,)
    assert [s.arm for s in service.signals] == ["alg1", "alg2"]


def test_service_summary_matches_module_summary() -> None:
    service = ExperimentService(_config("opq"))
    reports = service.run(show_progress=False)
    assert service.summarize(reports) == summarize(reports)


def test_build_jobs_orders_by_setting_then_trial() -> None:
    config = _config("register", trials=2, angles=(1.0, 1.5))
    jobs = build_jobs(config)
    assert [(j.setting, j.trial) for j in jobs] == [
        ("phi=1", 0),
        ("phi=1", 1),
        ("phi=1.5", 0),
        ("phi=1.5", 1),
    ]


def test_attach_relative_errors_skips_failures() -> None:
    reports = [
        TrialReport("kmeans", "kmeans++", 0, 0, "", 0.1, 5, 10.0),
        TrialReport("kmeans", "kmeans++", 1, 1, "", 0.1, 5, 30.0),
        TrialReport("kmeans", "re", 0, 0, "", 0.1, 5, 15.0),
        TrialReport("kmeans", "re", 1, 1, "", 0.1, 5, math.nan, error="boom"),
    ]
    attach_relative_errors(reports)
    assert [r.relative_error for r in reports] == [0.5, 1.5, 0.75, None]


def test_summarize() -> None:
    reports = [
        TrialReport("register", "icp", 0, 0, "phi=1", 0.1, 5, 2.0, success=False, iterations=4),
        TrialReport("register", "icp", 1, 1, "phi=1", 0.1, 5, 0.5, success=True, iterations=6),
        TrialReport("register", "re", 0, 0, "phi=1", 0.1, 5, 0.5, success=True, iterations=10),
        TrialReport("register", "re", 1, 1, "phi=1", 0.1, 5, math.nan, error="boom"),
    ]
    icp, re = summarize(reports)
    assert (icp.arm, icp.trials, icp.failures, icp.successes) == ("icp", 2, 0, 1)
    assert (icp.mean_objective, icp.min_objective, icp.max_objective) == (1.25, 0.5, 2.0)
    assert icp.mean_iterations == 5.0
    assert icp.mean_relative_error is None
    assert (re.trials, re.failures, re.successes, re.mean_objective) == (2, 1, 1, 0.5)


def test_sample_quartic_has_two_minima(rng) -> None:
    for _ in range(20):
        inst = sample_quartic(rng)
        assert 0.2 <= inst.y1 <= 2.0
        assert len(find_local_minima(inst)) == 2


@pytest.mark.parametrize(
    "overrides",
    [
        {"problem": "svd"},
        {"mu0": 0.0},
        {"T": 0},
        {"trials": 0},
        {"workers": 0},
        {"init": "farthest"},
        {"fmt": "xml"},
    ],
)
def test_config_validation(overrides) -> None:
    settings = {"problem": "kmeans", **overrides}
    with pytest.raises(ParameterDomainError):
        ExperimentConfig(**settings)


def test_config_missing_data_file(tmp_path) -> None:
    with pytest.raises(FileNotFoundError):
        ExperimentConfig(problem="kmeans", data_path=tmp_path / "missing.csv")
