"""Experiment service: shared-seed multi-arm trials for every backend."""

import math
import time
from collections.abc import Callable
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from rich.console import Console

from resexp.core.config import ICP_MAX_ITERS, ExperimentConfig
from resexp.core.engine import RunTrace, Variant, run_alternating, run_re
from resexp.core.errors import ParameterDomainError, ResexpError
from resexp.core.schedule import make_schedule
from resexp.models.problems import QuarticInstance, TrialSpec
from resexp.models.report import ArmSummary, DeconvSignals, QuarticRecord, TraceRow, TrialReport
from resexp.problems.deconv import circular_convolve, solve_deconv
from resexp.problems.kmeans import (
    hartigan_refine,
    kmeans_objective,
    lloyd,
    model_from_centroids,
    seed_kmeanspp,
    seed_random,
    solve_kmeans,
)
from resexp.problems.opq import solve_opq
from resexp.problems.quartic import (
    QuarticProblem,
    check_deeper_minimum_dominates,
    find_local_minima,
    grid_global_minimum,
)
from resexp.problems.registration import make_trial, random_unit_axis, solve_icp
from resexp.services.file_service import ResultFileService, load_points, load_signal_csv
from resexp.utils.datasets import (
    gen_blind_deconv,
    gen_clusters,
    gen_correlated_gaussians,
    gen_surface_cloud,
)
from resexp.utils.progress import create_trial_progress

console = Console(stderr=True)

BASELINE_ARM = "kmeans++"
ARMS = {
    "kmeans": ("kmeans++", "lloyd-random", "hartigan", "re"),
    "register": ("icp", "re"),
    "opq": ("alternating", "re"),
    "deconv": ("alg1", "alg2"),
    "quartic": ("alternating", "re"),
}
# A quartic run succeeds when it ends this close to the grid global minimum
QUARTIC_SUCCESS_TOL = 1e-3
QUARTIC_Y1_RANGE = (0.2, 2.0)
QUARTIC_Y2_RANGE = (-1.0, 1.0)

_ARM_FAILURES = (ResexpError, ValueError, ArithmeticError, np.linalg.LinAlgError)
# Data loading and trial setup may also fail on the file system
_SETUP_FAILURES = _ARM_FAILURES + (OSError,)


@dataclass(frozen=True)
class TrialJob:
    """One trial index at one setting; every arm of the problem runs on it."""

    trial: int
    setting: str
    angle: float | None = None

    def seed(self, config: ExperimentConfig) -> int:
        return config.seed + self.trial


@dataclass
class ArmOutcome:
    objective: float
    iterations: int
    success: bool | None = None
    trace: RunTrace | None = None
    signals: DeconvSignals | None = None


@dataclass
class TrialResult:
    """Reports of every arm of one trial, plus traces and signals when requested."""

    reports: list[TrialReport] = field(default_factory=list)
    traces: list[TraceRow] = field(default_factory=list)
    signals: list[DeconvSignals] = field(default_factory=list)


def _blank_report(job: TrialJob, config: ExperimentConfig, arm: str) -> TrialReport:
    return TrialReport(
        problem=config.problem,
        arm=arm,
        trial=job.trial,
        seed=job.seed(config),
        setting=job.setting,
        mu0=config.mu0,
        T=config.T,
        final_objective=math.nan,
    )


def _trace_rows(
    job: TrialJob, config: ExperimentConfig, arm: str, trace: RunTrace
) -> list[TraceRow]:
    return [
        TraceRow(
            problem=config.problem,
            arm=arm,
            trial=job.trial,
            setting=job.setting,
            t=rec.t,
            mu=rec.mu,
            expanded_objective=rec.expanded_objective,
            true_objective=rec.true_objective,
        )
        for rec in trace.records
    ]


def _timed(
    job: TrialJob,
    config: ExperimentConfig,
    arm: str,
    fn: Callable[[], ArmOutcome],
    result: TrialResult,
) -> None:
    start = time.perf_counter()
    report = _blank_report(job, config, arm)
    try:
        outcome = fn()
    except _ARM_FAILURES as e:
        report.error = f"{type(e).__name__}: {e}"
    else:
        report.final_objective = outcome.objective
        report.iterations = outcome.iterations
        report.success = outcome.success
        if config.trace_out is not None and outcome.trace is not None:
            result.traces += _trace_rows(job, config, arm, outcome.trace)
        if outcome.signals is not None:
            result.signals.append(outcome.signals)
    report.wall_ms = (time.perf_counter() - start) * 1000.0
    result.reports.append(report)


def _outcome(trace: RunTrace, success: bool | None = None) -> ArmOutcome:
    return ArmOutcome(
        objective=trace.final_objective, iterations=trace.iterations, success=success, trace=trace
    )


# Per-problem trial runners


def _kmeans_data(config: ExperimentConfig, seed: int) -> np.ndarray:
    if config.data_path is not None:
        return load_points(config.data_path, config.limit)
    return gen_clusters(
        config.n, config.d, config.k, config.separation, config.balance, rng_seed=seed
    ).points


def _run_kmeans(job: TrialJob, config: ExperimentConfig, result: TrialResult) -> None:
    seed = job.seed(config)
    X = _kmeans_data(config, seed)
    schedule = make_schedule(config.mu0, config.T)

    def seeded_lloyd(seeder) -> ArmOutcome:
        _, trace = lloyd(X, model_from_centroids(X, seeder(X, config.k, seed)))
        return _outcome(trace)

    def hartigan() -> ArmOutcome:
        model, trace = lloyd(X, model_from_centroids(X, seed_kmeanspp(X, config.k, seed)))
        refined = hartigan_refine(X, model)
        return ArmOutcome(
            objective=kmeans_objective(X, refined), iterations=trace.iterations, trace=trace
        )

    def residual_expansion() -> ArmOutcome:
        _, trace = solve_kmeans(
            X, config.k, schedule, config.init, rng_seed=seed, refine_iters=config.refine_iters
        )
        return _outcome(trace)

    arms = {
        "kmeans++": lambda: seeded_lloyd(seed_kmeanspp),
        "lloyd-random": lambda: seeded_lloyd(seed_random),
        "hartigan": hartigan,
        "re": residual_expansion,
    }
    for arm, fn in arms.items():
        _timed(job, config, arm, fn, result)


def _run_register(job: TrialJob, config: ExperimentConfig, result: TrialResult) -> None:
    seed = job.seed(config)
    if config.data_path is not None:
        source = load_points(config.data_path, config.limit)
    else:
        source = gen_surface_cloud(config.n, rng_seed=config.seed)
    spec = TrialSpec(
        axis=random_unit_axis(np.random.default_rng(seed)),
        angle=job.angle,
        sigma=config.sigma,
        seed=seed,
        success_threshold=config.success_threshold,
        partial=config.partial,
        overlap=config.overlap,
    )
    trial = make_trial(source, spec)
    schedule = make_schedule(config.mu0, config.T)

    def run(sched) -> ArmOutcome:
        _, trace = solve_icp(
            trial.source,
            trial.target,
            sched,
            max_iters=ICP_MAX_ITERS,
            expand_correspondences=not config.fit_only_expansion,
        )
        return _outcome(trace, success=trial.is_success(trace.final_objective))

    _timed(job, config, "icp", lambda: run(None), result)
    _timed(job, config, "re", lambda: run(schedule), result)


def _run_opq(job: TrialJob, config: ExperimentConfig, result: TrialResult) -> None:
    seed = job.seed(config)
    if config.data_path is not None:
        X = load_points(config.data_path, config.limit)
    else:
        X = gen_correlated_gaussians(config.n, config.d, rng_seed=seed)
    schedule = make_schedule(config.mu0, config.T)

    def run(sched) -> ArmOutcome:
        _, trace = solve_opq(
            X,
            config.subspaces,
            config.codebook_size,
            sched,
            rng_seed=seed,
            refine_iters=config.refine_iters,
            random_rotation=config.random_rotation,
        )
        return _outcome(trace)

    _timed(job, config, "alternating", lambda: run(None), result)
    _timed(job, config, "re", lambda: run(schedule), result)


def _run_deconv(job: TrialJob, config: ExperimentConfig, result: TrialResult) -> None:
    seed = job.seed(config)
    if config.data_path is not None:
        y = load_signal_csv(config.data_path)
        if config.limit is not None:
            y = y[: config.limit]
    else:
        y = gen_blind_deconv(
            config.n, config.kernel_length, config.kernel_width, config.noise, rng_seed=seed
        ).y
    schedule = make_schedule(config.mu0, config.T)

    def run(variant: Variant) -> ArmOutcome:
        model, trace = solve_deconv(
            y,
            config.kernel_length,
            schedule,
            variant,
            config.gamma_x,
            config.gamma_k,
            rng_seed=seed,
            refine_iters=config.refine_iters,
        )
        outcome = _outcome(trace)
        if config.signals_out is not None:
            outcome.signals = DeconvSignals(
                arm=variant.value,
                trial=job.trial,
                observed=y,
                signal=model.x,
                fit=circular_convolve(model.x, model.kern),
                kernel=model.kern,
            )
        return outcome

    for v in Variant:
        _timed(job, config, v.value, lambda v=v: run(v), result)


def sample_quartic(rng: np.random.Generator, max_attempts: int = 1000) -> QuarticInstance:
    """Draw a quartic instance with exactly two local minima."""
    for _ in range(max_attempts):
        inst = QuarticInstance(
            y1=float(rng.uniform(*QUARTIC_Y1_RANGE)), y2=float(rng.uniform(*QUARTIC_Y2_RANGE))
        )
        if len(find_local_minima(inst)) == 2:
            return inst
    raise ParameterDomainError(f"no two-minimum quartic found in {max_attempts} draws")


def _run_quartic(job: TrialJob, config: ExperimentConfig, result: TrialResult) -> None:
    seed = job.seed(config)
    rng = np.random.default_rng(seed)
    inst = sample_quartic(rng)
    target = grid_global_minimum(inst)
    problem = QuarticProblem(inst)
    schedule = make_schedule(config.mu0, config.T)

    def finish(theta: float, trace: RunTrace) -> ArmOutcome:
        return _outcome(trace, success=abs(theta - target) < QUARTIC_SUCCESS_TOL)

    def alternating() -> ArmOutcome:
        return finish(*run_alternating(problem, max_iters=config.refine_iters, rng_seed=seed))

    def residual_expansion() -> ArmOutcome:
        return finish(*run_re(problem, schedule, refine_iters=config.refine_iters, rng_seed=seed))

    _timed(job, config, "alternating", alternating, result)
    _timed(job, config, "re", residual_expansion, result)


_RUNNERS = {
    "kmeans": _run_kmeans,
    "register": _run_register,
    "opq": _run_opq,
    "deconv": _run_deconv,
    "quartic": _run_quartic,
}


def run_trial(job: TrialJob, config: ExperimentConfig) -> TrialResult:
    """
    Run every arm of ``config.problem`` on one trial; arms share data and seed.

    When loading or generating the trial's data fails, every arm that has not run gets a
    failed report carrying the error, so one bad trial never aborts a batch.
    """
    result = TrialResult()
    try:
        _RUNNERS[config.problem](job, config, result)
    except _SETUP_FAILURES as e:
        error = f"{type(e).__name__}: {e}"
        done = {r.arm for r in result.reports}
        for arm in ARMS[config.problem]:
            if arm not in done:
                report = _blank_report(job, config, arm)
                report.error = error
                result.reports.append(report)
    return result


def build_jobs(config: ExperimentConfig) -> list[TrialJob]:
    """Trial jobs ordered by setting, then trial index."""
    if config.problem == "register":
        return [
            TrialJob(trial=i, setting=f"phi={angle:.6g}", angle=angle)
            for angle in config.angles
            for i in range(config.trials)
        ]
    return [TrialJob(trial=i, setting="") for i in range(config.trials)]


def attach_relative_errors(reports: list[TrialReport]) -> None:
    """
    Divide each objective by the mean k-means++ objective of its setting.

    Failed runs get no relative error and are left out of the mean.
    """
    baseline: dict[str, list[float]] = {}
    for r in reports:
        if r.arm == BASELINE_ARM and not r.failed:
            baseline.setdefault(r.setting, []).append(r.final_objective)

    for r in reports:
        values = baseline.get(r.setting)
        if r.failed or not values:
            continue
        mean = float(np.mean(values))
        if mean > 0.0:
            r.relative_error = r.final_objective / mean


def _stats(values: list[float]) -> tuple[float, float, float]:
    return float(np.mean(values)), float(np.min(values)), float(np.max(values))


def summarize(reports: list[TrialReport]) -> list[ArmSummary]:
    """
    Mean/min/max per (arm, setting), in first-appearance order.

    Success counts are reported for arms whose reports carry a success flag.
    """
    groups: dict[tuple[str, str], list[TrialReport]] = {}
    for r in reports:
        groups.setdefault((r.arm, r.setting), []).append(r)

    summaries = []
    for (arm, setting), group in groups.items():
        ok = [r for r in group if not r.failed]
        objectives = [r.final_objective for r in ok] or [math.nan]
        mean_obj, min_obj, max_obj = _stats(objectives)

        rel = [r.relative_error for r in ok if r.relative_error is not None]
        mean_rel, min_rel, max_rel = _stats(rel) if rel else (None, None, None)

        flags = [r.success for r in group if r.success is not None]
        successes = sum(flags) if flags else None

        summaries.append(
            ArmSummary(
                problem=group[0].problem,
                arm=arm,
                setting=setting,
                trials=len(group),
                failures=len(group) - len(ok),
                mean_objective=mean_obj,
                min_objective=min_obj,
                max_objective=max_obj,
                mean_relative_error=mean_rel,
                min_relative_error=min_rel,
                max_relative_error=max_rel,
                successes=successes,
                mean_iterations=float(np.mean([r.iterations for r in group])),
                mean_wall_ms=float(np.mean([r.wall_ms for r in group])),
            )
        )
    return summaries


class ExperimentService:
    """Runs one experiment configuration and writes its result files."""

    def __init__(self, config: ExperimentConfig):
        """
        Initialize the experiment service.

        Args:
            config: Experiment configuration; its format drives the result files
        """
        self.config = config
        self.files = ResultFileService(config.fmt)
        self.traces: list[TraceRow] = []
        self.signals: list[DeconvSignals] = []

    def run(self, show_progress: bool = True) -> list[TrialReport]:
        """
        Run all arms over all trials.

        Trials run in a process pool when ``config.workers > 1``; reports are ordered by
        setting, trial index and arm regardless of completion order. A failing arm or trial
        is recorded in the ``error`` field of its reports and the batch continues. Traces and
        deconvolution signals collected along the way are kept on the service.

        Args:
            show_progress: Show a progress bar on stderr

        Returns:
            Reports of every arm of every trial
        """
        config = self.config
        jobs = build_jobs(config)
        results: list[TrialResult | None] = [None] * len(jobs)

        with create_trial_progress(disable=not show_progress) as progress:
            task = progress.add_task(f"{config.problem}", total=len(jobs))
            if config.workers == 1:
                for idx, job in enumerate(jobs):
                    results[idx] = run_trial(job, config)
                    progress.update(task, advance=1)
            else:
                with ProcessPoolExecutor(max_workers=config.workers) as executor:
                    futures = {
                        executor.submit(run_trial, job, config): idx
                        for idx, job in enumerate(jobs)
                    }
                    for future in as_completed(futures):
                        results[futures[future]] = future.result()
                        progress.update(task, advance=1)

        reports = [r for result in results for r in result.reports]
        self.traces = [row for result in results for row in result.traces]
        self.signals = [s for result in results for s in result.signals]
        if config.problem == "kmeans":
            attach_relative_errors(reports)

        failed = sum(r.failed for r in reports)
        if failed:
            console.print(f"[yellow]Warning: {failed} of {len(reports)} runs failed[/yellow]")
        return reports

    def summarize(self, reports: list[TrialReport]) -> list[ArmSummary]:
        """Per-arm statistics of ``reports`` (see ``summarize``)."""
        return summarize(reports)

    def save(self, reports: list[TrialReport]) -> list[Path]:
        """
        Write every output the configuration asks for.

        Reports go to ``config.out``, traces to ``config.trace_out`` and deconvolution
        signals into ``config.signals_out``; unset paths are skipped.

        Returns:
            The written paths

        Raises:
            ParameterDomainError: If an output is requested but there is nothing to write
            OSError: If a path is not writable
        """
        config = self.config
        written = []
        if config.out is not None:
            written.append(self.files.emit(reports, config.out))
        if config.trace_out is not None:
            written.append(self.files.emit_traces(self.traces, config.trace_out))
        if config.signals_out is not None:
            written += self.files.emit_signals(self.signals, config.signals_out)
        return written


def run_experiment(config: ExperimentConfig, show_progress: bool = True) -> list[TrialReport]:
    """Run all arms over all trials (see ``ExperimentService.run``)."""
    return ExperimentService(config).run(show_progress)


def quartic_sweep(count: int, rng_seed: int = 0) -> list[QuarticRecord]:
    """
    Sample ``count`` two-minimum quartic instances and check each with the RE-constant rule.

    Each record also carries the grid-search global minimum for comparison.
    """
    if count < 1:
        raise ParameterDomainError(f"count must be >= 1, got {count}")
    rng = np.random.default_rng(rng_seed)
    records = []
    for index in range(count):
        inst = sample_quartic(rng)
        minima = find_local_minima(inst)
        records.append(
            QuarticRecord(
                index=index,
                y1=inst.y1,
                y2=inst.y2,
                minima=len(minima),
                verdict=check_deeper_minimum_dominates(inst),
                thetas=tuple(m.theta for m in minima),
                energies=tuple(m.energy for m in minima),
                re_constants=tuple(m.re_constant for m in minima),
                global_theta=grid_global_minimum(inst),
            )
        )
    return records
