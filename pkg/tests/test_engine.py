"""Tests for the residual expansion engine."""

import numpy as np
import pytest

from resexp.core.engine import (
    ExpansionState,
    LsProblem,
    Variant,
    expand_target,
    run_alternating,
    run_re,
    run_re_with_params,
    update_residual,
)
from resexp.core.errors import DimensionMismatchError, IllPosedError, RunFailure
from resexp.core.schedule import ReParams, admm_params, make_schedule
from resexp.problems.kmeans import KMeansProblem


class LinearProblem(LsProblem[np.ndarray]):
    """``f(theta) = A theta`` solved exactly by least squares each sweep."""

    def __init__(self, A: np.ndarray, y: np.ndarray, fail_at: int | None = None):
        self.A = A
        self.y = y
        self.fail_at = fail_at
        self.calls = 0

    def target(self) -> np.ndarray:
        return self.y

    def predict(self, theta: np.ndarray) -> np.ndarray:
        return self.A @ theta

    def initialize(self, rng: np.random.Generator) -> np.ndarray:
        return rng.standard_normal(self.A.shape[1])

    def inner_update(self, theta, y_hat, mu=1.0, gamma=0.0):
        if self.fail_at is not None and self.calls == self.fail_at:
            raise IllPosedError("singular")
        self.calls += 1
        return np.linalg.lstsq(self.A, y_hat, rcond=None)[0]


@pytest.fixture
def linear(rng) -> LinearProblem:
    A = rng.standard_normal((6, 2))
    return LinearProblem(A, rng.standard_normal(6))


def test_initial_state() -> None:
    state = ExpansionState.initial([1.0, 2.0])
    assert state.t == 0
    np.testing.assert_array_equal(state.r, [0.0, 0.0])
    np.testing.assert_array_equal(state.y_hat, [1.0, 2.0])


@pytest.mark.parametrize(
    ("y", "f", "r", "p", "expected"),
    [
        ([3.0, 1.0], [1.0, 1.0], [5.0, 5.0], 1.0, [2.0, 0.0]),
        ([1.0, 2.0], [1.0, 2.0], [0.0, 0.0], 0.4, [0.0, 0.0]),
        ([2.0], [0.0], [0.0], 0.5, [1.0]),
    ],
)
def test_update_residual(y, f, r, p, expected) -> None:
    state = ExpansionState(r=np.array(r), y_hat=np.array(y), t=3)
    updated = update_residual(state, np.array(y), np.array(f), p)
    np.testing.assert_allclose(updated.r, expected)
    assert updated.t == 4


def test_update_residual_rejects_mismatch() -> None:
    state = ExpansionState.initial([0.0, 0.0])
    with pytest.raises(DimensionMismatchError):
        update_residual(state, np.zeros(2), np.zeros(3), 0.5)


@pytest.mark.parametrize(
    ("y", "r", "alpha", "expected"),
    [
        ([1.0, 2.0], [5.0, -5.0], 0.0, [1.0, 2.0]),
        ([1.0, 0.0], [1.0, 0.0], 2.0, [3.0, 0.0]),
        ([0.0], [-1.0], 1.0, [-1.0]),
    ],
)
def test_expand_target(y, r, alpha, expected) -> None:
    np.testing.assert_allclose(expand_target(np.array(y), np.array(r), alpha), expected)


def test_expand_target_rejects_mismatch() -> None:
    with pytest.raises(DimensionMismatchError):
        expand_target(np.zeros(2), np.zeros(1), 1.0)


def test_trace_layout(linear) -> None:
    schedule = make_schedule(0.2, 8)
    _, trace = run_re(linear, schedule, refine_iters=5)
    assert trace.iterations >= schedule.T
    assert [rec.t for rec in trace.records] == list(range(trace.iterations))
    assert [rec.mu for rec in trace.records[: schedule.T]] == list(schedule.values[: schedule.T])
    assert all(rec.mu == 1.0 for rec in trace.records[schedule.T :])


def test_exact_fit_is_fixed_point(rng) -> None:
    A = rng.standard_normal((5, 2))
    theta_true = np.array([0.5, -1.5])
    problem = LinearProblem(A, A @ theta_true)
    theta, trace = run_re(problem, make_schedule(0.1, 5), theta0=theta_true, refine_iters=0)
    np.testing.assert_allclose(theta, theta_true, atol=1e-12)
    assert all(rec.true_objective < 1e-20 for rec in trace.records)


def test_inner_failure_reports_iteration(rng) -> None:
    problem = LinearProblem(rng.standard_normal((4, 2)), rng.standard_normal(4), fail_at=3)
    with pytest.raises(RunFailure) as excinfo:
        run_re(problem, make_schedule(0.1, 10))
    assert excinfo.value.iteration == 3
    assert isinstance(excinfo.value.__cause__, IllPosedError)


def test_alg2_scales_recorded_expanded_objective(linear) -> None:
    schedule = make_schedule(0.25, 4)
    _, trace1 = run_re(linear, schedule, Variant.ALG1, refine_iters=0, rng_seed=5)
    _, trace2 = run_re(linear, schedule, Variant.ALG2, refine_iters=0, rng_seed=5)
    first1, first2 = trace1.records[0], trace2.records[0]
    assert first2.expanded_objective == pytest.approx(0.25 * first1.expanded_objective)
    assert first1.true_objective == pytest.approx(first2.true_objective)


def test_unit_schedule_matches_alternating(blobs) -> None:
    problem = KMeansProblem(blobs, 5)
    _, expanded = run_re(problem, make_schedule(1.0, 10), refine_iters=0, record_iterates=True)
    _, plain = run_alternating(problem, max_iters=10, record_iterates=True)
    for a, b in zip(expanded.iterates, plain.iterates):
        np.testing.assert_array_equal(a.centroids, b.centroids)
        np.testing.assert_array_equal(a.labels, b.labels)


def test_admm_schedule_equals_explicit_parameters(blobs) -> None:
    problem = KMeansProblem(blobs, 5)
    schedule = make_schedule(0.05, 50)
    params = [admm_params(mu) for mu in schedule.values[:-1]]

    _, via_schedule = run_re(problem, schedule, refine_iters=0, rng_seed=2, record_iterates=True)
    _, via_params = run_re_with_params(
        problem, params, refine_iters=0, rng_seed=2, record_iterates=True
    )
    assert len(via_schedule.iterates) == len(via_params.iterates) == 50
    for a, b in zip(via_schedule.iterates, via_params.iterates):
        scale = max(1.0, float(np.max(np.abs(a.centroids))))
        assert float(np.max(np.abs(a.centroids - b.centroids))) / scale < 1e-10


def test_unstable_parameters_warn(linear, capsys) -> None:
    run_re_with_params(linear, [ReParams(alpha=9.0, p=1.0)], refine_iters=0)
    err = capsys.readouterr().err
    assert "Warning" in err
    assert "iteration 0" in err


def test_refinement_is_monotone(blobs) -> None:
    schedule = make_schedule(0.1, 10)
    _, trace = run_re(KMeansProblem(blobs, 5), schedule, refine_iters=50)
    tail = trace.true_objectives[schedule.T :]
    assert np.all(np.diff(tail) <= 1e-9)


def test_runs_replay_per_seed(blobs) -> None:
    schedule = make_schedule(0.1, 10)
    first, trace_a = run_re(KMeansProblem(blobs, 5), schedule, rng_seed=11)
    second, trace_b = run_re(KMeansProblem(blobs, 5), schedule, rng_seed=11)
    np.testing.assert_array_equal(first.centroids, second.centroids)
    np.testing.assert_array_equal(trace_a.true_objectives, trace_b.true_objectives)
