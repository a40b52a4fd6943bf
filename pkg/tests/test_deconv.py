"""Tests for blind deconvolution."""

import numpy as np
import pytest

from resexp.core.errors import IllPosedError, ParameterDomainError
from resexp.core.schedule import make_schedule
from resexp.models.problems import DeconvModel
from resexp.problems.deconv import (
    DeconvProblem,
    circular_convolve,
    conv_matrix,
    deconv_step,
    kernel_matrix,
    project_simplex,
    second_difference,
    solve_deconv,
    solve_kernel,
    solve_signal,
)
from resexp.utils.datasets import gen_blind_deconv


def test_circular_convolution_example() -> None:
    out = circular_convolve([1.0, 2.0, 3.0, 4.0], [0.5, 0.5])
    np.testing.assert_allclose(out, [2.5, 1.5, 2.5, 3.5])


def test_delta_kernel_is_identity(rng) -> None:
    x = rng.standard_normal(12)
    np.testing.assert_array_equal(circular_convolve(x, [1.0]), x)


def test_convolution_is_linear(rng) -> None:
    x1, x2 = rng.standard_normal(16), rng.standard_normal(16)
    kern = rng.standard_normal(5)
    np.testing.assert_allclose(
        circular_convolve(2.0 * x1 - x2, kern),
        2.0 * circular_convolve(x1, kern) - circular_convolve(x2, kern),
    )


def test_matrix_forms_agree(rng) -> None:
    x = rng.standard_normal(10)
    kern = rng.standard_normal(4)
    expected = circular_convolve(x, kern)
    np.testing.assert_allclose(conv_matrix(kern, 10) @ x, expected)
    np.testing.assert_allclose(kernel_matrix(x, 4) @ kern, expected)


def test_kernel_longer_than_signal() -> None:
    with pytest.raises(ParameterDomainError):
        circular_convolve(np.ones(3), np.ones(4))
    with pytest.raises(ParameterDomainError):
        DeconvProblem(np.ones(3), 4)


def test_second_difference_kills_constants() -> None:
    np.testing.assert_allclose(second_difference(6) @ np.full(6, 2.5), 0.0)


def test_signal_solve_matches_dense_least_squares(rng) -> None:
    n, weight = 24, 0.3
    y = rng.standard_normal(n)
    kern = rng.uniform(0.1, 1.0, 5)
    stacked = np.vstack([conv_matrix(kern, n), np.sqrt(weight) * second_difference(n)])
    rhs = np.concatenate([y, np.zeros(n)])
    expected = np.linalg.lstsq(stacked, rhs, rcond=None)[0]
    np.testing.assert_allclose(solve_signal(y, kern, weight), expected, atol=1e-9)


def test_kernel_solve_matches_dense_least_squares(rng) -> None:
    n, L, weight = 20, 4, 0.2
    y = rng.standard_normal(n)
    x = rng.standard_normal(n)
    stacked = np.vstack([kernel_matrix(x, L), np.sqrt(weight) * np.eye(L)])
    rhs = np.concatenate([y, np.zeros(L)])
    expected = np.linalg.lstsq(stacked, rhs, rcond=None)[0]
    np.testing.assert_allclose(solve_kernel(y, x, L, weight), expected, atol=1e-9)


def test_singular_kernel_system_is_ill_posed() -> None:
    with pytest.raises(IllPosedError):
        solve_kernel(np.ones(8), np.zeros(8), 3, 0.0)


def test_step_with_penalty_matches_unnormalized_system(rng) -> None:
    n, mu, gamma_x, gamma_k = 16, 0.25, 0.1, 0.05
    y = rng.standard_normal(n)
    model = DeconvModel(x=rng.standard_normal(n), kern=np.array([0.5, 0.3, 0.2]))
    stepped = deconv_step(y, model, mu, gamma_x, gamma_k, project=False)

    A = conv_matrix(model.kern, n)
    D = second_difference(n)
    x = np.linalg.solve(mu * A.T @ A + gamma_x * D.T @ D, mu * A.T @ y)
    np.testing.assert_allclose(stepped.x, x, atol=1e-9)

    B = kernel_matrix(x, 3)
    kern = np.linalg.solve(mu * B.T @ B + gamma_k * np.eye(3), mu * B.T @ y)
    np.testing.assert_allclose(stepped.kern, kern, atol=1e-9)


def test_step_scaling_identity(rng) -> None:
    y = rng.standard_normal(16)
    model = DeconvModel(x=rng.standard_normal(16), kern=np.full(3, 1.0 / 3.0))
    a = deconv_step(y, model, 0.2, 0.1, 0.05)
    b = deconv_step(y, model, 1.0, 0.1 / 0.2, 0.05 / 0.2)
    np.testing.assert_array_equal(a.x, b.x)
    np.testing.assert_array_equal(a.kern, b.kern)


def test_ground_truth_is_fixed_point_without_regularization(rng) -> None:
    x = rng.standard_normal(32)
    kern = np.array([0.6, 0.4])
    y = circular_convolve(x, kern)
    stepped = deconv_step(y, DeconvModel(x=x, kern=kern))
    np.testing.assert_allclose(stepped.x, x, atol=1e-8)
    np.testing.assert_allclose(stepped.kern, kern, atol=1e-8)


@pytest.mark.parametrize(("mu", "gamma_x", "gamma_k"), [(0.0, 0.1, 0.1), (1.0, -0.1, 0.0)])
def test_step_rejects_bad_parameters(mu: float, gamma_x: float, gamma_k: float) -> None:
    model = DeconvModel(x=np.ones(8), kern=np.full(2, 0.5))
    with pytest.raises(ParameterDomainError):
        deconv_step(np.ones(8), model, mu, gamma_x, gamma_k)


@pytest.mark.parametrize(
    ("v", "expected"),
    [
        ([0.5, 0.5], [0.5, 0.5]),
        ([2.0, 0.0], [1.0, 0.0]),
        ([1.0, 1.0, 1.0], [1 / 3, 1 / 3, 1 / 3]),
        ([-1.0, 0.2, 0.4], [0.0, 0.4, 0.6]),
    ],
)
def test_project_simplex(v, expected) -> None:
    np.testing.assert_allclose(project_simplex(v), expected, atol=1e-12)


def test_project_simplex_invariants(rng) -> None:
    for _ in range(50):
        out = project_simplex(rng.normal(scale=3.0, size=7))
        assert np.all(out >= 0.0)
        assert out.sum() == pytest.approx(1.0)
        np.testing.assert_allclose(project_simplex(out), out, atol=1e-12)


def test_unprojected_alternating_is_monotone() -> None:
    data = gen_blind_deconv(n=64, L=5, rng_seed=2)
    _, trace = solve_deconv(data.y, 5, None, project=False, refine_iters=30)
    objectives = trace.true_objectives
    assert np.all(np.diff(objectives) <= 1e-9 * objectives[0])


@pytest.mark.parametrize("variant", ["alg1", "alg2"])
def test_expansion_run_keeps_kernel_on_simplex(variant: str) -> None:
    data = gen_blind_deconv(n=64, L=5, rng_seed=4)
    model, trace = solve_deconv(data.y, 5, make_schedule(0.1, 20), variant=variant)
    assert np.all(model.kern >= 0.0)
    assert model.kern.sum() == pytest.approx(1.0)
    assert np.all(np.isfinite(trace.true_objectives))


def test_regularizer_weights() -> None:
    problem = DeconvProblem(np.zeros(4), 2, gamma_x=2.0, gamma_k=4.0)
    model = DeconvModel(x=np.array([0.0, 1.0, 0.0, 0.0]), kern=np.array([1.0, 0.0]))
    # |D x|^2 = 1 + 4 + 1
    assert problem.regularizer(model) == pytest.approx(0.5 * 2.0 * 6.0 + 0.5 * 4.0 * 1.0)


@pytest.mark.parametrize("variant", ["alg1", "alg2"])
def test_unit_schedule_matches_alternating(variant: str) -> None:
    data = gen_blind_deconv(n=48, L=5, rng_seed=6)
    _, plain = solve_deconv(data.y, 5, None, refine_iters=20)
    _, expanded = solve_deconv(data.y, 5, make_schedule(1.0, 8), variant=variant, refine_iters=20)
    length = min(plain.iterations, expanded.iterations)
    np.testing.assert_allclose(
        plain.true_objectives[:length], expanded.true_objectives[:length], rtol=1e-12
    )
