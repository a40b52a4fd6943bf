"""
Regularized blind 1-D deconvolution with circular boundaries.

Observation model ``y = x (*) kern + noise``; the regularized objective is
``1/2 |y - x (*) kern|^2 + gamma R(x, kern)`` with
``R = 1/2 gamma_x |D x|^2 + 1/2 gamma_k |kern|^2`` and ``D`` the circular second difference.
"""

import numpy as np
from scipy.linalg import LinAlgError, circulant, solve

from resexp.core.config import REFINE_ITERS
from resexp.core.engine import LsProblem, RunTrace, Variant, run_alternating, run_re
from resexp.core.errors import IllPosedError, ParameterDomainError
from resexp.core.schedule import Schedule
from resexp.models.problems import DeconvModel
from resexp.utils.validators import as_vector


def _check_kernel_length(L: int, n: int) -> None:
    if L < 1:
        raise ParameterDomainError(f"kernel length must be >= 1, got {L}")
    if L > n:
        raise ParameterDomainError(f"kernel length {L} exceeds signal length {n}")


def circular_convolve(x: np.ndarray, kern: np.ndarray) -> np.ndarray:
    """
    Circular convolution ``out_i = sum_j kern_j x_{(i - j) mod n}``.

    Raises:
        ParameterDomainError: If the kernel is longer than the signal
    """
    x = as_vector(x, "x")
    kern = as_vector(kern, "kern")
    _check_kernel_length(kern.shape[0], x.shape[0])
    out = np.zeros_like(x)
    for j, weight in enumerate(kern):
        out += weight * np.roll(x, j)
    return out


def conv_matrix(kern: np.ndarray, n: int) -> np.ndarray:
    """``A`` with ``A @ x == circular_convolve(x, kern)``."""
    kern = as_vector(kern, "kern")
    _check_kernel_length(kern.shape[0], n)
    column = np.zeros(n)
    column[: kern.shape[0]] = kern
    return circulant(column)


def kernel_matrix(x: np.ndarray, L: int) -> np.ndarray:
    """``B`` with ``B @ kern == circular_convolve(x, kern)`` for kernels of length ``L``."""
    x = as_vector(x, "x")
    _check_kernel_length(L, x.shape[0])
    return circulant(x)[:, :L]


def second_difference(n: int) -> np.ndarray:
    """Circular second-difference operator ``(D x)_i = x_{i-1} - 2 x_i + x_{i+1}``."""
    column = np.zeros(n)
    column[0] -= 2.0
    column[1 % n] += 1.0
    column[-1] += 1.0
    return circulant(column)


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto ``{k : k >= 0, sum k = 1}`` (sort-based)."""
    v = as_vector(v, "v")
    u = np.sort(v)[::-1]
    cumulative = np.cumsum(u) - 1.0
    ranks = np.arange(1, v.shape[0] + 1)
    rho = np.flatnonzero(u - cumulative / ranks > 0.0)[-1]
    shift = cumulative[rho] / (rho + 1.0)
    return np.maximum(v - shift, 0.0)


def _solve_sym(lhs: np.ndarray, rhs: np.ndarray, what: str) -> np.ndarray:
    try:
        sol = solve(lhs, rhs, assume_a="sym")
    except LinAlgError as e:
        raise IllPosedError(f"{what} system is singular: {e}") from e
    if not np.all(np.isfinite(sol)):
        raise IllPosedError(f"{what} system produced non-finite values")
    return sol


def solve_signal(y_hat: np.ndarray, kern: np.ndarray, weight_x: float) -> np.ndarray:
    """Minimizer of ``1/2 |y_hat - A x|^2 + weight_x / 2 |D x|^2`` over ``x``."""
    n = y_hat.shape[0]
    A = conv_matrix(kern, n)
    D = second_difference(n)
    return _solve_sym(A.T @ A + weight_x * (D.T @ D), A.T @ y_hat, "signal")


def solve_kernel(y_hat: np.ndarray, x: np.ndarray, L: int, weight_k: float) -> np.ndarray:
    """Minimizer of ``1/2 |y_hat - B k|^2 + weight_k / 2 |k|^2`` over ``k``."""
    B = kernel_matrix(x, L)
    return _solve_sym(B.T @ B + weight_k * np.eye(L), B.T @ y_hat, "kernel")


def deconv_step(
    y_hat: np.ndarray,
    model: DeconvModel,
    mu: float = 1.0,
    gamma_x: float = 0.0,
    gamma_k: float = 0.0,
    project: bool = True,
) -> DeconvModel:
    """
    One alternating sweep on ``mu/2 |y_hat - x (*) kern|^2 + gamma R``: signal, then kernel.

    The objective is divided by ``mu`` before solving, so the data term always has unit
    weight and the regularizer weights become ``gamma / mu``.

    Args:
        y_hat: Expanded observation (length n)
        model: Current signal and kernel
        mu: Data-term coefficient (1 for alg1)
        gamma_x: Smoothness weight on the signal
        gamma_k: Ridge weight on the kernel
        project: Project the kernel onto the simplex after solving

    Returns:
        Updated model

    Raises:
        ParameterDomainError: If mu <= 0 or a weight is negative
        IllPosedError: If a linear sub-problem is singular
    """
    if mu <= 0.0:
        raise ParameterDomainError(f"mu must be > 0, got {mu}")
    if gamma_x < 0.0 or gamma_k < 0.0:
        raise ParameterDomainError(
            f"regularization weights must be >= 0, got {gamma_x}, {gamma_k}"
        )
    y_hat = as_vector(y_hat, "y_hat")
    L = model.kern.shape[0]

    x = solve_signal(y_hat, model.kern, gamma_x / mu)
    kern = solve_kernel(y_hat, x, L, gamma_k / mu)
    if project:
        kern = project_simplex(kern)
    return DeconvModel(x=x, kern=kern)


class DeconvProblem(LsProblem[DeconvModel]):
    """
    Blind deconvolution as regularized least squares, ``f(x, kern) = x (*) kern``.

    The engine's ``gamma`` multiplies ``R``; solve with ``gamma = 1`` to use the stored weights.
    """

    def __init__(
        self,
        y: np.ndarray,
        L: int,
        gamma_x: float = 0.0,
        gamma_k: float = 0.0,
        project: bool = True,
    ):
        self.y = as_vector(y, "y")
        _check_kernel_length(L, self.y.shape[0])
        self.L = L
        self.gamma_x = gamma_x
        self.gamma_k = gamma_k
        self.project = project
        self._D = second_difference(self.y.shape[0])

    def target(self) -> np.ndarray:
        return self.y

    def predict(self, theta: DeconvModel) -> np.ndarray:
        return circular_convolve(theta.x, theta.kern)

    def initialize(self, rng: np.random.Generator) -> DeconvModel:
        return DeconvModel(x=self.y.copy(), kern=np.full(self.L, 1.0 / self.L))

    def regularizer(self, theta: DeconvModel) -> float:
        dx = self._D @ theta.x
        return 0.5 * self.gamma_x * float(dx @ dx) + 0.5 * self.gamma_k * float(
            theta.kern @ theta.kern
        )

    def inner_update(
        self, theta: DeconvModel, y_hat: np.ndarray, mu: float = 1.0, gamma: float = 0.0
    ) -> DeconvModel:
        return deconv_step(
            y_hat, theta, mu, gamma * self.gamma_x, gamma * self.gamma_k, self.project
        )


def solve_deconv(
    y: np.ndarray,
    L: int,
    schedule: Schedule | None,
    variant: Variant | str = Variant.ALG2,
    gamma_x: float = 0.05,
    gamma_k: float = 0.01,
    rng_seed: int = 0,
    refine_iters: int = REFINE_ITERS,
    project: bool = True,
) -> tuple[DeconvModel, RunTrace]:
    """
    Blind deconvolution by residual expansion (or plain alternating when ``schedule`` is None).

    Starts from ``x = y`` and a uniform kernel. The trace records the regularized objective.
    """
    problem = DeconvProblem(y, L, gamma_x, gamma_k, project)
    if schedule is None:
        return run_alternating(problem, max_iters=refine_iters, gamma=1.0, rng_seed=rng_seed)
    return run_re(
        problem,
        schedule,
        variant=variant,
        gamma=1.0,
        refine_iters=refine_iters,
        rng_seed=rng_seed,
    )
