"""
One-dimensional quartic least squares ``E(theta) = 1/2 ((y1 - theta^2)^2 + (y2 - theta)^2)``.

Closed-form critical points, RE constants from the sign of the expanded curvature, and
a check that the minimum with the larger RE constant is the global one.
"""

import math

import numpy as np

from resexp.core.engine import LsProblem
from resexp.core.errors import ParameterDomainError
from resexp.models.problems import CriticalPoint, PointKind, QuarticInstance, Verdict

IMAG_CUTOFF = 1e-12
CURVATURE_CUTOFF = 1e-10
STATIONARY_TOL = 1e-8
# Gradient magnitude treated as exactly stationary inside the inner sweep
_SWEEP_STATIONARY_TOL = 1e-10


def energy(inst: QuarticInstance, theta):
    return 0.5 * ((inst.y1 - theta**2) ** 2 + (inst.y2 - theta) ** 2)


def gradient(inst: QuarticInstance, theta):
    """``dE/dtheta = 2 theta^3 + (1 - 2 y1) theta - y2``."""
    return 2.0 * theta**3 + (1.0 - 2.0 * inst.y1) * theta - inst.y2


def curvature(inst: QuarticInstance, theta):
    """``d2E/dtheta2 = 6 theta^2 + 1 - 2 y1``."""
    return 6.0 * theta**2 + 1.0 - 2.0 * inst.y1


def expanded_instance(inst: QuarticInstance, theta_star: float, alpha: float) -> QuarticInstance:
    """Targets expanded along the residual at ``theta_star``: ``y + alpha (y - f(theta*))``."""
    return QuarticInstance(
        y1=inst.y1 + alpha * (inst.y1 - theta_star**2),
        y2=inst.y2 + alpha * (inst.y2 - theta_star),
    )


def expanded_energy(inst: QuarticInstance, theta, theta_star: float, alpha: float):
    return energy(expanded_instance(inst, theta_star, alpha), theta)


def expanded_curvature(inst: QuarticInstance, theta_star: float, alpha: float) -> float:
    """
    Second derivative of the expanded energy at ``theta_star``.

    ``H(alpha) = (4 theta^2 + 1) - 2 (1 + alpha) (y1 - theta^2)``: the Gauss-Newton term
    minus the residual-weighted curvature of ``f``.
    """
    return (4.0 * theta_star**2 + 1.0) - 2.0 * (1.0 + alpha) * (inst.y1 - theta_star**2)


def _classify(inst: QuarticInstance, theta: float) -> PointKind:
    c = curvature(inst, theta)
    if c > CURVATURE_CUTOFF:
        return PointKind.MINIMUM
    if c < -CURVATURE_CUTOFF:
        return PointKind.MAXIMUM
    return PointKind.DEGENERATE


def _polish(inst: QuarticInstance, theta: float, steps: int = 3) -> float:
    for _ in range(steps):
        slope = curvature(inst, theta)
        if slope == 0.0:
            break
        theta = theta - gradient(inst, theta) / slope
    return theta


def stationary_thetas(inst: QuarticInstance) -> list[float]:
    """Real roots of ``dE/dtheta`` (companion-matrix eigenvalues, Newton-polished), ascending."""
    roots = np.roots([2.0, 0.0, 1.0 - 2.0 * inst.y1, -inst.y2])
    real = sorted(_polish(inst, float(z.real)) for z in roots if abs(z.imag) < IMAG_CUTOFF)

    distinct: list[float] = []
    for theta in real:
        if not distinct or abs(theta - distinct[-1]) > 1e-9:
            distinct.append(theta)
    return distinct


def _gradient_scale(inst: QuarticInstance, theta: float) -> float:
    """Magnitude of the largest term of ``dE/dtheta``; rounding error grows with it."""
    return max(1.0, 2.0 * abs(theta) ** 3, abs((1.0 - 2.0 * inst.y1) * theta), abs(inst.y2))


def re_constant(inst: QuarticInstance, theta_star: float) -> float:
    """
    Largest expansion that keeps ``theta_star`` a local minimum.

    Args:
        inst: Quartic instance
        theta_star: A local minimum of ``inst``

    Returns:
        ``inf`` when ``y1 - theta^2 <= 0``, else ``(4 theta^2 + 1) / (2 (y1 - theta^2)) - 1``
        clamped at 0

    Raises:
        ParameterDomainError: If theta_star is not stationary (relative to the size of
            the gradient terms)
    """
    if abs(gradient(inst, theta_star)) > STATIONARY_TOL * _gradient_scale(inst, theta_star):
        raise ParameterDomainError(
            f"theta={theta_star} is not a stationary point (dE/dtheta="
            f"{gradient(inst, theta_star):.3e})"
        )
    s = inst.y1 - theta_star**2
    if s <= 0.0:
        return math.inf
    return max(0.0, (4.0 * theta_star**2 + 1.0) / (2.0 * s) - 1.0)


def find_local_minima(inst: QuarticInstance) -> list[CriticalPoint]:
    """
    All local minima of the quartic energy, ascending in theta.

    Double roots with vanishing curvature are not minima.
    """
    minima = []
    for theta in stationary_thetas(inst):
        if _classify(inst, theta) is PointKind.MINIMUM:
            minima.append(
                CriticalPoint(
                    theta=theta,
                    energy=float(energy(inst, theta)),
                    re_constant=re_constant(inst, theta),
                    kind=PointKind.MINIMUM,
                )
            )
    return minima


def _same(a: float, b: float, rel: float) -> bool:
    if math.isinf(a) or math.isinf(b):
        return a == b
    return abs(a - b) <= rel * max(1.0, abs(a), abs(b))


def check_deeper_minimum_dominates(inst: QuarticInstance) -> Verdict:
    """
    Check that the minimum with the strictly larger RE constant has the smaller energy.

    Equal constants with equal energies count as holding; equal constants with unequal
    energies are reported as ``COINCIDENT``.
    """
    minima = find_local_minima(inst)
    if len(minima) != 2:
        return Verdict.NOT_APPLICABLE

    first, second = minima
    same_energy = _same(first.energy, second.energy, 1e-12)
    if _same(first.re_constant, second.re_constant, 1e-9):
        return Verdict.HOLDS if same_energy else Verdict.COINCIDENT

    deeper, shallower = (
        (first, second) if first.re_constant > second.re_constant else (second, first)
    )
    if not same_energy and deeper.energy < shallower.energy:
        return Verdict.HOLDS
    return Verdict.VIOLATED


def grid_global_minimum(
    inst: QuarticInstance, lo: float = -3.0, hi: float = 3.0, num: int = 60001
) -> float:
    """Location of the smallest energy on a dense grid (independent oracle)."""
    grid = np.linspace(lo, hi, num)
    return float(grid[np.argmin(energy(inst, grid))])


def descend(inst: QuarticInstance, theta: float) -> float:
    """
    Exact local minimization from ``theta``: follow the downhill direction to the next root.

    At a stationary point that is not a minimum the lower of the two adjacent minima is taken.
    """
    roots = stationary_thetas(inst)
    g = gradient(inst, theta)

    if abs(g) <= _SWEEP_STATIONARY_TOL:
        if curvature(inst, theta) > 0.0:
            return theta
        left = [r for r in roots if r < theta and _classify(inst, r) is PointKind.MINIMUM]
        right = [r for r in roots if r > theta and _classify(inst, r) is PointKind.MINIMUM]
        candidates = ([left[-1]] if left else []) + ([right[0]] if right else [])
        if not candidates:
            return theta
        return min(candidates, key=lambda r: energy(inst, r))

    if g > 0.0:
        below = [r for r in roots if r < theta]
        return below[-1] if below else theta
    above = [r for r in roots if r > theta]
    return above[0] if above else theta


class QuarticProblem(LsProblem[float]):
    """The quartic as a least-squares problem: ``y = (y1, y2)``, ``f(theta) = (theta^2, theta)``."""

    def __init__(self, inst: QuarticInstance, init_range: tuple[float, float] = (-2.0, 2.0)):
        self.inst = inst
        self.init_range = init_range
        self._y = np.array([inst.y1, inst.y2])

    def target(self) -> np.ndarray:
        return self._y.copy()

    def predict(self, theta: float) -> np.ndarray:
        return np.array([theta**2, theta])

    def initialize(self, rng: np.random.Generator) -> float:
        return float(rng.uniform(*self.init_range))

    def inner_update(
        self, theta: float, y_hat: np.ndarray, mu: float = 1.0, gamma: float = 0.0
    ) -> float:
        return descend(QuarticInstance(float(y_hat[0]), float(y_hat[1])), theta)
