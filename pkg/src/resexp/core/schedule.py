"""Penalty schedules and the mapping from ADMM penalty to expansion parameters."""

import math
import numbers
from dataclasses import dataclass

from resexp.core.errors import ParameterDomainError


@dataclass(frozen=True)
class ReParams:
    """Expansion magnitude ``alpha`` and residual momentum weight ``p``."""

    alpha: float
    p: float

    def __post_init__(self) -> None:
        if not 0.0 < self.p <= 1.0:
            raise ParameterDomainError(f"momentum p must lie in (0, 1], got {self.p}")
        if self.alpha < 0.0:
            raise ParameterDomainError(f"alpha must be >= 0, got {self.alpha}")

    @property
    def stability_factor(self) -> float:
        return stability_factor(self)


@dataclass(frozen=True)
class Schedule:
    """
    Geometric penalty ramp ``mu[t+1] = min(rho * mu[t], 1)`` ending exactly at 1.

    ``values`` holds ``T + 1`` entries, ``values[0] == mu0`` and ``values[T] == 1``.
    """

    mu0: float
    T: int
    rho: float
    values: tuple[float, ...]

    def __len__(self) -> int:
        return len(self.values)

    def params(self) -> list[ReParams]:
        """Expansion parameters for every scheduled penalty."""
        return [admm_params(mu) for mu in self.values]


def make_schedule(mu0: float, T: int) -> Schedule:
    """
    Build the penalty schedule for initial penalty ``mu0`` and ramp length ``T``.

    Args:
        mu0: Initial penalty in (0, 1]
        T: Number of ramp steps (>= 1)

    Returns:
        Schedule with ``rho = exp(-ln(mu0) / T)``, or ``inf`` where that overflows

    Raises:
        ParameterDomainError: If mu0 or T is out of range
    """
    if not (isinstance(mu0, numbers.Real) and math.isfinite(mu0)) or not 0.0 < mu0 <= 1.0:
        raise ParameterDomainError(f"mu0 must lie in (0, 1], got {mu0}")
    if isinstance(T, bool) or not isinstance(T, numbers.Integral) or T < 1:
        raise ParameterDomainError(f"T must be a positive integer, got {T}")

    try:
        rho = math.exp(-math.log(mu0) / T)
    except OverflowError:
        # Subnormal mu0 with a short ramp: the first step already reaches 1
        rho = math.inf
    values = [float(mu0)]
    for _ in range(T):
        values.append(min(rho * values[-1], 1.0))
    # Rounding in the repeated product can stop just short of 1
    values[-1] = 1.0

    return Schedule(mu0=float(mu0), T=int(T), rho=rho, values=tuple(values))


def admm_params(mu: float) -> ReParams:
    """
    Map an ADMM penalty to RE parameters: ``alpha = (1 - mu) / mu``, ``p = mu / (1 + mu)``.

    Raises:
        ParameterDomainError: If mu is not in (0, 1]
    """
    if not 0.0 < mu <= 1.0:
        raise ParameterDomainError(f"penalty mu must lie in (0, 1], got {mu}")
    return ReParams(alpha=(1.0 - mu) / mu, p=mu / (1.0 + mu))


def stability_factor(params: ReParams) -> float:
    """Return ``(1 - p - alpha * p) ** 2``; values above 1 indicate a diverging run."""
    return (1.0 - params.p - params.alpha * params.p) ** 2
