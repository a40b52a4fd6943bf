"""
Residual expansion engine.

The engine alternates between one inner sweep of a problem against an expanded target
and a momentum update of the residual. The per-iteration expansion magnitude and momentum
come from the ADMM penalty schedule; a trailing refinement phase runs plain alternating
optimization at ``mu = 1``.
"""

from abc import ABC, abstractmethod
from collections.abc import Sequence
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Generic, TypeVar

import numpy as np
from rich.console import Console

from resexp.core.config import REFINE_ITERS, REFINE_TOL
from resexp.core.errors import IllPosedError, RunFailure
from resexp.core.schedule import ReParams, Schedule, admm_params
from resexp.utils.validators import as_vector, check_same_length

console = Console(stderr=True)

Theta = TypeVar("Theta")

# Failures raised by inner solvers that the engine reports as a run failure
_INNER_FAILURES = (IllPosedError, ArithmeticError, ValueError, np.linalg.LinAlgError)


class Variant(str, Enum):
    """Which expanded objective the inner sweep minimizes."""

    ALG1 = "alg1"  # 1/2 |y_hat - f|^2 + gamma R
    ALG2 = "alg2"  # mu/2 |y_hat - f|^2 + gamma R


@dataclass(frozen=True)
class ExpansionState:
    """Residual momentum ``r``, expanded target ``y_hat`` and outer iteration ``t``."""

    r: np.ndarray
    y_hat: np.ndarray
    t: int = 0

    @classmethod
    def initial(cls, y: np.ndarray) -> "ExpansionState":
        """State before the first iteration: ``r = 0``, ``y_hat = y``."""
        y = as_vector(y, "y")
        return cls(r=np.zeros_like(y), y_hat=y.copy(), t=0)


class LsProblem(ABC, Generic[Theta]):
    """
    A least-squares problem ``E(theta) = 1/2 |y - f(theta)|^2 (+ gamma R(theta))``.

    Subclasses are immutable after construction so one instance can be shared by
    independent runs.
    """

    @abstractmethod
    def target(self) -> np.ndarray:
        """Flat target vector ``y``."""

    @abstractmethod
    def predict(self, theta: Theta) -> np.ndarray:
        """Flat prediction ``f(theta)``, same length as ``target()``."""

    @abstractmethod
    def initialize(self, rng: np.random.Generator) -> Theta:
        """Initial parameters drawn from ``rng``."""

    @abstractmethod
    def inner_update(
        self, theta: Theta, y_hat: np.ndarray, mu: float = 1.0, gamma: float = 0.0
    ) -> Theta:
        """
        One alternating-minimization sweep of ``mu/2 |y_hat - f|^2 + gamma R``.

        Args:
            theta: Current parameters
            y_hat: Expanded target, same length as ``target()``
            mu: Coefficient of the data term
            gamma: Regularization weight

        Returns:
            Updated parameters (the input is not modified)
        """

    def regularizer(self, theta: Theta) -> float:
        return 0.0

    def residual(self, theta: Theta) -> np.ndarray:
        return self.target() - self.predict(theta)

    def true_objective(self, theta: Theta, gamma: float = 0.0) -> float:
        """Unexpanded objective ``1/2 |y - f(theta)|^2 + gamma R(theta)``."""
        r = self.residual(theta)
        value = 0.5 * float(r @ r)
        if gamma:
            value += gamma * self.regularizer(theta)
        return value

    def has_converged(
        self, old: Theta, new: Theta, old_objective: float, new_objective: float
    ) -> bool:
        """Stopping test for the plain alternating phase."""
        return abs(old_objective - new_objective) < REFINE_TOL


@dataclass(frozen=True)
class TraceRecord:
    """Objectives after one outer iteration."""

    t: int
    mu: float
    expanded_objective: float
    true_objective: float


@dataclass
class RunTrace:
    """Everything recorded during one run."""

    records: list[TraceRecord] = field(default_factory=list)
    theta: Any = None
    converged: bool = False
    iterates: list[Any] | None = None

    @property
    def iterations(self) -> int:
        return len(self.records)

    @property
    def true_objectives(self) -> np.ndarray:
        return np.array([rec.true_objective for rec in self.records])

    @property
    def final_objective(self) -> float:
        if not self.records:
            return float("nan")
        return self.records[-1].true_objective


def update_residual(
    state: ExpansionState, y: np.ndarray, f_theta: np.ndarray, p: float
) -> ExpansionState:
    """
    Momentum update ``r' = p (y - f_theta) + (1 - p) r``; increments ``t``.

    Raises:
        DimensionMismatchError: If y, f_theta and state.r differ in length
    """
    y = as_vector(y, "y")
    f_theta = as_vector(f_theta, "f_theta")
    check_same_length("y", y, "f_theta", f_theta)
    check_same_length("y", y, "r", state.r)

    r = p * (y - f_theta) + (1.0 - p) * state.r
    return ExpansionState(r=r, y_hat=state.y_hat, t=state.t + 1)


def expand_target(y: np.ndarray, r: np.ndarray, alpha: float) -> np.ndarray:
    """
    Expanded target ``y_hat = y + alpha * r``.

    Raises:
        DimensionMismatchError: If y and r differ in length
    """
    y = as_vector(y, "y")
    r = as_vector(r, "r")
    check_same_length("y", y, "r", r)
    return y + alpha * r


def _expanded_value(
    problem: LsProblem, theta: Any, y_hat: np.ndarray, f_theta: np.ndarray, mu: float, gamma: float
) -> float:
    diff = y_hat - f_theta
    value = 0.5 * mu * float(diff @ diff)
    if gamma:
        value += gamma * problem.regularizer(theta)
    return value


def _sweep(problem: LsProblem, theta: Any, y_hat: np.ndarray, mu: float, gamma: float, t: int):
    try:
        return problem.inner_update(theta, y_hat, mu, gamma)
    except _INNER_FAILURES as e:
        raise RunFailure(t, str(e)) from e


def _drive(
    problem: LsProblem,
    theta: Any,
    steps: Sequence[tuple[float, float, ReParams]],
    gamma: float,
    refine_iters: int,
    record_iterates: bool,
) -> tuple[Any, RunTrace]:
    """
    Run the expansion phase then the refinement phase.

    ``steps`` holds ``(mu, mu_data, params)`` per expansion iteration where ``mu`` is the
    recorded penalty and ``mu_data`` the data-term coefficient passed to the inner sweep.
    """
    y = as_vector(problem.target(), "y")
    state = ExpansionState.initial(y)
    trace = RunTrace(iterates=[] if record_iterates else None)

    for mu, mu_data, params in steps:
        t = state.t
        y_hat = state.y_hat
        theta = _sweep(problem, theta, y_hat, mu_data, gamma, t)
        f_theta = problem.predict(theta)

        state = update_residual(state, y, f_theta, params.p)
        state = ExpansionState(r=state.r, y_hat=expand_target(y, state.r, params.alpha), t=state.t)

        trace.records.append(
            TraceRecord(
                t=t,
                mu=mu,
                expanded_objective=_expanded_value(problem, theta, y_hat, f_theta, mu_data, gamma),
                true_objective=problem.true_objective(theta, gamma),
            )
        )
        if record_iterates:
            trace.iterates.append(theta)

    theta, converged = _refine(problem, theta, gamma, refine_iters, trace, start=state.t)
    trace.theta = theta
    trace.converged = converged
    return theta, trace


def _refine(
    problem: LsProblem,
    theta: Any,
    gamma: float,
    max_iters: int,
    trace: RunTrace,
    start: int,
) -> tuple[Any, bool]:
    y = problem.target()
    previous = (
        trace.records[-1].true_objective if trace.records else problem.true_objective(theta, gamma)
    )

    for i in range(max_iters):
        t = start + i
        new_theta = _sweep(problem, theta, y, 1.0, gamma, t)
        objective = problem.true_objective(new_theta, gamma)
        trace.records.append(
            TraceRecord(t=t, mu=1.0, expanded_objective=objective, true_objective=objective)
        )
        if trace.iterates is not None:
            trace.iterates.append(new_theta)

        done = problem.has_converged(theta, new_theta, previous, objective)
        theta = new_theta
        previous = objective
        if done:
            return theta, True

    return theta, False


def _initial_theta(problem: LsProblem, theta0: Any, rng_seed: int) -> Any:
    if theta0 is not None:
        return theta0
    return problem.initialize(np.random.default_rng(rng_seed))


def run_re(
    problem: LsProblem,
    schedule: Schedule,
    variant: Variant | str = Variant.ALG2,
    gamma: float = 0.0,
    refine_iters: int = REFINE_ITERS,
    rng_seed: int = 0,
    theta0: Any = None,
    record_iterates: bool = False,
) -> tuple[Any, RunTrace]:
    """
    Residual expansion with parameters derived from a penalty schedule.

    Runs ``schedule.T`` expansion iterations using ``mu[0] .. mu[T-1]``, then up to
    ``refine_iters`` plain alternating iterations at ``mu = 1``.

    Args:
        problem: Problem to optimize
        schedule: Penalty schedule
        variant: ``alg1`` keeps the data-term coefficient at 1, ``alg2`` scales it by mu
        gamma: Regularization weight
        refine_iters: Maximum refinement iterations
        rng_seed: Seed for the problem's initialization
        theta0: Explicit initial parameters (skips seeded initialization)
        record_iterates: Keep the parameters after every iteration in the trace

    Returns:
        Final parameters and the run trace

    Raises:
        RunFailure: If the inner sweep fails; carries the iteration index
    """
    variant = Variant(variant)
    theta = _initial_theta(problem, theta0, rng_seed)

    steps = []
    for mu in schedule.values[:-1]:
        mu_data = mu if variant is Variant.ALG2 else 1.0
        steps.append((mu, mu_data, admm_params(mu)))

    return _drive(problem, theta, steps, gamma, refine_iters, record_iterates)


def run_re_with_params(
    problem: LsProblem,
    params: Sequence[ReParams],
    gamma: float = 0.0,
    refine_iters: int = REFINE_ITERS,
    rng_seed: int = 0,
    theta0: Any = None,
    record_iterates: bool = False,
) -> tuple[Any, RunTrace]:
    """
    Residual expansion with an explicit ``(alpha, p)`` sequence (unit data coefficient).

    The recorded penalty of each step is ``1 / (1 + alpha)``. Prints a warning when any
    step's stability factor exceeds 1.
    """
    unstable = [t for t, prm in enumerate(params) if prm.stability_factor > 1.0]
    if unstable:
        console.print(
            f"[yellow]Warning: unstable expansion parameters at iteration {unstable[0]} "
            f"({len(unstable)} of {len(params)} steps have (1 - p - alpha p)^2 > 1)[/yellow]"
        )

    theta = _initial_theta(problem, theta0, rng_seed)
    steps = [(1.0 / (1.0 + prm.alpha), 1.0, prm) for prm in params]
    return _drive(problem, theta, steps, gamma, refine_iters, record_iterates)


def run_alternating(
    problem: LsProblem,
    theta0: Any = None,
    max_iters: int = REFINE_ITERS,
    gamma: float = 0.0,
    rng_seed: int = 0,
    record_iterates: bool = False,
) -> tuple[Any, RunTrace]:
    """Plain alternating optimization: inner sweeps against ``y`` until converged."""
    theta = _initial_theta(problem, theta0, rng_seed)
    trace = RunTrace(iterates=[] if record_iterates else None)
    theta, converged = _refine(problem, theta, gamma, max_iters, trace, start=0)
    trace.theta = theta
    trace.converged = converged
    return theta, trace
