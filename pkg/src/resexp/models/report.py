"""Result records emitted by the experiment runner."""

from dataclasses import asdict, dataclass, fields

import numpy as np

from resexp.models.problems import Verdict


@dataclass
class TrialReport:
    """One arm of one trial. Field order is the emitted key and column order."""

    problem: str
    arm: str
    trial: int
    seed: int
    setting: str
    mu0: float
    T: int
    final_objective: float
    relative_error: float | None = None
    success: bool | None = None
    iterations: int = 0
    wall_ms: float = 0.0
    error: str | None = None

    @property
    def failed(self) -> bool:
        return self.error is not None

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]


@dataclass
class TraceRow:
    """Objectives of one arm after one iteration of one trial."""

    problem: str
    arm: str
    trial: int
    setting: str
    t: int
    mu: float
    expanded_objective: float
    true_objective: float

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]


@dataclass
class DeconvSignals:
    """Observation and one arm's recovered signal, its blurred fit and kernel."""

    arm: str
    trial: int
    observed: np.ndarray
    signal: np.ndarray
    fit: np.ndarray
    kernel: np.ndarray


@dataclass
class ArmSummary:
    """Aggregate of one arm at one setting over all trials."""

    problem: str
    arm: str
    setting: str
    trials: int
    failures: int
    mean_objective: float
    min_objective: float
    max_objective: float
    mean_relative_error: float | None = None
    min_relative_error: float | None = None
    max_relative_error: float | None = None
    successes: int | None = None
    mean_iterations: float = 0.0
    mean_wall_ms: float = 0.0


@dataclass
class QuarticRecord:
    """Critical-point analysis of one sampled quartic instance."""

    index: int
    y1: float
    y2: float
    minima: int
    verdict: Verdict
    thetas: tuple[float, ...] = ()
    energies: tuple[float, ...] = ()
    re_constants: tuple[float, ...] = ()
    global_theta: float | None = None

    @property
    def deeper_theta(self) -> float | None:
        """Minimum with the larger RE constant, when two minima exist."""
        if len(self.thetas) != 2:
            return None
        return self.thetas[0] if self.re_constants[0] > self.re_constants[1] else self.thetas[1]
