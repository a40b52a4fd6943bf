"""Configuration for experiments and solver defaults."""

import math
from dataclasses import dataclass
from pathlib import Path

from resexp.core.errors import ParameterDomainError
from resexp.core.schedule import make_schedule

# Refinement phase (mu = 1, no expansion)
REFINE_TOL = 1e-10
REFINE_ITERS = 100

# ICP stopping rule
ICP_TRANSFORM_TOL = 1e-8
ICP_MAX_ITERS = 200

# Hartigan refinement
HARTIGAN_MAX_SWEEPS = 1000

# Registration success threshold on the final objective
SUCCESS_THRESHOLD = 1.0

PROBLEMS = ("kmeans", "register", "opq", "deconv", "quartic")
INIT_POLICIES = ("random", "kmeanspp")
OUTPUT_FORMATS = ("jsonl", "csv")


@dataclass
class ExperimentConfig:
    """Configuration of one benchmark experiment (all arms, all trials)."""

    problem: str
    mu0: float = 0.1
    T: int = 30
    trials: int = 20
    seed: int = 0
    init: str = "random"
    refine_iters: int = REFINE_ITERS
    workers: int = 1
    out: Path | None = None
    fmt: str = "jsonl"
    data_path: Path | None = None
    # Use only the first rows of data_path
    limit: int | None = None
    # Per-iteration objectives of every arm
    trace_out: Path | None = None
    # kmeans
    n: int = 1000
    d: int = 2
    k: int = 10
    separation: float = 12.0
    balance: float = 0.6
    # register
    angles: tuple[float, ...] = (math.pi / 3, 5 * math.pi / 12, math.pi / 2)
    sigma: float = 0.03
    partial: bool = False
    overlap: float = 0.6
    success_threshold: float = SUCCESS_THRESHOLD
    # Expand only the fit step; correspondences use the unexpanded transform
    fit_only_expansion: bool = False
    # opq
    subspaces: int = 4
    codebook_size: int = 16
    random_rotation: bool = False
    # deconv
    kernel_length: int = 9
    kernel_width: float = 2.0
    noise: float = 0.01
    gamma_x: float = 0.05
    gamma_k: float = 0.01
    # Directory for recovered signals and kernels
    signals_out: Path | None = None

    def __post_init__(self) -> None:
        if self.problem not in PROBLEMS:
            raise ParameterDomainError(
                f"Unknown problem '{self.problem}', expected one of {', '.join(PROBLEMS)}"
            )
        if self.init not in INIT_POLICIES:
            raise ParameterDomainError(f"Unknown init policy '{self.init}'")
        if self.fmt not in OUTPUT_FORMATS:
            raise ParameterDomainError(f"Unknown output format '{self.fmt}'")
        if self.trials < 1:
            raise ParameterDomainError(f"trials must be >= 1, got {self.trials}")
        if self.workers < 1:
            raise ParameterDomainError(f"workers must be >= 1, got {self.workers}")
        if self.refine_iters < 0:
            raise ParameterDomainError(f"refine_iters must be >= 0, got {self.refine_iters}")
        if self.limit is not None and self.limit < 1:
            raise ParameterDomainError(f"limit must be >= 1, got {self.limit}")
        if self.data_path is not None and not Path(self.data_path).exists():
            raise FileNotFoundError(f"Data file not found: {self.data_path}")
        make_schedule(self.mu0, self.T)
