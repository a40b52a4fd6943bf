"""Parameter records of the problem backends."""

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from resexp.core.config import SUCCESS_THRESHOLD
from resexp.core.errors import DimensionMismatchError, ParameterDomainError


@dataclass(frozen=True)
class QuarticInstance:
    """Targets of ``E(theta) = 1/2 ((y1 - theta^2)^2 + (y2 - theta)^2)``."""

    y1: float
    y2: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.y1) and math.isfinite(self.y2)):
            raise ParameterDomainError(f"quartic targets must be finite, got {self.y1}, {self.y2}")


class PointKind(str, Enum):
    MINIMUM = "minimum"
    MAXIMUM = "maximum"
    DEGENERATE = "degenerate"


@dataclass(frozen=True)
class CriticalPoint:
    """A stationary point of the quartic energy with its RE constant."""

    theta: float
    energy: float
    re_constant: float
    kind: PointKind = PointKind.MINIMUM


class Verdict(str, Enum):
    HOLDS = "holds"
    VIOLATED = "violated"
    # Equal RE constants but unequal energies
    COINCIDENT = "coincident"
    NOT_APPLICABLE = "not-applicable"


@dataclass(frozen=True)
class KMeansModel:
    """Centroids ``(k, d)`` and one cluster label per point."""

    centroids: np.ndarray
    labels: np.ndarray

    def __post_init__(self) -> None:
        if self.centroids.ndim != 2 or self.centroids.shape[0] < 1:
            raise DimensionMismatchError(
                f"centroids must be a non-empty (k, d) array, got {self.centroids.shape}"
            )
        if self.labels.ndim != 1:
            raise DimensionMismatchError(f"labels must be 1-D, got {self.labels.shape}")

    @property
    def k(self) -> int:
        return self.centroids.shape[0]


@dataclass(frozen=True)
class RigidTransform:
    """Rotation ``R`` (3x3) and translation ``t``; maps ``x`` to ``R x + t``."""

    rotation: np.ndarray
    translation: np.ndarray

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls(rotation=np.eye(3), translation=np.zeros(3))

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Transform row points ``(n, 3)``."""
        return points @ self.rotation.T + self.translation

    def distance(self, other: "RigidTransform") -> float:
        return float(
            np.linalg.norm(self.rotation - other.rotation)
            + np.linalg.norm(self.translation - other.translation)
        )


@dataclass(frozen=True)
class TrialSpec:
    """One registration trial: ground-truth rotation, noise and success threshold."""

    axis: tuple[float, float, float]
    angle: float
    sigma: float = 0.03
    seed: int = 0
    success_threshold: float = SUCCESS_THRESHOLD
    partial: bool = False
    overlap: float = 0.6

    def __post_init__(self) -> None:
        if abs(float(np.linalg.norm(self.axis)) - 1.0) > 1e-9:
            raise ParameterDomainError(f"rotation axis must be a unit vector, got {self.axis}")
        if self.sigma < 0.0:
            raise ParameterDomainError(f"noise sigma must be >= 0, got {self.sigma}")
        if not 0.0 < self.overlap <= 1.0:
            raise ParameterDomainError(f"overlap must lie in (0, 1], got {self.overlap}")


@dataclass(frozen=True)
class Trial:
    """Normalized source, noisy rotated target and the ground-truth transform."""

    source: np.ndarray
    target: np.ndarray
    ground_truth: RigidTransform
    spec: TrialSpec

    def is_success(self, objective: float) -> bool:
        return objective < self.spec.success_threshold


@dataclass(frozen=True)
class OpqModel:
    """
    Orthogonal matrix ``R`` (d, d), codebooks ``(M, k, d / M)`` and codes ``(n, M)``.

    A point is reconstructed as ``R @ concat(codebooks[m, codes[i, m]])``.
    """

    rotation: np.ndarray
    codebooks: np.ndarray
    codes: np.ndarray

    @property
    def subspaces(self) -> int:
        return self.codebooks.shape[0]

    @property
    def codebook_size(self) -> int:
        return self.codebooks.shape[1]


@dataclass(frozen=True)
class DeconvModel:
    """Latent signal ``x`` (length n) and blur kernel ``kern`` (length L, on the simplex)."""

    x: np.ndarray
    kern: np.ndarray
