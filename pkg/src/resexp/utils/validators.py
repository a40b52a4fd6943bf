"""Shape and domain checks for numeric inputs."""

import numpy as np

from resexp.core.errors import DimensionMismatchError, ParameterDomainError


def as_vector(values, name: str = "vector") -> np.ndarray:
    """
    Convert input to a 1-D float array.

    Args:
        values: Array-like input
        name: Name used in error messages

    Returns:
        1-D float64 array

    Raises:
        DimensionMismatchError: If the input is not one-dimensional
    """
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1:
        raise DimensionMismatchError(f"{name} must be 1-D, got shape {arr.shape}")
    return arr


def as_points(values, name: str = "points", dim: int | None = None) -> np.ndarray:
    """
    Convert input to an ``(n, d)`` float array of row points.

    Raises:
        DimensionMismatchError: If the input is not 2-D or has the wrong column count
    """
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 2:
        raise DimensionMismatchError(f"{name} must be a 2-D (n, d) array, got shape {arr.shape}")
    if dim is not None and arr.shape[1] != dim:
        raise DimensionMismatchError(f"{name} must have {dim} columns, got {arr.shape[1]}")
    return arr


def check_same_length(name_a: str, a: np.ndarray, name_b: str, b: np.ndarray) -> None:
    """Raise DimensionMismatchError unless both arrays have the same shape."""
    if a.shape != b.shape:
        raise DimensionMismatchError(
            f"{name_a} has shape {a.shape} but {name_b} has shape {b.shape}"
        )


def check_cluster_count(k: int, n: int) -> None:
    """Validate ``1 <= k <= n``."""
    if k < 1:
        raise ParameterDomainError(f"cluster count must be >= 1, got {k}")
    if k > n:
        raise ParameterDomainError(f"cluster count {k} exceeds number of points {n}")


def orthogonality_error(matrix: np.ndarray) -> float:
    """Frobenius norm of ``M^T M - I``."""
    return float(np.linalg.norm(matrix.T @ matrix - np.eye(matrix.shape[1])))


def is_rotation(matrix: np.ndarray, tol: float = 1e-9) -> bool:
    """Check ``R^T R = I`` and ``det(R) = +1`` within ``tol``."""
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        return False
    return orthogonality_error(matrix) <= tol and abs(np.linalg.det(matrix) - 1.0) <= tol
