"""
Optimized product quantization by alternating updates of codes, codebooks and rotation.

A point ``x`` is reconstructed as ``R s`` where ``s`` concatenates one codeword per subspace.
With row points the reconstruction of ``X`` is ``S @ R.T``.
"""

import numpy as np
from scipy.linalg import orthogonal_procrustes

from resexp.core.config import REFINE_ITERS
from resexp.core.engine import LsProblem, RunTrace, run_alternating, run_re
from resexp.core.errors import DimensionMismatchError, ParameterDomainError
from resexp.core.schedule import Schedule
from resexp.models.problems import KMeansModel, OpqModel
from resexp.problems.kmeans import assign, lloyd_step, seed_kmeanspp
from resexp.utils.validators import as_points, check_cluster_count


def _check_layout(d: int, subspaces: int) -> int:
    if subspaces < 1 or d % subspaces:
        raise ParameterDomainError(f"dimension {d} is not divisible by {subspaces} subspaces")
    return d // subspaces


def stacked_codewords(model: OpqModel) -> np.ndarray:
    """Concatenated codewords per point in the rotated frame, shape ``(n, d)``."""
    parts = [model.codebooks[m][model.codes[:, m]] for m in range(model.subspaces)]
    return np.concatenate(parts, axis=1)


def reconstruct(model: OpqModel) -> np.ndarray:
    return stacked_codewords(model) @ model.rotation.T


def opq_objective(X: np.ndarray, model: OpqModel) -> float:
    """
    Quantization error ``1/2 sum_i |x_i - R s_i|^2``.

    Raises:
        DimensionMismatchError: If X does not match the model's dimensions
    """
    X = as_points(X, "X")
    if X.shape != (model.codes.shape[0], model.rotation.shape[0]):
        raise DimensionMismatchError(
            f"X has shape {X.shape}, model expects "
            f"({model.codes.shape[0]}, {model.rotation.shape[0]})"
        )
    diff = X - reconstruct(model)
    return 0.5 * float(np.sum(diff * diff))


def opq_step(X: np.ndarray, model: OpqModel) -> OpqModel:
    """
    One sweep: per-subspace assignments, per-subspace codeword means, then the rotation.

    The rotation solves the orthogonal Procrustes problem between the data and the
    concatenated codewords. Each sub-step minimizes its own block exactly, so the
    objective on ``X`` does not increase.
    """
    X = as_points(X, "X")
    d = X.shape[1]
    sub = _check_layout(d, model.subspaces)
    rotated = X @ model.rotation

    codebooks = model.codebooks.copy()
    codes = model.codes.copy()
    for m in range(model.subspaces):
        block = rotated[:, m * sub : (m + 1) * sub]
        updated, _ = lloyd_step(block, KMeansModel(centroids=codebooks[m], labels=codes[:, m]))
        codebooks[m] = updated.centroids
        codes[:, m] = updated.labels

    stacked = np.concatenate(
        [codebooks[m][codes[:, m]] for m in range(model.subspaces)], axis=1
    )
    # min |S Omega - X| over orthogonal Omega gives Omega = R^T
    omega, _ = orthogonal_procrustes(stacked, X)
    return OpqModel(rotation=omega.T, codebooks=codebooks, codes=codes)


def random_orthogonal(d: int, rng: np.random.Generator) -> np.ndarray:
    """Orthogonalized Gaussian matrix (sign-corrected QR)."""
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    return q * np.sign(np.diag(r))


def init_opq(
    X: np.ndarray,
    subspaces: int,
    codebook_size: int,
    rng: np.random.Generator,
    random_rotation: bool = False,
) -> OpqModel:
    """Identity (or random orthogonal) rotation, per-subspace k-means++ codebooks."""
    X = as_points(X, "X")
    n, d = X.shape
    sub = _check_layout(d, subspaces)
    check_cluster_count(codebook_size, n)

    rotation = random_orthogonal(d, rng) if random_rotation else np.eye(d)
    rotated = X @ rotation
    codebooks = np.empty((subspaces, codebook_size, sub))
    codes = np.empty((n, subspaces), dtype=np.intp)
    for m in range(subspaces):
        block = rotated[:, m * sub : (m + 1) * sub]
        codebooks[m] = seed_kmeanspp(block, codebook_size, rng)
        codes[:, m] = assign(block, codebooks[m])
    return OpqModel(rotation=rotation, codebooks=codebooks, codes=codes)


class OpqProblem(LsProblem[OpqModel]):
    """OPQ as least squares: ``y = vec(X)``, ``f(theta) = vec(reconstruction)``."""

    def __init__(
        self,
        X: np.ndarray,
        subspaces: int,
        codebook_size: int,
        random_rotation: bool = False,
    ):
        self.X = as_points(X, "X")
        _check_layout(self.X.shape[1], subspaces)
        check_cluster_count(codebook_size, self.X.shape[0])
        self.subspaces = subspaces
        self.codebook_size = codebook_size
        self.random_rotation = random_rotation
        self._y = self.X.ravel()

    def target(self) -> np.ndarray:
        return self._y

    def predict(self, theta: OpqModel) -> np.ndarray:
        return reconstruct(theta).ravel()

    def initialize(self, rng: np.random.Generator) -> OpqModel:
        return init_opq(self.X, self.subspaces, self.codebook_size, rng, self.random_rotation)

    def inner_update(
        self, theta: OpqModel, y_hat: np.ndarray, mu: float = 1.0, gamma: float = 0.0
    ) -> OpqModel:
        return opq_step(y_hat.reshape(self.X.shape), theta)


def solve_opq(
    X: np.ndarray,
    subspaces: int,
    codebook_size: int,
    schedule: Schedule | None,
    rng_seed: int = 0,
    refine_iters: int = REFINE_ITERS,
    random_rotation: bool = False,
) -> tuple[OpqModel, RunTrace]:
    """
    Residual-expansion OPQ, or plain alternating OPQ when ``schedule`` is None.

    The trace records the true quantization error after every sweep.
    """
    problem = OpqProblem(X, subspaces, codebook_size, random_rotation)
    if schedule is None:
        return run_alternating(problem, max_iters=refine_iters, rng_seed=rng_seed)
    return run_re(problem, schedule, refine_iters=refine_iters, rng_seed=rng_seed)
