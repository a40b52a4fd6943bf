"""
Rigid 3-D point-set registration with point-to-point cost.

The objective ``1/2 sum_i |R x_i + t - y_{j(i)}|^2`` is written as least squares with a zero
target and prediction ``f(R, t) = vec(R X + t - Y Z)``, where ``Z`` holds the nearest-neighbor
correspondences of the current transform. The residual ``r_i = y_{j(i)} - (R x_i + t)`` is then
indexed by source point. One sweep of the expanded problem pairs each source point with the
target nearest to ``R x_i + t - alpha r_i`` and fits the transform to ``y_{j(i)} + alpha r_i``.
"""

import numpy as np
from scipy.spatial import cKDTree
from scipy.spatial.transform import Rotation

from resexp.core.config import ICP_MAX_ITERS, ICP_TRANSFORM_TOL
from resexp.core.engine import LsProblem, RunTrace, run_alternating, run_re
from resexp.core.errors import IllPosedError
from resexp.core.schedule import Schedule
from resexp.models.problems import RigidTransform, Trial, TrialSpec
from resexp.utils.validators import as_points, check_same_length

# Candidates fetched from the tree before exact re-ranking
_NN_CANDIDATES = 4


def _squared_distances(query: np.ndarray, reference: np.ndarray) -> np.ndarray:
    """``|q_i - r_j|^2`` for every pair, shape ``(n, m)``."""
    diff = query[:, None, :] - reference[None, :, :]
    return np.sum(diff * diff, axis=-1)


def nearest_neighbors_scan(query: np.ndarray, reference: np.ndarray) -> np.ndarray:
    """Linear-scan nearest neighbors; ties go to the lowest reference index."""
    query = as_points(query, "query", dim=3)
    reference = as_points(reference, "reference", dim=3)
    if reference.shape[0] == 0:
        raise IllPosedError("reference point set is empty")
    return np.argmin(_squared_distances(query, reference), axis=1)


class NearestNeighborIndex:
    """
    KD-tree over a fixed reference set whose answers equal the linear scan exactly.

    Tree candidates are re-ranked with the scan's distance arithmetic; a point whose
    candidate list may be cut inside a tie falls back to the full scan.
    """

    def __init__(self, reference: np.ndarray):
        self.reference = as_points(reference, "reference", dim=3)
        if self.reference.shape[0] == 0:
            raise IllPosedError("reference point set is empty")
        self._tree = cKDTree(self.reference)

    def query(self, points: np.ndarray) -> np.ndarray:
        points = as_points(points, "query", dim=3)
        m = self.reference.shape[0]
        k = min(_NN_CANDIDATES, m)
        _, idx = self._tree.query(points, k=k)
        idx = np.asarray(idx).reshape(points.shape[0], k)

        diff = points[:, None, :] - self.reference[idx]
        d2 = np.sum(diff * diff, axis=-1)
        # Exact re-rank: smallest distance, then smallest index
        order = np.lexsort((idx, d2), axis=-1)
        rows = np.arange(points.shape[0])
        best = idx[rows, order[:, 0]]

        if k < m:
            best_d2 = d2[rows, order[:, 0]]
            worst_d2 = d2[rows, order[:, -1]]
            ambiguous = np.flatnonzero(worst_d2 <= best_d2 * (1.0 + 1e-9) + 1e-300)
            if ambiguous.size:
                best[ambiguous] = np.argmin(
                    _squared_distances(points[ambiguous], self.reference), axis=1
                )
        return best


def nearest_neighbors(query: np.ndarray, reference: np.ndarray) -> np.ndarray:
    """
    Index of the Euclidean-nearest reference point for every query point.

    Raises:
        IllPosedError: If the reference set is empty
    """
    return NearestNeighborIndex(reference).query(query)


def rigid_fit(P: np.ndarray, Q: np.ndarray) -> RigidTransform:
    """
    Least-squares rigid transform mapping rows of ``P`` onto rows of ``Q``.

    Args:
        P: Source points ``(n, 3)``
        Q: Matched target points ``(n, 3)``

    Returns:
        Proper rotation and translation minimizing ``sum |R p_i + t - q_i|^2``

    Raises:
        IllPosedError: If fewer than 3 points or the source is collinear
    """
    P = as_points(P, "P", dim=3)
    Q = as_points(Q, "Q", dim=3)
    check_same_length("P", P, "Q", Q)
    if P.shape[0] < 3:
        raise IllPosedError(f"rigid fit needs at least 3 points, got {P.shape[0]}")

    p_mean = P.mean(axis=0)
    q_mean = Q.mean(axis=0)
    Pc = P - p_mean
    Qc = Q - q_mean

    spread = np.linalg.svd(Pc, compute_uv=False)
    if spread[0] == 0.0 or spread[1] <= 1e-12 * spread[0]:
        raise IllPosedError("source points are collinear; rotation is not determined")

    U, _, Vt = np.linalg.svd(Pc.T @ Qc)
    D = np.eye(3)
    D[2, 2] = np.sign(np.linalg.det(Vt.T @ U.T)) or 1.0
    R = Vt.T @ D @ U.T
    return RigidTransform(rotation=R, translation=q_mean - R @ p_mean)


def registration_objective(
    source: np.ndarray, target_index: NearestNeighborIndex, transform: RigidTransform
) -> float:
    moved = transform.apply(source)
    matched = target_index.reference[target_index.query(moved)]
    diff = moved - matched
    return 0.5 * float(np.sum(diff * diff))


class RegistrationProblem(LsProblem[RigidTransform]):
    """
    ICP as least squares; the inner sweep is one correspondence step plus one rigid fit.

    With ``expand_correspondences=False`` the correspondence step ignores the expansion and
    only the fit sees the expanded targets.
    """

    def __init__(
        self,
        source: np.ndarray,
        target: np.ndarray,
        init: RigidTransform | None = None,
        transform_tol: float = ICP_TRANSFORM_TOL,
        expand_correspondences: bool = True,
    ):
        self.source = as_points(source, "source", dim=3)
        self.expand_correspondences = expand_correspondences
        self.index = NearestNeighborIndex(target)
        self.init = init or RigidTransform.identity()
        self.transform_tol = transform_tol
        self._zeros = np.zeros(self.source.size)

    def target(self) -> np.ndarray:
        return self._zeros

    def matched(self, theta: RigidTransform) -> np.ndarray:
        """Target points matched to each transformed source point."""
        return self.index.reference[self.index.query(theta.apply(self.source))]

    def predict(self, theta: RigidTransform) -> np.ndarray:
        return (theta.apply(self.source) - self.matched(theta)).ravel()

    def initialize(self, rng: np.random.Generator) -> RigidTransform:
        return self.init

    def inner_update(
        self, theta: RigidTransform, y_hat: np.ndarray, mu: float = 1.0, gamma: float = 0.0
    ) -> RigidTransform:
        expansion = y_hat.reshape(self.source.shape)
        query = theta.apply(self.source)
        if self.expand_correspondences:
            query = query - expansion
        matched = self.index.reference[self.index.query(query)]
        return rigid_fit(self.source, matched + expansion)

    def has_converged(
        self, old: RigidTransform, new: RigidTransform, old_objective: float, new_objective: float
    ) -> bool:
        return old.distance(new) < self.transform_tol


def solve_icp(
    X: np.ndarray,
    Y: np.ndarray,
    schedule: Schedule | None = None,
    init: RigidTransform | None = None,
    rng_seed: int = 0,
    max_iters: int = ICP_MAX_ITERS,
    record_iterates: bool = False,
    expand_correspondences: bool = True,
) -> tuple[RigidTransform, RunTrace]:
    """
    Plain ICP (``schedule=None``) or residual-expansion ICP.

    Args:
        X: Source points ``(n, 3)``
        Y: Target points ``(m, 3)``
        schedule: Penalty schedule, or None for plain ICP
        init: Initial transform (identity by default)
        rng_seed: Seed passed to the driver
        max_iters: ICP iterations, or refinement iterations after the schedule
        record_iterates: Keep every intermediate transform
        expand_correspondences: Let the expansion move the correspondence queries too

    Returns:
        Final transform and run trace
    """
    problem = RegistrationProblem(X, Y, init, expand_correspondences=expand_correspondences)
    if schedule is None:
        return run_alternating(
            problem, max_iters=max_iters, rng_seed=rng_seed, record_iterates=record_iterates
        )
    return run_re(
        problem,
        schedule,
        refine_iters=max_iters,
        rng_seed=rng_seed,
        record_iterates=record_iterates,
    )


def rotation_from_axis_angle(axis, angle: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=float)
    return Rotation.from_rotvec(axis / np.linalg.norm(axis) * angle).as_matrix()


def random_unit_axis(rng: np.random.Generator) -> tuple[float, float, float]:
    v = rng.standard_normal(3)
    v /= np.linalg.norm(v)
    return (float(v[0]), float(v[1]), float(v[2]))


def normalize_to_cube(points: np.ndarray) -> np.ndarray:
    """Center on the bounding-box midpoint and scale uniformly into ``[-1, 1]^3``."""
    points = as_points(points, "points", dim=3)
    lo = points.min(axis=0)
    hi = points.max(axis=0)
    half = float(np.max(hi - lo)) / 2.0
    if half == 0.0:
        raise IllPosedError("point set has zero extent")
    return (points - (lo + hi) / 2.0) / half


def make_trial(source: np.ndarray, spec: TrialSpec) -> Trial:
    """
    Build one registration trial.

    The source is normalized into ``[-1, 1]^3``. The target is the (optionally partial) source
    rotated about ``spec.axis`` by ``spec.angle`` with i.i.d. Gaussian noise of standard
    deviation ``spec.sigma`` per coordinate, shuffled. A partial target keeps the
    ``spec.overlap`` fraction of points lying furthest along a random direction.
    """
    rng = np.random.default_rng(spec.seed)
    X = normalize_to_cube(source)

    kept = X
    if spec.partial:
        direction = np.array(random_unit_axis(rng))
        heights = (X - X.mean(axis=0)) @ direction
        cut = np.quantile(heights, 1.0 - spec.overlap)
        kept = X[heights >= cut]

    R = rotation_from_axis_angle(spec.axis, spec.angle)
    Y = kept @ R.T
    if spec.sigma > 0.0:
        Y = Y + rng.normal(scale=spec.sigma, size=Y.shape)
    Y = Y[rng.permutation(Y.shape[0])]

    return Trial(
        source=X,
        target=Y,
        ground_truth=RigidTransform(rotation=R, translation=np.zeros(3)),
        spec=spec,
    )
