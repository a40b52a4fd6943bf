"""
K-means clustering: seeding, Lloyd and Hartigan baselines, and the residual-expansion adapter.

Points are rows of an ``(n, d)`` array; the objective is ``1/2 sum_i |x_i - c_{z_i}|^2``.
"""

import numpy as np
from scipy.spatial.distance import cdist

from resexp.core.config import HARTIGAN_MAX_SWEEPS, REFINE_ITERS
from resexp.core.engine import LsProblem, RunTrace, run_alternating, run_re
from resexp.core.errors import ParameterDomainError
from resexp.core.schedule import Schedule
from resexp.models.problems import KMeansModel
from resexp.utils.validators import as_points, check_cluster_count

INIT_POLICIES = ("random", "kmeanspp")


def kmeans_objective(X: np.ndarray, model: KMeansModel) -> float:
    diff = X - model.centroids[model.labels]
    return 0.5 * float(np.sum(diff * diff))


def assign(X: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """Nearest centroid per point (squared Euclidean); ties go to the lowest index."""
    return np.argmin(cdist(X, centroids, "sqeuclidean"), axis=1)


def cluster_means(X: np.ndarray, labels: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """Per-cluster means; an empty cluster keeps its previous centroid."""
    means = centroids.copy()
    for j in range(centroids.shape[0]):
        members = X[labels == j]
        if members.shape[0]:
            means[j] = members.mean(axis=0)
    return means


def _reseed_empty(X: np.ndarray, labels: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """Move the point farthest from its centroid into each empty cluster."""
    k = centroids.shape[0]
    counts = np.bincount(labels, minlength=k)
    empty = np.flatnonzero(counts == 0)
    if empty.size == 0:
        return labels

    labels = labels.copy()
    diff = X - centroids[labels]
    cost = np.sum(diff * diff, axis=1)
    for j in empty:
        # Never strip a cluster down to nothing
        donors = np.bincount(labels, minlength=k)[labels] > 1
        candidates = np.where(donors, cost, -1.0)
        i = int(np.argmax(candidates))
        if candidates[i] <= 0.0:
            break
        labels[i] = j
        cost[i] = 0.0
    return labels


def kmeanspp_weights(X: np.ndarray, chosen: np.ndarray) -> np.ndarray:
    """Probabilities of picking each point next under D^2 sampling given chosen centers."""
    d2 = np.min(cdist(X, np.atleast_2d(chosen), "sqeuclidean"), axis=1)
    total = d2.sum()
    if total <= 0.0:
        return np.full(X.shape[0], 1.0 / X.shape[0])
    return d2 / total


def seed_kmeanspp(X: np.ndarray, k: int, rng_seed: int | np.random.Generator = 0) -> np.ndarray:
    """
    Choose ``k`` distinct data points as initial centroids by D^2 sampling.

    Args:
        X: Data points ``(n, d)``
        k: Number of clusters
        rng_seed: Seed or generator

    Returns:
        Centroids ``(k, d)``

    Raises:
        ParameterDomainError: If k < 1 or k > n
    """
    X = as_points(X, "X")
    n = X.shape[0]
    check_cluster_count(k, n)
    rng = np.random.default_rng(rng_seed)

    chosen = [int(rng.integers(n))]
    for _ in range(1, k):
        weights = kmeanspp_weights(X, X[chosen])
        weights[chosen] = 0.0
        if weights.sum() <= 0.0:
            # Remaining points coincide with chosen centers: pick uniformly among the rest
            weights = np.ones(n)
            weights[chosen] = 0.0
        chosen.append(int(rng.choice(n, p=weights / weights.sum())))
    return X[chosen].copy()


def seed_random(X: np.ndarray, k: int, rng_seed: int | np.random.Generator = 0) -> np.ndarray:
    """Choose ``k`` distinct data points uniformly at random."""
    X = as_points(X, "X")
    check_cluster_count(k, X.shape[0])
    rng = np.random.default_rng(rng_seed)
    return X[rng.choice(X.shape[0], size=k, replace=False)].copy()


def model_from_centroids(X: np.ndarray, centroids: np.ndarray) -> KMeansModel:
    return KMeansModel(centroids=np.array(centroids, dtype=float), labels=assign(X, centroids))


def lloyd_step(X: np.ndarray, model: KMeansModel) -> tuple[KMeansModel, float]:
    """
    One assignment step followed by one centroid update.

    Empty clusters are re-seeded at the point farthest from its current centroid.

    Returns:
        Updated model and its objective
    """
    X = as_points(X, "X")
    labels = assign(X, model.centroids)
    labels = _reseed_empty(X, labels, model.centroids)
    updated = KMeansModel(centroids=cluster_means(X, labels, model.centroids), labels=labels)
    return updated, kmeans_objective(X, updated)


def lloyd(
    X: np.ndarray, model: KMeansModel, max_iters: int = 300
) -> tuple[KMeansModel, RunTrace]:
    """Lloyd iterations until the assignment and objective stop changing."""
    return run_alternating(KMeansProblem(X, model.k), theta0=model, max_iters=max_iters)


def _hartigan_delta(
    x: np.ndarray, a: int, centroids: np.ndarray, counts: np.ndarray
) -> np.ndarray:
    """Exact change of ``sum |x - c|^2`` when moving ``x`` from cluster ``a`` to each cluster."""
    d2 = np.sum((centroids - x) ** 2, axis=1)
    gain = counts / (counts + 1.0) * d2
    loss = counts[a] / (counts[a] - 1.0) * d2[a]
    delta = gain - loss
    delta[a] = 0.0
    return delta


def hartigan_refine(
    X: np.ndarray, model: KMeansModel, max_sweeps: int = HARTIGAN_MAX_SWEEPS
) -> KMeansModel:
    """
    Single-point moves with the exact size-corrected objective change until none improves.

    Points are visited in ascending index order; a move is applied only when it strictly
    lowers the objective. Centroids are kept equal to cluster means.
    """
    X = as_points(X, "X")
    k = model.k
    labels = model.labels.copy()
    centroids = cluster_means(X, labels, model.centroids)
    counts = np.bincount(labels, minlength=k).astype(float)
    if k == 1:
        return KMeansModel(centroids=centroids, labels=labels)

    scale = max(1.0, 2.0 * kmeans_objective(X, KMeansModel(centroids, labels)))
    tol = 1e-12 * scale

    for _ in range(max_sweeps):
        moved = False
        for i in range(X.shape[0]):
            a = int(labels[i])
            if counts[a] <= 1.0:
                continue
            delta = _hartigan_delta(X[i], a, centroids, counts)
            b = int(np.argmin(delta))
            if delta[b] >= -tol:
                continue

            x = X[i]
            centroids[a] = (counts[a] * centroids[a] - x) / (counts[a] - 1.0)
            centroids[b] = (counts[b] * centroids[b] + x) / (counts[b] + 1.0)
            counts[a] -= 1.0
            counts[b] += 1.0
            labels[i] = b
            moved = True
        # Incremental updates drift; resync with exact means after every sweep
        centroids = cluster_means(X, labels, centroids)
        if not moved:
            break

    return KMeansModel(centroids=centroids, labels=labels)


class KMeansProblem(LsProblem[KMeansModel]):
    """
    K-means as least squares: ``y = vec(X)``, ``f(theta) = vec(C Z)``.

    The residual is indexed by data point, so its length is fixed while assignments change.
    The inner sweep is one Lloyd step on the expanded points.
    """

    def __init__(self, X: np.ndarray, k: int, init: str = "random"):
        self.X = as_points(X, "X")
        check_cluster_count(k, self.X.shape[0])
        if init not in INIT_POLICIES:
            raise ParameterDomainError(f"Unknown init policy '{init}'")
        self.k = k
        self.init = init
        self._y = self.X.ravel()

    def target(self) -> np.ndarray:
        return self._y

    def predict(self, theta: KMeansModel) -> np.ndarray:
        return theta.centroids[theta.labels].ravel()

    def initialize(self, rng: np.random.Generator) -> KMeansModel:
        seeder = seed_kmeanspp if self.init == "kmeanspp" else seed_random
        return model_from_centroids(self.X, seeder(self.X, self.k, rng))

    def inner_update(
        self, theta: KMeansModel, y_hat: np.ndarray, mu: float = 1.0, gamma: float = 0.0
    ) -> KMeansModel:
        model, _ = lloyd_step(y_hat.reshape(self.X.shape), theta)
        return model

    def true_objective(self, theta: KMeansModel, gamma: float = 0.0) -> float:
        return kmeans_objective(self.X, theta)


def solve_kmeans(
    X: np.ndarray,
    k: int,
    schedule: Schedule,
    init: str = "random",
    rng_seed: int = 0,
    refine_iters: int = REFINE_ITERS,
    record_iterates: bool = False,
) -> tuple[KMeansModel, RunTrace]:
    """
    Residual-expansion k-means.

    Args:
        X: Data points ``(n, d)``
        k: Number of clusters
        schedule: Penalty schedule
        init: ``random`` or ``kmeanspp`` seeding
        rng_seed: Seed for the initialization
        refine_iters: Maximum Lloyd iterations after the schedule
        record_iterates: Keep every intermediate model

    Returns:
        Final model and run trace
    """
    problem = KMeansProblem(X, k, init)
    return run_re(
        problem,
        schedule,
        refine_iters=refine_iters,
        rng_seed=rng_seed,
        record_iterates=record_iterates,
    )
