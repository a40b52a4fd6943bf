"""Seeded synthetic data for the benchmark problems."""

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from resexp.core.errors import ParameterDomainError
from resexp.problems.deconv import circular_convolve


@dataclass(frozen=True)
class SyntheticClusters:
    """Gaussian blobs with their generating centers and labels."""

    points: np.ndarray
    centers: np.ndarray
    labels: np.ndarray
    sigma: float


@dataclass(frozen=True)
class SyntheticDeconv:
    """Blurred noisy observation with the latent signal and kernel."""

    y: np.ndarray
    x: np.ndarray
    kern: np.ndarray


def blob_sizes(n: int, k_true: int, balance: float) -> np.ndarray:
    """
    Split ``n`` points over ``k_true`` blobs with geometrically shrinking sizes.

    Blob ``j`` gets weight ``balance ** j``; ``balance = 1`` gives equal sizes.
    Every blob gets at least one point.
    """
    weights = balance ** np.arange(k_true, dtype=float)
    sizes = np.floor(weights / weights.sum() * (n - k_true)).astype(int) + 1
    sizes[0] += n - sizes.sum()
    return sizes


def _spread_centers(
    rng: np.random.Generator, k: int, d: int, min_dist: float, side: float, batch: int = 64
) -> np.ndarray:
    """
    Place ``k`` centers uniformly in a cube, each at least ``min_dist`` from the others.

    Candidates are drawn in batches; when no candidate of a batch is far enough, the one
    furthest from the placed centers is taken.
    """
    centers = rng.uniform(-side / 2.0, side / 2.0, size=(1, d))
    while len(centers) < k:
        candidates = rng.uniform(-side / 2.0, side / 2.0, size=(batch, d))
        nearest = cdist(candidates, centers).min(axis=1)
        ok = np.flatnonzero(nearest >= min_dist)
        pick = ok[0] if ok.size else int(np.argmax(nearest))
        centers = np.vstack([centers, candidates[pick]])
    return centers


def gen_clusters(
    n: int = 1000,
    d: int = 2,
    k_true: int = 10,
    separation: float = 12.0,
    balance: float = 0.6,
    rng_seed: int = 0,
) -> SyntheticClusters:
    """
    Gaussian blobs with unit standard deviation and controllable separation and imbalance.

    Centers are drawn uniformly in a cube of side ``3 * separation * k_true ** (1 / d)`` and
    kept at least ``separation`` apart, so every blob is a distinct basin; ``balance < 1``
    makes later blobs smaller.

    Args:
        n: Number of points
        d: Dimension
        k_true: Number of blobs
        separation: Minimum distance between centers in units of the blob sigma
        balance: Size ratio between consecutive blobs, in (0, 1]
        rng_seed: Seed

    Returns:
        Points, centers and the generating labels

    Raises:
        ParameterDomainError: If counts or parameters are invalid
    """
    if k_true < 1 or n < k_true:
        raise ParameterDomainError(f"need n >= k_true >= 1, got n={n}, k_true={k_true}")
    if d < 1:
        raise ParameterDomainError(f"dimension must be >= 1, got {d}")
    if not 0.0 < balance <= 1.0:
        raise ParameterDomainError(f"balance must lie in (0, 1], got {balance}")
    if separation <= 0.0:
        raise ParameterDomainError(f"separation must be > 0, got {separation}")

    rng = np.random.default_rng(rng_seed)
    sigma = 1.0
    min_dist = separation * sigma
    centers = _spread_centers(rng, k_true, d, min_dist, 3.0 * min_dist * k_true ** (1.0 / d))
    labels = np.repeat(np.arange(k_true), blob_sizes(n, k_true, balance))
    points = centers[labels] + rng.normal(scale=sigma, size=(n, d))

    order = rng.permutation(n)
    return SyntheticClusters(
        points=points[order], centers=centers, labels=labels[order], sigma=sigma
    )


def gen_surface_cloud(n: int = 500, rng_seed: int = 0) -> np.ndarray:
    """
    Points ``(u, 0.7 v, z)`` on the bumpy sheet ``z = 0.5 sin(2u) cos(3v) + 0.3 u^2``.

    The sheet has no symmetry that makes a rotation ambiguous.
    """
    if n < 3:
        raise ParameterDomainError(f"surface cloud needs at least 3 points, got {n}")
    rng = np.random.default_rng(rng_seed)
    u = rng.uniform(-1.0, 1.0, size=n)
    v = rng.uniform(-1.0, 1.0, size=n)
    z = 0.5 * np.sin(2.0 * u) * np.cos(3.0 * v) + 0.3 * u**2
    return np.column_stack([u, 0.7 * v, z])


def gen_correlated_gaussians(
    n: int = 10_000, d: int = 32, decay: float = 0.9, rng_seed: int = 0
) -> np.ndarray:
    """
    Zero-mean Gaussians with a decaying spectrum in a random orthonormal basis.

    The covariance eigenvalues are ``decay ** i``, so variance is concentrated in a few
    directions not aligned with the coordinate axes.
    """
    if n < 1 or d < 1:
        raise ParameterDomainError(f"need n >= 1 and d >= 1, got n={n}, d={d}")
    if not 0.0 < decay <= 1.0:
        raise ParameterDomainError(f"decay must lie in (0, 1], got {decay}")
    rng = np.random.default_rng(rng_seed)
    basis, _ = np.linalg.qr(rng.standard_normal((d, d)))
    scales = np.sqrt(decay ** np.arange(d, dtype=float))
    return (rng.standard_normal((n, d)) * scales) @ basis.T


def gaussian_kernel(L: int, width: float) -> np.ndarray:
    """Sampled Gaussian of standard deviation ``width`` centered in ``L`` taps, summing to 1."""
    if L < 1 or width <= 0.0:
        raise ParameterDomainError(f"need L >= 1 and width > 0, got L={L}, width={width}")
    taps = np.arange(L) - (L - 1) / 2.0
    kern = np.exp(-0.5 * (taps / width) ** 2)
    return kern / kern.sum()


def piecewise_constant(n: int, pieces: int, rng: np.random.Generator) -> np.ndarray:
    """Signal of ``pieces`` constant runs with levels drawn uniformly from [0, 1]."""
    cuts = np.sort(rng.choice(np.arange(1, n), size=min(pieces - 1, n - 1), replace=False))
    levels = rng.uniform(0.0, 1.0, size=cuts.shape[0] + 1)
    return np.repeat(levels, np.diff(np.concatenate([[0], cuts, [n]])))


def gen_blind_deconv(
    n: int = 128,
    L: int = 9,
    width: float = 2.0,
    noise: float = 0.01,
    pieces: int = 8,
    rng_seed: int = 0,
) -> SyntheticDeconv:
    """
    Piecewise-constant signal blurred by a Gaussian kernel plus white noise.

    The noise standard deviation is ``noise`` times the RMS of the blurred signal.
    """
    if L > n:
        raise ParameterDomainError(f"kernel length {L} exceeds signal length {n}")
    if noise < 0.0:
        raise ParameterDomainError(f"noise must be >= 0, got {noise}")
    if pieces < 1:
        raise ParameterDomainError(f"pieces must be >= 1, got {pieces}")
    rng = np.random.default_rng(rng_seed)
    x = piecewise_constant(n, pieces, rng)
    kern = gaussian_kernel(L, width)
    blurred = circular_convolve(x, kern)
    rms = float(np.sqrt(np.mean(blurred**2)))
    y = blurred + rng.normal(scale=noise * rms, size=n)
    return SyntheticDeconv(y=y, x=x, kern=kern)
