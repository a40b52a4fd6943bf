"""Test configuration: src-layout imports and shared data fixtures."""

from __future__ import annotations

import sys
from pathlib import Path

import pytest


def _ensure_src_on_path() -> None:
    root = Path(__file__).resolve().parents[1]
    src_path = root / "src"
    if str(src_path) not in sys.path:
        sys.path.insert(0, str(src_path))


_ensure_src_on_path()

import numpy as np  # noqa: E402


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def blobs() -> np.ndarray:
    """Five well-separated 2-D blobs, 200 points."""
    from resexp.utils.datasets import gen_clusters

    return gen_clusters(n=200, d=2, k_true=5, separation=8.0, balance=0.8, rng_seed=7).points


@pytest.fixture
def surface() -> np.ndarray:
    from resexp.utils.datasets import gen_surface_cloud

    return gen_surface_cloud(200, rng_seed=3)
