"""The canonical unit-sphere prior."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_GOLDEN_ANGLE = np.pi * (3.0 - np.sqrt(5.0))


@dataclass
class SpherePrior:
    """N unit-norm points in a fixed deterministic order.

    Row i of the prior is the canonical anchor for row i of every latent code
    matrix and every generated cloud.
    """

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise ValueError(f"sphere prior must be (N, 3), got {pts.shape}")
        norms = np.linalg.norm(pts, axis=1)
        if np.abs(norms - 1.0).max() > 1e-6:
            raise ValueError("sphere prior rows must have unit norm")
        self.points = pts

    def __len__(self) -> int:
        return self.points.shape[0]


def sample_sphere_prior(n: int) -> SpherePrior:
    """Place n quasi-uniform points on the unit sphere, index-ordered.

    Uses the Fibonacci spiral lattice: point i sits at height
    z = 1 - (2i+1)/n and azimuth i times the golden angle. The layout is
    deterministic (bit-stable across calls) and quasi-uniform: the ratio of
    max to min nearest-neighbor distance stays around 1.15 for n >= 64.

    n = 1 is pinned by convention to the single point (0, 0, 1).
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if n == 1:
        return SpherePrior(np.array([[0.0, 0.0, 1.0]]))
    i = np.arange(n, dtype=np.float64)
    z = 1.0 - (2.0 * i + 1.0) / n
    theta = i * _GOLDEN_ANGLE
    r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    pts = np.stack([r * np.cos(theta), r * np.sin(theta), z], axis=1)
    return SpherePrior(pts)


def sphere_neighbor_pairs(sphere: SpherePrior, k: int = 6) -> np.ndarray:
    """Index pairs (i, j) where j is one of i's k nearest prior points.

    Used as the fixed adjacency for correspondence-smoothness statistics.
    """
    from scipy.spatial import cKDTree

    n = len(sphere)
    k = min(k, n - 1)
    if k < 1:
        return np.zeros((0, 2), dtype=np.int64)
    _, idx = cKDTree(sphere.points).query(sphere.points, k=k + 1)
    pairs = np.stack(
        [np.repeat(np.arange(n), k), idx[:, 1:].reshape(-1)], axis=1
    )
    return pairs.astype(np.int64)
