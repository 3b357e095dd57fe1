"""Latent code containers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class GlobalLatent:
    """Order-invariant d-dimensional summary code of a point cloud."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if v.size < 1:
            raise ValueError("global latent must be non-empty")
        if not np.isfinite(v).all():
            raise ValueError("global latent contains non-finite entries")
        self.values = v

    @property
    def dim(self) -> int:
        return self.values.shape[0]


@dataclass
class LatentCodes:
    """Per-point latent codes, one N x (3+d) matrix.

    Row i is semantically bound to sphere prior row i. The first 3 columns
    start as the prior coordinates; they drift only if explicitly optimized.
    """

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape[1] < 3:
            raise ValueError(f"latent codes must be (N, 3+d) with d >= 0, got {v.shape}")
        if not np.isfinite(v).all():
            raise ValueError("latent codes contain non-finite entries")
        self.values = v

    @property
    def n_points(self) -> int:
        return self.values.shape[0]

    @property
    def noise_dim(self) -> int:
        return self.values.shape[1] - 3

    @property
    def coords(self) -> np.ndarray:
        return self.values[:, :3]

    @property
    def noise(self) -> np.ndarray:
        return self.values[:, 3:]

    def copy(self) -> "LatentCodes":
        return LatentCodes(self.values.copy())
