"""Point cloud container and normalization."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class PointCloud:
    """An ordered set of N 3D points.

    The row order is meaningful: after inversion, row i of a reconstruction
    corresponds to row i of the sphere prior. ``labels`` optionally carries a
    per-point part/region id.
    """

    points: np.ndarray
    labels: np.ndarray | None = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise ValueError(f"points must be an (N, 3) array, got shape {pts.shape}")
        if pts.shape[0] < 1:
            raise ValueError("point cloud must contain at least one point")
        if not np.isfinite(pts).all():
            raise ValueError("point cloud contains non-finite coordinates")
        self.points = pts
        if self.labels is not None:
            lab = np.asarray(self.labels, dtype=np.int64)
            if lab.shape != (pts.shape[0],):
                raise ValueError(
                    f"labels must have shape ({pts.shape[0]},), got {lab.shape}"
                )
            self.labels = lab

    def __len__(self) -> int:
        return self.points.shape[0]

    def copy(self) -> "PointCloud":
        return PointCloud(
            self.points.copy(),
            None if self.labels is None else self.labels.copy(),
        )


@dataclass(frozen=True)
class NormalizeTransform:
    """Invertible centroid-center + max-norm scale transform.

    ``normalized = (points - center) / scale``
    """

    center: tuple[float, float, float]
    scale: float

    def apply(self, points: np.ndarray) -> np.ndarray:
        return (np.asarray(points, dtype=np.float64) - np.array(self.center)) / self.scale

    def invert(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points, dtype=np.float64) * self.scale + np.array(self.center)

    def to_dict(self) -> dict:
        return {"center": list(self.center), "scale": self.scale}

    @classmethod
    def from_dict(cls, d: dict) -> "NormalizeTransform":
        return cls(center=tuple(d["center"]), scale=float(d["scale"]))


def normalize(cloud: PointCloud) -> tuple[PointCloud, NormalizeTransform]:
    """Center a cloud at its centroid and scale it so the max point norm is 1.

    Raises ValueError when all points coincide (degenerate scale).
    """
    center = cloud.points.mean(axis=0)
    shifted = cloud.points - center
    scale = float(np.linalg.norm(shifted, axis=1).max())
    if scale < 1e-12:
        raise ValueError("cannot normalize: all points are identical (zero extent)")
    out = PointCloud(shifted / scale, cloud.labels)
    return out, NormalizeTransform(center=tuple(float(c) for c in center), scale=scale)
