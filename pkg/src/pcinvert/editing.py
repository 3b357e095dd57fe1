"""Part-aware editing: perturb the latent rows of a selected prior region,
then regenerate. Rows outside the region are never touched, so the
correspondence between prior indices and output rows survives every edit.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch

from pcinvert.core.cloud import PointCloud
from pcinvert.core.latent import LatentCodes
from pcinvert.core.sphere import SpherePrior
from pcinvert.spgan.generator import SphereGenerator, StyleVectors, generator_forward

EDIT_MODES = ("additive_noise", "interpolate_toward", "affine_transform")


@dataclass(frozen=True)
class RegionMask:
    """A set of prior indices in [0, N)."""

    indices: tuple[int, ...]

    def __post_init__(self):
        idx = tuple(sorted({int(i) for i in self.indices}))
        if any(i < 0 for i in idx):
            raise ValueError("mask indices must be non-negative")
        object.__setattr__(self, "indices", idx)

    def __len__(self) -> int:
        return len(self.indices)

    def validate(self, n: int) -> None:
        for i in self.indices:
            if i >= n:
                raise ValueError(f"mask index {i} out of range for N={n}")

    def array(self) -> np.ndarray:
        return np.asarray(self.indices, dtype=np.int64)


@dataclass
class EditOperation:
    """One region-wise perturbation of the latent codes.

    additive_noise      payload: sigma (noise scale, >= 0)
    interpolate_toward  payload: donor codes + weight t in [0, 1]
    affine_transform    payload: 3x3 linear + translation, applied to the
                        coordinate columns of masked rows
    """

    mask: RegionMask
    mode: str
    sigma: float = 0.0
    donor: LatentCodes | None = None
    weight: float = 0.0
    linear: np.ndarray | None = None
    translation: np.ndarray | None = None
    seed: int = 0

    def __post_init__(self):
        if self.mode not in EDIT_MODES:
            raise ValueError(f"mode must be one of {EDIT_MODES}, got {self.mode!r}")
        if self.mode == "additive_noise" and self.sigma < 0:
            raise ValueError("sigma must be >= 0")
        if self.mode == "interpolate_toward":
            if self.donor is None:
                raise ValueError("interpolate_toward requires donor codes")
            if not (0.0 <= self.weight <= 1.0):
                raise ValueError("weight t must be in [0, 1]")
        if self.mode == "affine_transform":
            self.linear = np.eye(3) if self.linear is None else np.asarray(self.linear, dtype=np.float64)
            self.translation = (
                np.zeros(3) if self.translation is None else np.asarray(self.translation, dtype=np.float64)
            )
            if self.linear.shape != (3, 3) or self.translation.shape != (3,):
                raise ValueError("affine payload must be a 3x3 linear and a length-3 translation")

    def to_record(self) -> dict:
        """JSON-compatible record for the service API."""
        record = {"mode": self.mode, "indices": list(self.mask.indices), "seed": self.seed}
        if self.mode == "additive_noise":
            record["sigma"] = self.sigma
        elif self.mode == "interpolate_toward":
            record["weight"] = self.weight
            record["donor"] = self.donor.values.tolist()
        else:
            record["linear"] = self.linear.tolist()
            record["translation"] = self.translation.tolist()
        return record

    @classmethod
    def from_record(cls, record: dict) -> "EditOperation":
        mode = record.get("mode")
        mask = RegionMask(tuple(record.get("indices", ())))
        seed = int(record.get("seed", 0))
        if mode == "additive_noise":
            return cls(mask=mask, mode=mode, sigma=float(record["sigma"]), seed=seed)
        if mode == "interpolate_toward":
            return cls(
                mask=mask,
                mode=mode,
                donor=LatentCodes(np.asarray(record["donor"], dtype=np.float64)),
                weight=float(record["weight"]),
                seed=seed,
            )
        if mode == "affine_transform":
            return cls(
                mask=mask,
                mode=mode,
                linear=np.asarray(record["linear"], dtype=np.float64),
                translation=np.asarray(record["translation"], dtype=np.float64),
                seed=seed,
            )
        raise ValueError(f"unknown edit mode {mode!r}")


def apply_edit(codes: LatentCodes, op: EditOperation, seed: int | None = None) -> LatentCodes:
    """Return a copy of the codes with only the masked rows transformed.

    Deterministic given the seed (op.seed unless overridden). Zero-strength
    edits (sigma = 0, t = 0) return a bitwise-identical copy.
    """
    if len(op.mask) == 0:
        raise ValueError("edit mask is empty")
    op.mask.validate(codes.n_points)
    out = codes.values.copy()
    idx = op.mask.array()
    if op.mode == "additive_noise":
        if op.sigma != 0.0:
            rng = np.random.default_rng(op.seed if seed is None else seed)
            out[idx] += op.sigma * rng.standard_normal((len(idx), out.shape[1]))
    elif op.mode == "interpolate_toward":
        if op.donor.values.shape != codes.values.shape:
            raise ValueError(
                f"donor shape {op.donor.values.shape} does not match codes "
                f"{codes.values.shape}"
            )
        t = op.weight
        if t == 1.0:
            out[idx] = op.donor.values[idx]
        elif t != 0.0:
            out[idx] = (1.0 - t) * out[idx] + t * op.donor.values[idx]
    else:  # affine_transform
        out[idx, :3] = out[idx, :3] @ op.linear.T + op.translation
    return LatentCodes(out)


def regenerate(
    codes: LatentCodes, style: StyleVectors, generator: SphereGenerator
) -> PointCloud:
    """Forward the (edited) codes through the frozen generator. Row i of the
    output still corresponds to prior index i."""
    return PointCloud(generator_forward(codes, style, generator))


def correspondence_colors(sphere: SpherePrior) -> np.ndarray:
    """RGB in [0,1] per prior point: color = (xyz + 1) / 2, smooth over the
    sphere; painting reconstructions with these colors visualizes the
    correspondence field."""
    return (sphere.points + 1.0) / 2.0


# ---------------------------------------------------------------------------
# Region selection


@dataclass(frozen=True)
class BoxQuery:
    """Axis-aligned box over reconstruction coordinates; degenerate boxes
    (any lo >= hi) select nothing."""

    lo: tuple[float, float, float]
    hi: tuple[float, float, float]


@dataclass(frozen=True)
class CapQuery:
    """Spherical cap over prior points: all indices whose prior point lies
    within `angle` radians of the center direction."""

    center: tuple[float, float, float]
    angle: float


@dataclass(frozen=True)
class IndexQuery:
    indices: tuple[int, ...]


def select_region(
    sphere: SpherePrior, recon: PointCloud, query
) -> RegionMask:
    """Build a RegionMask from a box over the reconstruction, a cap over the
    prior, or an explicit index list. An empty selection yields an empty
    mask; the caller decides whether that is an error."""
    if isinstance(query, IndexQuery):
        mask = RegionMask(query.indices)
        mask.validate(len(sphere))
        return mask
    if isinstance(query, BoxQuery):
        lo = np.asarray(query.lo, dtype=np.float64)
        hi = np.asarray(query.hi, dtype=np.float64)
        if (lo >= hi).any():
            return RegionMask(())
        inside = ((recon.points >= lo) & (recon.points <= hi)).all(axis=1)
        return RegionMask(tuple(np.nonzero(inside)[0].tolist()))
    if isinstance(query, CapQuery):
        center = np.asarray(query.center, dtype=np.float64)
        norm = np.linalg.norm(center)
        if norm == 0:
            raise ValueError("cap center direction must be non-zero")
        center = center / norm
        cos = sphere.points @ center
        inside = cos >= np.cos(min(query.angle, np.pi))
        return RegionMask(tuple(np.nonzero(inside)[0].tolist()))
    raise TypeError(f"unsupported query type {type(query).__name__}")
