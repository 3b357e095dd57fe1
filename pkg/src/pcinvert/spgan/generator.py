"""Sphere-guided per-point generator with style modulation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from pcinvert.core.latent import LatentCodes
from pcinvert.core.sphere import SpherePrior
from pcinvert.spgan.graph import EdgeConv, knn_indices


@dataclass(frozen=True)
class GeneratorConfig:
    n_points: int
    noise_dim: int
    hidden: int = 64
    k: int = 8
    style_dim: int = 32

    def __post_init__(self):
        if self.n_points < 2:
            raise ValueError("generator needs at least 2 points")
        if self.noise_dim < 0:
            raise ValueError("noise_dim must be >= 0")
        if not (1 <= self.k <= self.n_points - 1):
            raise ValueError(f"k={self.k} invalid for N={self.n_points}")


@dataclass
class StyleVectors:
    """Two global modulation vectors injected at the generator's two
    normalization sites."""

    s1: torch.Tensor
    s2: torch.Tensor

    def __post_init__(self):
        self.s1 = torch.as_tensor(self.s1)
        self.s2 = torch.as_tensor(self.s2)
        if not (torch.isfinite(self.s1).all() and torch.isfinite(self.s2).all()):
            raise ValueError("style vectors must be finite")

    def numpy(self) -> tuple[np.ndarray, np.ndarray]:
        return (
            self.s1.detach().cpu().numpy().astype(np.float64),
            self.s2.detach().cpu().numpy().astype(np.float64),
        )

    def detach(self) -> "StyleVectors":
        return StyleVectors(self.s1.detach().clone(), self.s2.detach().clone())


def make_prior_code(sphere: SpherePrior, noise_dim: int, seed: int = 0) -> LatentCodes:
    """Prior latent code: sphere coordinates concatenated with per-point
    standard-normal noise, reproducible from the seed."""
    if noise_dim < 0:
        raise ValueError("noise_dim must be >= 0")
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal((len(sphere), noise_dim))
    return LatentCodes(np.concatenate([sphere.points, noise], axis=1))


class AdaptiveNorm(nn.Module):
    """Per-point feature normalization with style-conditioned scale/shift.

    Statistics are taken over the feature dimension of each point, so the
    layer is local: point i's output depends only on point i's features.
    The modulation is tanh-bounded, which prevents a scale race between the
    style source and the downstream weights when both are being trained.
    """

    def __init__(self, features: int, style_dim: int):
        super().__init__()
        self.affine = nn.Linear(style_dim, 2 * features)
        nn.init.normal_(self.affine.weight, std=0.1)
        nn.init.zeros_(self.affine.bias)

    def forward(self, feat: torch.Tensor, style: torch.Tensor) -> torch.Tensor:
        mu = feat.mean(dim=-1, keepdim=True)
        var = feat.var(dim=-1, keepdim=True, unbiased=False)
        normed = (feat - mu) / torch.sqrt(var + 1e-5)
        gamma, beta = torch.tanh(self.affine(style)).chunk(2, dim=-1)
        return (1.0 + gamma).unsqueeze(1) * normed + beta.unsqueeze(1)


class SphereGenerator(nn.Module):
    """Maps N x (3+d) latent codes to an N x 3 point cloud.

    Per-point layers interleaved with two edge convolutions over a static
    k-NN graph built once on the sphere prior; two style vectors modulate the
    adaptive normalization layers. Output row i depends on code row i, its
    2-hop graph neighborhood and the styles, never on the storage order of
    other rows.
    """

    def __init__(self, config: GeneratorConfig, sphere: SpherePrior, seed: int | None = None):
        super().__init__()
        if len(sphere) != config.n_points:
            raise ValueError(
                f"sphere has {len(sphere)} points, config expects {config.n_points}"
            )
        if seed is not None:
            torch.manual_seed(seed)
        self.config = config
        h, d, s = config.hidden, config.noise_dim, config.style_dim
        sphere_t = torch.as_tensor(sphere.points, dtype=torch.float32)
        self.register_buffer("sphere", sphere_t)
        self.register_buffer("neighbors", knn_indices(sphere_t, config.k))
        self.lin_in = nn.Linear(3 + d, h)
        self.conv1 = EdgeConv(h, h)
        self.ada1 = AdaptiveNorm(h, s)
        self.mlp1 = nn.Linear(h, h)
        self.conv2 = EdgeConv(h, h)
        self.ada2 = AdaptiveNorm(h, s)
        self.mlp2 = nn.Linear(h, h)
        self.head = nn.Linear(h, 3)
        self.style1 = nn.Linear(d, s)
        self.style2 = nn.Linear(d, s)
        self.act = nn.LeakyReLU(0.2)

    def styles_from_global(self, z_g: torch.Tensor) -> StyleVectors:
        """Affine style derivation used when sampling without an encoder."""
        return StyleVectors(self.style1(z_g), self.style2(z_g))

    def forward(
        self,
        codes: torch.Tensor,
        style: StyleVectors,
        neighbors: torch.Tensor | None = None,
    ) -> torch.Tensor:
        squeeze = codes.dim() == 2
        if squeeze:
            codes = codes.unsqueeze(0)
        b, n, width = codes.shape
        cfg = self.config
        if width != 3 + cfg.noise_dim or n != cfg.n_points:
            raise ValueError(
                f"codes shape {tuple(codes.shape)} does not match config "
                f"(N={cfg.n_points}, 3+d={3 + cfg.noise_dim})"
            )
        nb = self.neighbors if neighbors is None else neighbors
        s1 = style.s1 if style.s1.dim() == 2 else style.s1.unsqueeze(0).expand(b, -1)
        s2 = style.s2 if style.s2.dim() == 2 else style.s2.unsqueeze(0).expand(b, -1)

        f = self.act(self.lin_in(codes))
        f = self.conv1(f, nb)
        f = self.ada1(f, s1)
        f = self.act(self.mlp1(f))
        f = self.conv2(f, nb)
        f = self.ada2(f, s2)
        f = self.act(self.mlp2(f))
        out = self.head(f)
        return out.squeeze(0) if squeeze else out

    def sample_codes(
        self, batch: int, generator: torch.Generator | None = None
    ) -> tuple[torch.Tensor, StyleVectors]:
        """Draw prior codes (sphere coords + Gaussian noise) and matching
        styles derived from the mean noise row."""
        cfg = self.config
        dtype = self.sphere.dtype
        noise = torch.randn(
            batch, cfg.n_points, cfg.noise_dim, generator=generator, dtype=dtype
        )
        coords = self.sphere.unsqueeze(0).expand(batch, -1, -1)
        codes = torch.cat([coords, noise], dim=-1)
        style = self.styles_from_global(noise.mean(dim=1))
        return codes, style

    def sample(self, batch: int, generator: torch.Generator | None = None) -> torch.Tensor:
        codes, style = self.sample_codes(batch, generator)
        return self(codes, style)


def generator_forward(
    codes, style: StyleVectors, generator: SphereGenerator
) -> np.ndarray:
    """Numpy-facing single-cloud forward pass in inference mode."""
    values = codes.values if isinstance(codes, LatentCodes) else np.asarray(codes)
    with torch.no_grad():
        t = torch.as_tensor(values, dtype=generator.sphere.dtype)
        out = generator(t, style)
    return out.detach().cpu().numpy().astype(np.float64)
