"""Order-invariant point cloud encoders.

The main encoder stacks four edge-convolution layers with dynamic k-NN
graphs (recomputed per layer in feature space), concatenates the per-point
features of all four layers, fuses them, and max-pools into a global latent
code plus two style vectors. Max pooling makes the outputs exactly invariant
to input row permutations.

Two alternates share the trunk design: a per-point-code variant (the
overfitting "local codes" baseline) and an encoder wrapped around a
discriminator's feature extractor (the ablation comparing encoder choices).
"""

from __future__ import annotations

import copy
from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from pcinvert.core.cloud import PointCloud
from pcinvert.core.latent import GlobalLatent
from pcinvert.spgan.discriminator import PointDiscriminator
from pcinvert.spgan.graph import EdgeConv, knn_indices
from pcinvert.spgan.generator import StyleVectors


@dataclass(frozen=True)
class EncoderConfig:
    noise_dim: int
    style_dim: int = 32
    k: int = 8
    layers: tuple[int, ...] = (64, 64, 64, 128)
    fused: int = 256

    def __post_init__(self):
        if self.noise_dim < 1:
            raise ValueError("noise_dim must be >= 1")
        if len(self.layers) != 4:
            raise ValueError("the trunk concatenates exactly four layers")


class _Trunk(nn.Module):
    """Four stacked edge convolutions with per-layer dynamic graphs, fused
    over the concatenation of all four layers' features."""

    def __init__(self, config: EncoderConfig):
        super().__init__()
        self.k = config.k
        widths = [3, *config.layers]
        self.convs = nn.ModuleList(
            EdgeConv(widths[i], widths[i + 1], norm=True) for i in range(4)
        )
        self.fuse = nn.Linear(sum(config.layers), config.fused)
        self.act = nn.LeakyReLU(0.2)

    def forward(self, points: torch.Tensor) -> torch.Tensor:
        if points.shape[-2] < self.k + 1:
            raise ValueError(
                f"need at least k+1={self.k + 1} points, got {points.shape[-2]}"
            )
        feat = points
        collected = []
        for conv in self.convs:
            nb = knn_indices(feat, self.k)
            feat = conv(feat, nb)
            collected.append(feat)
        return self.act(self.fuse(torch.cat(collected, dim=-1)))


class GraphEncoder(nn.Module):
    """Cloud -> (global latent, style vectors); permutation invariant."""

    emits = "global"

    def __init__(self, config: EncoderConfig, seed: int | None = None):
        super().__init__()
        if seed is not None:
            torch.manual_seed(seed)
        self.config = config
        self.trunk = _Trunk(config)
        self.z_head = nn.Linear(config.fused, config.noise_dim)
        self.s1_head = nn.Linear(config.fused, config.style_dim)
        self.s2_head = nn.Linear(config.fused, config.style_dim)

    def forward(self, points: torch.Tensor) -> tuple[torch.Tensor, StyleVectors]:
        squeeze = points.dim() == 2
        if squeeze:
            points = points.unsqueeze(0)
        pooled = self.trunk(points).max(dim=1).values
        z = self.z_head(pooled)
        style = StyleVectors(self.s1_head(pooled), self.s2_head(pooled))
        if squeeze:
            return z.squeeze(0), StyleVectors(style.s1.squeeze(0), style.s2.squeeze(0))
        return z, style


class LocalCodeEncoder(nn.Module):
    """Cloud -> per-point N x (3+d) codes directly.

    The codes follow the *target's* row order, so correspondences to the
    sphere prior are not preserved; this is the overfitting baseline. The
    coordinate columns are predicted as a residual off the input points,
    which is the shortcut this baseline is known to exploit: the codes can
    simply carry the target coordinates.
    """

    emits = "local"

    def __init__(self, config: EncoderConfig, seed: int | None = None):
        super().__init__()
        if seed is not None:
            torch.manual_seed(seed)
        self.config = config
        self.trunk = _Trunk(config)
        self.coord_head = nn.Linear(config.fused, 3)
        self.noise_head = nn.Linear(config.fused, config.noise_dim)
        self.s1_head = nn.Linear(config.fused, config.style_dim)
        self.s2_head = nn.Linear(config.fused, config.style_dim)
        nn.init.normal_(self.coord_head.weight, std=1e-3)
        nn.init.zeros_(self.coord_head.bias)

    def forward(self, points: torch.Tensor) -> tuple[torch.Tensor, StyleVectors]:
        squeeze = points.dim() == 2
        if squeeze:
            points = points.unsqueeze(0)
        feat = self.trunk(points)
        codes = torch.cat(
            [points + self.coord_head(feat), self.noise_head(feat)], dim=-1
        )
        pooled = feat.max(dim=1).values
        style = StyleVectors(self.s1_head(pooled), self.s2_head(pooled))
        if squeeze:
            return codes.squeeze(0), StyleVectors(style.s1.squeeze(0), style.s2.squeeze(0))
        return codes, style


class DiscriminatorEncoder(nn.Module):
    """Encoder built from a discriminator's per-point feature extractor with
    a fresh pooled head; the ablation alternative to the graph encoder."""

    emits = "global"

    def __init__(
        self,
        discriminator: PointDiscriminator,
        noise_dim: int,
        style_dim: int = 32,
        seed: int | None = None,
    ):
        super().__init__()
        if seed is not None:
            torch.manual_seed(seed)
        self.noise_dim = noise_dim
        self.style_dim = style_dim
        self.trunk = copy.deepcopy(discriminator)
        width = discriminator.config.hidden
        self.z_head = nn.Linear(width, noise_dim)
        self.s1_head = nn.Linear(width, style_dim)
        self.s2_head = nn.Linear(width, style_dim)

    def forward(self, points: torch.Tensor) -> tuple[torch.Tensor, StyleVectors]:
        squeeze = points.dim() == 2
        if squeeze:
            points = points.unsqueeze(0)
        pooled = self.trunk.point_features(points).max(dim=1).values
        z = self.z_head(pooled)
        style = StyleVectors(self.s1_head(pooled), self.s2_head(pooled))
        if squeeze:
            return z.squeeze(0), StyleVectors(style.s1.squeeze(0), style.s2.squeeze(0))
        return z, style


def encoder_from_discriminator(
    discriminator: PointDiscriminator,
    noise_dim: int,
    style_dim: int = 32,
    seed: int | None = None,
) -> DiscriminatorEncoder:
    return DiscriminatorEncoder(discriminator, noise_dim, style_dim, seed=seed)


def encoder_forward(cloud, encoder) -> tuple[GlobalLatent, StyleVectors]:
    """Numpy-facing inference wrapper for global-code encoders."""
    if encoder.emits != "global":
        raise ValueError("encoder_forward expects a global-code encoder")
    pts = cloud.points if isinstance(cloud, PointCloud) else np.asarray(cloud)
    dtype = next(encoder.parameters()).dtype
    with torch.no_grad():
        z, style = encoder(torch.as_tensor(pts, dtype=dtype))
    return GlobalLatent(z.cpu().numpy().astype(np.float64)), style.detach()
