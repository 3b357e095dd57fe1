"""Dual-granularity point cloud discriminator: one score for the whole
cloud, one per point."""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn

from pcinvert.spgan.graph import EdgeConv, knn_indices


@dataclass(frozen=True)
class DiscriminatorConfig:
    hidden: int = 64
    k: int = 8

    def __post_init__(self):
        if self.hidden < 1 or self.k < 1:
            raise ValueError("hidden and k must be positive")


class PointDiscriminator(nn.Module):
    def __init__(self, config: DiscriminatorConfig, seed: int | None = None):
        super().__init__()
        if seed is not None:
            torch.manual_seed(seed)
        self.config = config
        h = config.hidden
        self.lin_in = nn.Linear(3, h)
        self.conv1 = EdgeConv(h, h)
        self.conv2 = EdgeConv(h, h)
        self.point_head = nn.Linear(h, 1)
        self.global_head = nn.Sequential(nn.Linear(h, h), nn.LeakyReLU(0.2), nn.Linear(h, 1))
        self.act = nn.LeakyReLU(0.2)

    def point_features(self, points: torch.Tensor) -> torch.Tensor:
        """Per-point feature trunk; graph built on the input coordinates."""
        squeeze = points.dim() == 2
        if squeeze:
            points = points.unsqueeze(0)
        if points.shape[-2] < self.config.k + 1:
            raise ValueError(
                f"need at least k+1={self.config.k + 1} points, got {points.shape[-2]}"
            )
        nb = knn_indices(points, self.config.k)
        f = self.act(self.lin_in(points))
        f = self.conv1(f, nb)
        f = self.conv2(f, nb)
        return f.squeeze(0) if squeeze else f

    def forward(self, points: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        squeeze = points.dim() == 2
        if squeeze:
            points = points.unsqueeze(0)
        f = self.point_features(points)
        point_scores = self.point_head(f).squeeze(-1)  # (B, N)
        score = self.global_head(f.max(dim=1).values).squeeze(-1)  # (B,)
        if squeeze:
            return score.squeeze(0), point_scores.squeeze(0)
        return score, point_scores
