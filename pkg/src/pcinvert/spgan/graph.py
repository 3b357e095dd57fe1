"""k-NN graph utilities shared by the generator, discriminator and encoders."""

from __future__ import annotations

import torch


def knn_indices(points: torch.Tensor, k: int) -> torch.Tensor:
    """Indices of the k nearest neighbors of each point (self excluded).

    Works on (N, F) or (B, N, F) inputs; deterministic for a given input.
    """
    n = points.shape[-2]
    if k < 1 or k > n - 1:
        raise ValueError(f"k must be in [1, N-1]; got k={k}, N={n}")
    d = torch.cdist(points, points)
    d.diagonal(dim1=-2, dim2=-1).fill_(torch.inf)
    return d.topk(k, dim=-1, largest=False).indices


def gather_neighbors(features: torch.Tensor, neighbors: torch.Tensor) -> torch.Tensor:
    """Gather neighbor features: (B, N, F) x (N, k) or (B, N, k) -> (B, N, k, F)."""
    b, n, f = features.shape
    if neighbors.dim() == 2:
        k = neighbors.shape[-1]
        return features.index_select(1, neighbors.reshape(-1)).view(b, n, k, f)
    k = neighbors.shape[-1]
    offsets = torch.arange(b, device=features.device).view(b, 1, 1) * n
    flat = (neighbors + offsets).reshape(-1)
    return features.reshape(b * n, f).index_select(0, flat).view(b, n, k, f)


class EdgeConv(torch.nn.Module):
    """Edge convolution: max over neighbors of an MLP on [f_i, f_j - f_i].

    With norm=True a per-edge LayerNorm sits between the linear map and the
    activation (the usual normalized edge-conv block); it is per-point, so
    equivariance and locality are unaffected.
    """

    def __init__(self, in_features: int, out_features: int, norm: bool = False):
        super().__init__()
        self.lin = torch.nn.Linear(2 * in_features, out_features)
        self.norm = torch.nn.LayerNorm(out_features) if norm else None
        self.act = torch.nn.LeakyReLU(0.2)

    def forward(self, features: torch.Tensor, neighbors: torch.Tensor) -> torch.Tensor:
        nb = gather_neighbors(features, neighbors)  # (B, N, k, F)
        center = features.unsqueeze(2).expand_as(nb)
        edge = self.lin(torch.cat([center, nb - center], dim=-1))
        if self.norm is not None:
            edge = self.norm(edge)
        return self.act(edge).max(dim=2).values
