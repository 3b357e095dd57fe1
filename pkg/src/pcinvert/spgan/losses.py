"""Least-squares adversarial losses at cloud and point granularity."""

from __future__ import annotations

from dataclasses import dataclass

import torch

from pcinvert.spgan.discriminator import PointDiscriminator


@dataclass(frozen=True)
class GanTrainingConfig:
    lam: float = 1.0           # weight of the per-point term in the D loss
    beta: float = 1.0          # weight of the per-point term in the G loss
    lr_generator: float = 1e-4
    lr_discriminator: float = 1e-4
    iterations: int = 2000
    batch_size: int = 8
    seed: int = 0
    checkpoint_interval: int = 500

    def __post_init__(self):
        if self.lam < 0 or self.beta < 0:
            raise ValueError("lam and beta must be >= 0")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.lr_generator <= 0 or self.lr_discriminator <= 0:
            raise ValueError("learning rates must be positive")


def discriminator_terms(
    score_fake: torch.Tensor,
    score_real: torch.Tensor,
    point_fake: torch.Tensor,
    point_real: torch.Tensor,
    lam: float,
) -> torch.Tensor:
    """Score-level D loss: cloud term plus lam times the per-point term.

    Targets: 0 for generated, 1 for real. Each term is a square, so the loss
    is >= 0 and is exactly 0 at the perfect-discriminator assignment.
    """
    cloud = 0.5 * (score_fake.pow(2).mean() + (score_real - 1.0).pow(2).mean())
    point = 0.5 * (point_fake.pow(2).mean() + (point_real - 1.0).pow(2).mean())
    return cloud + lam * point


def generator_terms(
    score_fake: torch.Tensor, point_fake: torch.Tensor, beta: float
) -> torch.Tensor:
    """Score-level G loss; 0 exactly when the discriminator outputs 1
    everywhere on the generated cloud and its points."""
    cloud = 0.5 * (score_fake - 1.0).pow(2).mean()
    point = 0.5 * (point_fake - 1.0).pow(2).mean()
    return cloud + beta * point


def discriminator_loss(
    disc: PointDiscriminator,
    real: torch.Tensor,
    fake: torch.Tensor,
    lam: float = 1.0,
) -> torch.Tensor:
    if real.shape[-2] != fake.shape[-2]:
        raise ValueError("real and fake clouds must have the same cardinality")
    score_real, point_real = disc(real)
    score_fake, point_fake = disc(fake)
    return discriminator_terms(score_fake, score_real, point_fake, point_real, lam)


def generator_loss(
    disc: PointDiscriminator, fake: torch.Tensor, beta: float = 1.0
) -> torch.Tensor:
    score_fake, point_fake = disc(fake)
    return generator_terms(score_fake, point_fake, beta)
