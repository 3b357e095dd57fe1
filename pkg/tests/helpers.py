"""Shared test utilities: finite-difference gradients and tiny model builders."""

import numpy as np
import torch

from pcinvert.core.sphere import sample_sphere_prior
from pcinvert.spgan import (
    DiscriminatorConfig,
    GeneratorConfig,
    PointDiscriminator,
    SphereGenerator,
)


def finite_difference_grads(loss_fn, params, eps=1e-5):
    """Central-difference gradient of loss_fn() w.r.t. each tensor in params."""
    grads = []
    with torch.no_grad():
        for p in params:
            g = torch.zeros_like(p)
            flat = p.view(-1)
            gflat = g.view(-1)
            for i in range(flat.numel()):
                orig = flat[i].item()
                flat[i] = orig + eps
                up = float(loss_fn())
                flat[i] = orig - eps
                down = float(loss_fn())
                flat[i] = orig
                gflat[i] = (up - down) / (2.0 * eps)
            grads.append(g)
    return grads


def gradient_relative_error(loss_fn, module, eps=1e-5):
    """Relative L2 error between autograd and central-difference gradients."""
    params = [p for p in module.parameters() if p.requires_grad]
    for p in params:
        p.grad = None
    loss = loss_fn()
    loss.backward()
    analytic = torch.cat(
        [
            (p.grad if p.grad is not None else torch.zeros_like(p)).reshape(-1)
            for p in params
        ]
    )
    fd = torch.cat([g.reshape(-1) for g in finite_difference_grads(loss_fn, params, eps)])
    denom = max(float(fd.norm()), 1e-12)
    return float((analytic - fd).norm()) / denom


def tiny_generator(n=8, d=2, hidden=8, k=3, style_dim=4, seed=0, double=True):
    gen = SphereGenerator(
        GeneratorConfig(n_points=n, noise_dim=d, hidden=hidden, k=k, style_dim=style_dim),
        sample_sphere_prior(n),
        seed=seed,
    )
    return gen.double() if double else gen


def tiny_discriminator(hidden=8, k=3, seed=1, double=True):
    disc = PointDiscriminator(DiscriminatorConfig(hidden=hidden, k=k), seed=seed)
    return disc.double() if double else disc


def random_clouds(count, n, seed=0, scale=1.0):
    rng = np.random.default_rng(seed)
    pts = rng.normal(size=(count, n, 3)) * scale
    return pts / np.linalg.norm(pts, axis=-1, keepdims=True).max(axis=1, keepdims=True)
