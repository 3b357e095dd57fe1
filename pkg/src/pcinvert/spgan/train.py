"""Alternating adversarial training and checkpoint I/O."""

from __future__ import annotations

import math
from dataclasses import asdict
from pathlib import Path

import numpy as np
import torch

from pcinvert.core.cloud import PointCloud
from pcinvert.core.container import read_container, write_container
from pcinvert.core.sphere import SpherePrior, sample_sphere_prior
from pcinvert.spgan.discriminator import DiscriminatorConfig, PointDiscriminator
from pcinvert.spgan.generator import GeneratorConfig, SphereGenerator
from pcinvert.spgan.losses import (
    GanTrainingConfig,
    discriminator_loss,
    generator_loss,
)


class TrainingDiverged(RuntimeError):
    def __init__(self, message: str, iteration: int, history: list):
        super().__init__(f"{message} at iteration {iteration}")
        self.iteration = iteration
        self.history = history


def dataset_tensor(dataset) -> torch.Tensor:
    """Stack a list of PointCloud / arrays into an (M, N, 3) float tensor."""
    if isinstance(dataset, torch.Tensor):
        data = dataset.to(torch.float32)
    else:
        arrays = [
            item.points if isinstance(item, PointCloud) else np.asarray(item)
            for item in dataset
        ]
        if not arrays:
            raise ValueError("dataset is empty")
        sizes = {a.shape for a in arrays}
        if len(sizes) != 1:
            raise ValueError(f"dataset clouds must share one shape, got {sizes}")
        data = torch.as_tensor(np.stack(arrays), dtype=torch.float32)
    if data.dim() != 3 or data.shape[-1] != 3:
        raise ValueError(f"dataset must be (M, N, 3), got {tuple(data.shape)}")
    if data.shape[0] == 0:
        raise ValueError("dataset is empty")
    return data


def build_models(
    gen_config: GeneratorConfig,
    disc_config: DiscriminatorConfig | None = None,
    seed: int = 0,
    sphere: SpherePrior | None = None,
) -> tuple[SphereGenerator, PointDiscriminator]:
    sphere = sphere or sample_sphere_prior(gen_config.n_points)
    generator = SphereGenerator(gen_config, sphere, seed=seed)
    discriminator = PointDiscriminator(
        disc_config or DiscriminatorConfig(hidden=gen_config.hidden, k=gen_config.k),
        seed=seed + 1,
    )
    return generator, discriminator


def train_gan(
    dataset,
    cfg: GanTrainingConfig,
    generator: SphereGenerator,
    discriminator: PointDiscriminator,
    out_dir=None,
    start_iteration: int = 0,
    progress=None,
) -> tuple[SphereGenerator, PointDiscriminator, list[dict]]:
    """Alternate one discriminator update and one generator update per
    iteration. Returns the trained modules plus one history record per
    iteration; NaN losses abort with a TrainingDiverged diagnostic."""
    data = dataset_tensor(dataset)
    if data.shape[1] != generator.config.n_points:
        raise ValueError(
            f"dataset N={data.shape[1]} does not match generator N={generator.config.n_points}"
        )
    rng = np.random.default_rng(cfg.seed)
    noise_rng = torch.Generator().manual_seed(cfg.seed + 1)
    opt_d = torch.optim.Adam(discriminator.parameters(), lr=cfg.lr_discriminator)
    opt_g = torch.optim.Adam(generator.parameters(), lr=cfg.lr_generator)
    history: list[dict] = []

    for step in range(cfg.iterations):
        iteration = start_iteration + step
        idx = rng.integers(0, data.shape[0], size=cfg.batch_size)
        real = data[idx]

        with torch.no_grad():
            fake = generator.sample(cfg.batch_size, noise_rng)
        d_loss = discriminator_loss(discriminator, real, fake, cfg.lam)
        opt_d.zero_grad()
        d_loss.backward()
        opt_d.step()

        fake = generator.sample(cfg.batch_size, noise_rng)
        g_loss = generator_loss(discriminator, fake, cfg.beta)
        opt_g.zero_grad()
        g_loss.backward()
        opt_g.step()

        record = {
            "iteration": iteration,
            "d_loss": float(d_loss.detach()),
            "g_loss": float(g_loss.detach()),
        }
        history.append(record)
        if math.isnan(record["d_loss"]) or math.isnan(record["g_loss"]):
            raise TrainingDiverged("NaN loss", iteration, history)
        if progress is not None:
            progress(record)
        if out_dir is not None and (step + 1) % cfg.checkpoint_interval == 0:
            save_gan_checkpoint(
                Path(out_dir) / f"gan_{iteration + 1:06d}.pinv",
                generator,
                discriminator,
                cfg,
                iteration + 1,
            )
    return generator, discriminator, history


# ---------------------------------------------------------------------------
# Checkpoints


def _state_sections(prefix: str, module: torch.nn.Module) -> dict:
    return {
        f"{prefix}/{name}": tensor.detach().cpu().numpy()
        for name, tensor in module.state_dict().items()
    }


def _load_state(prefix: str, sections: dict, module: torch.nn.Module) -> None:
    state = {}
    skip = len(prefix) + 1
    for tag, value in sections.items():
        if tag.startswith(prefix + "/"):
            state[tag[skip:]] = torch.as_tensor(value)
    module.load_state_dict(state)


def save_gan_checkpoint(
    path,
    generator: SphereGenerator,
    discriminator: PointDiscriminator,
    cfg: GanTrainingConfig,
    iteration: int,
) -> None:
    sections = {
        "kind": "gan_checkpoint",
        "generator_config": asdict(generator.config),
        "discriminator_config": asdict(discriminator.config),
        "train_config": asdict(cfg),
        "meta": {"iteration": iteration},
    }
    sections.update(_state_sections("generator", generator))
    sections.update(_state_sections("discriminator", discriminator))
    write_container(path, sections)


def load_gan_checkpoint(path):
    sections = read_container(path)
    if sections.get("kind") != "gan_checkpoint":
        raise ValueError(f"{path}: not a GAN checkpoint")
    gen_cfg = GeneratorConfig(**sections["generator_config"])
    disc_cfg = DiscriminatorConfig(**sections["discriminator_config"])
    generator, discriminator = build_models(gen_cfg, disc_cfg)
    _load_state("generator", sections, generator)
    _load_state("discriminator", sections, discriminator)
    cfg = GanTrainingConfig(**sections["train_config"])
    return generator, discriminator, cfg, int(sections["meta"]["iteration"])
