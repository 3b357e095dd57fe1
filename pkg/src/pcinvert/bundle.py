"""Trained-model bundles: the base GAN plus per-variant encoder stacks
(each stack is an encoder and the generator it refined), serialized into one
self-describing container so the CLI and the service can load everything
needed for any inversion mode from a single file.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field

import torch

from pcinvert.core.container import read_container, write_container
from pcinvert.core.sphere import SpherePrior, sample_sphere_prior
from pcinvert.encoder import (
    DiscriminatorEncoder,
    EncoderConfig,
    GraphEncoder,
    LocalCodeEncoder,
    encoder_from_discriminator,
)
from pcinvert.inversion import InversionConfig, InversionModels, step1_train
from pcinvert.spgan import (
    DiscriminatorConfig,
    GanTrainingConfig,
    GeneratorConfig,
    PointDiscriminator,
    SphereGenerator,
    build_models,
)
from pcinvert.spgan.train import _load_state, _state_sections

ENCODER_VARIANTS = ("graph", "local", "disc")

# Which encoder stack serves each inversion mode; opt_* modes run on the
# base (unrefined) generator with no encoder.
MODE_VARIANT = {"full": "graph", "learn_global": "graph", "learn_local": "local"}


@dataclass
class EncoderStack:
    variant: str
    encoder: torch.nn.Module
    generator: SphereGenerator
    history: list[float] = field(default_factory=list)


@dataclass
class InversionBundle:
    generator: SphereGenerator          # base GAN generator
    discriminator: PointDiscriminator
    sphere: SpherePrior
    gan_config: GanTrainingConfig
    encoder_config: EncoderConfig
    inversion_config: InversionConfig
    stacks: dict[str, EncoderStack] = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    @property
    def n_points(self) -> int:
        return self.generator.config.n_points

    def models_for_mode(self, mode: str, variant: str | None = None) -> InversionModels:
        """Generator/encoder pair appropriate for one ablation mode."""
        if mode in ("opt_global", "opt_local"):
            return InversionModels(generator=self.generator, sphere=self.sphere)
        variant = variant or MODE_VARIANT.get(mode)
        if variant is None:
            raise ValueError(f"unknown inversion mode {mode!r}")
        stack = self.stacks.get(variant)
        if stack is None:
            raise ValueError(
                f"bundle has no trained {variant!r} encoder (have {sorted(self.stacks)})"
            )
        return InversionModels(
            generator=stack.generator, sphere=self.sphere, encoder=stack.encoder
        )


def _build_encoder(variant: str, cfg: EncoderConfig, discriminator, seed: int):
    if variant == "graph":
        return GraphEncoder(cfg, seed=seed)
    if variant == "local":
        return LocalCodeEncoder(cfg, seed=seed)
    if variant == "disc":
        return encoder_from_discriminator(
            discriminator, cfg.noise_dim, cfg.style_dim, seed=seed
        )
    raise ValueError(f"unknown encoder variant {variant!r} (expected {ENCODER_VARIANTS})")


def train_encoder_stack(
    train_clouds,
    bundle_or_models,
    variant: str,
    inv_cfg: InversionConfig,
    enc_cfg: EncoderConfig,
    seed: int = 0,
    progress=None,
) -> EncoderStack:
    """Run Step-1 training for one encoder variant against the base GAN."""
    if isinstance(bundle_or_models, InversionBundle):
        generator = bundle_or_models.generator
        discriminator = bundle_or_models.discriminator
    else:
        generator, discriminator = bundle_or_models
    encoder = _build_encoder(variant, enc_cfg, discriminator, seed)
    trained_enc, refined_gen, history = step1_train(
        train_clouds, generator, encoder, inv_cfg, progress=progress
    )
    return EncoderStack(variant=variant, encoder=trained_enc, generator=refined_gen,
                        history=history)


def generator_digest(generator: SphereGenerator) -> str:
    """Stable fingerprint of a generator's config and parameters."""
    hasher = hashlib.sha256()
    hasher.update(json.dumps(asdict(generator.config), sort_keys=True).encode())
    for name, tensor in sorted(generator.state_dict().items()):
        hasher.update(name.encode())
        hasher.update(tensor.detach().cpu().numpy().tobytes())
    return hasher.hexdigest()[:16]


# ---------------------------------------------------------------------------
# Serialization


def save_bundle(path, bundle: InversionBundle) -> None:
    sections: dict = {
        "kind": "inversion_bundle",
        "generator_config": asdict(bundle.generator.config),
        "discriminator_config": asdict(bundle.discriminator.config),
        "gan_config": asdict(bundle.gan_config),
        "encoder_config": {**asdict(bundle.encoder_config),
                           "layers": list(bundle.encoder_config.layers)},
        "inversion_config": asdict(bundle.inversion_config),
        "meta": {**bundle.meta, "stacks": sorted(bundle.stacks)},
    }
    sections.update(_state_sections("generator", bundle.generator))
    sections.update(_state_sections("discriminator", bundle.discriminator))
    for variant, stack in bundle.stacks.items():
        sections.update(_state_sections(f"stack:{variant}:encoder", stack.encoder))
        sections.update(_state_sections(f"stack:{variant}:generator", stack.generator))
    write_container(path, sections)


def load_bundle(path) -> InversionBundle:
    sections = read_container(path)
    if sections.get("kind") != "inversion_bundle":
        raise ValueError(f"{path}: not an inversion bundle")
    gen_cfg = GeneratorConfig(**sections["generator_config"])
    disc_cfg = DiscriminatorConfig(**sections["discriminator_config"])
    enc_raw = dict(sections["encoder_config"])
    enc_raw["layers"] = tuple(enc_raw["layers"])
    enc_cfg = EncoderConfig(**enc_raw)
    sphere = sample_sphere_prior(gen_cfg.n_points)
    generator, discriminator = build_models(gen_cfg, disc_cfg, sphere=sphere)
    _load_state("generator", sections, generator)
    _load_state("discriminator", sections, discriminator)
    bundle = InversionBundle(
        generator=generator,
        discriminator=discriminator,
        sphere=sphere,
        gan_config=GanTrainingConfig(**sections["gan_config"]),
        encoder_config=enc_cfg,
        inversion_config=InversionConfig(**sections["inversion_config"]),
        meta={k: v for k, v in sections["meta"].items() if k != "stacks"},
    )
    for variant in sections["meta"].get("stacks", []):
        encoder = _build_encoder(variant, enc_cfg, discriminator, seed=0)
        stack_gen, _ = build_models(gen_cfg, disc_cfg, sphere=sphere)
        _load_state(f"stack:{variant}:encoder", sections, encoder)
        _load_state(f"stack:{variant}:generator", sections, stack_gen)
        bundle.stacks[variant] = EncoderStack(
            variant=variant, encoder=encoder, generator=stack_gen
        )
    return bundle
