"""Build (and cache) a small chair-family checkpoint bundle plus a labeled
target cloud for the editor UI round trip and manual demos.

Usage: python3 scripts/make_demo_checkpoint.py [out_dir]
Prints the bundle and target paths on the last two lines.
"""

import sys
import time
from pathlib import Path

import torch

torch.set_num_threads(2)

from pcinvert.bundle import InversionBundle, load_bundle, save_bundle, train_encoder_stack
from pcinvert.core import sample_sphere_prior, save_native
from pcinvert.data import ShapeFamilyConfig, generate_family, make_split
from pcinvert.encoder import EncoderConfig
from pcinvert.inversion import InversionConfig
from pcinvert.spgan import (
    DiscriminatorConfig,
    GanTrainingConfig,
    GeneratorConfig,
    build_models,
    train_gan,
)

N_POINTS = 128
NOISE_DIM = 8
GAN_ITERS = 600
STEP1_ITERS = 800


def main():
    out_dir = Path(sys.argv[1] if len(sys.argv) > 1 else ".cache/demo")
    out_dir.mkdir(parents=True, exist_ok=True)
    bundle_path = out_dir / "demo_bundle.pinv"
    target_path = out_dir / "chair_target.pinv"

    corpus = make_split(
        generate_family(ShapeFamilyConfig(family="chair_toy", n_points=N_POINTS, seed=5), 60),
        test_fraction=0.10,
        seed=6,
    )
    if not target_path.exists():
        save_native(corpus.test_items[0], target_path)

    if bundle_path.exists():
        load_bundle(bundle_path)  # validate the cache
        print(f"cached bundle found at {bundle_path}")
    else:
        t0 = time.time()
        gen_cfg = GeneratorConfig(
            n_points=N_POINTS, noise_dim=NOISE_DIM, hidden=64, k=8, style_dim=16
        )
        gan_cfg = GanTrainingConfig(
            iterations=GAN_ITERS, batch_size=8, seed=0, checkpoint_interval=10**9
        )
        generator, discriminator = build_models(
            gen_cfg, DiscriminatorConfig(hidden=64, k=8), seed=0
        )
        train_gan(corpus.train_items, gan_cfg, generator, discriminator)
        print(f"GAN trained in {time.time() - t0:.0f}s")

        enc_cfg = EncoderConfig(
            noise_dim=NOISE_DIM, style_dim=16, k=8, layers=(48, 48, 48, 96), fused=128
        )
        inv_cfg = InversionConfig(
            step1_iterations=STEP1_ITERS, step3_iterations=600, batch_size=8, seed=0
        )
        bundle = InversionBundle(
            generator=generator,
            discriminator=discriminator,
            sphere=sample_sphere_prior(N_POINTS),
            gan_config=gan_cfg,
            encoder_config=enc_cfg,
            inversion_config=inv_cfg,
            meta={"demo": True},
        )
        bundle.stacks["graph"] = train_encoder_stack(
            corpus.train_items, bundle, "graph", inv_cfg, enc_cfg, seed=1
        )
        save_bundle(bundle_path, bundle)
        print(f"bundle trained and saved in {time.time() - t0:.0f}s")

    print(bundle_path)
    print(target_path)


if __name__ == "__main__":
    main()
