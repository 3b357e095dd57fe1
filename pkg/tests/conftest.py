import pytest
import torch
import yaml

from pcinvert.bundle import InversionBundle, save_bundle, train_encoder_stack
from pcinvert.core import sample_sphere_prior
from pcinvert.data import (
    ShapeFamilyConfig,
    generate_family,
    make_split,
    merge_corpora,
    save_corpus,
)
from pcinvert.encoder import EncoderConfig
from pcinvert.inversion import InversionConfig
from pcinvert.spgan import (
    DiscriminatorConfig,
    GanTrainingConfig,
    GeneratorConfig,
    build_models,
    train_gan,
)

torch.set_num_threads(2)

TINY_N = 32
TINY_D = 4


@pytest.fixture(scope="session")
def tiny_corpus():
    ellipsoids = generate_family(
        ShapeFamilyConfig(family="ellipsoid", n_points=TINY_N, seed=0), 12
    )
    chairs = generate_family(
        ShapeFamilyConfig(family="chair_toy", n_points=TINY_N, seed=1), 12
    )
    return make_split(merge_corpora([ellipsoids, chairs]), test_fraction=0.25, seed=2)


@pytest.fixture(scope="session")
def tiny_corpus_dir(tiny_corpus, tmp_path_factory):
    directory = tmp_path_factory.mktemp("corpus")
    save_corpus(tiny_corpus, directory)
    return directory


@pytest.fixture(scope="session")
def tiny_bundle(tiny_corpus):
    gen_cfg = GeneratorConfig(n_points=TINY_N, noise_dim=TINY_D, hidden=16, k=4, style_dim=8)
    disc_cfg = DiscriminatorConfig(hidden=16, k=4)
    gan_cfg = GanTrainingConfig(
        iterations=30, batch_size=4, seed=0, checkpoint_interval=1000
    )
    generator, discriminator = build_models(gen_cfg, disc_cfg, seed=0)
    train_gan(tiny_corpus.train_items, gan_cfg, generator, discriminator)
    enc_cfg = EncoderConfig(
        noise_dim=TINY_D, style_dim=8, k=4, layers=(8, 8, 8, 16), fused=32
    )
    inv_cfg = InversionConfig(
        step1_iterations=80, step3_iterations=60, batch_size=4, seed=0
    )
    bundle = InversionBundle(
        generator=generator,
        discriminator=discriminator,
        sphere=sample_sphere_prior(TINY_N),
        gan_config=gan_cfg,
        encoder_config=enc_cfg,
        inversion_config=inv_cfg,
    )
    for variant in ("graph", "local", "disc"):
        bundle.stacks[variant] = train_encoder_stack(
            tiny_corpus.train_items, bundle, variant, inv_cfg, enc_cfg, seed=3
        )
    return bundle


@pytest.fixture(scope="session")
def tiny_bundle_path(tiny_bundle, tmp_path_factory):
    path = tmp_path_factory.mktemp("bundle") / "bundle.pinv"
    save_bundle(path, tiny_bundle)
    return path


TINY_CONFIG = {
    "model": {"n_points": TINY_N, "noise_dim": TINY_D, "hidden": 16, "k": 4, "style_dim": 8},
    "gan": {"iterations": 6, "batch_size": 4, "seed": 0, "checkpoint_interval": 1000},
    "encoder": {"k": 4, "layers": [8, 8, 8, 16], "fused": 32, "style_dim": 8},
    "inversion": {
        "step1_iterations": 10,
        "step3_iterations": 10,
        "batch_size": 4,
        "seed": 0,
    },
    "corpus": {
        "families": ["ellipsoid"],
        "count_per_family": 8,
        "seed": 0,
        "test_fraction": 0.25,
    },
}


@pytest.fixture()
def tiny_config_path(tmp_path):
    path = tmp_path / "config.yaml"
    path.write_text(yaml.safe_dump(TINY_CONFIG))
    return path
