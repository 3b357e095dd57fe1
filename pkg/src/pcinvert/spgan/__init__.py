from pcinvert.spgan.discriminator import DiscriminatorConfig, PointDiscriminator
from pcinvert.spgan.generator import (
    GeneratorConfig,
    SphereGenerator,
    StyleVectors,
    generator_forward,
    make_prior_code,
)
from pcinvert.spgan.graph import EdgeConv, gather_neighbors, knn_indices
from pcinvert.spgan.losses import (
    GanTrainingConfig,
    discriminator_loss,
    discriminator_terms,
    generator_loss,
    generator_terms,
)
from pcinvert.spgan.train import (
    TrainingDiverged,
    build_models,
    dataset_tensor,
    load_gan_checkpoint,
    save_gan_checkpoint,
    train_gan,
)

__all__ = [
    "GeneratorConfig",
    "SphereGenerator",
    "StyleVectors",
    "make_prior_code",
    "generator_forward",
    "DiscriminatorConfig",
    "PointDiscriminator",
    "GanTrainingConfig",
    "discriminator_loss",
    "generator_loss",
    "discriminator_terms",
    "generator_terms",
    "knn_indices",
    "gather_neighbors",
    "EdgeConv",
    "train_gan",
    "build_models",
    "dataset_tensor",
    "TrainingDiverged",
    "save_gan_checkpoint",
    "load_gan_checkpoint",
]
