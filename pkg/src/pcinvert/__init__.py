"""Point cloud GAN inversion toolkit.

Maps an input 3D point cloud into the latent space of a sphere-guided
point cloud generator in three steps (global latent encoding, point
ordering resolution by code replication, per-point latent refinement),
keeping dense correspondences to the sphere prior so that reconstructed
shapes can be edited part by part.
"""

__version__ = "0.1.0"

from pcinvert.core import (
    GlobalLatent,
    LatentCodes,
    PointCloud,
    SpherePrior,
    chamfer_discrepancy,
    earth_mover_distance,
    load_pointcloud,
    normalize,
    sample_sphere_prior,
    save_pointcloud,
)

__all__ = [
    "PointCloud",
    "SpherePrior",
    "GlobalLatent",
    "LatentCodes",
    "sample_sphere_prior",
    "chamfer_discrepancy",
    "earth_mover_distance",
    "load_pointcloud",
    "save_pointcloud",
    "normalize",
    "__version__",
]
