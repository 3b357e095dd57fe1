from pcinvert.core.cloud import NormalizeTransform, PointCloud, normalize
from pcinvert.core.container import (
    ContainerError,
    container_bytes,
    parse_container,
    read_container,
    write_container,
)
from pcinvert.core.io import (
    FormatError,
    load_pointcloud,
    load_ply,
    load_xyz,
    native_bytes,
    parse_cloud_bytes,
    save_native,
    save_ply,
    save_pointcloud,
    save_xyz,
)
from pcinvert.core.latent import GlobalLatent, LatentCodes
from pcinvert.core.metrics import (
    EMD_APPROX_RTOL,
    EMD_EXACT_MAX,
    chamfer_discrepancy,
    earth_mover_distance,
)
from pcinvert.core.sphere import SpherePrior, sample_sphere_prior, sphere_neighbor_pairs

__all__ = [
    "PointCloud",
    "NormalizeTransform",
    "normalize",
    "SpherePrior",
    "sample_sphere_prior",
    "sphere_neighbor_pairs",
    "GlobalLatent",
    "LatentCodes",
    "chamfer_discrepancy",
    "earth_mover_distance",
    "EMD_EXACT_MAX",
    "EMD_APPROX_RTOL",
    "load_pointcloud",
    "save_pointcloud",
    "load_xyz",
    "save_xyz",
    "load_ply",
    "save_ply",
    "save_native",
    "native_bytes",
    "parse_cloud_bytes",
    "FormatError",
    "ContainerError",
    "write_container",
    "read_container",
    "parse_container",
    "container_bytes",
]
