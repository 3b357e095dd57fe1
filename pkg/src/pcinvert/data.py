"""Data ingestion: mesh surface sampling, corpus splits, and synthetic
parametric shape families used for desk-scale training and testing.

The chair_toy family (box seat + box back + four capsule legs) carries
per-point part labels, which is what makes part-aware editing testable
without an external dataset.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from pcinvert.core.cloud import PointCloud, normalize
from pcinvert.core.io import FormatError, load_pointcloud, save_pointcloud

FAMILIES = ("ellipsoid", "box", "capsule", "chair_toy")

CHAIR_PARTS = ("seat", "back", "leg")

# Parameter ranges drawn per shape; override any subset via ShapeFamilyConfig.
DEFAULT_RANGES = {
    "ellipsoid": {"ax": (0.5, 1.0), "ay": (0.35, 1.0), "az": (0.35, 1.0)},
    "box": {"w": (0.4, 1.0), "h": (0.4, 1.0), "d": (0.4, 1.0)},
    "capsule": {"radius": (0.15, 0.4), "height": (0.5, 1.4)},
    "chair_toy": {
        "width": (0.8, 1.4),
        "depth": (0.7, 1.1),
        "seat_height": (0.5, 0.8),
        "seat_thickness": (0.08, 0.16),
        "back_height": (0.6, 1.1),
        "back_thickness": (0.06, 0.12),
        "leg_radius": (0.04, 0.09),
    },
}


@dataclass(frozen=True)
class ShapeFamilyConfig:
    family: str
    n_points: int = 256
    seed: int = 0
    ranges: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"family must be one of {FAMILIES}, got {self.family!r}")
        if self.n_points < 1:
            raise ValueError("n_points must be >= 1")
        merged = dict(DEFAULT_RANGES[self.family])
        for key, rng in self.ranges.items():
            if key not in merged:
                raise ValueError(f"unknown parameter {key!r} for family {self.family}")
            lo, hi = float(rng[0]), float(rng[1])
            if hi < lo:
                raise ValueError(f"invalid range for {key!r}: ({lo}, {hi})")
            merged[key] = (lo, hi)
        object.__setattr__(self, "ranges", merged)


@dataclass
class Corpus:
    items: list[PointCloud]
    classes: list[str]
    train_indices: list[int] | None = None
    test_indices: list[int] | None = None
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.items) != len(self.classes):
            raise ValueError("items and classes must align")
        if (self.train_indices is None) != (self.test_indices is None):
            raise ValueError("train and test index sets must be set together")
        if self.train_indices is not None:
            train, test = set(self.train_indices), set(self.test_indices)
            if train & test:
                raise ValueError("train/test splits overlap")
            if train | test != set(range(len(self.items))):
                raise ValueError("splits must cover all items")

    @property
    def train_items(self) -> list[PointCloud]:
        return [self.items[i] for i in self.train_indices]

    @property
    def test_items(self) -> list[PointCloud]:
        return [self.items[i] for i in self.test_indices]


# ---------------------------------------------------------------------------
# Mesh surface sampling


def sample_mesh_surface(
    vertices: np.ndarray,
    faces: np.ndarray,
    n: int,
    seed: int = 0,
    return_face_indices: bool = False,
):
    """Sample n points uniformly by area: triangles drawn with probability
    proportional to area, positions uniform within each triangle."""
    vertices = np.asarray(vertices, dtype=np.float64)
    faces = np.asarray(faces, dtype=np.int64)
    if faces.size == 0 or vertices.size == 0:
        raise ValueError("mesh is empty")
    if n < 1:
        raise ValueError("n must be >= 1")
    v0, v1, v2 = (vertices[faces[:, i]] for i in range(3))
    cross = np.cross(v1 - v0, v2 - v0)
    areas = 0.5 * np.linalg.norm(cross, axis=1)
    total = areas.sum()
    if total <= 0:
        raise ValueError("mesh has zero total surface area")
    rng = np.random.default_rng(seed)
    tri = rng.choice(len(faces), size=n, p=areas / total)
    u = rng.random((n, 1))
    v = rng.random((n, 1))
    flip = (u + v) > 1.0
    u[flip] = 1.0 - u[flip]
    v[flip] = 1.0 - v[flip]
    points = v0[tri] + u * (v1[tri] - v0[tri]) + v * (v2[tri] - v0[tri])
    if return_face_indices:
        return PointCloud(points), tri
    return PointCloud(points)


def load_obj(path) -> tuple[np.ndarray, np.ndarray]:
    """Minimal OBJ reader: v/f records, polygons fan-triangulated."""
    vertices: list[list[float]] = []
    faces: list[list[int]] = []
    with open(path, "r") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "v":
                if len(parts) < 4:
                    raise FormatError(f"{path}: line {lineno}: short vertex record")
                try:
                    vertices.append([float(parts[1]), float(parts[2]), float(parts[3])])
                except ValueError as exc:
                    raise FormatError(f"{path}: line {lineno}: bad vertex") from exc
            elif parts[0] == "f":
                try:
                    idx = [int(token.split("/")[0]) for token in parts[1:]]
                except ValueError as exc:
                    raise FormatError(f"{path}: line {lineno}: bad face") from exc
                if len(idx) < 3 or any(i < 1 for i in idx):
                    raise FormatError(f"{path}: line {lineno}: unsupported face record")
                for a, b in zip(idx[1:-1], idx[2:]):
                    faces.append([idx[0] - 1, a - 1, b - 1])
    if not vertices or not faces:
        raise FormatError(f"{path}: no usable geometry")
    return np.asarray(vertices, dtype=np.float64), np.asarray(faces, dtype=np.int64)


# ---------------------------------------------------------------------------
# Parametric meshes


def box_mesh(lo, hi) -> tuple[np.ndarray, np.ndarray]:
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    x0, y0, z0 = lo
    x1, y1, z1 = hi
    vertices = np.array(
        [
            [x0, y0, z0], [x1, y0, z0], [x1, y1, z0], [x0, y1, z0],
            [x0, y0, z1], [x1, y0, z1], [x1, y1, z1], [x0, y1, z1],
        ]
    )
    faces = np.array(
        [
            [0, 2, 1], [0, 3, 2],  # z = z0
            [4, 5, 6], [4, 6, 7],  # z = z1
            [0, 1, 5], [0, 5, 4],  # y = y0
            [3, 6, 2], [3, 7, 6],  # y = y1
            [0, 7, 3], [0, 4, 7],  # x = x0
            [1, 2, 6], [1, 6, 5],  # x = x1
        ],
        dtype=np.int64,
    )
    return vertices, faces


def ellipsoid_mesh(radii, rings: int = 14, segments: int = 20, center=(0.0, 0.0, 0.0)):
    """Latitude/longitude triangulation of an axis-aligned ellipsoid."""
    radii = np.asarray(radii, dtype=np.float64)
    center = np.asarray(center, dtype=np.float64)
    verts = [center + radii * np.array([0.0, 0.0, 1.0])]
    for ring in range(1, rings):
        phi = np.pi * ring / rings
        for seg in range(segments):
            theta = 2 * np.pi * seg / segments
            direction = np.array(
                [np.sin(phi) * np.cos(theta), np.sin(phi) * np.sin(theta), np.cos(phi)]
            )
            verts.append(center + radii * direction)
    verts.append(center + radii * np.array([0.0, 0.0, -1.0]))
    vertices = np.asarray(verts)
    south = len(vertices) - 1

    def ring_vertex(ring, seg):
        return 1 + (ring - 1) * segments + (seg % segments)

    faces = []
    for seg in range(segments):
        faces.append([0, ring_vertex(1, seg), ring_vertex(1, seg + 1)])
        faces.append([south, ring_vertex(rings - 1, seg + 1), ring_vertex(rings - 1, seg)])
    for ring in range(1, rings - 1):
        for seg in range(segments):
            a = ring_vertex(ring, seg)
            b = ring_vertex(ring, seg + 1)
            c = ring_vertex(ring + 1, seg)
            d = ring_vertex(ring + 1, seg + 1)
            faces.append([a, b, d])
            faces.append([a, d, c])
    return vertices, np.asarray(faces, dtype=np.int64)


def capsule_mesh(radius: float, height: float, center=(0.0, 0.0, 0.0), axis: int = 2,
                 rings: int = 12, segments: int = 16):
    """Sphere split at the equator and stretched apart along one axis."""
    vertices, faces = ellipsoid_mesh((radius, radius, radius), rings, segments)
    shift = np.where(vertices[:, 2] >= 0, height / 2.0, -height / 2.0)
    vertices = vertices.copy()
    vertices[:, 2] += shift
    if axis != 2:
        order = [0, 1, 2]
        order[2], order[axis] = order[axis], order[2]
        vertices = vertices[:, order]
    return vertices + np.asarray(center, dtype=np.float64), faces


def chair_toy_meshes(params: dict) -> list[tuple[np.ndarray, np.ndarray, int]]:
    """Part meshes (vertices, faces, part_label) for the toy chair; labels
    index into CHAIR_PARTS. Y is up."""
    w = params["width"]
    dp = params["depth"]
    sh = params["seat_height"]
    st = params["seat_thickness"]
    bh = params["back_height"]
    bt = params["back_thickness"]
    lr = params["leg_radius"]
    parts = []
    seat = box_mesh((-w / 2, sh, -dp / 2), (w / 2, sh + st, dp / 2))
    parts.append((*seat, CHAIR_PARTS.index("seat")))
    back = box_mesh((-w / 2, sh + st, -dp / 2), (w / 2, sh + st + bh, -dp / 2 + bt))
    parts.append((*back, CHAIR_PARTS.index("back")))
    for sx in (-1, 1):
        for sz in (-1, 1):
            leg = capsule_mesh(
                lr,
                max(sh - 2 * lr, 0.05),
                center=(sx * (w / 2 - lr), sh / 2, sz * (dp / 2 - lr)),
                axis=1,
            )
            parts.append((*leg, CHAIR_PARTS.index("leg")))
    return parts


def _sample_labeled_parts(parts, n, rng_seed) -> PointCloud:
    """Area-weighted sampling across several part meshes, then a row shuffle
    so the storage order carries no spatial information."""
    verts = []
    faces = []
    face_labels = []
    offset = 0
    for v, f, label in parts:
        verts.append(v)
        faces.append(np.asarray(f) + offset)
        face_labels.append(np.full(len(f), label, dtype=np.int64))
        offset += len(v)
    vertices = np.concatenate(verts)
    all_faces = np.concatenate(faces)
    all_labels = np.concatenate(face_labels)
    cloud, tri = sample_mesh_surface(
        vertices, all_faces, n, seed=rng_seed, return_face_indices=True
    )
    labels = all_labels[tri]
    order = np.random.default_rng(rng_seed + 1).permutation(n)
    return PointCloud(cloud.points[order], labels[order])


def _draw_params(cfg: ShapeFamilyConfig, rng) -> dict:
    return {name: float(rng.uniform(lo, hi)) for name, (lo, hi) in sorted(cfg.ranges.items())}


def generate_family(cfg: ShapeFamilyConfig, count: int) -> Corpus:
    """Sample `count` normalized clouds of `cfg.n_points` points each from
    the parametric family, deterministically from cfg.seed."""
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = np.random.default_rng(cfg.seed)
    items = []
    for index in range(count):
        params = _draw_params(cfg, rng)
        item_seed = int(rng.integers(0, 2**31 - 1))
        if cfg.family == "ellipsoid":
            mesh = ellipsoid_mesh((params["ax"], params["ay"], params["az"]))
            parts = [(*mesh, 0)]
        elif cfg.family == "box":
            half = np.array([params["w"], params["h"], params["d"]]) / 2
            parts = [(*box_mesh(-half, half), 0)]
        elif cfg.family == "capsule":
            parts = [(*capsule_mesh(params["radius"], params["height"]), 0)]
        else:
            parts = chair_toy_meshes(params)
        cloud = _sample_labeled_parts(parts, cfg.n_points, item_seed)
        normalized, _ = normalize(cloud)
        if cfg.family != "chair_toy":
            normalized = PointCloud(normalized.points)  # single-part: drop labels
        items.append(normalized)
    return Corpus(
        items=items,
        classes=[cfg.family] * count,
        provenance={"family": cfg.family, "seed": cfg.seed, "n_points": cfg.n_points,
                    "count": count, "ranges": {k: list(v) for k, v in cfg.ranges.items()}},
    )


def merge_corpora(corpora: list[Corpus]) -> Corpus:
    items: list[PointCloud] = []
    classes: list[str] = []
    provenance = {"merged": [c.provenance for c in corpora]}
    for corpus in corpora:
        items.extend(corpus.items)
        classes.extend(corpus.classes)
    return Corpus(items=items, classes=classes, provenance=provenance)


def make_split(source, test_fraction: float = 0.10, seed: int = 0) -> Corpus:
    """Deterministic shuffled split with |test| = round(test_fraction * total)."""
    if not (0.0 < test_fraction < 1.0):
        raise ValueError("test_fraction must lie in (0, 1)")
    if isinstance(source, Corpus):
        items, classes, provenance = source.items, source.classes, dict(source.provenance)
    else:
        items = list(source)
        classes = ["default"] * len(items)
        provenance = {}
    if len(items) < 2:
        raise ValueError("need at least 2 items to split")
    n_test = int(round(test_fraction * len(items)))
    order = np.random.default_rng(seed).permutation(len(items))
    test = sorted(int(i) for i in order[:n_test])
    train = sorted(int(i) for i in order[n_test:])
    provenance.update(
        {"split_seed": seed, "test_fraction": test_fraction,
         "realized_counts": {"train": len(train), "test": len(test)}}
    )
    return Corpus(
        items=items,
        classes=classes,
        train_indices=train,
        test_indices=test,
        provenance=provenance,
    )


# ---------------------------------------------------------------------------
# Corpus persistence (manifest + one native file per item)


def save_corpus(corpus: Corpus, directory) -> Path:
    directory = Path(directory)
    (directory / "items").mkdir(parents=True, exist_ok=True)
    paths = []
    for i, item in enumerate(corpus.items):
        rel = f"items/item_{i:05d}.pinv"
        save_pointcloud(item, directory / rel)
        paths.append(rel)
    manifest = {
        "items": paths,
        "classes": corpus.classes,
        "train": corpus.train_indices,
        "test": corpus.test_indices,
        "provenance": corpus.provenance,
    }
    manifest_path = directory / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return manifest_path


def load_corpus(path) -> Corpus:
    path = Path(path)
    manifest_path = path / "manifest.json" if path.is_dir() else path
    if not manifest_path.exists():
        raise FormatError(f"no corpus manifest at {manifest_path}")
    manifest = json.loads(manifest_path.read_text())
    base = manifest_path.parent
    items = [load_pointcloud(base / rel) for rel in manifest["items"]]
    return Corpus(
        items=items,
        classes=manifest["classes"],
        train_indices=manifest["train"],
        test_indices=manifest["test"],
        provenance=manifest.get("provenance", {}),
    )
