"""Point cloud file I/O: XYZ text, PLY (ASCII / binary LE), native container."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from pcinvert.core import container as _container
from pcinvert.core.cloud import NormalizeTransform, PointCloud


class FormatError(ValueError):
    """Raised for malformed or unsupported point cloud files."""


# ---------------------------------------------------------------------------
# XYZ text: one "x y z" per line


def save_xyz(cloud: PointCloud, path) -> None:
    with open(path, "w") as fh:
        for x, y, z in cloud.points:
            fh.write(f"{x:.17g} {y:.17g} {z:.17g}\n")


def load_xyz(path) -> PointCloud:
    rows = []
    with open(path, "r") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            parts = stripped.split()
            if len(parts) < 3:
                raise FormatError(
                    f"{path}: line {lineno}: expected 3 coordinates, got {len(parts)}"
                )
            try:
                rows.append([float(parts[0]), float(parts[1]), float(parts[2])])
            except ValueError as exc:
                raise FormatError(
                    f"{path}: line {lineno}: non-numeric coordinate ({stripped!r})"
                ) from exc
    if not rows:
        raise FormatError(f"{path}: no points found")
    pts = np.asarray(rows, dtype=np.float64)
    if not np.isfinite(pts).all():
        raise FormatError(f"{path}: file contains non-finite coordinates")
    return PointCloud(pts)


# ---------------------------------------------------------------------------
# PLY

_PLY_DTYPES = {
    "char": "i1", "int8": "i1",
    "uchar": "u1", "uint8": "u1",
    "short": "i2", "int16": "i2",
    "ushort": "u2", "uint16": "u2",
    "int": "i4", "int32": "i4",
    "uint": "u4", "uint32": "u4",
    "float": "f4", "float32": "f4",
    "double": "f8", "float64": "f8",
}


def save_ply(cloud: PointCloud, path, binary: bool = True, colors: np.ndarray | None = None) -> None:
    """Write vertex positions (double precision) and optional uchar colors."""
    n = len(cloud)
    if colors is not None:
        colors = np.asarray(colors)
        if colors.shape != (n, 3):
            raise ValueError(f"colors must be ({n}, 3), got {colors.shape}")
        if colors.dtype != np.uint8:
            colors = np.clip(np.round(colors * 255.0), 0, 255).astype(np.uint8)
    fmt = "binary_little_endian" if binary else "ascii"
    header = ["ply", f"format {fmt} 1.0", f"element vertex {n}"]
    header += [f"property double {axis}" for axis in "xyz"]
    if colors is not None:
        header += [f"property uchar {c}" for c in ("red", "green", "blue")]
    header.append("end_header")
    with open(path, "wb") as fh:
        fh.write(("\n".join(header) + "\n").encode("ascii"))
        if binary:
            if colors is None:
                fh.write(np.ascontiguousarray(cloud.points, dtype="<f8").tobytes())
            else:
                rec = np.zeros(n, dtype=[("xyz", "<f8", 3), ("rgb", "u1", 3)])
                rec["xyz"] = cloud.points
                rec["rgb"] = colors
                fh.write(rec.tobytes())
        else:
            lines = []
            for i in range(n):
                x, y, z = cloud.points[i]
                line = f"{x:.17g} {y:.17g} {z:.17g}"
                if colors is not None:
                    line += " {} {} {}".format(*colors[i])
                lines.append(line)
            fh.write(("\n".join(lines) + "\n").encode("ascii"))


def _parse_ply_header(blob: bytes, path) -> tuple[str, list, int]:
    end = blob.find(b"end_header")
    if not blob.startswith(b"ply") or end < 0:
        raise FormatError(f"{path}: not a PLY file")
    newline = blob.find(b"\n", end)
    body_start = newline + 1
    header = blob[:end].decode("ascii", errors="replace").splitlines()
    fmt = None
    elements = []  # (name, count, [(prop_name, dtype or ("list", ...))])
    for line in header[1:]:
        parts = line.split()
        if not parts or parts[0] == "comment":
            continue
        if parts[0] == "format":
            fmt = parts[1]
        elif parts[0] == "element":
            elements.append((parts[1], int(parts[2]), []))
        elif parts[0] == "property":
            if not elements:
                raise FormatError(f"{path}: property before any element")
            if parts[1] == "list":
                elements[-1][2].append((parts[4], ("list", parts[2], parts[3])))
            else:
                dtype = _PLY_DTYPES.get(parts[1])
                if dtype is None:
                    raise FormatError(f"{path}: unsupported property type {parts[1]!r}")
                elements[-1][2].append((parts[2], dtype))
    if fmt not in ("ascii", "binary_little_endian"):
        raise FormatError(f"{path}: unsupported PLY format {fmt!r}")
    return fmt, elements, body_start


def load_ply(path) -> PointCloud:
    """Load vertex positions; all other properties and elements are ignored."""
    blob = Path(path).read_bytes()
    fmt, elements, offset = _parse_ply_header(blob, path)

    for name, count, props in elements:
        if name == "vertex":
            prop_names = [p for p, _ in props]
            if any(p not in prop_names for p in ("x", "y", "z")):
                raise FormatError(f"{path}: vertex element lacks x/y/z properties")
            if any(isinstance(t, tuple) for _, t in props):
                raise FormatError(f"{path}: list property in vertex element")
            if fmt == "ascii":
                text = blob[offset:].decode("ascii", errors="replace").splitlines()
                if len(text) < count:
                    raise FormatError(f"{path}: truncated vertex data")
                cols = {p: i for i, (p, _) in enumerate(props)}
                pts = np.empty((count, 3), dtype=np.float64)
                for i in range(count):
                    fields = text[i].split()
                    if len(fields) < len(props):
                        raise FormatError(f"{path}: vertex line {i + 1} too short")
                    try:
                        pts[i] = [float(fields[cols[a]]) for a in "xyz"]
                    except ValueError as exc:
                        raise FormatError(f"{path}: bad vertex line {i + 1}") from exc
            else:
                rec_dtype = np.dtype([(p, "<" + t) for p, t in props])
                nbytes = rec_dtype.itemsize * count
                if len(blob) - offset < nbytes:
                    raise FormatError(f"{path}: truncated vertex data")
                rec = np.frombuffer(blob, dtype=rec_dtype, count=count, offset=offset)
                pts = np.stack(
                    [rec["x"], rec["y"], rec["z"]], axis=1
                ).astype(np.float64)
            if not np.isfinite(pts).all():
                raise FormatError(f"{path}: non-finite vertex coordinates")
            return PointCloud(pts)
        # Skip a non-vertex element that precedes the vertices.
        if fmt == "ascii":
            skipped = 0
            while skipped < count:
                nl = blob.find(b"\n", offset)
                if nl < 0:
                    raise FormatError(f"{path}: truncated element {name!r}")
                offset = nl + 1
                skipped += 1
        else:
            if any(isinstance(t, tuple) for _, t in props):
                raise FormatError(
                    f"{path}: cannot skip binary list element {name!r} before vertices"
                )
            rec_dtype = np.dtype([(p, "<" + t) for p, t in props])
            offset += rec_dtype.itemsize * count
    raise FormatError(f"{path}: no vertex element")


# ---------------------------------------------------------------------------
# Native container (.pinv)


def save_native(
    cloud: PointCloud,
    path,
    transform: NormalizeTransform | None = None,
    meta: dict | None = None,
) -> None:
    sections: dict = {
        "points": np.ascontiguousarray(cloud.points, dtype="<f8"),
        "meta": {
            "kind": "pointcloud",
            "n": len(cloud),
            "transform": transform.to_dict() if transform else None,
            **(meta or {}),
        },
    }
    if cloud.labels is not None:
        sections["labels"] = np.ascontiguousarray(cloud.labels, dtype="<i8")
    _container.write_container(path, sections)


def native_bytes(cloud: PointCloud, meta: dict | None = None) -> bytes:
    sections: dict = {
        "points": np.ascontiguousarray(cloud.points, dtype="<f8"),
        "meta": {"kind": "pointcloud", "n": len(cloud), **(meta or {})},
    }
    if cloud.labels is not None:
        sections["labels"] = np.ascontiguousarray(cloud.labels, dtype="<i8")
    return _container.container_bytes(sections)


def load_native(path) -> PointCloud:
    try:
        sections = _container.read_container(path)
    except _container.ContainerError as exc:
        raise FormatError(str(exc)) from exc
    return _cloud_from_sections(sections, path)


def _cloud_from_sections(sections: dict, origin) -> PointCloud:
    if "points" not in sections:
        raise FormatError(f"{origin}: container has no 'points' section")
    pts = np.asarray(sections["points"], dtype=np.float64)
    if not np.isfinite(pts).all():
        raise FormatError(f"{origin}: non-finite coordinates")
    labels = sections.get("labels")
    return PointCloud(pts, None if labels is None else np.asarray(labels))


def parse_cloud_bytes(blob: bytes, origin: str = "<payload>") -> PointCloud:
    """Parse a cloud from raw bytes, sniffing XYZ / PLY / native layouts."""
    if blob[:4] == _container.MAGIC:
        try:
            return _cloud_from_sections(_container.parse_container(blob), origin)
        except _container.ContainerError as exc:
            raise FormatError(str(exc)) from exc
    if blob[:3] == b"ply":
        import tempfile

        with tempfile.NamedTemporaryFile(suffix=".ply") as tmp:
            tmp.write(blob)
            tmp.flush()
            return load_ply(tmp.name)
    try:
        text = blob.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise FormatError(f"{origin}: unrecognized binary payload") from exc
    rows = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        parts = stripped.split()
        if len(parts) < 3:
            raise FormatError(f"{origin}: line {lineno}: expected 3 coordinates")
        try:
            rows.append([float(v) for v in parts[:3]])
        except ValueError as exc:
            raise FormatError(f"{origin}: line {lineno}: non-numeric coordinate") from exc
    if not rows:
        raise FormatError(f"{origin}: no points found")
    pts = np.asarray(rows, dtype=np.float64)
    if not np.isfinite(pts).all():
        raise FormatError(f"{origin}: non-finite coordinates")
    return PointCloud(pts)


# ---------------------------------------------------------------------------
# Extension dispatch

_LOADERS = {".xyz": load_xyz, ".txt": load_xyz, ".ply": load_ply, ".pinv": load_native}


def load_pointcloud(path) -> PointCloud:
    suffix = Path(path).suffix.lower()
    loader = _LOADERS.get(suffix)
    if loader is None:
        raise FormatError(f"unsupported point cloud extension {suffix!r} ({path})")
    return loader(path)


def save_pointcloud(cloud: PointCloud, path, **kwargs) -> None:
    suffix = Path(path).suffix.lower()
    if suffix in (".xyz", ".txt"):
        save_xyz(cloud, path)
    elif suffix == ".ply":
        save_ply(cloud, path, **kwargs)
    elif suffix == ".pinv":
        save_native(cloud, path, **kwargs)
    else:
        raise FormatError(f"unsupported point cloud extension {suffix!r} ({path})")
