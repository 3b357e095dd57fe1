"""Native binary container: magic "PINV", version byte, tagged sections.

A section payload is either a JSON document or an ndarray (dtype, shape,
little-endian C-order data). Sections are written sorted by tag and JSON is
dumped with sorted keys, so serializing the same content always produces the
same bytes.
"""

from __future__ import annotations

import io
import json
import struct

import numpy as np

MAGIC = b"PINV"
VERSION = 1

_KIND_JSON = 0
_KIND_ARRAY = 1


class ContainerError(ValueError):
    pass


def _encode_array(arr: np.ndarray) -> bytes:
    arr = np.ascontiguousarray(arr)
    if arr.dtype.byteorder == ">":
        arr = arr.astype(arr.dtype.newbyteorder("<"))
    dtype_str = arr.dtype.str.encode("ascii")
    out = io.BytesIO()
    out.write(struct.pack("<B", len(dtype_str)))
    out.write(dtype_str)
    out.write(struct.pack("<B", arr.ndim))
    for dim in arr.shape:
        out.write(struct.pack("<Q", dim))
    out.write(arr.tobytes(order="C"))
    return out.getvalue()


def _decode_array(payload: bytes) -> np.ndarray:
    view = memoryview(payload)
    (dtype_len,) = struct.unpack_from("<B", view, 0)
    off = 1
    dtype = np.dtype(bytes(view[off : off + dtype_len]).decode("ascii"))
    off += dtype_len
    (ndim,) = struct.unpack_from("<B", view, off)
    off += 1
    shape = []
    for _ in range(ndim):
        (dim,) = struct.unpack_from("<Q", view, off)
        shape.append(dim)
        off += 8
    data = np.frombuffer(view[off:], dtype=dtype)
    return data.reshape(shape).copy()


def write_container(path, sections: dict) -> None:
    """Write tagged sections; ndarray values become array sections, anything
    else must be JSON-serializable."""
    blob = container_bytes(sections)
    with open(path, "wb") as fh:
        fh.write(blob)


def container_bytes(sections: dict) -> bytes:
    out = io.BytesIO()
    out.write(MAGIC)
    out.write(struct.pack("<B", VERSION))
    tags = sorted(sections)
    out.write(struct.pack("<I", len(tags)))
    for tag in tags:
        value = sections[tag]
        tag_bytes = tag.encode("utf-8")
        if isinstance(value, np.ndarray):
            kind, payload = _KIND_ARRAY, _encode_array(value)
        else:
            kind = _KIND_JSON
            payload = json.dumps(
                value, sort_keys=True, separators=(",", ":")
            ).encode("utf-8")
        out.write(struct.pack("<H", len(tag_bytes)))
        out.write(tag_bytes)
        out.write(struct.pack("<B", kind))
        out.write(struct.pack("<Q", len(payload)))
        out.write(payload)
    return out.getvalue()


def read_container(path) -> dict:
    with open(path, "rb") as fh:
        return parse_container(fh.read())


def parse_container(blob: bytes) -> dict:
    if len(blob) < 9 or blob[:4] != MAGIC:
        raise ContainerError("not a PINV container (bad magic)")
    version = blob[4]
    if version != VERSION:
        raise ContainerError(f"unsupported container version {version}")
    (count,) = struct.unpack_from("<I", blob, 5)
    off = 9
    sections: dict = {}
    for _ in range(count):
        if off + 2 > len(blob):
            raise ContainerError("truncated container (section header)")
        (tag_len,) = struct.unpack_from("<H", blob, off)
        off += 2
        tag = blob[off : off + tag_len].decode("utf-8")
        off += tag_len
        kind = blob[off]
        off += 1
        (size,) = struct.unpack_from("<Q", blob, off)
        off += 8
        payload = blob[off : off + size]
        if len(payload) != size:
            raise ContainerError(f"truncated container (section {tag!r})")
        off += size
        if kind == _KIND_ARRAY:
            sections[tag] = _decode_array(payload)
        elif kind == _KIND_JSON:
            sections[tag] = json.loads(payload.decode("utf-8"))
        else:
            raise ContainerError(f"unknown section kind {kind} for tag {tag!r}")
    return sections
