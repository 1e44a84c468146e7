"""Model file format.

Layout (all integers little-endian)::

    b"RSYN1"                      magic + format version
    u16 len, kind tag (ascii)
    u32 len, header JSON          canonical (sorted keys, compact)
    u64 len, payload              float64 arrays referenced from the header
    u32 CRC-32 of everything above
"""

from __future__ import annotations

import json
import os
import struct
import zlib
from pathlib import Path

import numpy as np

from ..errors import CorruptFile, VersionMismatch, ValidationError
from .base import FittedModel, GeneratorSpec

MAGIC = b"RSYN"
VERSION = b"1"


class KindMismatch(ValidationError):
    pass


def _flatten(obj, arrays):
    if isinstance(obj, np.ndarray):
        arrays.append(np.ascontiguousarray(obj, dtype="<f8"))
        return {"__nd__": len(arrays) - 1, "shape": list(obj.shape)}
    if isinstance(obj, dict):
        return {str(k): _flatten(obj[k], arrays) for k in sorted(obj, key=str)}
    if isinstance(obj, (list, tuple)):
        return [_flatten(v, arrays) for v in obj]
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def _unflatten(obj, arrays):
    if isinstance(obj, dict):
        if "__nd__" in obj and set(obj) == {"__nd__", "shape"}:
            return arrays[obj["__nd__"]].reshape(obj["shape"]).copy()
        return {k: _unflatten(v, arrays) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_unflatten(v, arrays) for v in obj]
    return obj


def _state_class(kind):
    if kind == "GC":
        from .gc import CopulaState

        return CopulaState
    if kind == "TVAE":
        from .tvae import TvaeState

        return TvaeState
    from .ctgan import GanState

    return GanState


def dumps(model: FittedModel) -> bytes:
    arrays: list = []
    header = {
        "spec": model.spec.to_dict(),
        "columns": model.columns,
        "bounds": {k: list(v) for k, v in model.bounds.items()},
        "categories": model.categories,
        "state": model.state.to_dict(),
    }
    header = _flatten(header, arrays)
    hbytes = json.dumps(header, sort_keys=True, separators=(",", ":"), ensure_ascii=False, allow_nan=False).encode("utf-8")
    payload = b"".join(a.tobytes() for a in arrays)
    offsets = [a.size for a in arrays]
    kind = model.kind.encode("ascii")
    body = (
        MAGIC + VERSION
        + struct.pack("<H", len(kind)) + kind
        + struct.pack("<I", len(hbytes)) + hbytes
        + struct.pack("<Q", len(payload)) + payload
        + struct.pack("<I", len(offsets)) + b"".join(struct.pack("<Q", o) for o in offsets)
    )
    return body + struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF)


def loads(blob: bytes, kind=None) -> FittedModel:
    if len(blob) < 9 or blob[:4] != MAGIC:
        raise CorruptFile("not a model file")
    if blob[4:5] != VERSION:
        raise VersionMismatch(f"model format version {blob[4:5]!r}, expected {VERSION!r}")
    body, crc = blob[:-4], blob[-4:]
    if len(crc) != 4 or struct.unpack("<I", crc)[0] != (zlib.crc32(body) & 0xFFFFFFFF):
        raise CorruptFile("checksum mismatch")
    pos = 5
    (klen,) = struct.unpack_from("<H", body, pos)
    pos += 2
    tag = body[pos:pos + klen].decode("ascii")
    pos += klen
    if kind is not None and tag != kind:
        raise KindMismatch(f"file holds a {tag} model, not {kind}")
    (hlen,) = struct.unpack_from("<I", body, pos)
    pos += 4
    header = json.loads(body[pos:pos + hlen].decode("utf-8"))
    pos += hlen
    (plen,) = struct.unpack_from("<Q", body, pos)
    pos += 8
    payload = body[pos:pos + plen]
    pos += plen
    (narr,) = struct.unpack_from("<I", body, pos)
    pos += 4
    sizes = struct.unpack_from(f"<{narr}Q", body, pos)
    arrays, off = [], 0
    for size in sizes:
        arrays.append(np.frombuffer(payload, dtype="<f8", count=size, offset=off).astype(float))
        off += size * 8
    header = _unflatten(header, arrays)
    spec = GeneratorSpec.from_dict(header["spec"])
    if spec.kind != tag:
        raise CorruptFile("kind tag disagrees with spec")
    state = _state_class(tag).from_dict(header["state"])
    return FittedModel(
        spec, state, header["columns"],
        {k: tuple(v) for k, v in header["bounds"].items()},
        header["categories"],
    )


def save_model(model: FittedModel, path) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(dumps(model))
    os.replace(tmp, path)


def load_model(path, kind=None) -> FittedModel:
    return loads(Path(path).read_bytes(), kind=kind)
