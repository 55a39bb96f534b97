"""Checkpoint container.

Layout::

    b"LACKPT01"                magic, 8 bytes
    uint64 little-endian       header length N
    N bytes                    UTF-8 JSON header
    payload                    little-endian float32 tensors, back to back

The header holds ``format_version``, a free-form ``config`` echo and a
``tensors`` directory mapping each name to ``shape``, ``dtype`` and ``offset``
(byte offset relative to the start of the payload).
"""
from __future__ import annotations

import hashlib
import json
import struct
from collections import OrderedDict
from pathlib import Path

import numpy as np

MAGIC = b"LACKPT01"
FORMAT_VERSION = 1
_DTYPE = np.dtype("<f4")


class CheckpointError(ValueError):
    def __init__(self, msg: str, offset: int | None = None):
        self.offset = offset
        super().__init__(msg if offset is None else f"{msg} (at byte {offset})")


def _as_numpy(t) -> np.ndarray:
    if hasattr(t, "detach"):
        t = t.detach().cpu().numpy()
    return np.array(t, dtype=_DTYPE, order="C")


def encode(tensors: dict, config: dict | None = None) -> bytes:
    directory = OrderedDict()
    chunks = []
    offset = 0
    for name, t in tensors.items():
        a = _as_numpy(t)
        directory[name] = {"shape": list(a.shape), "dtype": "float32", "offset": offset}
        chunks.append(a.tobytes())
        offset += a.nbytes
    header = {"format_version": FORMAT_VERSION, "config": config or {}, "tensors": directory}
    hbytes = json.dumps(header, sort_keys=True).encode()
    return MAGIC + struct.pack("<Q", len(hbytes)) + hbytes + b"".join(chunks)


def decode(blob: bytes) -> tuple[dict, OrderedDict]:
    """Parse a checkpoint blob into ``(header, {name: float32 array})``."""
    if len(blob) < len(MAGIC) + 8:
        raise CheckpointError("file too short for checkpoint preamble", len(blob))
    if blob[: len(MAGIC)] != MAGIC:
        raise CheckpointError("bad magic", 0)
    (hlen,) = struct.unpack_from("<Q", blob, len(MAGIC))
    start = len(MAGIC) + 8
    if start + hlen > len(blob):
        raise CheckpointError(f"header declares {hlen} bytes but file ends", len(blob))
    try:
        header = json.loads(blob[start : start + hlen].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        pos = getattr(exc, "pos", getattr(exc, "start", 0))
        raise CheckpointError(f"corrupt header: {exc}", start + pos) from exc
    if not isinstance(header, dict) or "tensors" not in header:
        raise CheckpointError("header lacks tensor directory", start)
    if header.get("format_version") != FORMAT_VERSION:
        raise CheckpointError(f"unsupported format version {header.get('format_version')}", start)
    payload = start + hlen
    tensors = OrderedDict()
    # payload order; the JSON directory itself is key-sorted
    for name, entry in sorted(header["tensors"].items(), key=lambda kv: int(kv[1]["offset"])):
        shape = tuple(int(s) for s in entry["shape"])
        count = int(np.prod(shape, dtype=np.int64))
        begin = payload + int(entry["offset"])
        end = begin + count * _DTYPE.itemsize
        if end > len(blob):
            raise CheckpointError(f"tensor {name!r} runs past end of file", len(blob))
        tensors[name] = np.frombuffer(blob, dtype=_DTYPE, count=count, offset=begin).reshape(shape).copy()
    return header, tensors


def save(path, tensors: dict, config: dict | None = None) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(encode(tensors, config))
    tmp.replace(path)


def load(path) -> tuple[dict, OrderedDict]:
    return decode(Path(path).read_bytes())


def parameter_count(header: dict) -> int:
    return int(sum(np.prod(e["shape"], dtype=np.int64) for e in header["tensors"].values()))


def summary(path) -> str:
    header, _ = load(path)
    lines = [
        f"checkpoint: {path}",
        f"format_version: {header['format_version']}",
        "config: " + json.dumps(header.get("config", {}), sort_keys=True),
        "tensors:",
    ]
    for name, e in sorted(header["tensors"].items(), key=lambda kv: kv[1]["offset"]):
        lines.append(f"  {name:40s} {tuple(e['shape'])!s:20s} {e['dtype']} @{e['offset']}")
    lines.append(f"total parameters: {parameter_count(header)}")
    return "\n".join(lines)


def file_sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
