"""Reader/writer for the named-tensor container format.

Implemented from the documented byte layout (magic "TENSORC1", explicit
little-endian marker, JSON header with per-tensor shape/offset, float32
data). Kept independent of the inference package on purpose: round-trip
across the two implementations is part of the interchange contract.
"""

import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"TENSORC1"
ENDIAN_MARKER = 0x01020304


def write_container(path, tensors, attrs=None):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    attrs = {str(k): str(v) for k, v in (attrs or {}).items()}
    index = {}
    blobs = []
    offset = 0
    for name in sorted(tensors):
        arr = np.ascontiguousarray(tensors[name], dtype="<f4")
        if not np.all(np.isfinite(arr)):
            raise ValueError(f"tensor {name!r} is not finite")
        index[name] = {"shape": list(arr.shape), "offset": offset}
        blobs.append(arr.tobytes())
        offset += arr.nbytes
    header = json.dumps(
        {"tensors": index, "attrs": attrs}, sort_keys=True, separators=(",", ":")
    ).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", ENDIAN_MARKER, len(header)))
        fh.write(header)
        for blob in blobs:
            fh.write(blob)


def read_container(path):
    raw = Path(path).read_bytes()
    if len(raw) < 16 or raw[:8] != MAGIC:
        raise ValueError(f"{path}: bad magic")
    marker, header_len = struct.unpack("<II", raw[8:16])
    if marker != ENDIAN_MARKER:
        raise ValueError(f"{path}: bad endianness marker {marker:#010x}")
    header = json.loads(raw[16 : 16 + header_len].decode("utf-8"))
    data = raw[16 + header_len :]
    tensors = {}
    for name, entry in header["tensors"].items():
        shape = tuple(entry["shape"])
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        start = entry["offset"]
        if start + 4 * count > len(data):
            raise ValueError(f"{path}: tensor {name!r} truncated")
        tensors[name] = (
            np.frombuffer(data[start : start + 4 * count], dtype="<f4").reshape(shape).copy()
        )
    return tensors, header.get("attrs", {})
