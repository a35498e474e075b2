"""Single-file named-tensor container.

Byte layout (all integers little-endian):

    offset 0   magic, 8 bytes: b"TENSORC1"
    offset 8   endianness marker, uint32 = 0x01020304
    offset 12  header length H, uint32
    offset 16  header, H bytes of UTF-8 JSON:
                 {"tensors": {name: {"shape": [...], "offset": byte offset
                  into the data section}}, "attrs": {str: str}}
    offset 16+H  data section: concatenated C-order float32 arrays

Tensors are written sorted by name so identical contents produce identical
bytes. This file is the interchange surface with the trainer; keep the
layout stable.
"""

import json
import struct
import numpy as np
from pathlib import Path

MAGIC = b"TENSORC1"
ENDIAN_MARKER = 0x01020304


def save_tensors(path, tensors, attrs=None):
    """Write named float32 tensors plus string attributes to one file.

    Args:
        path: destination file.
        tensors: dict name -> array-like (stored as little-endian float32).
        attrs: optional dict of string attributes.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    attrs = {str(k): str(v) for k, v in (attrs or {}).items()}
    entries = {}
    blobs = []
    offset = 0
    for name in sorted(tensors):
        arr = np.ascontiguousarray(tensors[name], dtype="<f4")
        if not np.all(np.isfinite(arr)):
            raise ValueError(f"tensor {name!r} contains NaN or Inf")
        entries[name] = {"shape": list(arr.shape), "offset": offset}
        blobs.append(arr.tobytes())
        offset += arr.nbytes
    header = json.dumps(
        {"tensors": entries, "attrs": attrs}, sort_keys=True, separators=(",", ":")
    ).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", ENDIAN_MARKER))
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        for blob in blobs:
            fh.write(blob)


def load_tensors(path):
    """Read a container written by save_tensors.

    Returns:
        (tensors, attrs): dict name -> float32 ndarray, dict name -> str.

    Raises:
        ValueError on wrong magic, wrong endianness marker, malformed
        header, or truncated data.
    """
    raw = Path(path).read_bytes()
    if len(raw) < 16 or raw[:8] != MAGIC:
        raise ValueError(f"{path}: not a tensor container (bad magic)")
    (marker,) = struct.unpack("<I", raw[8:12])
    if marker != ENDIAN_MARKER:
        raise ValueError(f"{path}: endianness marker mismatch (got {marker:#010x})")
    (header_len,) = struct.unpack("<I", raw[12:16])
    if len(raw) < 16 + header_len:
        raise ValueError(f"{path}: truncated header")
    try:
        header = json.loads(raw[16 : 16 + header_len].decode("utf-8"))
        entries = header["tensors"]
        attrs = header.get("attrs", {})
    except (ValueError, KeyError, UnicodeDecodeError) as exc:
        raise ValueError(f"{path}: malformed container header: {exc}") from exc
    data = raw[16 + header_len :]
    tensors = {}
    for name, entry in entries.items():
        shape = tuple(entry["shape"])
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        start = entry["offset"]
        end = start + 4 * count
        if end > len(data):
            raise ValueError(f"{path}: tensor {name!r} extends past end of file")
        tensors[name] = np.frombuffer(data[start:end], dtype="<f4").reshape(shape).copy()
    return tensors, attrs
