"""Generic versioned tensor container shared by model and regressor checkpoints.

Layout: ``<MAGIC>\n``, ``CONFIG <nbytes>\n`` + JSON + ``\n``, a sequence of
``TENSOR <name> <dtype> <ndim> <dims...>\n`` headers each followed by raw
little-endian payload, then ``END\n``. Tensors are written in sorted name
order and the JSON header with sorted keys, so identical contents serialize
to identical bytes.
"""

from __future__ import annotations

import io
import json
from pathlib import Path
from typing import BinaryIO

import numpy as np

from .errors import ValidationError

_DTYPES = {"<f4": np.dtype("<f4"), "<f8": np.dtype("<f8")}


def _read_line(f: BinaryIO, what: str) -> str:
    raw = bytearray()
    while True:
        ch = f.read(1)
        if not ch:
            raise ValidationError(f"truncated container while reading {what}")
        if ch == b"\n":
            return raw.decode("utf-8")
        raw.extend(ch)


def write_container(path: str | Path, magic: str, header: dict,
                    tensors: dict[str, np.ndarray]) -> None:
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    buf = io.BytesIO()
    buf.write(magic.encode("utf-8") + b"\n")
    buf.write(f"CONFIG {len(header_bytes)}\n".encode("utf-8"))
    buf.write(header_bytes + b"\n")
    for name in sorted(tensors):
        if any(c.isspace() for c in name):
            raise ValidationError(f"tensor name {name!r} contains whitespace")
        arr = tensors[name]
        code = "<f4" if arr.dtype == np.float32 else "<f8"
        arr = np.ascontiguousarray(arr, dtype=_DTYPES[code])
        dims = " ".join(str(s) for s in arr.shape)
        buf.write(f"TENSOR {name} {code} {arr.ndim} {dims}".rstrip().encode("utf-8") + b"\n")
        buf.write(arr.tobytes())
    buf.write(b"END\n")
    Path(path).write_bytes(buf.getvalue())


def read_container(path: str | Path, magic: str) -> tuple[dict, dict[str, np.ndarray]]:
    path = Path(path)
    with open(path, "rb") as f:
        if _read_line(f, "magic") != magic:
            raise ValidationError(f"{path} is not a {magic} container")
        config_line = _read_line(f, "config header").split()
        if len(config_line) != 2 or config_line[0] != "CONFIG":
            raise ValidationError(f"malformed CONFIG line in {path}")
        header_bytes = f.read(int(config_line[1]))
        if f.read(1) != b"\n":
            raise ValidationError(f"malformed config block in {path}")
        header = json.loads(header_bytes.decode("utf-8"))

        tensors: dict[str, np.ndarray] = {}
        while True:
            line = _read_line(f, "tensor header").split()
            if line == ["END"]:
                break
            if len(line) < 4 or line[0] != "TENSOR":
                raise ValidationError(f"malformed tensor header in {path}: {line}")
            name, code, ndim = line[1], line[2], int(line[3])
            if code not in _DTYPES:
                raise ValidationError(f"unknown tensor dtype {code!r} in {path}")
            dims = tuple(int(v) for v in line[4 : 4 + ndim])
            if len(dims) != ndim:
                raise ValidationError(f"tensor {name}: dimension count mismatch in {path}")
            count = int(np.prod(dims, dtype=np.int64)) if dims else 1
            raw = f.read(count * _DTYPES[code].itemsize)
            if len(raw) != count * _DTYPES[code].itemsize:
                raise ValidationError(f"tensor {name}: truncated payload in {path}")
            if name in tensors:
                raise ValidationError(f"duplicate tensor {name!r} in {path}")
            tensors[name] = np.frombuffer(raw, dtype=_DTYPES[code]).reshape(dims).copy()
    return header, tensors
