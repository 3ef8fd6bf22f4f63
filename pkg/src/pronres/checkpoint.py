"""``PRN1`` checkpoint files.

Layout (all integers little-endian uint32)::

    b"PRN1"
    config_len, config text (UTF-8 ``key = value`` lines)
    n_tensors
    per tensor: name_len, name (UTF-8), ndim, dims..., float32 data (row-major)
"""

from __future__ import annotations

import struct

import numpy as np

from .config import TrainConfig, format_config, parse_pairs, train_config_from_pairs, train_dict
from .errors import CheckpointError
from .model import ModelParams

MAGIC = b"PRN1"


def dumps(params: ModelParams, config: TrainConfig) -> bytes:
    text = format_config(train_dict(config)).encode("utf-8")
    out = [MAGIC, struct.pack("<I", len(text)), text, struct.pack("<I", len(params.tensors))]
    for name in params.names():
        arr = params[name]
        raw = name.encode("utf-8")
        out.append(struct.pack("<I", len(raw)))
        out.append(raw)
        out.append(struct.pack(f"<I{arr.ndim}I", arr.ndim, *arr.shape))
        out.append(arr.astype("<f4").tobytes())
    return b"".join(out)


def loads(data: bytes) -> tuple[ModelParams, TrainConfig]:
    if data[:4] != MAGIC:
        raise CheckpointError(f"bad checkpoint magic {data[:4]!r}")
    try:
        pos = 4
        (n,) = struct.unpack_from("<I", data, pos)
        pos += 4
        config = train_config_from_pairs(parse_pairs(data[pos:pos + n].decode("utf-8")))
        pos += n
        (count,) = struct.unpack_from("<I", data, pos)
        pos += 4
        tensors = {}
        for _ in range(count):
            (name_len,) = struct.unpack_from("<I", data, pos)
            pos += 4
            name = data[pos:pos + name_len].decode("utf-8")
            pos += name_len
            (ndim,) = struct.unpack_from("<I", data, pos)
            pos += 4
            shape = struct.unpack_from(f"<{ndim}I", data, pos)
            pos += 4 * ndim
            size = int(np.prod(shape)) if ndim else 1
            if pos + 4 * size > len(data):
                raise CheckpointError(f"truncated tensor {name!r}")
            tensors[name] = np.frombuffer(data, dtype="<f4", count=size, offset=pos).reshape(shape).astype(np.float32)
            pos += 4 * size
    except struct.error:
        raise CheckpointError("truncated checkpoint") from None
    if pos != len(data):
        raise CheckpointError("trailing bytes after last tensor")
    return ModelParams(tensors), config


def save_checkpoint(path, params: ModelParams, config: TrainConfig) -> None:
    with open(path, "wb") as fh:
        fh.write(dumps(params, config))


def load_checkpoint(path) -> tuple[ModelParams, TrainConfig]:
    with open(path, "rb") as fh:
        return loads(fh.read())
