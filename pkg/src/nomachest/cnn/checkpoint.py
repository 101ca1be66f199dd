"""``.nchk`` checkpoint files.

Layout (little-endian)::

    b"NCHK"  u16 version  u32 layer_count  u32 filters
    block: u32 n=2, f32 input_scale, f32 target_scale
    per layer, in stack order:
        conv -> block(weights), block(bias)
        bn   -> block(scale), block(shift), block(running_mean), block(running_var)

where each block is ``u32 element_count`` followed by that many f32 values.
"""

import struct

import numpy as np

from ..errors import FormatError
from . import layers as L
from .model import build_model

MAGIC = b"NCHK"
VERSION = 1
_HEAD = struct.Struct("<4sHII")


def _layer_arrays(layer):
    if isinstance(layer, L.ConvLayer):
        return [layer.weights, layer.bias]
    if isinstance(layer, L.BatchNormLayer):
        return [layer.scale, layer.shift, layer.running_mean, layer.running_var]
    return []


def save_checkpoint(path, model):
    with open(path, "wb") as fh:
        fh.write(_HEAD.pack(MAGIC, VERSION, model.layer_count, model.filters))
        blocks = [np.array([model.input_scale, model.target_scale])]
        blocks += [a for layer in model.layers for a in _layer_arrays(layer)]
        for a in blocks:
            flat = np.ascontiguousarray(a, dtype="<f4").ravel()
            fh.write(struct.pack("<I", flat.size))
            fh.write(flat.tobytes())


def load_checkpoint(path):
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < _HEAD.size:
        raise FormatError(f"{path}: truncated header")
    magic, version, layer_count, filters = _HEAD.unpack_from(data)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise FormatError(f"{path}: unsupported checkpoint version {version}")
    pos = _HEAD.size

    def block(expected):
        nonlocal pos
        if pos + 4 > len(data):
            raise FormatError(f"{path}: truncated at byte {pos}")
        (n,) = struct.unpack_from("<I", data, pos)
        if n != expected:
            raise FormatError(f"{path}: block at byte {pos} has {n} values, architecture needs {expected}")
        pos += 4
        if pos + 4 * n > len(data):
            raise FormatError(f"{path}: truncated at byte {pos}")
        arr = np.frombuffer(data, "<f4", count=n, offset=pos).astype(np.float32)
        pos += 4 * n
        return arr

    model = build_model(layer_count, filters)
    model.input_scale, model.target_scale = (float(v) for v in block(2))
    for layer in model.layers:
        for a in _layer_arrays(layer):
            a[...] = block(a.size).reshape(a.shape)
    if pos != len(data):
        raise FormatError(f"{path}: {len(data) - pos} trailing bytes")
    return model
