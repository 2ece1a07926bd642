"""Binary parameter-set serialization.

Layout (all integers little-endian u32, floats little-endian IEEE-754
doubles):

    magic  b"PHNN"
    format version (currently 1)
    layer count
    per layer:  array count
    per array:  ndim, dims..., raw float64 data
"""

from __future__ import annotations

import struct
from typing import BinaryIO, List, Sequence

import numpy as np

MAGIC = b"PHNN"
FORMAT_VERSION = 1


class ParamsFormatError(ValueError):
    pass


def write_params(stream: BinaryIO, layer_params: Sequence[Sequence[np.ndarray]]):
    """Write per-layer parameter arrays (order defines identity)."""
    stream.write(MAGIC)
    stream.write(struct.pack("<II", FORMAT_VERSION, len(layer_params)))
    for arrays in layer_params:
        stream.write(struct.pack("<I", len(arrays)))
        for arr in arrays:
            a = np.asarray(arr, dtype="<f8")
            stream.write(struct.pack("<I", a.ndim))
            stream.write(struct.pack(f"<{a.ndim}I", *a.shape))
            stream.write(a.tobytes(order="C"))


def read_params(stream: BinaryIO) -> List[List[np.ndarray]]:
    def take(n: int) -> bytes:
        data = stream.read(n)
        if len(data) != n:
            raise ParamsFormatError("truncated parameter file")
        return data

    if take(4) != MAGIC:
        raise ParamsFormatError("bad magic bytes (not a PHNN parameter file)")
    version, n_layers = struct.unpack("<II", take(8))
    if version != FORMAT_VERSION:
        raise ParamsFormatError(f"unsupported format version {version}")
    layers = []
    for _ in range(n_layers):
        (n_arrays,) = struct.unpack("<I", take(4))
        arrays = []
        for _ in range(n_arrays):
            (ndim,) = struct.unpack("<I", take(4))
            shape = struct.unpack(f"<{ndim}I", take(4 * ndim))
            count = int(np.prod(shape)) if ndim else 1
            data = np.frombuffer(take(8 * count), dtype="<f8").reshape(shape)
            arrays.append(data.astype(np.float64))
        layers.append(arrays)
    return layers


def save_params(path, layer_params: Sequence[Sequence[np.ndarray]]):
    with open(path, "wb") as fh:
        write_params(fh, layer_params)


def load_params(path) -> List[List[np.ndarray]]:
    with open(path, "rb") as fh:
        return read_params(fh)


def network_layer_params(network) -> List[List[np.ndarray]]:
    """Per-layer parameter arrays of a network, serialization order."""
    return [[arr for _, arr in layer.param_items()] for layer in network.layers]


def load_into_network(network, layer_params: Sequence[Sequence[np.ndarray]]):
    if len(layer_params) != len(network.layers):
        raise ParamsFormatError(
            f"file has {len(layer_params)} layers, network has {len(network.layers)}"
        )
    flat = []
    for layer, arrays in zip(network.layers, layer_params):
        expected = [arr for _, arr in layer.param_items()]
        if len(expected) != len(arrays):
            raise ParamsFormatError("per-layer array count mismatch")
        flat.extend(arrays)
    network.set_parameters(flat)
