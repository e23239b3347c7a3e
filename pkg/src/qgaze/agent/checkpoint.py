"""Versioned binary checkpoint: parameter tensors + config snapshot.

Layout (little-endian, documented in docs/formats.md):

    bytes 0-3   magic b"QGCK"
    bytes 4-7   u32 format version (1)
    bytes 8-11  u32 header length N
    bytes 12-.. N bytes of UTF-8 JSON header
    ...         raw tensor buffers, concatenated in header order

The header carries the architecture, a config snapshot, optional metadata,
and a manifest of (name, shape, dtype, offset). Buffers are written in
C order, so save -> load -> save is byte-identical and file hashes are
stable across runs on the same platform.
"""

import hashlib
import json
import struct

import numpy as np

from ..errors import ReplayFormatError
from .network import NetworkArch, QNetwork

MAGIC = b"QGCK"
VERSION = 1


def save_checkpoint(path, net, config=None, extra=None):
    params = net.parameters()
    manifest = []
    offset = 0
    buffers = []
    for name, tensor in params.items():
        buf = np.ascontiguousarray(tensor.data).tobytes()
        manifest.append({
            "name": name,
            "shape": list(tensor.data.shape),
            "dtype": str(tensor.data.dtype),
            "offset": offset,
        })
        buffers.append(buf)
        offset += len(buf)
    header = {
        "arch": net.arch.to_dict(),
        "config": config or {},
        "extra": extra or {},
        "tensors": manifest,
    }
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, len(header_bytes)))
        fh.write(header_bytes)
        for buf in buffers:
            fh.write(buf)


def load_checkpoint(path):
    """Returns (net, header dict). Reload is bit-exact."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != MAGIC:
            raise ReplayFormatError(f"{path}: not a checkpoint file")
        version, hlen = struct.unpack("<II", fh.read(8))
        if version != VERSION:
            raise ReplayFormatError(f"{path}: unsupported checkpoint version {version}")
        try:
            header = json.loads(fh.read(hlen).decode())
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ReplayFormatError(f"{path}: corrupt checkpoint header: {exc}") from exc
        blob = fh.read()
    arch = NetworkArch.from_dict(header["arch"])
    net = QNetwork(arch, rng=np.random.default_rng(0))
    params = net.parameters()
    for entry in header["tensors"]:
        name = entry["name"]
        if name not in params:
            raise ReplayFormatError(f"{path}: unknown tensor '{name}'")
        shape = tuple(entry["shape"])
        dtype = np.dtype(entry["dtype"])
        nbytes = int(np.prod(shape)) * dtype.itemsize if shape else dtype.itemsize
        start = entry["offset"]
        raw = blob[start : start + nbytes]
        if len(raw) != nbytes:
            raise ReplayFormatError(f"{path}: truncated tensor '{name}'")
        arr = np.frombuffer(raw, dtype=dtype).reshape(shape).copy()
        if arr.shape != params[name].data.shape:
            raise ReplayFormatError(f"{path}: tensor '{name}' has shape {arr.shape}")
        params[name].data[...] = arr
    return net, header


def checkpoint_id(path):
    """Short content hash identifying a checkpoint."""
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()[:12]
