"""Bit-exact binary containers for volumes, masks, and checkpoints.

Two bespoke little-endian formats, both fully specified by this module:

DMRT (arrays)
    magic "DMRT" | version u32 = 1 | ndims u32 | dims u32 each
    | dtype u8 | payload, row-major
    dtype 0 = binary mask, one u8 per entry; 1 = complex, f64 re/im pairs;
    3 = real f64.

DUSC (network checkpoints)
    magic "DUSC" | version u32 = 1 | n_phases u32 | nc u32
    | dc_mode u8 (0 = closed_form, 1 = cg) | f_depth u32 | fhat_depth u32
    | n_tensors u32 | per tensor: name_len u32, name utf8, ndims u32,
      dims u32 each, f64 payload | step u64 | seed i64

Tensor names are the ones named_tensors yields; layer activations are not
stored because they are positional (last layer of a stack linear, the rest
ReLU).  Loads validate magic, version, and exact payload lengths and raise
FormatError on anything malformed.  Round trips are bit-exact.
"""

import struct

import numpy as np

from .errors import FormatError
from .network import NetworkConfig, init_network_params, named_tensors

DMRT_MAGIC = b"DMRT"
DUSC_MAGIC = b"DUSC"
_DTYPE_MASK = 0
_DTYPE_COMPLEX = 1
_DTYPE_REAL = 3
_DC_CODES = {"closed_form": 0, "cg": 1}
_DC_NAMES = {code: name for name, code in _DC_CODES.items()}


class _Reader:
    """Cursor over a byte string that refuses to run past the end."""

    def __init__(self, data, label):
        self.data = data
        self.pos = 0
        self.label = label

    def take(self, n):
        if self.pos + n > len(self.data):
            raise FormatError(f"{self.label}: truncated at byte {self.pos}")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def u32(self):
        return struct.unpack("<I", self.take(4))[0]

    def u8(self):
        return self.take(1)[0]

    def done(self):
        if self.pos != len(self.data):
            raise FormatError(
                f"{self.label}: {len(self.data) - self.pos} trailing bytes"
            )


def _read_dims(r):
    ndims = r.u32()
    if ndims > 8:
        raise FormatError(f"{r.label}: implausible ndims {ndims}")
    dims = tuple(r.u32() for _ in range(ndims))
    if any(d < 1 for d in dims):
        raise FormatError(f"{r.label}: zero-sized dimension in {dims}")
    return dims


def save_dmrt(path, arr):
    """Write an array; dtype code is inferred (u8/bool, complex, float)."""
    a = np.asarray(arr)
    if a.dtype == np.uint8 or a.dtype == bool:
        code, payload = _DTYPE_MASK, a.astype("<u1")
    elif np.issubdtype(a.dtype, np.complexfloating):
        code, payload = _DTYPE_COMPLEX, a.astype("<c16")
    elif np.issubdtype(a.dtype, np.floating):
        code, payload = _DTYPE_REAL, a.astype("<f8")
    else:
        raise ValueError(f"unsupported dtype {a.dtype}")
    out = bytearray()
    out += DMRT_MAGIC
    out += struct.pack("<I", 1)
    out += struct.pack("<I", a.ndim)
    for d in a.shape:
        out += struct.pack("<I", d)
    out += struct.pack("<B", code)
    out += payload.tobytes(order="C")
    with open(path, "wb") as fh:
        fh.write(out)


def load_dmrt(path):
    with open(path, "rb") as fh:
        r = _Reader(fh.read(), str(path))
    magic = r.take(4)
    if magic != DMRT_MAGIC:
        raise FormatError(f"{r.label}: bad magic {magic!r}, expected {DMRT_MAGIC!r}")
    version = r.u32()
    if version != 1:
        raise FormatError(f"{r.label}: unsupported version {version}")
    dims = _read_dims(r)
    code = r.u8()
    if code == _DTYPE_MASK:
        dt = np.dtype("<u1")
    elif code == _DTYPE_COMPLEX:
        dt = np.dtype("<c16")
    elif code == _DTYPE_REAL:
        dt = np.dtype("<f8")
    else:
        raise FormatError(f"{r.label}: unknown dtype code {code}")
    count = int(np.prod(dims)) if dims else 1
    payload = r.take(count * dt.itemsize)
    r.done()
    return np.frombuffer(payload, dtype=dt).reshape(dims).copy()


def save_checkpoint(path, params, cfg, step=0, seed=0):
    out = bytearray()
    out += DUSC_MAGIC
    out += struct.pack("<I", 1)
    out += struct.pack("<I", cfg.n_phases)
    out += struct.pack("<I", cfg.nc)
    out += struct.pack("<B", _DC_CODES[cfg.dc_mode])
    out += struct.pack("<I", cfg.f_depth)
    out += struct.pack("<I", cfg.fhat_depth)
    tensors = list(named_tensors(params))
    out += struct.pack("<I", len(tensors))
    for name, arr in tensors:
        raw = name.encode("utf-8")
        out += struct.pack("<I", len(raw))
        out += raw
        out += struct.pack("<I", arr.ndim)
        for d in arr.shape:
            out += struct.pack("<I", d)
        out += np.asarray(arr, dtype="<f8").tobytes(order="C")
    out += struct.pack("<Q", step)
    out += struct.pack("<q", seed)
    with open(path, "wb") as fh:
        fh.write(out)


def load_checkpoint(path):
    """Read a checkpoint; returns (params, cfg, step, seed).

    Parameter shells are rebuilt from the config block, then every stored
    tensor is matched by name and shape.  Unknown names, duplicates, missing
    tensors, or shape drift all raise FormatError.
    """
    with open(path, "rb") as fh:
        r = _Reader(fh.read(), str(path))
    magic = r.take(4)
    if magic != DUSC_MAGIC:
        raise FormatError(f"{r.label}: bad magic {magic!r}, expected {DUSC_MAGIC!r}")
    version = r.u32()
    if version != 1:
        raise FormatError(f"{r.label}: unsupported version {version}")
    n_phases = r.u32()
    nc = r.u32()
    dc_code = r.u8()
    if dc_code not in _DC_NAMES:
        raise FormatError(f"{r.label}: unknown dc_mode code {dc_code}")
    f_depth = r.u32()
    fhat_depth = r.u32()
    try:
        cfg = NetworkConfig(
            n_phases=n_phases,
            nc=nc,
            dc_mode=_DC_NAMES[dc_code],
            f_depth=f_depth,
            fhat_depth=fhat_depth,
        )
    except ValueError as exc:
        raise FormatError(f"{r.label}: bad config block: {exc}") from exc
    params = init_network_params(cfg, seed=0)
    expected = dict(named_tensors(params))
    n_tensors = r.u32()
    if n_tensors != len(expected):
        raise FormatError(
            f"{r.label}: {n_tensors} tensors, config implies {len(expected)}"
        )
    seen = set()
    for _ in range(n_tensors):
        name_len = r.u32()
        try:
            name = r.take(name_len).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise FormatError(f"{r.label}: undecodable tensor name") from exc
        if name in seen:
            raise FormatError(f"{r.label}: duplicate tensor {name}")
        seen.add(name)
        if name not in expected:
            raise FormatError(f"{r.label}: unknown tensor {name}")
        dims = _read_dims(r)
        target = expected[name]
        if dims != target.shape:
            raise FormatError(
                f"{r.label}: tensor {name} has shape {dims}, expected {target.shape}"
            )
        count = int(np.prod(dims)) if dims else 1
        payload = r.take(count * 8)
        target[...] = np.frombuffer(payload, dtype="<f8").reshape(dims)
    step = struct.unpack("<Q", r.take(8))[0]
    seed = struct.unpack("<q", r.take(8))[0]
    r.done()
    return params, cfg, step, seed
