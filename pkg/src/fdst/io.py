"""On-disk formats: FDST1 binary tensors, dataset directories, and the
flat key=value run configuration.

FDST1 layout (little-endian): magic ``FDST1`` (5 bytes), version u16 (=1),
rank u32, dims rank*u64, dtype tag u8 (0 = real64, 1 = complex as re/im
float64 pairs), then the row-major payload.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"FDST1"
VERSION = 1

_REAL = 0
_COMPLEX = 1


class FormatError(ValueError):
    pass


def write_tensor_stream(fh, arr: np.ndarray) -> None:
    arr = np.asarray(arr)
    if np.iscomplexobj(arr):
        tag = _COMPLEX
        payload = np.ascontiguousarray(arr, dtype="<c16").tobytes()
    else:
        tag = _REAL
        payload = np.ascontiguousarray(arr, dtype="<f8").tobytes()
    fh.write(MAGIC)
    fh.write(struct.pack("<H", VERSION))
    fh.write(struct.pack("<I", arr.ndim))
    fh.write(struct.pack("<%dQ" % arr.ndim, *arr.shape))
    fh.write(struct.pack("<B", tag))
    fh.write(payload)


def read_tensor_stream(fh) -> np.ndarray:
    magic = fh.read(5)
    if magic != MAGIC:
        raise FormatError("bad magic: expected FDST1, got %r" % magic)
    (version,) = struct.unpack("<H", fh.read(2))
    if version != VERSION:
        raise FormatError("unsupported FDST1 version %d" % version)
    (rank,) = struct.unpack("<I", fh.read(4))
    dims = struct.unpack("<%dQ" % rank, fh.read(8 * rank)) if rank else ()
    (tag,) = struct.unpack("<B", fh.read(1))
    count = int(np.prod(dims)) if dims else 1
    if tag == _REAL:
        data = np.frombuffer(fh.read(8 * count), dtype="<f8").astype(np.float64)
    elif tag == _COMPLEX:
        data = np.frombuffer(fh.read(16 * count), dtype="<c16").astype(np.complex128)
    else:
        raise FormatError("unknown dtype tag %d" % tag)
    if data.size != count:
        raise FormatError("truncated payload")
    return data.reshape(dims)


def write_tensor(path, arr: np.ndarray) -> None:
    with open(path, "wb") as fh:
        write_tensor_stream(fh, arr)


def read_tensor(path) -> np.ndarray:
    with open(path, "rb") as fh:
        return read_tensor_stream(fh)


def dump_json(obj) -> bytes:
    """Canonical JSON bytes (sorted keys, fixed separators) so identical
    inputs produce identical files."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()


# ---------------------------------------------------------------------------
# flat key = value configuration files
# ---------------------------------------------------------------------------

class ConfigError(ValueError):
    pass


def _typed(caster, lo=None, hi=None):
    def check(key, raw):
        try:
            val = caster(raw)
        except Exception:
            raise ConfigError("config key %r: cannot parse %r" % (key, raw))
        if lo is not None and val < lo:
            raise ConfigError("config key %r: value %r below minimum %r" % (key, val, lo))
        if hi is not None and val > hi:
            raise ConfigError("config key %r: value %r above maximum %r" % (key, val, hi))
        return val
    return check


def _pow2_int(key, raw):
    val = _typed(int, lo=1)(key, raw)
    if val & (val - 1):
        raise ConfigError("config key %r: %d is not a power of two" % (key, val))
    return val


def _choice(*options):
    def check(key, raw):
        if raw not in options:
            raise ConfigError("config key %r: %r not one of %s" % (key, raw, list(options)))
        return raw
    return check


CONFIG_SCHEMA = {
    "grid.n": _pow2_int,
    "data.instances": _typed(int, lo=1),
    "data.T": _typed(int, lo=1),
    "data.delta": _typed(float, lo=1e-12),
    "data.gamma_mode": _choice("random_uniform", "fixed"),
    "data.gamma_lo": _typed(float, lo=0.0),
    "data.gamma_hi": _typed(float, lo=0.0),
    "data.gamma_fixed": _typed(float, lo=0.0),
    "data.test_instances": _typed(int, lo=0),
    "ic.variance": _typed(float, lo=1e-12),
    "ic.lengthscale": _typed(float, lo=1e-12),
    "ic.nu": _typed(float, lo=1e-12),
    "model.dv": _typed(int, lo=1),
    "model.layers": _typed(int, lo=1),
    "model.modes_space": _typed(int, lo=1),
    "model.modes_time": _typed(int, lo=1),
    "model.tau": _typed(int, lo=0),
    "model.h": _typed(int, lo=1),
    "cov.hidden": _typed(int, lo=1),
    "cov.alpha_r_init": _typed(float, lo=1e-12),
    "train.lr": _typed(float, lo=1e-12),
    "train.batch": _typed(int, lo=1),
    "train.epochs": _typed(int, lo=0),
    "train.warmup_mse_epochs": _typed(int, lo=0),
    "train.grad_clip": _typed(float, lo=0.0),
    "seed": _typed(int, lo=0),
}

CONFIG_DEFAULTS = {
    "grid.n": 256,
    "data.instances": 10,
    "data.T": 10,
    "data.delta": 0.1,
    "data.gamma_mode": "fixed",
    "data.gamma_lo": 0.05,
    "data.gamma_hi": 0.7,
    "data.gamma_fixed": 0.4,
    "data.test_instances": 0,
    "ic.variance": 1.0,
    "ic.lengthscale": 1.0,
    "ic.nu": 2.0,
    "model.dv": 16,
    "model.layers": 3,
    "model.modes_space": 16,
    "model.modes_time": 4,
    "model.tau": 4,
    "model.h": 5,
    "cov.hidden": 64,
    "cov.alpha_r_init": 0.1,
    "train.lr": 1e-3,
    "train.batch": 32,
    "train.epochs": 20,
    "train.warmup_mse_epochs": 2,
    "train.grad_clip": 10.0,
    "seed": 0,
}


def parse_config(text: str) -> dict:
    """Parse the flat ``key = value`` configuration format ('#' comments)."""
    cfg = dict(CONFIG_DEFAULTS)
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError("line %d: expected 'key = value', got %r" % (lineno, line))
        key, _, raw = stripped.partition("=")
        key = key.strip()
        raw = raw.strip()
        if key not in CONFIG_SCHEMA:
            raise ConfigError("line %d: unknown config key %r" % (lineno, key))
        cfg[key] = CONFIG_SCHEMA[key](key, raw)
    return cfg


def load_config(path) -> dict:
    return parse_config(Path(path).read_text())
