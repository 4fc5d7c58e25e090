"""Binary model checkpoints.

Layout (all multi-byte fields little-endian):

    bytes 0..3    magic "FLMC"
    bytes 4..7    format version (u32, currently 1)
    bytes 8..15   metadata length L (u64)
    bytes 16..    UTF-8 JSON metadata of length L
    then          float64 payload: hidden row-major, readout row-major

Round-trips are bit-exact; the metadata records the architecture, scaling
mode, seed, round, alpha, and a creation timestamp.
"""

from __future__ import annotations

import json
import struct
from datetime import datetime, timezone

import numpy as np

from .errors import FormatError
from .model import Architecture, ModelParams, Scaling

MAGIC = b"FLMC"
VERSION = 1


def save_checkpoint(params: ModelParams, metadata: dict | None, path) -> None:
    """Write a checkpoint; metadata may add keys but the architecture block,
    format version, and timestamp are always recorded."""
    arch = params.arch
    meta = dict(metadata or {})
    meta["architecture"] = {
        "input_dim": arch.input_dim,
        "hidden_count": arch.hidden_count,
        "output_dim": arch.output_dim,
        "scaling": arch.scaling.value,
    }
    meta.setdefault("seed", None)
    meta.setdefault("round", None)
    meta.setdefault("alpha", None)
    meta["created"] = datetime.now(timezone.utc).isoformat()
    blob = json.dumps(meta, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        fh.write(params.hidden.astype("<f8", copy=False).tobytes())
        fh.write(params.readout.astype("<f8", copy=False).tobytes())


def load_checkpoint(path):
    """Read a checkpoint back as (ModelParams, metadata dict)."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != MAGIC:
        raise FormatError(
            f"{path}: bad magic {raw[:4]!r} at byte 0, expected {MAGIC!r}")
    if len(raw) < 16:
        raise FormatError(f"{path}: truncated header ({len(raw)} bytes)")
    (version,) = struct.unpack_from("<I", raw, 4)
    if version != VERSION:
        raise FormatError(f"{path}: unsupported version {version} at byte 4")
    (meta_len,) = struct.unpack_from("<Q", raw, 8)
    if len(raw) < 16 + meta_len:
        raise FormatError(
            f"{path}: truncated metadata at byte 16: need {meta_len} bytes, "
            f"have {len(raw) - 16}")
    try:
        meta = json.loads(raw[16:16 + meta_len].decode("utf-8"))
        arch_meta = meta["architecture"]
        arch = Architecture(int(arch_meta["input_dim"]),
                            int(arch_meta["hidden_count"]),
                            int(arch_meta["output_dim"]),
                            Scaling(arch_meta["scaling"]))
    except (ValueError, KeyError, TypeError) as exc:
        raise FormatError(f"{path}: invalid metadata block: {exc}") from exc
    offset = 16 + meta_len
    expected = 8 * (arch.hidden_count * arch.input_dim
                    + arch.output_dim * arch.hidden_count)
    actual = len(raw) - offset
    if actual != expected:
        raise FormatError(
            f"{path}: payload at byte {offset} has {actual} bytes, "
            f"expected {expected}")
    flat = np.frombuffer(raw, dtype="<f8", offset=offset).copy()
    split = arch.hidden_count * arch.input_dim
    hidden = flat[:split].reshape(arch.hidden_count, arch.input_dim)
    readout = flat[split:].reshape(arch.output_dim, arch.hidden_count)
    return ModelParams(arch, hidden, readout), meta
