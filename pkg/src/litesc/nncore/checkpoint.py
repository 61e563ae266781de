"""Binary checkpoint container shared by every model in the package.

Layout (all integers little-endian)::

    magic   b"LDSC"
    version u16
    meta    u32 length + UTF-8 JSON
    count   u32
    record * count:
        name       u16 length + UTF-8
        partition  u16 length + UTF-8
        ndim       u8, dims u32 * ndim
        dtype      u8  (1 = float32, 2 = float64, 3 = qint-m)
        payload    float: IEEE-754 little-endian values
                   qint:  u8 bits, f32 min, f32 scale, u8 flags,
                          [bitmap of non-pruned entries if flags & 2],
                          codes packed at `bits` bits each
"""

from __future__ import annotations

import io
import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .params import ParamSet

MAGIC = b"LDSC"
VERSION = 1
DTYPE_F32, DTYPE_F64, DTYPE_QINT = 1, 2, 3
FLAG_DEGENERATE, FLAG_SPARSE = 1, 2


class CheckpointError(ValueError):
    pass


@dataclass
class QuantizedArray:
    """Integer codes plus the affine map back to floats.

    ``value = code / scale + minimum``; a degenerate (constant) layer has all
    codes zero and ``scale`` unused.
    """

    codes: np.ndarray
    bits: int
    minimum: float
    scale: float
    degenerate: bool = False
    mask: np.ndarray | None = None

    def dequantize(self) -> np.ndarray:
        if self.degenerate:
            out = np.full(self.codes.shape, self.minimum, dtype=np.float64)
        else:
            out = self.codes.astype(np.float64) / self.scale + self.minimum
        if self.mask is not None:
            out = out * self.mask
        return out


def pack_bits(codes: np.ndarray, bits: int) -> bytes:
    codes = np.asarray(codes, dtype=np.uint64).reshape(-1)
    if codes.size and int(codes.max()) >= (1 << bits):
        raise CheckpointError(f"code exceeds {bits}-bit range")
    shifts = np.arange(bits, dtype=np.uint64)
    bitmat = ((codes[:, None] >> shifts) & np.uint64(1)).astype(np.uint8)
    return np.packbits(bitmat.reshape(-1), bitorder="little").tobytes()


def unpack_bits(buf: bytes, bits: int, count: int) -> np.ndarray:
    raw = np.unpackbits(np.frombuffer(buf, dtype=np.uint8), bitorder="little")[: count * bits]
    bitmat = raw.reshape(count, bits).astype(np.uint64)
    return (bitmat << np.arange(bits, dtype=np.uint64)).sum(axis=1)


def _packed_len(count: int, bits: int) -> int:
    return (count * bits + 7) // 8


def _write_str(f, s: str) -> None:
    b = s.encode("utf-8")
    f.write(struct.pack("<H", len(b)))
    f.write(b)


def _read_exact(f, n: int) -> bytes:
    b = f.read(n)
    if len(b) != n:
        raise CheckpointError("truncated checkpoint")
    return b


def _read_str(f) -> str:
    (n,) = struct.unpack("<H", _read_exact(f, 2))
    return _read_exact(f, n).decode("utf-8")


def dumps(params: ParamSet, metadata: dict | None = None, quantized: dict[str, QuantizedArray] | None = None) -> bytes:
    quantized = quantized or {}
    f = io.BytesIO()
    f.write(MAGIC)
    f.write(struct.pack("<H", VERSION))
    meta = json.dumps(metadata or {}, sort_keys=True).encode("utf-8")
    f.write(struct.pack("<I", len(meta)))
    f.write(meta)
    f.write(struct.pack("<I", len(params)))
    for name, t in params.items():
        _write_str(f, name)
        _write_str(f, params.partition_of(name))
        f.write(struct.pack("<B", t.ndim))
        f.write(struct.pack(f"<{t.ndim}I", *t.shape))
        q = quantized.get(name)
        if q is not None:
            flags = (FLAG_DEGENERATE if q.degenerate else 0) | (FLAG_SPARSE if q.mask is not None else 0)
            f.write(struct.pack("<BBffB", DTYPE_QINT, q.bits, q.minimum, q.scale, flags))
            codes = q.codes.reshape(-1)
            if q.mask is not None:
                keep = q.mask.reshape(-1).astype(bool)
                f.write(np.packbits(keep, bitorder="little").tobytes())
                codes = codes[keep]
            f.write(pack_bits(codes, q.bits))
        elif t.dtype == np.float64:
            f.write(struct.pack("<B", DTYPE_F64))
            f.write(t.data.astype("<f8").tobytes())
        else:
            f.write(struct.pack("<B", DTYPE_F32))
            f.write(t.data.astype("<f4").tobytes())
    return f.getvalue()


def loads(blob: bytes) -> tuple[ParamSet, dict, dict[str, QuantizedArray]]:
    f = io.BytesIO(blob)
    if _read_exact(f, 4) != MAGIC:
        raise CheckpointError("not a checkpoint (bad magic)")
    (version,) = struct.unpack("<H", _read_exact(f, 2))
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    (meta_len,) = struct.unpack("<I", _read_exact(f, 4))
    metadata = json.loads(_read_exact(f, meta_len).decode("utf-8"))
    (count,) = struct.unpack("<I", _read_exact(f, 4))
    params = ParamSet()
    quantized: dict[str, QuantizedArray] = {}
    for _ in range(count):
        name = _read_str(f)
        partition = _read_str(f)
        (ndim,) = struct.unpack("<B", _read_exact(f, 1))
        shape = struct.unpack(f"<{ndim}I", _read_exact(f, 4 * ndim))
        n = int(np.prod(shape)) if ndim else 1
        (code,) = struct.unpack("<B", _read_exact(f, 1))
        if code == DTYPE_F32:
            arr = np.frombuffer(_read_exact(f, 4 * n), dtype="<f4").reshape(shape).astype(np.float32)
            params.add(name, arr, partition, dtype=np.float32)
        elif code == DTYPE_F64:
            arr = np.frombuffer(_read_exact(f, 8 * n), dtype="<f8").reshape(shape).astype(np.float64)
            params.add(name, arr, partition, dtype=np.float64)
        elif code == DTYPE_QINT:
            bits, minimum, scale, flags = struct.unpack("<BffB", _read_exact(f, 10))
            mask = None
            stored = n
            if flags & FLAG_SPARSE:
                raw = np.frombuffer(_read_exact(f, (n + 7) // 8), dtype=np.uint8)
                mask = np.unpackbits(raw, bitorder="little")[:n].astype(bool)
                stored = int(mask.sum())
            vals = unpack_bits(_read_exact(f, _packed_len(stored, bits)), bits, stored)
            codes = np.zeros(n, dtype=np.uint64)
            if mask is not None:
                codes[mask] = vals
            else:
                codes = vals
            q = QuantizedArray(
                codes=codes.reshape(shape).astype(np.int64),
                bits=bits,
                minimum=float(minimum),
                scale=float(scale),
                degenerate=bool(flags & FLAG_DEGENERATE),
                mask=None if mask is None else mask.reshape(shape),
            )
            quantized[name] = q
            params.add(name, q.dequantize(), partition, dtype=np.float32)
        else:
            raise CheckpointError(f"unknown dtype code {code} for {name}")
    return params, metadata, quantized


def save_checkpoint(path, params: ParamSet, metadata: dict | None = None, quantized=None) -> int:
    blob = dumps(params, metadata, quantized)
    Path(path).write_bytes(blob)
    return len(blob)


def load_checkpoint(path) -> tuple[ParamSet, dict, dict[str, QuantizedArray]]:
    return loads(Path(path).read_bytes())
