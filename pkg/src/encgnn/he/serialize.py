"""Length-prefixed binary container for keys, ciphertexts and result arrays.

Layout::

    magic b"EGNN" | version u8 | kind (u32 len + utf-8) | meta (u32 len + JSON)
    | array count u32 | arrays...

Each array is ``code u8 | ndim u8 | shape (u64 each) | payload``.  Numeric
payloads are little-endian; exact rationals (code ``R``) store each entry as two
length-prefixed little-endian two's-complement integers.
"""
from __future__ import annotations

import io
import json
import struct
from fractions import Fraction

import numpy as np

from .api import Ciphertext
from .errors import HEError

MAGIC = b"EGNN"
VERSION = 1

_CODES = {"u": "<u8", "i": "<i8", "f": "<f8", "b": "<i1"}
_DTYPES = {np.dtype(v): k for k, v in _CODES.items()}


class ContainerError(HEError, ValueError):
    pass


def _int_bytes(v: int) -> bytes:
    n = (v.bit_length() + 8) // 8 or 1
    return struct.pack("<I", n) + v.to_bytes(n, "little", signed=True)


def _write_array(buf: io.BytesIO, arr: np.ndarray) -> None:
    arr = np.asarray(arr)
    if arr.dtype == object:
        code = "R"
    else:
        code = _DTYPES.get(arr.dtype.newbyteorder("<")) or _DTYPES.get(arr.dtype)
        if code is None:
            raise ContainerError(f"unsupported dtype {arr.dtype}")
    buf.write(code.encode())
    buf.write(struct.pack("<B", arr.ndim))
    buf.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
    if code == "R":
        for x in arr.reshape(-1):
            x = Fraction(x)
            buf.write(_int_bytes(x.numerator))
            buf.write(_int_bytes(x.denominator))
    else:
        buf.write(np.ascontiguousarray(arr, dtype=_CODES[code]).tobytes())


def _read_exact(buf: io.BytesIO, n: int) -> bytes:
    data = buf.read(n)
    if len(data) != n:
        raise ContainerError("truncated container")
    return data


def _read_int(buf: io.BytesIO) -> int:
    (n,) = struct.unpack("<I", _read_exact(buf, 4))
    return int.from_bytes(_read_exact(buf, n), "little", signed=True)


def _read_array(buf: io.BytesIO) -> np.ndarray:
    code = _read_exact(buf, 1).decode()
    (ndim,) = struct.unpack("<B", _read_exact(buf, 1))
    shape = struct.unpack(f"<{ndim}Q", _read_exact(buf, 8 * ndim))
    size = int(np.prod(shape)) if ndim else 1
    if code == "R":
        out = np.empty(size, dtype=object)
        for i in range(size):
            num = _read_int(buf)
            out[i] = Fraction(num, _read_int(buf))
        return out.reshape(shape)
    if code not in _CODES:
        raise ContainerError(f"unknown array code {code!r}")
    dt = np.dtype(_CODES[code])
    return np.frombuffer(_read_exact(buf, size * dt.itemsize), dtype=dt).reshape(shape).copy()


def pack(kind: str, meta: dict, arrays: list[np.ndarray]) -> bytes:
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<B", VERSION))
    for blob in (kind.encode(), json.dumps(meta, sort_keys=True).encode()):
        buf.write(struct.pack("<I", len(blob)))
        buf.write(blob)
    buf.write(struct.pack("<I", len(arrays)))
    for arr in arrays:
        _write_array(buf, arr)
    return buf.getvalue()


def unpack(data: bytes) -> tuple[str, dict, list[np.ndarray]]:
    buf = io.BytesIO(data)
    if _read_exact(buf, 4) != MAGIC:
        raise ContainerError("bad magic")
    (version,) = struct.unpack("<B", _read_exact(buf, 1))
    if version != VERSION:
        raise ContainerError(f"unsupported container version {version}")
    (n,) = struct.unpack("<I", _read_exact(buf, 4))
    kind = _read_exact(buf, n).decode()
    (n,) = struct.unpack("<I", _read_exact(buf, 4))
    meta = json.loads(_read_exact(buf, n))
    (count,) = struct.unpack("<I", _read_exact(buf, 4))
    return kind, meta, [_read_array(buf) for _ in range(count)]


def dump_ciphertext(ct: Ciphertext) -> bytes:
    meta = {"level": ct.level, "scale": ct.scale, "slot_count": ct.slot_count, "valid": ct.valid}
    arrays = list(ct.payload) if isinstance(ct.payload, tuple) else [ct.payload]
    return pack("ciphertext", meta, arrays)


def load_ciphertext(data: bytes) -> Ciphertext:
    kind, meta, arrays = unpack(data)
    if kind != "ciphertext":
        raise ContainerError(f"expected a ciphertext, found {kind!r}")
    payload = tuple(arrays) if len(arrays) == 2 else arrays[0]
    return Ciphertext(payload, meta["level"], meta["scale"], meta["slot_count"], meta["valid"])


def dump_keys(keys) -> bytes:
    """Serialize every materialized key component (secret, public, switching keys)."""
    meta = {"params": keys.params.to_json(), "seed": keys.seed,
            "rotation_steps": sorted(keys.rotation_steps)}
    mat = keys.material
    arrays: list[np.ndarray] = []
    if hasattr(mat, "secret"):
        mat.materialize()
        arrays = [mat.secret.coeffs, *mat.public, mat.relin()]
        arrays += [mat.rotation(s) for s in sorted(keys.rotation_steps)]
        meta["backend"] = "ckks"
    else:
        meta["backend"] = "sim"
    return pack("keyset", meta, arrays)


def dump_array(arr: np.ndarray, meta: dict | None = None) -> bytes:
    return pack("array", meta or {}, [np.asarray(arr)])


def load_array(data: bytes) -> tuple[np.ndarray, dict]:
    kind, meta, arrays = unpack(data)
    if kind != "array":
        raise ContainerError(f"expected an array, found {kind!r}")
    return arrays[0], meta
