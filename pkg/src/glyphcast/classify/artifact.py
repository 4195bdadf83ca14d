"""GCMA model files and the named-array payload codec.

A payload is a sequence of little-endian arrays sorted by name. Nothing
time- or platform-dependent is written, so identical parameters always
encode to identical bytes.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Dict, Mapping, Union

import numpy as np

from glyphcast.classify.specs import validate_hyperparams
from glyphcast.core import (
    MODEL_FORMAT_VERSION,
    Charset,
    FeatureMode,
    FormatError,
    ModelArtifact,
    ModelError,
    ModelKind,
)

MODEL_MAGIC = b"GCMA"

_DTYPES = {"<f4", "<f8", "<i4", "<i8"}


class _Reader:
    def __init__(self, blob: bytes, what: str) -> None:
        self._blob = blob
        self._pos = 0
        self._what = what

    def take(self, size: int) -> bytes:
        end = self._pos + size
        if size < 0 or end > len(self._blob):
            raise FormatError(f"{self._what}: truncated at byte {self._pos}")
        chunk = self._blob[self._pos : end]
        self._pos = end
        return chunk

    def unpack(self, fmt: str) -> tuple:
        s = struct.Struct(fmt)
        return s.unpack(self.take(s.size))

    @property
    def remaining(self) -> int:
        return len(self._blob) - self._pos


def encode_payload(arrays: Mapping[str, np.ndarray]) -> bytes:
    parts = [struct.pack("<I", len(arrays))]
    for name in sorted(arrays):
        arr = np.asarray(arrays[name])
        code = f"<{arr.dtype.kind}{arr.dtype.itemsize}"
        if code not in _DTYPES:
            raise FormatError(f"payload array {name!r} has unsupported dtype {arr.dtype}")
        key = name.encode("utf-8")
        parts.append(struct.pack("<H", len(key)))
        parts.append(key)
        parts.append(struct.pack("<3sB", code.encode("ascii"), arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        parts.append(np.ascontiguousarray(arr, dtype=code).tobytes())
    return b"".join(parts)


def decode_payload(blob: bytes) -> Dict[str, np.ndarray]:
    r = _Reader(blob, "payload")
    (count,) = r.unpack("<I")
    out: Dict[str, np.ndarray] = {}
    for _ in range(count):
        (klen,) = r.unpack("<H")
        name = r.take(klen).decode("utf-8")
        code_raw, ndim = r.unpack("<3sB")
        code = code_raw.decode("ascii")
        if code not in _DTYPES:
            raise FormatError(f"payload array {name!r}: unknown dtype {code}")
        shape = r.unpack(f"<{ndim}Q") if ndim else ()
        dtype = np.dtype(code)
        size = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize
        arr = np.frombuffer(r.take(size), dtype=dtype).reshape(shape)
        out[name] = arr
    if r.remaining:
        raise FormatError(f"payload: {r.remaining} trailing bytes")
    return out


def _json_bytes(value: Mapping) -> bytes:
    return json.dumps(dict(value), sort_keys=True, separators=(",", ":")).encode("utf-8")


def model_to_bytes(m: ModelArtifact) -> bytes:
    hp = _json_bytes(m.hyperparams)
    meta = _json_bytes(m.metadata)
    return b"".join(
        [
            MODEL_MAGIC,
            struct.pack("<IBIB", m.format_version, m.kind.code, m.tile_size, m.feature_mode.code),
            struct.pack("<I", m.charset.size),
            bytes(m.charset.codes),
            struct.pack("<Q", m.seed),
            struct.pack("<I", len(hp)),
            hp,
            struct.pack("<I", len(meta)),
            meta,
            struct.pack("<Q", len(m.payload)),
            m.payload,
        ]
    )


def model_from_bytes(blob: bytes, what: str = "model") -> ModelArtifact:
    r = _Reader(blob, what)
    if r.take(4) != MODEL_MAGIC:
        raise FormatError(f"{what}: not a GCMA file")
    version, kind_code, tile_size, mode_code = r.unpack("<IBIB")
    if version != MODEL_FORMAT_VERSION:
        raise FormatError(f"{what}: unsupported GCMA version {version}")
    (ncodes,) = r.unpack("<I")
    codes = tuple(r.take(ncodes))
    (seed,) = r.unpack("<Q")
    try:
        (hlen,) = r.unpack("<I")
        hyperparams = json.loads(r.take(hlen).decode("utf-8"))
        (mlen,) = r.unpack("<I")
        metadata = json.loads(r.take(mlen).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"{what}: malformed header JSON") from exc
    (plen,) = r.unpack("<Q")
    payload = r.take(plen)
    if r.remaining:
        raise FormatError(f"{what}: {r.remaining} trailing bytes")
    kind = ModelKind.from_code(kind_code)
    if not isinstance(hyperparams, dict) or not isinstance(metadata, dict):
        raise FormatError(f"{what}: header JSON must be objects")
    try:
        hyperparams = validate_hyperparams(kind, hyperparams)
    except ModelError as exc:
        raise FormatError(f"{what}: {exc}", error_type=exc.error_type) from exc
    return ModelArtifact(
        kind=kind,
        tile_size=tile_size,
        feature_mode=FeatureMode.from_code(mode_code),
        charset=Charset(codes),
        hyperparams=hyperparams,
        payload=payload,
        seed=seed,
        metadata=metadata,
        format_version=version,
    )


def write_model(m: ModelArtifact, path: Union[str, Path]) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_bytes(model_to_bytes(m))
    return p


def read_model(path: Union[str, Path]) -> ModelArtifact:
    p = Path(path)
    return model_from_bytes(p.read_bytes(), what=str(p))
