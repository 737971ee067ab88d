"""Binary parameter container with CRC integrity.

Layout, all little-endian:

    magic "FSHD" | u32 format version | u8 kind length + kind bytes |
    u32 entry count | entries (name, dtype, dims) | raw payloads |
    u32 CRC32 of every preceding byte

The manifest fully describes shapes and dtypes, so loading never guesses
from payload sizes, and the trailing CRC catches truncation as well as
bit flips.
"""
from __future__ import annotations

import struct
import zlib
from typing import Iterable, Sequence

import numpy as np

from .autodiff import Tensor
from .errors import CheckpointError

MAGIC = b"FSHD"
FORMAT_VERSION = 1

_SUPPORTED_DTYPES = {"<f4": np.dtype("<f4"), "<f8": np.dtype("<f8")}


def _dtype_tag(dtype: np.dtype) -> str:
    for tag, dt in _SUPPORTED_DTYPES.items():
        if dtype == dt:
            return tag
    raise CheckpointError(f"cannot checkpoint dtype {dtype}; only float32/float64 payloads")


def save_checkpoint(path, kind: str, named_params: Iterable[tuple[str, Tensor]]) -> None:
    """Write named tensors to ``path`` under the given model kind tag."""
    entries = [(name, np.ascontiguousarray(t.data)) for name, t in named_params]
    if not entries:
        raise CheckpointError("refusing to write a checkpoint with no parameters")
    kind_b = kind.encode("ascii")
    if not kind_b or len(kind_b) > 255:
        raise CheckpointError(f"model kind tag {kind!r} must be 1..255 ASCII bytes")
    parts = [MAGIC, struct.pack("<I", FORMAT_VERSION),
             struct.pack("<B", len(kind_b)), kind_b,
             struct.pack("<I", len(entries))]
    for name, arr in entries:
        name_b = name.encode("utf-8")
        parts.append(struct.pack("<H", len(name_b)))
        parts.append(name_b)
        tag = _dtype_tag(arr.dtype).encode("ascii")
        parts.append(struct.pack("<B", len(tag)))
        parts.append(tag)
        parts.append(struct.pack("<B", arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
    for _, arr in entries:
        parts.append(arr.astype(arr.dtype.newbyteorder("<"), copy=False).tobytes())
    body = b"".join(parts)
    blob = body + struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF)
    with open(path, "wb") as fh:
        fh.write(blob)


class _Reader:
    def __init__(self, blob: bytes, path):
        self.blob = blob
        self.path = path
        self.offset = 0

    def take(self, count: int, what: str) -> bytes:
        if self.offset + count > len(self.blob):
            raise CheckpointError(
                f"{self.path}: truncated while reading {what} at byte offset {self.offset}"
            )
        chunk = self.blob[self.offset:self.offset + count]
        self.offset += count
        return chunk

    def unpack(self, fmt: str, what: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))


def load_checkpoint(path) -> tuple[str, dict[str, np.ndarray]]:
    """Read a checkpoint, verifying magic, version, and CRC.

    Returns:
        (model kind tag, ordered mapping of parameter name to array).
    """
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < len(MAGIC) + 8:
        raise CheckpointError(f"{path}: file too short to be a checkpoint ({len(blob)} bytes)")
    body, (stored_crc,) = blob[:-4], struct.unpack("<I", blob[-4:])
    actual_crc = zlib.crc32(body) & 0xFFFFFFFF
    if actual_crc != stored_crc:
        raise CheckpointError(
            f"{path}: CRC mismatch (stored 0x{stored_crc:08x}, computed 0x{actual_crc:08x})"
        )
    r = _Reader(body, path)
    magic = r.take(4, "magic")
    if magic != MAGIC:
        raise CheckpointError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    (version,) = r.unpack("<I", "format version")
    if version != FORMAT_VERSION:
        raise CheckpointError(
            f"{path}: unsupported format version {version} (this build reads {FORMAT_VERSION})"
        )
    (kind_len,) = r.unpack("<B", "kind length")
    kind = r.take(kind_len, "kind tag").decode("ascii")
    (count,) = r.unpack("<I", "entry count")
    manifest: list[tuple[str, np.dtype, tuple[int, ...]]] = []
    for _ in range(count):
        (name_len,) = r.unpack("<H", "name length")
        name = r.take(name_len, "name").decode("utf-8")
        (tag_len,) = r.unpack("<B", "dtype length")
        tag = r.take(tag_len, "dtype tag").decode("ascii")
        if tag not in _SUPPORTED_DTYPES:
            raise CheckpointError(f"{path}: unknown dtype tag {tag!r} for entry {name!r}")
        (ndim,) = r.unpack("<B", "rank")
        dims = r.unpack(f"<{ndim}I", "dims")
        manifest.append((name, _SUPPORTED_DTYPES[tag], tuple(int(d) for d in dims)))
    state: dict[str, np.ndarray] = {}
    for name, dtype, dims in manifest:
        n_items = int(np.prod(dims)) if dims else 1
        payload = r.take(n_items * dtype.itemsize, f"payload of {name!r}")
        state[name] = np.frombuffer(payload, dtype=dtype).reshape(dims).copy()
    if r.offset != len(body):
        raise CheckpointError(
            f"{path}: {len(body) - r.offset} unexpected trailing bytes at offset {r.offset}"
        )
    return kind, state


def apply_state(named_params: Sequence[tuple[str, Tensor]],
                state: dict[str, np.ndarray]) -> None:
    """Copy a loaded state dict into model parameters, checking shapes."""
    names = [n for n, _ in named_params]
    missing = [n for n in names if n not in state]
    extra = [n for n in state if n not in set(names)]
    if missing or extra:
        raise CheckpointError(
            f"parameter name mismatch: missing {missing or 'none'}, unexpected {extra or 'none'}"
        )
    for name, tensor in named_params:
        arr = state[name]
        if arr.shape != tensor.data.shape:
            raise CheckpointError(
                f"shape mismatch for {name!r}: checkpoint {arr.shape}, model {tensor.data.shape}"
            )
        tensor.data = arr.astype(tensor.data.dtype, copy=True)
