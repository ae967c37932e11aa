"""Binary checkpoint format.

Layout (little-endian, u32 = 32-bit unsigned length/count)::

    magic     8 bytes  b"B2DCNN\\x00\\x01"
    version   u32
    config    u32 length + UTF-8 "key = value" text
    labels    u32 count, then u32 length + UTF-8 per label
    vocab     u32 count, then u32 length + UTF-8 per token (index order)
    tensors   u32 count, then per tensor:
                u32 length + UTF-8 name, u32 ndim, ndim x u32 dims,
                prod(dims) float64 values, row-major
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import RunConfig, config_from_text
from .data import DataError, LabelMap, Vocabulary
from .model import Architecture, ModelParams

MAGIC = b"B2DCNN\x00\x01"
VERSION = 1


class CheckpointError(Exception):
    code = "checkpoint-error"


class BadMagicError(CheckpointError):
    code = "bad-magic"


class UnsupportedVersionError(CheckpointError):
    code = "unsupported-version"


class TruncatedError(CheckpointError):
    code = "truncated"


@dataclass
class Checkpoint:
    config: RunConfig
    vocab: Vocabulary
    labels: LabelMap
    params: ModelParams


def architecture(cfg: RunConfig, vocab_size: int, n_classes: int) -> Architecture:
    return Architecture(
        variant=cfg.variant,
        vocab_size=vocab_size,
        d_w=cfg.d_w,
        hidden=cfg.hidden,
        n_classes=n_classes,
        n_filters=cfg.n_filters,
        filter=tuple(cfg.filter),
        pool=tuple(cfg.pool),
        seq_len=cfg.seq_len,
        activation=cfg.activation,
        dropout=cfg.dropout,
    )


def _str(s: str) -> bytes:
    b = s.encode("utf-8")
    return struct.pack("<I", len(b)) + b


def to_bytes(ckpt: Checkpoint) -> bytes:
    out = [MAGIC, struct.pack("<I", VERSION), _str(ckpt.config.to_text())]
    out.append(struct.pack("<I", len(ckpt.labels.names)))
    out.extend(_str(n) for n in ckpt.labels.names)
    out.append(struct.pack("<I", len(ckpt.vocab.itos)))
    out.extend(_str(t) for t in ckpt.vocab.itos)
    out.append(struct.pack("<I", len(ckpt.params.tensors)))
    for name, arr in ckpt.params.tensors.items():
        out.append(_str(name))
        out.append(struct.pack("<I", arr.ndim))
        out.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        out.append(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    return b"".join(out)


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise TruncatedError(f"checkpoint ends at byte {len(self.buf)}, needed {self.pos + n}")
        b = self.buf[self.pos : self.pos + n]
        self.pos += n
        return b

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def str(self) -> str:
        return self.take(self.u32()).decode("utf-8")


def from_bytes(buf: bytes) -> Checkpoint:
    r = _Reader(buf)
    if len(buf) < len(MAGIC) or buf[: len(MAGIC)] != MAGIC:
        raise BadMagicError("not a checkpoint file (bad magic)")
    r.take(len(MAGIC))
    version = r.u32()
    if version != VERSION:
        raise UnsupportedVersionError(f"checkpoint version {version}; this build reads {VERSION}")
    cfg = config_from_text(r.str())
    labels = LabelMap([r.str() for _ in range(r.u32())])
    try:
        vocab = Vocabulary.from_list([r.str() for _ in range(r.u32())])
    except DataError as e:
        raise CheckpointError(str(e)) from None
    tensors = {}
    for _ in range(r.u32()):
        name = r.str()
        ndim = r.u32()
        shape = struct.unpack(f"<{ndim}I", r.take(4 * ndim))
        count = int(np.prod(shape)) if ndim else 1
        data = np.frombuffer(r.take(8 * count), dtype="<f8").astype(np.float64)
        tensors[name] = data.reshape(shape)
    if r.pos != len(buf):
        raise CheckpointError(f"{len(buf) - r.pos} unexpected trailing bytes")
    arch = architecture(cfg, len(vocab), len(labels))
    expected = arch.shapes()
    if list(expected) != list(tensors) or any(expected[k] != tensors[k].shape for k in tensors):
        raise CheckpointError("tensor set does not match the stored configuration")
    return Checkpoint(cfg, vocab, labels, ModelParams(arch, tensors))


def save(ckpt: Checkpoint, path) -> None:
    Path(path).write_bytes(to_bytes(ckpt))


def load(path) -> Checkpoint:
    return from_bytes(Path(path).read_bytes())
