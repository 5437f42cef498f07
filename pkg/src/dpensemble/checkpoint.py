"""Checkpoints and their binary file format.

A checkpoint file (version 1) is, all little endian::

    offset  size  field
    0       8     magic b"DPENSCKP"
    8       2     uint16 format version (1)
    10      2     uint16 output activation (0 identity, 1 tanh)
    12      4     uint32 lag b
    16      4     uint32 input dimension per step (1)
    20      4     uint32 hidden size, layer 1
    24      4     uint32 hidden size, layer 2
    28      4     uint32 segment index (1-based)
    32      8     uint64 iteration at save
    40      8     uint64 training seed
    48      8     float64 dropout rate
    56      8     float64 learning rate at save
    64      8     uint64 number of parameters n
    72      8n    float64 parameters, flat layout documented in ``dpensemble.lstm``
    72+8n   32    SHA-256 of all preceding bytes
"""

import hashlib
import struct
from dataclasses import dataclass

import numpy as np

from .errors import CorruptFile, IoFailure, VersionMismatch
from .lstm import LstmParams, predict

MAGIC = b"DPENSCKP"
VERSION = 1
_HEADER = struct.Struct("<8sHHIIIIIQQddQ")
_DIGEST = 32
_ACT_CODES = {"identity": 0, "tanh": 1}
_ACT_NAMES = {v: k for k, v in _ACT_CODES.items()}


@dataclass(frozen=True)
class Checkpoint:
    params: LstmParams
    segment_index: int
    iteration: int
    learning_rate: float
    seed: int = 0

    def predict(self, window):
        return predict(self.params, window)


def to_bytes(ckpt):
    p = ckpt.params
    header = _HEADER.pack(MAGIC, VERSION, _ACT_CODES[p.output_activation], p.lag, 1,
                          p.hidden[0], p.hidden[1], ckpt.segment_index, ckpt.iteration,
                          ckpt.seed, p.dropout, ckpt.learning_rate, p.theta.size)
    body = header + p.theta.astype("<f8").tobytes()
    return body + hashlib.sha256(body).digest()


def from_bytes(data):
    if len(data) < _HEADER.size or data[:8] != MAGIC:
        raise CorruptFile("not a checkpoint file (bad magic or truncated header)")
    (_, version, act, lag, n_in, h1, h2, seg, iteration, seed, dropout, lr,
     n) = _HEADER.unpack_from(data)
    if version != VERSION:
        raise VersionMismatch(f"checkpoint version {version}, this reader supports {VERSION}")
    if len(data) != _HEADER.size + 8 * n + _DIGEST:
        raise CorruptFile(f"expected {_HEADER.size + 8 * n + _DIGEST} bytes, got {len(data)}")
    body = data[:-_DIGEST]
    if hashlib.sha256(body).digest() != data[-_DIGEST:]:
        raise CorruptFile("checksum mismatch")
    if n_in != 1 or act not in _ACT_NAMES:
        raise CorruptFile("unsupported header fields")
    theta = np.frombuffer(body, dtype="<f8", offset=_HEADER.size).astype(np.float64)
    params = LstmParams(theta, (h1, h2), lag, dropout, _ACT_NAMES[act])
    return Checkpoint(params, seg, iteration, lr, seed)


def save_checkpoint(ckpt, path):
    try:
        with open(path, "wb") as fh:
            fh.write(to_bytes(ckpt))
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def load_checkpoint(path):
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    return from_bytes(data)
