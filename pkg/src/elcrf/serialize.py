"""Model checkpoint format.

Single self-describing binary file: magic "ELCRF", a format version, scalar
header fields, length-prefixed string tables (labels, vocabulary, charset)
and a sequence of named float64 tensors (name, rank, dims, row-major
little-endian data). An optional trailing section holds Adam state in the
same named-tensor encoding.
"""

from __future__ import annotations

import struct

import numpy as np

from .features import Charset, EmissionParams, Vocabulary
from .model import (
    LabelSet,
    ModelParams,
    StatePartition,
    TransitionFactors,
)
from .training import AdamState

MAGIC = b"ELCRF"
VERSION = 1
_MODES = ("full-rank", "low-rank")


def _write_u32(fh, value: int):
    fh.write(struct.pack("<I", value))


def _read_u32(fh) -> int:
    raw = fh.read(4)
    if len(raw) != 4:
        raise ValueError("truncated model file")
    return struct.unpack("<I", raw)[0]


def _write_str(fh, text: str):
    raw = text.encode("utf-8")
    _write_u32(fh, len(raw))
    fh.write(raw)


def _read_str(fh) -> str:
    n = _read_u32(fh)
    raw = fh.read(n)
    if len(raw) != n:
        raise ValueError("truncated model file")
    return raw.decode("utf-8")


def _write_strtable(fh, items):
    _write_u32(fh, len(items))
    for item in items:
        _write_str(fh, item)


def _read_strtable(fh) -> tuple[str, ...]:
    return tuple(_read_str(fh) for _ in range(_read_u32(fh)))


def _write_tensors(fh, tensors: dict):
    _write_u32(fh, len(tensors))
    for name in sorted(tensors):
        arr = np.ascontiguousarray(tensors[name], dtype="<f8")
        _write_str(fh, name)
        _write_u32(fh, arr.ndim)
        for dim in arr.shape:
            _write_u32(fh, dim)
        fh.write(arr.tobytes())


def _read_tensors(fh) -> dict:
    tensors = {}
    for _ in range(_read_u32(fh)):
        name = _read_str(fh)
        ndim = _read_u32(fh)
        shape = tuple(_read_u32(fh) for _ in range(ndim))
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        raw = fh.read(8 * count)
        if len(raw) != 8 * count:
            raise ValueError("truncated model file")
        tensors[name] = np.frombuffer(raw, dtype="<f8").reshape(shape).copy()
    return tensors


def save_model(path, params: ModelParams, adam: AdamState | None = None):
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        _write_u32(fh, VERSION)
        _write_u32(fh, _MODES.index(params.transition.mode))
        _write_u32(fh, params.partition.states_per_label)
        _write_u32(fh, params.transition.rank)
        _write_u32(fh, params.vocab.min_count)
        _write_strtable(fh, params.label_set.names)
        _write_strtable(fh, params.vocab.index_to_token)
        _write_strtable(fh, params.charset.chars)
        _write_tensors(fh, params.tensors())
        if adam is None:
            _write_u32(fh, 0)
        else:
            _write_u32(fh, 1)
            _write_tensors(fh, {f"m.{k}": v for k, v in adam.m.items()})
            _write_tensors(fh, {f"v.{k}": v for k, v in adam.v.items()})
            fh.write(
                struct.pack(
                    "<Qdddd",
                    adam.t,
                    adam.learning_rate,
                    adam.eps,
                    adam.beta1,
                    adam.beta2,
                )
            )


def load_model(path):
    """Returns (ModelParams, AdamState or None)."""
    with open(path, "rb") as fh:
        if fh.read(len(MAGIC)) != MAGIC:
            raise ValueError(f"{path}: not a model file")
        version = _read_u32(fh)
        if version != VERSION:
            raise ValueError(f"{path}: unsupported format version {version}")
        mode = _MODES[_read_u32(fh)]
        k = _read_u32(fh)
        _rank = _read_u32(fh)
        min_count = _read_u32(fh)
        labels = _read_strtable(fh)
        vocab_tokens = _read_strtable(fh)
        chars = _read_strtable(fh)
        tensors = _read_tensors(fh)
        label_set = LabelSet(labels)
        partition = StatePartition(num_labels=len(labels), states_per_label=k)
        if mode == "low-rank":
            transition = TransitionFactors(
                mode=mode, u=tensors.pop("trans_u"), v=tensors.pop("trans_v")
            )
        else:
            transition = TransitionFactors(mode=mode, full=tensors.pop("trans_full"))
        emission = EmissionParams(**tensors)
        params = ModelParams(
            label_set=label_set,
            partition=partition,
            transition=transition,
            emission=emission,
            vocab=Vocabulary(index_to_token=vocab_tokens, min_count=min_count),
            charset=Charset(chars=chars),
        )
        adam = None
        if _read_u32(fh) == 1:
            m = {k[2:]: v for k, v in _read_tensors(fh).items()}
            v = {k[2:]: val for k, val in _read_tensors(fh).items()}
            t, lr, eps, b1, b2 = struct.unpack("<Qdddd", fh.read(40))
            adam = AdamState(
                m=m, v=v, t=t, learning_rate=lr, eps=eps, beta1=b1, beta2=b2
            )
    return params, adam
