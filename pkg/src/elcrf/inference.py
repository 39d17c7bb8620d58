"""Exact log-space inference over a lattice: free and label-clamped forward
sums, posterior marginals, and Viterbi decoding.

Clamping is implemented by masking emissions to -inf outside the gold
label's state block at each time step; the same kernels then run unchanged.
An all-masked column (unreachable label) raises.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .model import Lattice, StatePartition


@dataclass(frozen=True)
class Marginals:
    """Node posteriors (T, M) and edge posteriors (T-1, M, M)."""

    node: np.ndarray
    edge: np.ndarray


@dataclass(frozen=True)
class DecodeResult:
    states: np.ndarray  # (T,) int64
    labels: np.ndarray  # (T,) int64
    score: float


def _clamped_emit(
    lattice: Lattice, y_seq, partition: StatePartition
) -> np.ndarray:
    y = np.asarray(y_seq, dtype=np.int64)
    if y.shape != (lattice.seq_len,):
        raise ValueError("label sequence length must equal lattice length")
    mask = partition.consistent_mask(y)
    return np.where(mask, lattice.emit, -np.inf)


def forward_log_z(lattice: Lattice) -> float:
    """log of the sum over all M^T state paths of exp(path score)."""
    return kernels.forward_logz(lattice.emit, lattice.trans)


def clamped_log_z(lattice: Lattice, y_seq, partition: StatePartition) -> float:
    """Forward sum restricted to state paths consistent with the labels."""
    emit = np.ascontiguousarray(_clamped_emit(lattice, y_seq, partition))
    return kernels.forward_logz(emit, lattice.trans)


def sequence_log_likelihood(
    lattice: Lattice, y_seq, partition: StatePartition
) -> float:
    return clamped_log_z(lattice, y_seq, partition) - forward_log_z(lattice)


def posterior_marginals(lattice: Lattice) -> Marginals:
    _, node, edge = kernels.forward_backward(lattice.emit, lattice.trans)
    return Marginals(node=node, edge=edge)


def clamped_marginals(
    lattice: Lattice, y_seq, partition: StatePartition
) -> Marginals:
    """Posteriors of the label-clamped distribution (gradient numerator)."""
    emit = np.ascontiguousarray(_clamped_emit(lattice, y_seq, partition))
    _, node, edge = kernels.forward_backward(emit, lattice.trans)
    return Marginals(node=node, edge=edge)


def viterbi(lattice: Lattice, partition: StatePartition) -> DecodeResult:
    """Max-scoring state path; ties resolve to the lowest state index."""
    states, score = kernels.viterbi_path(lattice.emit, lattice.trans)
    labels = states // partition.states_per_label
    return DecodeResult(states=states, labels=labels, score=score)
