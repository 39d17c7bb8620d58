"""Core model structures: labels, the state-to-label partition, transition
factors and the per-sentence potential lattice.

The model scores a joint configuration of hidden states z and labels y as a
sum of per-token emission potentials, a state-to-label compatibility term
(0 for states assigned to the label, -inf otherwise) and time-homogeneous
state-transition potentials. Hidden states are deterministically partitioned
onto labels in contiguous equal-sized blocks, so the compatibility term never
needs to be materialized: it is a slice.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .features import (
    Charset,
    EmissionParams,
    Vocabulary,
    emission_scores,
    glorot,
    init_emission_params,
)

NEG_INF = -np.inf


@dataclass(frozen=True)
class LabelSet:
    """Ordered set of output label names; index <-> name is a bijection."""

    names: tuple[str, ...]

    def __post_init__(self):
        if len(self.names) == 0:
            raise ValueError("label set must be non-empty")
        if len(set(self.names)) != len(self.names):
            raise ValueError("label names must be unique")

    @property
    def size(self) -> int:
        return len(self.names)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(f"unknown label {name!r}") from None

    def encode(self, labels) -> np.ndarray:
        return np.array([self.index(lab) for lab in labels], dtype=np.int64)


#: CoNLL-2003 IOB1 label inventory (B-PER never occurs in the data).
CONLL_LABELS = LabelSet(
    ("O", "I-PER", "I-LOC", "I-ORG", "I-MISC", "B-LOC", "B-ORG", "B-MISC")
)


@dataclass(frozen=True)
class StatePartition:
    """Deterministic many-to-one map from M hidden states onto N labels.

    States are laid out in contiguous blocks of k per label, so
    label_of(z) = z // k and states_of(y) = range(k*y, k*(y+1)).
    """

    num_labels: int
    states_per_label: int

    def __post_init__(self):
        if self.num_labels < 1 or self.states_per_label < 1:
            raise ValueError("need at least one label and one state per label")

    @property
    def num_states(self) -> int:
        return self.num_labels * self.states_per_label

    def label_of(self, state: int) -> int:
        if not 0 <= state < self.num_states:
            raise IndexError(f"state {state} out of range [0, {self.num_states})")
        return state // self.states_per_label

    def states_of(self, label: int) -> range:
        if not 0 <= label < self.num_labels:
            raise IndexError(f"label {label} out of range [0, {self.num_labels})")
        k = self.states_per_label
        return range(k * label, k * (label + 1))

    def state_labels(self) -> np.ndarray:
        """label_of applied to every state, as an int64 vector."""
        return np.arange(self.num_states, dtype=np.int64) // self.states_per_label

    def consistent_mask(self, y_seq: np.ndarray) -> np.ndarray:
        """(T, M) boolean mask of states compatible with each gold label."""
        y = np.asarray(y_seq, dtype=np.int64)
        if y.size and (y.min() < 0 or y.max() >= self.num_labels):
            raise IndexError("label index out of range")
        return self.state_labels()[None, :] == y[:, None]


def build_state_partition(num_labels: int, states_per_label: int) -> StatePartition:
    return StatePartition(num_labels=num_labels, states_per_label=states_per_label)


@dataclass
class TransitionFactors:
    """State-transition potentials, either factorized U V^T or a full table.

    The full table is the unfactorized baseline; the factor pair realizes a
    logit table of matrix rank at most r, embedding the states in r
    dimensions.
    """

    mode: str  # "low-rank" | "full-rank"
    u: np.ndarray | None = None
    v: np.ndarray | None = None
    full: np.ndarray | None = None

    def __post_init__(self):
        if self.mode == "low-rank":
            if self.u is None or self.v is None:
                raise ValueError("low-rank mode requires factor matrices")
            if self.u.shape != self.v.shape:
                raise ValueError(
                    f"factor shape mismatch: {self.u.shape} vs {self.v.shape}"
                )
            m, r = self.u.shape
            if not 1 <= r <= m:
                raise ValueError(f"rank must be in [1, {m}], got {r}")
        elif self.mode == "full-rank":
            if self.full is None:
                raise ValueError("full-rank mode requires a transition table")
            if self.full.ndim != 2 or self.full.shape[0] != self.full.shape[1]:
                raise ValueError("transition table must be square")
        else:
            raise ValueError(f"unknown transition mode {self.mode!r}")

    @property
    def num_states(self) -> int:
        return self.u.shape[0] if self.mode == "low-rank" else self.full.shape[0]

    @property
    def rank(self) -> int:
        return self.u.shape[1] if self.mode == "low-rank" else self.full.shape[0]


def transition_logits(factors: TransitionFactors) -> np.ndarray:
    """Realized M x M transition logit table; entry (i, j) scores i -> j."""
    if factors.mode == "low-rank":
        return factors.u @ factors.v.T
    return factors.full


@dataclass(frozen=True)
class Lattice:
    """Per-sentence log-potentials: T x M emissions plus shared M x M
    transitions. The sole input to every inference routine."""

    emit: np.ndarray
    trans: np.ndarray

    def __post_init__(self):
        emit = np.ascontiguousarray(self.emit, dtype=np.float64)
        trans = np.ascontiguousarray(self.trans, dtype=np.float64)
        if emit.ndim != 2 or trans.ndim != 2:
            raise ValueError("emit and trans must be 2-D")
        if trans.shape[0] != trans.shape[1] or trans.shape[0] != emit.shape[1]:
            raise ValueError(
                f"shape mismatch: emit {emit.shape}, trans {trans.shape}"
            )
        if not (np.isfinite(emit).all() and np.isfinite(trans).all()):
            raise ValueError("lattice potentials must be finite")
        object.__setattr__(self, "emit", emit)
        object.__setattr__(self, "trans", trans)

    @property
    def seq_len(self) -> int:
        return self.emit.shape[0]

    @property
    def num_states(self) -> int:
        return self.emit.shape[1]


def energy(
    lattice: Lattice,
    z_path,
    y_seq,
    partition: StatePartition,
) -> float:
    """Total log-potential of a joint (state path, label sequence).

    Returns -inf when any state falls outside its label's block. Transitions
    are scored on the T-1 interior edges only.
    """
    z = np.asarray(z_path, dtype=np.int64)
    y = np.asarray(y_seq, dtype=np.int64)
    if z.shape != (lattice.seq_len,) or y.shape != (lattice.seq_len,):
        raise ValueError("path length must equal lattice length")
    if z.size and (z.min() < 0 or z.max() >= lattice.num_states):
        raise IndexError("state index out of range")
    if y.size and (y.min() < 0 or y.max() >= partition.num_labels):
        raise IndexError("label index out of range")
    if np.any(z // partition.states_per_label != y):
        return NEG_INF
    total = float(lattice.emit[np.arange(lattice.seq_len), z].sum())
    if lattice.seq_len > 1:
        total += float(lattice.trans[z[:-1], z[1:]].sum())
    return total


@dataclass
class ModelParams:
    """The complete trainable model plus the vocabularies it was built on."""

    label_set: LabelSet
    partition: StatePartition
    transition: TransitionFactors
    emission: EmissionParams
    vocab: Vocabulary
    charset: Charset

    def tensors(self) -> dict[str, np.ndarray]:
        out = dict(self.emission.tensors())
        if self.transition.mode == "low-rank":
            out["trans_u"] = self.transition.u
            out["trans_v"] = self.transition.v
        else:
            out["trans_full"] = self.transition.full
        return out

    def copy(self) -> "ModelParams":
        if self.transition.mode == "low-rank":
            trans = TransitionFactors(
                mode="low-rank", u=self.transition.u.copy(), v=self.transition.v.copy()
            )
        else:
            trans = TransitionFactors(mode="full-rank", full=self.transition.full.copy())
        emission = EmissionParams(
            **{name: arr.copy() for name, arr in self.emission.tensors().items()}
        )
        return replace(self, transition=trans, emission=emission)

    def check_finite(self):
        for name, arr in self.tensors().items():
            if not np.isfinite(arr).all():
                raise FloatingPointError(f"non-finite values in {name}")


def init_model_params(
    label_set: LabelSet,
    states_per_label: int,
    rank: int,
    mode: str,
    vocab: Vocabulary,
    charset: Charset,
    rng: np.random.Generator,
) -> ModelParams:
    """Fresh Glorot-initialized model. The rank is capped at the state count
    so small-state configurations stay well-formed."""
    partition = build_state_partition(label_set.size, states_per_label)
    m = partition.num_states
    if mode == "low-rank":
        r = min(rank, m)
        transition = TransitionFactors(
            mode="low-rank",
            u=glorot(rng, (m, r), m, r),
            v=glorot(rng, (m, r), m, r),
        )
    else:
        transition = TransitionFactors(mode="full-rank", full=glorot(rng, (m, m), m, m))
    emission = init_emission_params(vocab.size, charset.size, m, rng)
    return ModelParams(
        label_set=label_set,
        partition=partition,
        transition=transition,
        emission=emission,
        vocab=vocab,
        charset=charset,
    )


def sentence_lattice(
    params: ModelParams,
    tokens,
    dropout: float = 0.0,
    rng: np.random.Generator | None = None,
) -> Lattice:
    """Lattice of a sentence under the current parameters."""
    emit = emission_scores(
        tokens, params.emission, params.vocab, params.charset, dropout=dropout, rng=rng
    )
    return Lattice(emit=emit, trans=transition_logits(params.transition))
