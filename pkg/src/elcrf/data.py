"""Corpus ingestion and generation.

Reads the CoNLL column format (token in the first column, NER label in the
last; sentences separated by blank lines; -DOCSTART- sentences dropped),
validates IOB1 label sequences, and generates the synthetic paren-memory
corpus used for desk-scale experiments.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import LabelSet


@dataclass(frozen=True)
class TokenSequence:
    tokens: tuple[str, ...]
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        if len(self.tokens) == 0:
            raise ValueError("sequence must be non-empty")
        if self.labels is not None and len(self.labels) != len(self.tokens):
            raise ValueError("labels must align with tokens")


def read_conll(path, label_set: LabelSet | None = None) -> list[TokenSequence]:
    sequences: list[TokenSequence] = []
    tokens: list[str] = []
    labels: list[str] = []
    ncols = None
    skip = False

    def flush():
        nonlocal tokens, labels, ncols, skip
        if tokens and not skip:
            sequences.append(
                TokenSequence(
                    tokens=tuple(tokens),
                    labels=tuple(labels) if ncols and ncols > 1 else None,
                )
            )
        tokens, labels, ncols, skip = [], [], None, False

    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            cols = line.split()
            if not cols:
                flush()
                continue
            if cols[0] == "-DOCSTART-":
                skip = True
                continue
            if ncols is None:
                ncols = len(cols)
            elif len(cols) != ncols:
                raise ValueError(
                    f"{path}:{lineno}: inconsistent column count "
                    f"({len(cols)} vs {ncols})"
                )
            tokens.append(cols[0])
            if ncols > 1:
                label = cols[-1]
                if label_set is not None and label not in label_set.names:
                    raise ValueError(f"{path}:{lineno}: unknown label {label!r}")
                labels.append(label)
    flush()
    return sequences


def write_conll(sequences, path):
    """Emits token + dummy middle columns + label, blank line per sentence."""
    with open(path, "w", encoding="utf-8") as fh:
        for seq in sequences:
            labels = seq.labels or ("O",) * len(seq.tokens)
            for tok, lab in zip(seq.tokens, labels):
                fh.write(f"{tok} _ _ {lab}\n")
            fh.write("\n")


def validate_iob(labels, label_set: LabelSet) -> list[tuple[int, str]]:
    """IOB1 violations: B-X is only valid directly after I-X or B-X (it
    separates adjacent same-type spans). Violations are data, not errors."""
    violations = []
    for i, lab in enumerate(labels):
        if lab not in label_set.names:
            raise ValueError(f"label {lab!r} not in label set")
        if not lab.startswith("B-"):
            continue
        typ = lab[2:]
        prev = labels[i - 1] if i > 0 else "O"
        if prev not in (f"I-{typ}", f"B-{typ}"):
            violations.append((i, f"{lab} without preceding {typ} span"))
    return violations


@dataclass(frozen=True)
class SyntheticTaskSpec:
    """Paren-memory task: 'x' inside an open/close marker pair is an entity,
    the same token outside is not. Solvable only with latent memory when
    features are token-local."""

    fillers: tuple[str, ...] = tuple(f"w{i}" for i in range(10))
    open_token: str = "("
    close_token: str = ")"
    ambiguous_token: str = "x"
    length_range: tuple[int, int] = (10, 24)
    pairs_range: tuple[int, int] = (1, 3)
    x_prob: float = 0.3
    seed: int = 0

    def __post_init__(self):
        if self.length_range[0] > self.length_range[1] or self.length_range[0] < 2:
            raise ValueError("infeasible length range")
        if self.pairs_range[0] > self.pairs_range[1] or self.pairs_range[0] < 0:
            raise ValueError("infeasible pair-count range")
        if not 0.0 <= self.x_prob <= 1.0:
            raise ValueError("x_prob must be a probability")
        if 2 * self.pairs_range[1] > self.length_range[0]:
            raise ValueError("max pair count does not fit the shortest sequence")


#: Labels used by the synthetic task.
SYNTH_LABELS = LabelSet(("O", "I-MISC"))


def generate_synthetic(spec: SyntheticTaskSpec, count: int) -> list[TokenSequence]:
    """Deterministic corpus for a seed. Markers never nest; markers and
    fillers are labeled O; the ambiguous token is I-MISC iff inside a pair."""
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = np.random.default_rng(spec.seed)
    lo, hi = spec.length_range
    plo, phi = spec.pairs_range
    corpus = []
    for _ in range(count):
        length = int(rng.integers(lo, hi + 1))
        pairs = int(rng.integers(plo, phi + 1))
        marker_pos = sorted(rng.choice(length, size=2 * pairs, replace=False).tolist())
        opens = set(marker_pos[0::2])
        closes = set(marker_pos[1::2])
        tokens, labels = [], []
        inside = False
        for pos in range(length):
            if pos in opens:
                tokens.append(spec.open_token)
                labels.append("O")
                inside = True
            elif pos in closes:
                tokens.append(spec.close_token)
                labels.append("O")
                inside = False
            elif rng.random() < spec.x_prob:
                tokens.append(spec.ambiguous_token)
                labels.append("I-MISC" if inside else "O")
            else:
                tokens.append(str(rng.choice(spec.fillers)))
                labels.append("O")
        corpus.append(TokenSequence(tokens=tuple(tokens), labels=tuple(labels)))
    return corpus
