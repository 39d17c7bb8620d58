"""Qualitative model inspection: which tokens activate which hidden states
under Viterbi decoding, label-level structure of the transition table, and
its singular value spectrum."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .inference import viterbi
from .model import ModelParams, sentence_lattice, transition_logits


@dataclass(frozen=True)
class ActivationReport:
    """Per hidden state: top tokens by Viterbi visit count."""

    state_tokens: dict  # state -> list of (token, count), count desc
    state_label: dict  # state -> label name
    total_tokens: int

    def text(self) -> str:
        lines = []
        for state in sorted(self.state_tokens):
            toks = ", ".join(f"{t} ({c})" for t, c in self.state_tokens[state])
            lines.append(f"state {state} [{self.state_label[state]}]: {toks}")
        return "\n".join(lines)

    def csv(self) -> str:
        lines = ["state,rank,token,count"]
        for state in sorted(self.state_tokens):
            for rank, (tok, count) in enumerate(self.state_tokens[state]):
                lines.append(f"{state},{rank},{tok},{count}")
        return "\n".join(lines)


def state_activation_report(
    params: ModelParams, corpus, top_k: int = 10
) -> ActivationReport:
    counts: dict[int, dict[str, int]] = {}
    total = 0
    for seq in corpus:
        lattice = sentence_lattice(params, seq.tokens)
        result = viterbi(lattice, params.partition)
        for tok, state in zip(seq.tokens, result.states):
            per_state = counts.setdefault(int(state), {})
            per_state[tok] = per_state.get(tok, 0) + 1
            total += 1
    state_tokens = {
        state: sorted(toks.items(), key=lambda kv: (-kv[1], kv[0]))[:top_k]
        for state, toks in counts.items()
    }
    state_label = {
        state: params.label_set.names[params.partition.label_of(state)]
        for state in counts
    }
    return ActivationReport(
        state_tokens=state_tokens, state_label=state_label, total_tokens=total
    )


def transition_block_summary(params: ModelParams) -> np.ndarray:
    """N x N label-level view of the transition table: log-space mean
    (logsumexp minus log of block size) over each k x k block."""
    table = transition_logits(params.transition)
    n = params.partition.num_labels
    k = params.partition.states_per_label
    out = np.empty((n, n))
    for a in range(n):
        for b in range(n):
            block = table[a * k : (a + 1) * k, b * k : (b + 1) * k]
            m = block.max()
            out[a, b] = m + np.log(np.exp(block - m).sum()) - np.log(k * k)
    return out


def block_summary_text(params: ModelParams) -> str:
    matrix = transition_block_summary(params)
    names = params.label_set.names
    width = max(8, max(len(n) for n in names) + 1)
    header = " " * width + "".join(f"{n:>{width}}" for n in names)
    lines = [header]
    for a, name in enumerate(names):
        row = "".join(f"{matrix[a, b]:>{width}.3f}" for b in range(len(names)))
        lines.append(f"{name:<{width}}" + row)
    return "\n".join(lines)


def rank_spectrum(params: ModelParams) -> np.ndarray:
    """Non-increasing singular values of the realized transition table."""
    return np.linalg.svd(transition_logits(params.transition), compute_uv=False)


def spectrum_csv(params: ModelParams) -> str:
    lines = ["index,singular_value"]
    for i, s in enumerate(rank_spectrum(params)):
        lines.append(f"{i},{s:.12e}")
    return "\n".join(lines)
