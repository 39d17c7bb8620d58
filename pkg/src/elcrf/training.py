"""Maximum-likelihood training.

The negative log-likelihood of a sequence is free log Z minus label-clamped
log Z; its gradient w.r.t. every lattice cell is the difference of the free
and clamped posteriors. Those lattice gradients are backpropagated through
the low-rank transition product and the emission network. Optimization is
bias-corrected Adam over minibatches with early stopping on dev entity F1.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import inference
from .evaluation import score
from .features import UNK_TOKEN, encode_backward, encode_token_batch, normalize_token
from .model import Lattice, ModelParams, sentence_lattice, transition_logits


@dataclass
class AdamState:
    """First/second moment estimates per named tensor plus the step count."""

    m: dict
    v: dict
    t: int = 0
    learning_rate: float = 1e-3
    eps: float = 1e-6
    beta1: float = 0.9
    beta2: float = 0.999

    @classmethod
    def for_params(cls, params: ModelParams, **hyper) -> "AdamState":
        return cls(
            m={k: np.zeros_like(a) for k, a in params.tensors().items()},
            v={k: np.zeros_like(a) for k, a in params.tensors().items()},
            **hyper,
        )


@dataclass
class TrainConfig:
    batch_size: int = 20
    max_epochs: int = 200
    patience: int = 25
    eval_every: int = 1
    seed: int = 0
    learning_rate: float = 1e-3
    adam_eps: float = 1e-6
    dropout: float = 0.5
    unk_replace_prob: float = 0.5
    workers: int = 1

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch size must be >= 1")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")


@dataclass
class EpochRecord:
    epoch: int
    mean_nll: float
    dev_precision: float | None
    dev_recall: float | None
    dev_f1: float | None
    seconds: float


@dataclass
class TrainReport:
    epochs: list = field(default_factory=list)
    best_epoch: int = -1
    best_f1: float = -1.0

    def log_lines(self) -> list[str]:
        lines = []
        for rec in self.epochs:
            if rec.dev_f1 is None:
                lines.append(f"{rec.epoch}\t{rec.mean_nll:.6f}\t-\t-\t-")
            else:
                lines.append(
                    f"{rec.epoch}\t{rec.mean_nll:.6f}\t{rec.dev_precision:.2f}"
                    f"\t{rec.dev_recall:.2f}\t{rec.dev_f1:.2f}"
                )
        return lines


def _training_tokens(seq, params: ModelParams, rng, unk_replace_prob: float):
    """Normalized tokens with stochastic singleton -> UNK replacement so the
    UNK embedding sees gradient."""
    out = []
    for tok in seq.tokens:
        norm = normalize_token(tok)
        if (
            rng is not None
            and unk_replace_prob > 0
            and params.vocab.is_singleton(norm)
            and rng.random() < unk_replace_prob
        ):
            norm = UNK_TOKEN
        out.append(norm)
    return out


def _map_ordered(fn, items, workers: int):
    if workers <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def nll_and_gradients(
    batch,
    params: ModelParams,
    dropout: float = 0.0,
    rng: np.random.Generator | None = None,
    unk_replace_prob: float = 0.0,
    workers: int = 1,
):
    """Mean NLL over the batch and gradients for every named tensor."""
    if not batch:
        raise ValueError("batch must be non-empty")
    for seq in batch:
        if seq.labels is None:
            raise ValueError("training sequences need gold labels")
    tok_lists = [
        _training_tokens(seq, params, rng, unk_replace_prob) for seq in batch
    ]
    uniq = sorted({tok for toks in tok_lists for tok in toks})
    pos = {tok: i for i, tok in enumerate(uniq)}
    feats, cache = encode_token_batch(
        uniq, params.emission, params.vocab, params.charset
    )
    trans = np.ascontiguousarray(transition_logits(params.transition))
    out_w, out_b = params.emission.out_w, params.emission.out_b

    # dropout masks drawn up-front, in batch order, to keep runs reproducible
    # regardless of worker count
    masks = []
    for toks in tok_lists:
        if dropout > 0.0:
            if rng is None:
                raise ValueError("dropout requires an rng")
            keep = rng.random((len(toks), feats.shape[1])) >= dropout
            masks.append(keep / (1.0 - dropout))
        else:
            masks.append(None)

    def per_sequence(item):
        seq, toks, mask = item
        f = feats[[pos[t] for t in toks]]
        fd = f if mask is None else f * mask
        emit = np.ascontiguousarray(fd @ out_w + out_b)
        lattice = Lattice(emit=emit, trans=trans)
        y = params.label_set.encode(seq.labels)
        free = inference.posterior_marginals(lattice)
        clamped = inference.clamped_marginals(lattice, y, params.partition)
        nll = -inference.sequence_log_likelihood(lattice, y, params.partition)
        g_emit = free.node - clamped.node
        g_trans = (
            (free.edge - clamped.edge).sum(axis=0)
            if lattice.seq_len > 1
            else np.zeros_like(trans)
        )
        g_out_w = fd.T @ g_emit
        g_out_b = g_emit.sum(axis=0)
        d_fd = g_emit @ out_w.T
        d_f = d_fd if mask is None else d_fd * mask
        return nll, g_trans, g_out_w, g_out_b, d_f

    results = _map_ordered(
        per_sequence, list(zip(batch, tok_lists, masks)), workers
    )

    B = len(batch)
    total_nll = 0.0
    g_trans = np.zeros_like(trans)
    g_out_w = np.zeros_like(out_w)
    g_out_b = np.zeros_like(out_b)
    d_feats = np.zeros_like(feats)
    for (nll, gt, gw, gb, d_f), toks in zip(results, tok_lists):
        total_nll += nll
        g_trans += gt
        g_out_w += gw
        g_out_b += gb
        np.add.at(d_feats, [pos[t] for t in toks], d_f)

    grads = encode_backward(cache, d_feats, params.emission)
    grads["out_w"] = g_out_w
    grads["out_b"] = g_out_b
    if params.transition.mode == "low-rank":
        grads["trans_u"] = g_trans @ params.transition.v
        grads["trans_v"] = g_trans.T @ params.transition.u
    else:
        grads["trans_full"] = g_trans
    for name in grads:
        grads[name] = grads[name] / B
    return total_nll / B, grads


def _mean_nll(batch, params: ModelParams) -> float:
    total = 0.0
    for seq in batch:
        lattice = sentence_lattice(params, seq.tokens)
        y = params.label_set.encode(seq.labels)
        total -= inference.sequence_log_likelihood(lattice, y, params.partition)
    return total / len(batch)


def finite_difference_check(
    params: ModelParams,
    batch,
    epsilon: float = 1e-5,
    samples: int = 50,
    rng: np.random.Generator | None = None,
) -> float:
    """Max relative error between analytic and central-difference gradients
    over randomly sampled scalar parameters."""
    if not 1e-7 <= epsilon <= 1e-3:
        raise ValueError("epsilon out of range [1e-7, 1e-3]")
    rng = rng or np.random.default_rng(0)
    _, grads = nll_and_gradients(batch, params)
    tensors = params.tensors()
    names = sorted(tensors)
    sizes = np.array([tensors[n].size for n in names])
    total = int(sizes.sum())
    worst = 0.0
    for flat in rng.choice(total, size=min(samples, total), replace=False):
        cum = 0
        for name, size in zip(names, sizes):
            if flat < cum + size:
                idx = np.unravel_index(flat - cum, tensors[name].shape)
                break
            cum += size
        arr = tensors[name]
        orig = arr[idx]
        arr[idx] = orig + epsilon
        hi = _mean_nll(batch, params)
        arr[idx] = orig - epsilon
        lo = _mean_nll(batch, params)
        arr[idx] = orig
        numeric = (hi - lo) / (2 * epsilon)
        analytic = grads[name][idx]
        err = abs(analytic - numeric) / max(1e-8, abs(numeric))
        worst = max(worst, err)
    return worst


def adam_step(params: ModelParams, grads: dict, state: AdamState):
    """In-place bias-corrected Adam update. Returns (params, state)."""
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    tensors = params.tensors()
    for name in sorted(tensors):
        g = grads[name]
        if not np.isfinite(g).all():
            raise FloatingPointError(f"non-finite gradient for {name}")
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1 - b1) * g
        v *= b2
        v += (1 - b2) * g * g
        m_hat = m / (1 - b1**state.t)
        v_hat = v / (1 - b2**state.t)
        tensors[name] -= state.learning_rate * m_hat / (np.sqrt(v_hat) + state.eps)
    return params, state


def predict_labels(params: ModelParams, corpus, workers: int = 1):
    """Viterbi label sequences (as strings) for every sequence."""

    def decode(seq):
        lattice = sentence_lattice(params, seq.tokens)
        result = inference.viterbi(lattice, params.partition)
        return [params.label_set.names[i] for i in result.labels]

    return _map_ordered(decode, corpus, workers)


def train(
    config: TrainConfig,
    train_corpus,
    dev_corpus,
    params: ModelParams,
    log=None,
):
    """Runs the optimization loop; returns (best params, TrainReport)."""
    if not train_corpus or not dev_corpus:
        raise ValueError("corpora must be non-empty")
    rng = np.random.default_rng(config.seed)
    state = AdamState.for_params(
        params, learning_rate=config.learning_rate, eps=config.adam_eps
    )
    report = TrainReport()
    best_params = params.copy()
    evals_since_best = 0
    n = len(train_corpus)
    for epoch in range(1, config.max_epochs + 1):
        started = time.perf_counter()
        order = rng.permutation(n)
        nll_sum = 0.0
        nll_batches = 0
        for lo in range(0, n, config.batch_size):
            batch = [train_corpus[i] for i in order[lo : lo + config.batch_size]]
            nll, grads = nll_and_gradients(
                batch,
                params,
                dropout=config.dropout,
                rng=rng,
                unk_replace_prob=config.unk_replace_prob,
                workers=config.workers,
            )
            adam_step(params, grads, state)
            nll_sum += nll
            nll_batches += 1
        params.check_finite()
        record = EpochRecord(
            epoch=epoch,
            mean_nll=nll_sum / nll_batches,
            dev_precision=None,
            dev_recall=None,
            dev_f1=None,
            seconds=0.0,
        )
        if epoch % config.eval_every == 0:
            pred = predict_labels(params, dev_corpus, workers=config.workers)
            gold = [list(seq.labels) for seq in dev_corpus]
            dev = score(gold, pred)
            record.dev_precision = dev.precision
            record.dev_recall = dev.recall
            record.dev_f1 = dev.f1
            if dev.f1 > report.best_f1:
                report.best_f1 = dev.f1
                report.best_epoch = epoch
                best_params = params.copy()
                evals_since_best = 0
            else:
                evals_since_best += 1
        record.seconds = time.perf_counter() - started
        report.epochs.append(record)
        if log is not None:
            log(report.log_lines()[-1])
        if record.dev_f1 is not None and evals_since_best >= config.patience:
            break
    if report.best_epoch < 0:
        best_params = params.copy()
    return best_params, report
