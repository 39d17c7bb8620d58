"""Pure-numpy chain dynamic programming kernels.

Fallback implementation used when the compiled extension is not available;
also the reference the compiled core is tested against. All functions take a
(T, M) emission log-potential matrix and a shared (M, M) transition
log-potential matrix (entry (i, j) scores i -> j). Emissions may contain
-inf (masked states); transitions must be finite.
"""

from __future__ import annotations

import numpy as np

name = "python"


def _logsumexp(a: np.ndarray, axis: int) -> np.ndarray:
    m = np.max(a, axis=axis, keepdims=True)
    safe = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log(np.sum(np.exp(a - safe), axis=axis)) + np.squeeze(safe, axis)
    return np.where(np.isfinite(np.squeeze(m, axis)), out, -np.inf)


def forward_logz(emit: np.ndarray, trans: np.ndarray) -> float:
    alpha = emit[0].copy()
    for t in range(1, emit.shape[0]):
        alpha = emit[t] + _logsumexp(alpha[:, None] + trans, axis=0)
    return float(_logsumexp(alpha[None, :], axis=1)[0])


def forward_backward(emit: np.ndarray, trans: np.ndarray):
    """Returns (log_z, node posteriors (T, M), edge posteriors (T-1, M, M))."""
    T, M = emit.shape
    alpha = np.empty((T, M))
    beta = np.empty((T, M))
    alpha[0] = emit[0]
    for t in range(1, T):
        alpha[t] = emit[t] + _logsumexp(alpha[t - 1][:, None] + trans, axis=0)
    beta[T - 1] = 0.0
    for t in range(T - 2, -1, -1):
        beta[t] = _logsumexp(trans + (emit[t + 1] + beta[t + 1])[None, :], axis=1)
    log_z = float(_logsumexp(alpha[T - 1][None, :], axis=1)[0])
    if not np.isfinite(log_z):
        raise FloatingPointError("lattice has no path with finite score")
    node = np.exp(alpha + beta - log_z)
    edge = np.exp(
        alpha[:-1, :, None]
        + trans[None, :, :]
        + (emit[1:] + beta[1:])[:, None, :]
        - log_z
    )
    return log_z, node, edge


def viterbi_path(emit: np.ndarray, trans: np.ndarray):
    """Returns (argmax state path (T,), score). Ties resolve to the lowest
    state index at every step."""
    T, M = emit.shape
    ptr = np.zeros((T, M), dtype=np.int64)
    delta = emit[0].copy()
    for t in range(1, T):
        cand = delta[:, None] + trans
        ptr[t] = np.argmax(cand, axis=0)
        delta = emit[t] + cand[ptr[t], np.arange(M)]
    path = np.empty(T, dtype=np.int64)
    path[T - 1] = int(np.argmax(delta))
    score = float(delta[path[T - 1]])
    for t in range(T - 1, 0, -1):
        path[t - 1] = ptr[t, path[t]]
    return path, score
