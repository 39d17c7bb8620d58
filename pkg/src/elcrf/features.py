"""Per-token emission featurization.

Each token is encoded independently of its position: a 100-d word embedding
(pretrained where available, Glorot elsewhere) is concatenated with a 25-d
character feature (width-3 convolution over character embeddings, max-pooled)
and passed through a one-hidden-layer rectifier network. Emission scores are
a learned linear projection of that feature vector onto the hidden states.

Text normalization is digits -> '0' only; case is preserved (capitalization
is a strong entity cue).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

WORD_DIM = 100
CHAR_DIM = 25
CONV_WIDTH = 3
HIDDEN_DIM = 100

UNK_TOKEN = "<unk>"
_DIGITS = re.compile(r"\d")


def normalize_token(token: str) -> str:
    return _DIGITS.sub("0", token)


@dataclass(frozen=True)
class Vocabulary:
    """Token -> index map with UNK at index 0; tokens below min_count are
    folded into UNK. Keeps corpus counts for singleton handling."""

    index_to_token: tuple[str, ...]
    min_count: int
    counts: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(
            self,
            "_lookup",
            {tok: i for i, tok in enumerate(self.index_to_token)},
        )

    @property
    def size(self) -> int:
        return len(self.index_to_token)

    def index(self, token: str) -> int:
        return self._lookup.get(normalize_token(token), 0)

    def is_singleton(self, token: str) -> bool:
        return self.counts.get(normalize_token(token), 0) == 1


def build_vocabulary(corpus, min_count: int = 1) -> Vocabulary:
    """Deterministic vocabulary: kept tokens ordered by (count desc, lex)."""
    if not corpus:
        raise ValueError("corpus must be non-empty")
    counts: dict[str, int] = {}
    for seq in corpus:
        for tok in seq.tokens:
            norm = normalize_token(tok)
            counts[norm] = counts.get(norm, 0) + 1
    kept = sorted(
        (tok for tok, c in counts.items() if c >= min_count),
        key=lambda tok: (-counts[tok], tok),
    )
    return Vocabulary(
        index_to_token=(UNK_TOKEN, *kept), min_count=min_count, counts=counts
    )


@dataclass(frozen=True)
class Charset:
    """Character -> index map; 0 is the token-boundary pad, 1 is unknown."""

    chars: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(
            self, "_lookup", {c: i + 2 for i, c in enumerate(self.chars)}
        )

    @property
    def size(self) -> int:
        return len(self.chars) + 2

    def index(self, char: str) -> int:
        return self._lookup.get(char, 1)


def build_charset(corpus) -> Charset:
    seen = set()
    for seq in corpus:
        for tok in seq.tokens:
            seen.update(normalize_token(tok))
    return Charset(chars=tuple(sorted(seen)))


def glorot(rng: np.random.Generator, shape, fan_in: int, fan_out: int) -> np.ndarray:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape)


@dataclass
class EmissionParams:
    """All learnable tensors of the emission network."""

    word_emb: np.ndarray  # (|V|, WORD_DIM)
    char_emb: np.ndarray  # (|charset|, CHAR_DIM)
    conv_w: np.ndarray  # (CONV_WIDTH, CHAR_DIM, CHAR_DIM)
    ff_w: np.ndarray  # (WORD_DIM + CHAR_DIM, HIDDEN_DIM)
    ff_b: np.ndarray  # (HIDDEN_DIM,)
    out_w: np.ndarray  # (HIDDEN_DIM, M)
    out_b: np.ndarray  # (M,)

    @property
    def num_states(self) -> int:
        return self.out_w.shape[1]

    def tensors(self) -> dict[str, np.ndarray]:
        return {
            "word_emb": self.word_emb,
            "char_emb": self.char_emb,
            "conv_w": self.conv_w,
            "ff_w": self.ff_w,
            "ff_b": self.ff_b,
            "out_w": self.out_w,
            "out_b": self.out_b,
        }


def init_emission_params(
    vocab_size: int, charset_size: int, num_states: int, rng: np.random.Generator
) -> EmissionParams:
    concat = WORD_DIM + CHAR_DIM
    return EmissionParams(
        word_emb=glorot(rng, (vocab_size, WORD_DIM), vocab_size, WORD_DIM),
        char_emb=glorot(rng, (charset_size, CHAR_DIM), charset_size, CHAR_DIM),
        conv_w=glorot(
            rng,
            (CONV_WIDTH, CHAR_DIM, CHAR_DIM),
            CONV_WIDTH * CHAR_DIM,
            CHAR_DIM,
        ),
        ff_w=glorot(rng, (concat, HIDDEN_DIM), concat, HIDDEN_DIM),
        ff_b=np.zeros(HIDDEN_DIM),
        out_w=glorot(rng, (HIDDEN_DIM, num_states), HIDDEN_DIM, num_states),
        out_b=np.zeros(num_states),
    )


def load_embeddings(
    path, vocab: Vocabulary, rng: np.random.Generator, dim: int = WORD_DIM
):
    """Word table initialized from a text embeddings file.

    File format: one token per line, token then `dim` decimal floats,
    space-separated. Rows for tokens absent from the file stay at their
    Glorot draw. Returns (table, number of pretrained hits).
    """
    table = glorot(rng, (vocab.size, dim), vocab.size, dim)
    hits = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.rstrip("\n").split(" ")
            if len(parts) <= 1 and not parts[0]:
                continue
            if len(parts) != dim + 1:
                raise ValueError(
                    f"{path}:{lineno}: expected token + {dim} floats, "
                    f"got {len(parts) - 1} values"
                )
            idx = vocab._lookup.get(parts[0])
            if idx is None:
                continue
            table[idx] = np.array([float(x) for x in parts[1:]])
            hits += 1
    return table, hits


@dataclass
class EncodeCache:
    """Forward-pass intermediates of encode_token_batch, kept for backprop."""

    word_idx: np.ndarray  # (B,)
    char_idx: np.ndarray  # (B, Lmax + 2)
    lengths: np.ndarray  # (B,) window counts per token
    windows: np.ndarray  # (B, Lmax, CONV_WIDTH, CHAR_DIM)
    pool_arg: np.ndarray  # (B, CHAR_DIM) argmax window per channel
    concat: np.ndarray  # (B, WORD_DIM + CHAR_DIM)
    relu_mask: np.ndarray  # (B, HIDDEN_DIM)


def encode_token_batch(tokens, params: EmissionParams, vocab: Vocabulary, charset: Charset):
    """Feature vectors for a batch of (already normalized) tokens.

    Returns (features (B, HIDDEN_DIM), EncodeCache).
    """
    B = len(tokens)
    word_idx = np.array([vocab._lookup.get(t, 0) for t in tokens], dtype=np.int64)
    lengths = np.array([max(len(t), 1) for t in tokens], dtype=np.int64)
    lmax = int(lengths.max())
    # pad with boundary chars (index 0) on both sides and to a common length
    char_idx = np.zeros((B, lmax + 2), dtype=np.int64)
    for b, tok in enumerate(tokens):
        for p, c in enumerate(tok):
            char_idx[b, p + 1] = charset.index(c)
    emb = params.char_emb[char_idx]  # (B, lmax+2, CHAR_DIM)
    windows = np.stack(
        [emb[:, p : p + lmax, :] for p in range(CONV_WIDTH)], axis=2
    )  # (B, lmax, CONV_WIDTH, CHAR_DIM)
    conv = np.einsum("bpwi,wio->bpo", windows, params.conv_w)
    pos = np.arange(lmax)
    conv = np.where((pos[None, :] < lengths[:, None])[:, :, None], conv, -np.inf)
    pool_arg = np.argmax(conv, axis=1)  # (B, CHAR_DIM)
    char_feat = np.take_along_axis(conv, pool_arg[:, None, :], axis=1)[:, 0, :]
    concat = np.concatenate([params.word_emb[word_idx], char_feat], axis=1)
    pre = concat @ params.ff_w + params.ff_b
    relu_mask = pre > 0
    features = np.where(relu_mask, pre, 0.0)
    cache = EncodeCache(
        word_idx=word_idx,
        char_idx=char_idx,
        lengths=lengths,
        windows=windows,
        pool_arg=pool_arg,
        concat=concat,
        relu_mask=relu_mask,
    )
    return features, cache


def encode_backward(
    cache: EncodeCache, d_features: np.ndarray, params: EmissionParams
) -> dict[str, np.ndarray]:
    """Gradients of the encoder parameters given gradients on its output."""
    d_pre = np.where(cache.relu_mask, d_features, 0.0)
    d_ff_w = cache.concat.T @ d_pre
    d_ff_b = d_pre.sum(axis=0)
    d_concat = d_pre @ params.ff_w.T
    d_word_emb = np.zeros_like(params.word_emb)
    np.add.at(d_word_emb, cache.word_idx, d_concat[:, :WORD_DIM])
    d_char_feat = d_concat[:, WORD_DIM:]  # (B, CHAR_DIM)
    B, lmax = cache.windows.shape[:2]
    d_conv = np.zeros((B, lmax, CHAR_DIM))
    np.put_along_axis(
        d_conv, cache.pool_arg[:, None, :], d_char_feat[:, None, :], axis=1
    )
    d_conv_w = np.einsum("bpwi,bpo->wio", cache.windows, d_conv)
    d_windows = np.einsum("bpo,wio->bpwi", d_conv, params.conv_w)
    d_char_emb = np.zeros_like(params.char_emb)
    for w in range(CONV_WIDTH):
        np.add.at(d_char_emb, cache.char_idx[:, w : w + lmax], d_windows[:, :, w, :])
    return {
        "word_emb": d_word_emb,
        "char_emb": d_char_emb,
        "conv_w": d_conv_w,
        "ff_w": d_ff_w,
        "ff_b": d_ff_b,
    }


def encode_token(token: str, params: EmissionParams, vocab: Vocabulary, charset: Charset) -> np.ndarray:
    """Feature vector for one token; position-independent by construction."""
    features, _ = encode_token_batch([normalize_token(token)], params, vocab, charset)
    return features[0]


def emission_scores(
    tokens,
    params: EmissionParams,
    vocab: Vocabulary,
    charset: Charset,
    dropout: float = 0.0,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """(T, M) emission log-potential matrix for a sentence.

    Dropout (inverted scaling) is applied to the feature vectors when a rate
    and rng are given; pass 0 for inference.
    """
    norm = [normalize_token(t) for t in tokens]
    uniq = sorted(set(norm))
    pos = {t: i for i, t in enumerate(uniq)}
    feats, _ = encode_token_batch(uniq, params, vocab, charset)
    f = feats[[pos[t] for t in norm]]
    if dropout > 0.0:
        if rng is None:
            raise ValueError("dropout requires an rng")
        keep = rng.random(f.shape) >= dropout
        f = f * keep / (1.0 - dropout)
    return f @ params.out_w + params.out_b
