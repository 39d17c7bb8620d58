"""Command-line entry point.

Subcommands: synth (generate a synthetic corpus), train, tag, eval,
inspect (activation/block/spectrum reports) and gradcheck. Option values
resolve as: command-line flag > config-file entry > built-in default. The
config file is plain "key = value" lines with '#' comments.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import analysis, serialize, training
from .data import (
    SyntheticTaskSpec,
    TokenSequence,
    generate_synthetic,
    read_conll,
    write_conll,
)
from .evaluation import score
from .features import build_charset, build_vocabulary
from .model import LabelSet, init_model_params
from .training import TrainConfig, finite_difference_check, predict_labels, train

DEFAULTS = {
    "seed": 0,
    "count": 1000,
    "states": 32,
    "rank": None,  # resolved from the state count
    "mode": "low-rank",
    "batch_size": 20,
    "epochs": 200,
    "patience": 25,
    "eval_every": 1,
    "learning_rate": 1e-3,
    "adam_eps": 1e-6,
    "dropout": 0.5,
    "min_count": 1,
    "workers": 1,
    "top_k": 10,
    "samples": 60,
    "epsilon": 1e-5,
    "threshold": 1e-5,
}


def _parse_value(text: str):
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            continue
    return text


def _read_config_file(path) -> dict:
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, _, value = line.partition("=")
            values[key.strip().replace("-", "_")] = _parse_value(value.strip())
    return values


def _resolve(args) -> dict:
    opts = dict(DEFAULTS)
    env_seed = os.environ.get("ELCRF_SEED")
    if env_seed is not None:
        opts["seed"] = int(env_seed)
    if getattr(args, "config", None):
        opts.update(_read_config_file(args.config))
    for key, value in vars(args).items():
        if value is not None and key not in ("command", "config", "func"):
            opts[key] = value
    return opts


def _default_rank(states: int) -> int:
    return 8 if states == 16 else 16


def _label_set_from(corpus) -> LabelSet:
    labels = {lab for seq in corpus for lab in (seq.labels or ())}
    if not labels:
        raise ValueError("training corpus has no labels")
    ordered = (["O"] if "O" in labels else []) + sorted(labels - {"O"})
    return LabelSet(tuple(ordered))


def _cmd_synth(args):
    opts = _resolve(args)
    spec = SyntheticTaskSpec(seed=int(opts["seed"]))
    corpus = generate_synthetic(spec, int(opts["count"]))
    write_conll(corpus, args.out)
    print(f"wrote {len(corpus)} sequences to {args.out}")
    return 0


def _cmd_train(args):
    opts = _resolve(args)
    train_corpus = read_conll(args.train)
    dev_corpus = read_conll(args.dev)
    label_set = _label_set_from(train_corpus)
    states = int(opts["states"])
    if states % label_set.size:
        raise ValueError(
            f"state count {states} not divisible by label count {label_set.size}"
        )
    rank = opts["rank"] if opts["rank"] is not None else _default_rank(states)
    rng = np.random.default_rng(int(opts["seed"]))
    vocab = build_vocabulary(train_corpus, min_count=int(opts["min_count"]))
    charset = build_charset(train_corpus)
    params = init_model_params(
        label_set,
        states // label_set.size,
        int(rank),
        str(opts["mode"]),
        vocab,
        charset,
        rng,
    )
    if args.embeddings:
        from .features import load_embeddings

        table, hits = load_embeddings(args.embeddings, vocab, rng)
        params.emission.word_emb = table
        print(f"loaded pretrained embeddings for {hits}/{vocab.size} tokens")
    config = TrainConfig(
        batch_size=int(opts["batch_size"]),
        max_epochs=int(opts["epochs"]),
        patience=int(opts["patience"]),
        eval_every=int(opts["eval_every"]),
        seed=int(opts["seed"]),
        learning_rate=float(opts["learning_rate"]),
        adam_eps=float(opts["adam_eps"]),
        dropout=float(opts["dropout"]),
        workers=int(opts["workers"]),
    )
    log_fh = open(args.log, "w", encoding="utf-8") if args.log else None
    try:

        def log(line):
            if log_fh:
                log_fh.write(line + "\n")
                log_fh.flush()

        best, report = train(config, train_corpus, dev_corpus, params, log=log)
    finally:
        if log_fh:
            log_fh.close()
    serialize.save_model(args.out, best)
    print(
        f"best dev F1 {report.best_f1:.2f} at epoch {report.best_epoch}; "
        f"model written to {args.out}"
    )
    return 0


def _iter_raw_sentences(path):
    """Raw line groups per sentence, -DOCSTART- sentences dropped."""
    group, skip = [], False
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            stripped = line.rstrip("\n")
            if not stripped.split():
                if group and not skip:
                    yield group
                group, skip = [], False
                continue
            if stripped.split()[0] == "-DOCSTART-":
                skip = True
                continue
            group.append(stripped)
    if group and not skip:
        yield group


def _cmd_tag(args):
    opts = _resolve(args)
    params, _ = serialize.load_model(args.model)
    groups = list(_iter_raw_sentences(args.input))
    corpus = [
        TokenSequence(tokens=tuple(line.split()[0] for line in group))
        for group in groups
    ]
    predictions = predict_labels(params, corpus, workers=int(opts["workers"]))
    with open(args.out, "w", encoding="utf-8") as fh:
        for group, pred in zip(groups, predictions):
            for line, label in zip(group, pred):
                fh.write(f"{line} {label}\n")
            fh.write("\n")
    print(f"tagged {len(corpus)} sequences to {args.out}")
    return 0


def _cmd_eval(args):
    gold = read_conll(args.gold)
    pred = read_conll(args.pred)
    if len(gold) != len(pred):
        raise ValueError("gold and prediction files have different sentence counts")
    result = score(
        [list(seq.labels) for seq in gold], [list(seq.labels) for seq in pred]
    )
    print(result.report())
    return 0


def _cmd_inspect(args):
    opts = _resolve(args)
    params, _ = serialize.load_model(args.model)
    corpus = read_conll(args.data)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    report = analysis.state_activation_report(params, corpus, top_k=int(opts["top_k"]))
    (out_dir / "activations.txt").write_text(report.text() + "\n", encoding="utf-8")
    (out_dir / "activations.csv").write_text(report.csv() + "\n", encoding="utf-8")
    (out_dir / "blocks.txt").write_text(
        analysis.block_summary_text(params) + "\n", encoding="utf-8"
    )
    (out_dir / "spectrum.csv").write_text(
        analysis.spectrum_csv(params) + "\n", encoding="utf-8"
    )
    print(f"reports written to {out_dir}")
    return 0


def _cmd_gradcheck(args):
    opts = _resolve(args)
    from .data import SYNTH_LABELS

    seed = int(opts["seed"])
    states = int(opts["states"])
    if states % SYNTH_LABELS.size:
        raise ValueError(f"state count must be divisible by {SYNTH_LABELS.size}")
    rank = opts["rank"] if opts["rank"] is not None else _default_rank(states)
    spec = SyntheticTaskSpec(seed=seed, length_range=(4, 8), pairs_range=(0, 1))
    corpus = generate_synthetic(spec, 4)
    vocab = build_vocabulary(corpus)
    charset = build_charset(corpus)
    rng = np.random.default_rng(seed)
    params = init_model_params(
        SYNTH_LABELS,
        states // SYNTH_LABELS.size,
        int(rank),
        str(opts["mode"]),
        vocab,
        charset,
        rng,
    )
    worst = finite_difference_check(
        params,
        corpus,
        epsilon=float(opts["epsilon"]),
        samples=int(opts["samples"]),
        rng=rng,
    )
    threshold = float(opts["threshold"])
    print(f"max relative gradient error: {worst:.3e} (threshold {threshold:.0e})")
    return 0 if worst < threshold else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="elcrf",
        description="Latent-state CRF with low-rank transition embeddings",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="key = value config file")
        p.add_argument("--seed", type=int)

    p = sub.add_parser("synth", help="generate a synthetic paren-memory corpus")
    add_common(p)
    p.add_argument("--out", required=True)
    p.add_argument("--count", type=int)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("train", help="train a model")
    add_common(p)
    p.add_argument("--train", required=True)
    p.add_argument("--dev", required=True)
    p.add_argument("--out", required=True, help="model output file")
    p.add_argument("--log", help="per-epoch log file")
    p.add_argument("--embeddings", help="pretrained word embeddings (text)")
    p.add_argument("--states", type=int)
    p.add_argument("--rank", type=int)
    p.add_argument("--mode", choices=("low-rank", "full-rank"))
    p.add_argument("--batch-size", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--patience", type=int)
    p.add_argument("--eval-every", type=int)
    p.add_argument("--learning-rate", type=float)
    p.add_argument("--adam-eps", type=float)
    p.add_argument("--dropout", type=float)
    p.add_argument("--min-count", type=int)
    p.add_argument("--workers", type=int)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("tag", help="decode a CoNLL file with a trained model")
    add_common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int)
    p.set_defaults(func=_cmd_tag)

    p = sub.add_parser("eval", help="score predictions against gold labels")
    add_common(p)
    p.add_argument("--gold", required=True)
    p.add_argument("--pred", required=True)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("inspect", help="write activation/block/spectrum reports")
    add_common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--top-k", type=int)
    p.set_defaults(func=_cmd_inspect)

    p = sub.add_parser("gradcheck", help="finite-difference gradient check")
    add_common(p)
    p.add_argument("--states", type=int)
    p.add_argument("--rank", type=int)
    p.add_argument("--mode", choices=("low-rank", "full-rank"))
    p.add_argument("--samples", type=int)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--threshold", type=float)
    p.set_defaults(func=_cmd_gradcheck)

    return parser


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, FloatingPointError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
