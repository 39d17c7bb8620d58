"""Entity-level precision/recall/F1 under IOB1 semantics, plus token
accuracy. Matches the CoNLL-2003 evaluator's chunking rules: I-X starts a
span after O or a different type; B-X always starts a span (splitting
adjacent same-type spans)."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Scores:
    precision: float  # percent
    recall: float
    f1: float
    token_accuracy: float
    per_type: dict  # type -> (gold, predicted, correct) span counts

    def report(self) -> str:
        lines = [
            f"accuracy: {self.token_accuracy:6.2f}%; "
            f"precision: {self.precision:6.2f}%; "
            f"recall: {self.recall:6.2f}%; FB1: {self.f1:6.2f}"
        ]
        for typ in sorted(self.per_type):
            g, p, c = self.per_type[typ]
            prec = 100.0 * c / p if p else 0.0
            rec = 100.0 * c / g if g else 0.0
            f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
            lines.append(
                f"{typ}: precision: {prec:6.2f}%; "
                f"recall: {rec:6.2f}%; FB1: {f1:6.2f}  {p}"
            )
        return "\n".join(lines)


def _split(label: str):
    if label == "O":
        return "O", None
    prefix, typ = label.split("-", 1)
    return prefix, typ


def extract_spans(labels) -> set[tuple[int, int, str]]:
    """Maximal entity spans as (start, end inclusive, type)."""
    spans = set()
    start = None
    cur_type = None
    for i, label in enumerate(labels):
        prefix, typ = _split(label)
        starts_new = prefix == "B" or (prefix == "I" and typ != cur_type)
        if cur_type is not None and (prefix == "O" or starts_new):
            spans.add((start, i - 1, cur_type))
            start, cur_type = None, None
        if prefix != "O" and (starts_new or cur_type is None):
            start, cur_type = i, typ
    if cur_type is not None:
        spans.add((start, len(labels) - 1, cur_type))
    return spans


def render_spans(spans, length: int) -> list[str]:
    """Inverse of extract_spans on valid span sets (IOB1 rendering)."""
    labels = ["O"] * length
    prev_end = {}
    for start, end, typ in sorted(spans):
        prefix = "B" if prev_end.get(typ) == start - 1 else "I"
        labels[start] = f"{prefix}-{typ}"
        for i in range(start + 1, end + 1):
            labels[i] = f"I-{typ}"
        prev_end[typ] = end
    return labels


def score(gold_corpus, pred_corpus) -> Scores:
    """Span P/R/F1 (percent) over corpora of label sequences.

    Both-empty span sets score F1 = 100; an empty side with a non-empty
    other scores 0.
    """
    if len(gold_corpus) != len(pred_corpus):
        raise ValueError("corpora must have the same number of sequences")
    n_gold = n_pred = n_correct = 0
    n_tok = n_tok_correct = 0
    per_type: dict[str, list[int]] = {}
    for gold, pred in zip(gold_corpus, pred_corpus):
        if len(gold) != len(pred):
            raise ValueError("sequence length mismatch")
        n_tok += len(gold)
        n_tok_correct += sum(g == p for g, p in zip(gold, pred))
        gspans = extract_spans(gold)
        pspans = extract_spans(pred)
        n_gold += len(gspans)
        n_pred += len(pspans)
        n_correct += len(gspans & pspans)
        for spans, slot in ((gspans, 0), (pspans, 1)):
            for span in spans:
                per_type.setdefault(span[2], [0, 0, 0])[slot] += 1
        for span in gspans & pspans:
            per_type[span[2]][2] += 1
    if n_gold == 0 and n_pred == 0:
        precision = recall = f1 = 100.0
    else:
        precision = 100.0 * n_correct / n_pred if n_pred else 0.0
        recall = 100.0 * n_correct / n_gold if n_gold else 0.0
        f1 = (
            2 * precision * recall / (precision + recall)
            if precision + recall
            else 0.0
        )
    token_accuracy = 100.0 * n_tok_correct / n_tok if n_tok else 0.0
    return Scores(
        precision=precision,
        recall=recall,
        f1=f1,
        token_accuracy=token_accuracy,
        per_type={t: tuple(v) for t, v in per_type.items()},
    )
