"""Character-level BLEU, worst-example ranking and whole-line transliteration."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Callable, Sequence

from .tokenizer import normalize

MAX_ORDER = 4


@dataclass(frozen=True)
class BleuScore:
    score: float
    precisions: tuple
    brevity_penalty: float
    hyp_len: int
    ref_len: int
    matches: tuple = ()
    totals: tuple = ()

    def __str__(self) -> str:
        ps = "/".join(f"{100 * p:.1f}" for p in self.precisions)
        return f"BLEU = {self.score:.2f} {ps} (BP = {self.brevity_penalty:.3f} hyp_len = {self.hyp_len} ref_len = {self.ref_len})"


def _ngrams(chars: str, n: int) -> Counter:
    return Counter(chars[i : i + n] for i in range(len(chars) - n + 1))


def _stats(hyp: str, ref: str) -> tuple[list[int], list[int]]:
    matches, totals = [], []
    for n in range(1, MAX_ORDER + 1):
        h, r = _ngrams(hyp, n), _ngrams(ref, n)
        matches.append(sum(min(c, r[g]) for g, c in h.items()))
        totals.append(max(len(hyp) - n + 1, 0))
    return matches, totals


def _combine(matches, totals, hyp_len: int, ref_len: int, smooth: bool) -> BleuScore:
    if smooth:
        # add-one on zero match counts only
        precisions = tuple(m / t if m > 0 else 1.0 / (t + 1) for m, t in zip(matches, totals))
    else:
        precisions = tuple(m / t if t > 0 else 0.0 for m, t in zip(matches, totals))
    if hyp_len == 0:
        bp = 0.0
    elif hyp_len < ref_len:
        bp = math.exp(1.0 - ref_len / hyp_len)
    else:
        bp = 1.0
    if bp == 0.0 or min(precisions) <= 0.0:
        score = 0.0
    else:
        score = 100.0 * bp * math.exp(sum(math.log(p) for p in precisions) / MAX_ORDER)
    return BleuScore(score, precisions, bp, hyp_len, ref_len, tuple(matches), tuple(totals))


def char_bleu_corpus(hyps: Sequence[str], refs: Sequence[str], smooth: bool = False) -> BleuScore:
    """BLEU-4 over characters (spaces included), statistics pooled over the corpus.

    Unsmoothed by default; ``smooth=True`` gives the add-one variant reported
    alongside it.
    """
    if len(hyps) != len(refs):
        raise ValueError(f"{len(hyps)} hypotheses but {len(refs)} references")
    matches = [0] * MAX_ORDER
    totals = [0] * MAX_ORDER
    hyp_len = ref_len = 0
    for h, r in zip(hyps, refs):
        h, r = normalize(h), normalize(r)
        m, t = _stats(h, r)
        matches = [a + b for a, b in zip(matches, m)]
        totals = [a + b for a, b in zip(totals, t)]
        hyp_len += len(h)
        ref_len += len(r)
    return _combine(matches, totals, hyp_len, ref_len, smooth)


def char_bleu_sentence(hyp: str, ref: str, smooth: bool = True) -> BleuScore:
    hyp, ref = normalize(hyp), normalize(ref)
    m, t = _stats(hyp, ref)
    return _combine(m, t, len(hyp), len(ref), smooth)


@dataclass(frozen=True)
class ErrorRow:
    input: str
    output: str
    reference: str
    bleu: float


@dataclass
class ErrorReport:
    rows: list[ErrorRow]

    def to_tsv(self) -> str:
        lines = ["input\toutput\treference\tbleu"]
        lines += [f"{r.input}\t{r.output}\t{r.reference}\t{r.bleu:.2f}" for r in self.rows]
        return "\n".join(lines) + "\n"

    def to_table(self) -> str:
        head = ("Input", "Output", "Reference", "BLEU")
        body = [(r.input, r.output, r.reference, f"{r.bleu:.2f}") for r in self.rows]
        widths = [max(len(x[i]) for x in [head, *body]) for i in range(4)]
        fmt = lambda row: " | ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip()
        sep = "-+-".join("-" * w for w in widths)
        return "\n".join([fmt(head), sep, *map(fmt, body)]) + "\n"


def rank_worst(translate: Callable[[str], str], examples, k: int) -> ErrorReport:
    """Score every example with sentence BLEU; return the ``k`` lowest, stable ascending."""
    if k > len(examples):
        raise ValueError(f"k={k} exceeds the {len(examples)} examples")
    rows = []
    for ex in examples:
        out = translate(ex.source)
        rows.append(ErrorRow(ex.source, out, ex.target, char_bleu_sentence(out, ex.target).score))
    rows.sort(key=lambda r: r.bleu)
    return ErrorReport(rows[:k])


def transliterate_sequence(translate: Callable[[str], str], line: str, max_raw_len: int = 20) -> str:
    """Transliterate each whitespace token independently and join with single spaces."""
    tokens = normalize(line).split()
    for tok in tokens:
        if len(tok) > max_raw_len:
            raise ValueError(f"token {tok!r} has {len(tok)} characters, limit is {max_raw_len}")
    return " ".join(translate(tok) for tok in tokens)
