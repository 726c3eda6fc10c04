"""Broad/slender vowel agreement check for Gaelic spellings.

Within a word, a consonant cluster with vowels on both sides must be flanked
by vowels of the same class: broad (a, o, u) or slender (e, i), accented
forms included. Clusters at the start or end of a word are exempt.
"""

from __future__ import annotations

import unicodedata
from dataclasses import dataclass, field
from typing import Iterable, Optional

BROAD = frozenset("aouáàóòúù")
SLENDER = frozenset("eiéèíì")
VOWELS = BROAD | SLENDER
# 18-letter Gaelic alphabet plus accented vowels
GAELIC_LETTERS = frozenset("bcdfghlmnprst") | VOWELS


def vowel_class(ch: str) -> Optional[str]:
    ch = ch.lower()
    if ch in BROAD:
        return "broad"
    if ch in SLENDER:
        return "slender"
    return None


@dataclass(frozen=True)
class Violation:
    start: int
    left_vowel: str
    right_vowel: str


@dataclass(frozen=True)
class ValidationResult:
    word: str
    valid: Optional[bool]  # None: not assessable
    violations: tuple = ()

    @property
    def assessable(self) -> bool:
        return self.valid is not None

    @property
    def label(self) -> str:
        return "n/a" if self.valid is None else ("valid" if self.valid else "invalid")

    def to_tsv(self) -> str:
        return f"{self.word}\t{self.label}\t{','.join(str(v.start) for v in self.violations)}"


def _tokens(word: str):
    """(offset, token) runs of letters; anything else is a boundary."""
    start = None
    for i, ch in enumerate(word):
        if ch.isalpha():
            if start is None:
                start = i
        elif start is not None:
            yield start, word[start:i]
            start = None
    if start is not None:
        yield start, word[start:]


def _check_token(offset: int, token: str) -> list[Violation]:
    out = []
    prev_vowel = None
    cluster_start = None
    for i, ch in enumerate(token):
        if ch in VOWELS:
            if cluster_start is not None and prev_vowel is not None:
                if vowel_class(prev_vowel) != vowel_class(ch):
                    out.append(Violation(offset + cluster_start, prev_vowel, ch))
            prev_vowel = ch
            cluster_start = None
        elif cluster_start is None:
            cluster_start = i
    return out


def validate(word: str) -> ValidationResult:
    text = unicodedata.normalize("NFC", word)
    lowered = text.lower()
    tokens = list(_tokens(lowered))
    if "[unk]" in lowered or not tokens or any(set(t) - GAELIC_LETTERS for _, t in tokens):
        return ValidationResult(word, None)
    violations = [v for off, tok in tokens for v in _check_token(off, tok)]
    return ValidationResult(word, not violations, tuple(violations))


@dataclass
class BatchSummary:
    results: list[ValidationResult] = field(default_factory=list)

    @property
    def assessed(self) -> int:
        return sum(r.assessable for r in self.results)

    @property
    def fraction_valid(self) -> Optional[float]:
        n = self.assessed
        return None if n == 0 else sum(bool(r.valid) for r in self.results) / n

    def to_tsv(self) -> str:
        return "".join(r.to_tsv() + "\n" for r in self.results)

    def summary_line(self) -> str:
        frac = self.fraction_valid
        shown = "n/a" if frac is None else f"{frac:.4f}"
        return f"words\t{len(self.results)}\tassessed\t{self.assessed}\tfraction_valid\t{shown}"


def validate_batch(words: Iterable[str]) -> BatchSummary:
    """Fraction valid is over assessable words; ``None`` when there are none."""
    return BatchSummary([validate(w) for w in words])
