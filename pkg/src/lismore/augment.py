"""Heterograph discovery from an IPA lexicon and homophone training-set expansion."""

from __future__ import annotations

import unicodedata
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .corpus import ParallelExample
from .tokenizer import normalize

_STRIP = str.maketrans("", "", "ˈˌ.")


def normalize_ipa(ipa: str) -> str:
    """Drop enclosing slashes/brackets, stress marks and syllable dots; keep length marks."""
    s = unicodedata.normalize("NFC", ipa).translate(_STRIP).strip()
    while len(s) >= 2 and (s[0], s[-1]) in {("/", "/"), ("[", "]")}:
        s = s[1:-1].strip()
    return s


@dataclass
class PronunciationLexicon:
    entries: dict[str, set[str]] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.entries)

    def add(self, spelling: str, ipa: str) -> None:
        spelling = normalize(spelling)
        if not spelling:
            raise ValueError("empty spelling")
        self.entries.setdefault(spelling, set()).add(normalize_ipa(ipa))

    def alternatives(self, spelling: str) -> list[str]:
        """Other spellings sharing at least one pronunciation with ``spelling``, sorted."""
        spelling = normalize(spelling)
        prons = self.entries.get(spelling)
        if not prons:
            return []
        return sorted({s for s, p in self.entries.items() if s != spelling and p & prons})


def parse_lexicon(path) -> PronunciationLexicon:
    lex = PronunciationLexicon()
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        cols = line.split("\t")
        if len(cols) != 2 or not cols[0].strip() or not cols[1].strip():
            raise ValueError(f"{path}:{lineno}: expected 'spelling<TAB>ipa', got {line!r}")
        lex.add(cols[0].strip(), cols[1])
    return lex


@dataclass(frozen=True)
class HeterographGroup:
    ipa: str
    spellings: tuple


def find_heterographs(lex: PronunciationLexicon) -> list[HeterographGroup]:
    by_ipa = defaultdict(set)
    for spelling, prons in lex.entries.items():
        for p in prons:
            by_ipa[p].add(spelling)
    return [HeterographGroup(ipa, tuple(sorted(sp))) for ipa, sp in sorted(by_ipa.items()) if len(sp) >= 2]


@dataclass
class AugmentReport:
    before: int
    after: int
    expansions: list[tuple[str, str, list[str]]]

    def render(self, limit: int = 20) -> str:
        grew = self.after - self.before
        pct = 100.0 * grew / self.before if self.before else 0.0
        lines = [f"examples before: {self.before}", f"examples after: {self.after} (+{grew}, {pct:.1f}%)"]
        for src, orig, alts in self.expansions[:limit]:
            lines.append(f"  {src}: {orig} -> {', '.join(alts)}")
        if len(self.expansions) > limit:
            lines.append(f"  ... {len(self.expansions) - limit} more")
        return "\n".join(lines) + "\n"


def _expand(train: Sequence[ParallelExample], lex: PronunciationLexicon, side: str):
    seen = {(ex.source, ex.target) for ex in train}
    out = list(train)
    expansions = []
    next_index = max((ex.index for ex in train), default=-1) + 1
    for ex in train:
        word = getattr(ex, side)
        added = []
        for alt in lex.alternatives(word):
            pair = (ex.source, alt) if side == "target" else (alt, ex.target)
            if pair in seen:
                continue
            seen.add(pair)
            out.append(ParallelExample(*pair, next_index))
            next_index += 1
            added.append(alt)
        if added:
            expansions.append((ex.source if side == "target" else ex.target, word, added))
    return out, AugmentReport(len(train), len(out), expansions)


def augment(train: Sequence[ParallelExample], lex: PronunciationLexicon):
    """Append (source, heterograph) pairs for every Gaelic target with homophones.

    Originals stay first and unchanged; pairs already present are not repeated.
    Returns ``(augmented, report)``.
    """
    return _expand(train, lex, "target")


def augment_reverse(train: Sequence[ParallelExample], lex: PronunciationLexicon):
    """Same as :func:`augment` for gd-bdl data, expanding the Gaelic source side."""
    return _expand(train, lex, "source")
