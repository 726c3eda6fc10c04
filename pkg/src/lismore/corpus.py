"""Parallel word-pair and monolingual corpora: loading, splitting, statistics."""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .tokenizer import MAX_RAW_LEN, normalize

log = logging.getLogger(__name__)


class CorpusError(ValueError):
    pass


@dataclass(frozen=True)
class ParallelExample:
    source: str
    target: str
    index: int = 0

    def swapped(self) -> "ParallelExample":
        return ParallelExample(self.target, self.source, self.index)


@dataclass
class DataSplit:
    train: list[ParallelExample]
    eval: list[ParallelExample]
    test: list[ParallelExample]
    seed: int

    def write_manifest(self, directory) -> None:
        """Line indices of each part (0-based, file order) plus the seed."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        for name in ("train", "eval", "test"):
            part = getattr(self, name)
            text = "".join(f"{ex.index}\n" for ex in part)
            (directory / f"split.{name}.idx").write_text(text)
        (directory / "split.seed").write_text(f"{self.seed}\n")


@dataclass
class MonoWordCorpus:
    words: list[str]
    source: str = ""
    dropped: int = 0
    unique: bool = False

    def __len__(self) -> int:
        return len(self.words)


def parse_parallel(lines: Iterable[str], origin: str = "<input>") -> list[ParallelExample]:
    examples = []
    for lineno, line in enumerate(lines, 1):
        line = line.rstrip("\r\n")
        cols = line.split("\t")
        if len(cols) != 2:
            raise CorpusError(f"{origin}:{lineno}: expected 2 tab-separated columns, found {len(cols)}")
        src, tgt = normalize(cols[0]), normalize(cols[1])
        if not src or not tgt:
            raise CorpusError(f"{origin}:{lineno}: empty source or target")
        examples.append(ParallelExample(src, tgt, len(examples)))
    if not examples:
        raise CorpusError(f"{origin}: no examples")
    return examples


def load_parallel(path) -> list[ParallelExample]:
    text = Path(path).read_text(encoding="utf-8")
    return parse_parallel(text.splitlines(), str(path))


def save_parallel(examples: Sequence[ParallelExample], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for ex in examples:
            if "\t" in ex.source + ex.target or "\n" in ex.source + ex.target:
                raise CorpusError(f"example {ex.index} contains a tab or newline")
            fh.write(f"{ex.source}\t{ex.target}\n")


def split(examples: Sequence[ParallelExample], seed: int, n_eval: int = 50, n_test: int = 50) -> DataSplit:
    """Seeded uniform sample (PCG64 permutation) of eval and test; the rest is train.

    Each part keeps file order.
    """
    n = len(examples)
    if n_eval < 0 or n_test < 0 or n_eval + n_test >= n:
        raise CorpusError(f"cannot take {n_eval} eval + {n_test} test from {n} examples")
    perm = np.random.Generator(np.random.PCG64(seed)).permutation(n)
    ev = sorted(perm[:n_eval])
    te = sorted(perm[n_eval : n_eval + n_test])
    held = set(ev) | set(te)
    return DataSplit(
        train=[examples[i] for i in range(n) if i not in held],
        eval=[examples[i] for i in ev],
        test=[examples[i] for i in te],
        seed=seed,
    )


def load_monolingual(path, max_raw_len: int = MAX_RAW_LEN, unique: bool = False) -> MonoWordCorpus:
    """Whitespace-split words, dropping any longer than ``max_raw_len``.

    Token frequencies are kept unless ``unique`` is set.
    """
    text = normalize(Path(path).read_text(encoding="utf-8"))
    words, dropped = [], 0
    seen = set()
    for w in text.split():
        if len(w) > max_raw_len:
            dropped += 1
            continue
        if unique:
            if w in seen:
                continue
            seen.add(w)
        words.append(w)
    if dropped:
        log.info("%s: dropped %d words longer than %d characters", path, dropped, max_raw_len)
    if not words:
        log.warning("%s: monolingual corpus is empty", path)
    return MonoWordCorpus(words, str(path), dropped, unique)


@dataclass
class CorpusStats:
    total: int
    multi_word: int
    source_lengths: Counter = field(default_factory=Counter)
    target_lengths: Counter = field(default_factory=Counter)

    @property
    def multi_word_fraction(self) -> float:
        return self.multi_word / self.total if self.total else 0.0

    def render(self) -> str:
        lines = [
            f"examples\t{self.total}",
            f"multi_word\t{self.multi_word}",
            f"multi_word_fraction\t{self.multi_word_fraction:.4f}",
            "length\tsource\ttarget",
        ]
        lengths = sorted(set(self.source_lengths) | set(self.target_lengths))
        for n in lengths:
            lines.append(f"{n}\t{self.source_lengths[n]}\t{self.target_lengths[n]}")
        return "\n".join(lines) + "\n"


def stats(examples: Sequence[ParallelExample]) -> CorpusStats:
    multi = sum(1 for ex in examples if " " in ex.source or " " in ex.target)
    return CorpusStats(
        total=len(examples),
        multi_word=multi,
        source_lengths=Counter(len(ex.source) for ex in examples),
        target_lengths=Counter(len(ex.target) for ex in examples),
    )
