"""Character vocabulary with reserved special ids."""

from __future__ import annotations

import unicodedata
from pathlib import Path
from typing import Iterable, Sequence

PAD, BOS, EOS, UNK, MASK = 0, 1, 2, 3, 4
SPECIALS = ("<pad>", "<s>", "</s>", "[UNK]", "<mask>")
MAX_RAW_LEN = 20


class SequenceTooLong(ValueError):
    pass


def normalize(text: str) -> str:
    """Canonical composition (NFC); leftover combining marks stay separate characters."""
    return unicodedata.normalize("NFC", text)


class Vocabulary:
    """Ordered character -> id map. Ids 0-4 are the specials, characters follow."""

    def __init__(self, chars: Sequence[str]):
        self.chars = list(chars)
        if len(set(self.chars)) != len(self.chars):
            raise ValueError("duplicate characters in vocabulary")
        self.index = {c: i + len(SPECIALS) for i, c in enumerate(self.chars)}

    def __len__(self) -> int:
        return len(SPECIALS) + len(self.chars)

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocabulary) and self.chars == other.chars

    def __contains__(self, char: str) -> bool:
        return char in self.index

    def __repr__(self) -> str:
        return f"Vocabulary(size={len(self)})"

    def token(self, i: int) -> str:
        if not 0 <= i < len(self):
            raise IndexError(f"token id {i} outside vocabulary of size {len(self)}")
        return SPECIALS[i] if i < len(SPECIALS) else self.chars[i - len(SPECIALS)]

    def missing(self, texts: Iterable[str]) -> list[str]:
        """Characters in ``texts`` that have no id, in first-seen order."""
        seen = {}
        for t in texts:
            for c in normalize(t):
                if c not in self.index:
                    seen.setdefault(c, None)
        return list(seen)

    def encode(self, word: str, max_raw_len: int = MAX_RAW_LEN) -> list[int]:
        return encode(self, word, max_raw_len)

    def decode(self, ids: Iterable[int]) -> str:
        return decode(self, ids)

    def save(self, path) -> None:
        lines = []
        for i in range(len(self)):
            tok = self.token(i)
            lines.append(f"{i}\t{' '.join(f'{ord(c):04X}' for c in tok)}")
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "Vocabulary":
        chars = []
        for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
            if not line:
                continue
            try:
                idx, hexes = line.split("\t")
                tok = "".join(chr(int(h, 16)) for h in hexes.split())
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: malformed vocabulary line {line!r}") from exc
            if int(idx) != lineno - 1:
                raise ValueError(f"{path}:{lineno}: ids must be contiguous from 0, got {idx}")
            if int(idx) < len(SPECIALS):
                if tok != SPECIALS[int(idx)]:
                    raise ValueError(f"{path}:{lineno}: expected special {SPECIALS[int(idx)]!r}, got {tok!r}")
            else:
                chars.append(tok)
        return cls(chars)


def build_vocab(corpora: Iterable[str]) -> Vocabulary:
    """Collect characters in first-occurrence order after normalization."""
    seen: dict[str, None] = {}
    nonempty = False
    for text in corpora:
        text = normalize(text)
        nonempty = nonempty or bool(text)
        for c in text:
            seen.setdefault(c, None)
    if not nonempty:
        raise ValueError("cannot build a vocabulary from empty corpora")
    return Vocabulary(list(seen))


def encode(vocab: Vocabulary, word: str, max_raw_len: int = MAX_RAW_LEN) -> list[int]:
    word = normalize(word)
    if len(word) > max_raw_len:
        raise SequenceTooLong(f"{word!r} has {len(word)} characters, limit is {max_raw_len}")
    return [BOS] + [vocab.index.get(c, UNK) for c in word] + [EOS]


def decode(vocab: Vocabulary, ids: Iterable[int]) -> str:
    out = []
    for i in ids:
        i = int(i)
        tok = vocab.token(i)
        if i in (PAD, BOS, EOS):
            continue
        out.append(tok)
    return "".join(out)
