"""Character-span infilling corruption for denoising pretraining on single words."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Iterator, Sequence

import numpy as np

from .corpus import MonoWordCorpus
from .seeding import derive_seed
from .tokenizer import MASK, Vocabulary


@dataclass(frozen=True)
class NoiseConfig:
    mask_ratio: float = 0.3
    mean_span: float = 3.0
    delete_prob: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.mask_ratio <= 1.0:
            raise ValueError(f"mask_ratio must be in [0, 1], got {self.mask_ratio}")
        if not 0.0 <= self.delete_prob <= 1.0:
            raise ValueError(f"delete_prob must be in [0, 1], got {self.delete_prob}")
        if not self.mean_span >= 1.0:
            raise ValueError(f"mean_span must be >= 1, got {self.mean_span}")

    def to_dict(self) -> dict:
        return asdict(self)


def _span_lengths(total: int, mean_span: float, rng: np.random.Generator) -> list[int]:
    """Geometric span lengths (support >= 1, mean ``mean_span``) summing to ``total``."""
    if total == 0:
        return []
    if math.isinf(mean_span):
        return [total]
    spans = []
    remaining = total
    while remaining > 0:
        n = min(int(rng.geometric(1.0 / mean_span)), remaining)
        spans.append(n)
        remaining -= n
    return spans


def corrupt(word_ids: Sequence[int], cfg: NoiseConfig, rng: np.random.Generator) -> tuple[list[int], list[int]]:
    """Corrupt the interior of a BOS...EOS word; return ``(noisy, clean)``.

    The number of corrupted characters is ``mask_ratio * n`` with stochastic
    rounding, so its expectation is exact. Spans are placed in distinct gaps
    between kept characters, so two spans never touch. Each span becomes one
    MASK token, or disappears with probability ``delete_prob``.
    """
    clean = list(word_ids)
    interior = clean[1:-1]
    n = len(interior)
    if n == 0 or cfg.mask_ratio == 0.0:
        return list(clean), clean
    target = cfg.mask_ratio * n
    k = int(math.floor(target))
    if rng.random() < target - k:
        k += 1
    k = min(k, n)
    if k == 0:
        return list(clean), clean
    spans = _span_lengths(k, cfg.mean_span, rng)
    kept = n - k
    gaps = kept + 1
    if len(spans) > gaps:
        # too many spans to keep them apart: merge the overflow into the last slot
        spans = spans[: gaps - 1] + [sum(spans[gaps - 1 :])]
    rng.shuffle(spans)
    chosen = np.sort(rng.choice(gaps, size=len(spans), replace=False))
    span_at = dict(zip(chosen.tolist(), spans))
    noisy = [clean[0]]
    pos = 0
    for gap in range(gaps):
        if gap in span_at:
            if rng.random() >= cfg.delete_prob:
                noisy.append(MASK)
            pos += span_at[gap]
        if gap < kept:
            noisy.append(interior[pos])
            pos += 1
    noisy.append(clean[-1])
    return noisy, clean


def corrupted_count(noisy: Sequence[int], clean: Sequence[int]) -> int:
    """Characters removed or hidden, for ``delete_prob == 0`` outputs."""
    kept = sum(1 for t in noisy[1:-1] if t != MASK)
    return (len(clean) - 2) - kept


def make_pretrain_stream(
    corpus: MonoWordCorpus, vocab: Vocabulary, cfg: NoiseConfig, seed: int
) -> Iterator[tuple[list[int], list[int]]]:
    """Endless (noisy, clean) pairs, one word per item.

    Each epoch is a fresh permutation drawn from ``(seed, epoch)``; the noise
    stream has its own generator.
    """
    if len(corpus) == 0:
        raise ValueError("cannot pretrain on an empty corpus")
    encoded = [vocab.encode(w) for w in corpus.words]
    noise_rng = np.random.Generator(np.random.PCG64(derive_seed(seed, "noise")))
    epoch = 0
    while True:
        perm = np.random.Generator(np.random.PCG64(derive_seed(seed, f"shuffle:{epoch}"))).permutation(len(encoded))
        for i in perm:
            yield corrupt(encoded[i], cfg, noise_rng)
        epoch += 1
