import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lismore.corpus import MonoWordCorpus
from lismore.noising import NoiseConfig, corrupt, corrupted_count, make_pretrain_stream
from lismore.tokenizer import BOS, EOS, MASK, build_vocab


def word(n, rng):
    return [BOS, *rng.integers(5, 30, n).tolist(), EOS]


def is_subsequence(short, long):
    it = iter(long)
    return all(t in it for t in short)


def test_zero_ratio_is_identity():
    rng = np.random.default_rng(0)
    cfg = NoiseConfig(mask_ratio=0.0)
    for _ in range(1000):
        w = word(int(rng.integers(0, 21)), rng)
        noisy, clean = corrupt(w, cfg, rng)
        assert noisy == w and clean == w


def test_full_corruption():
    rng = np.random.default_rng(0)
    cfg = NoiseConfig(mask_ratio=1.0, mean_span=math.inf)
    assert corrupt([BOS, 5, 6, 7, EOS], cfg, rng)[0] == [BOS, MASK, EOS]


def test_mean_corrupted_characters():
    rng = np.random.default_rng(123)
    cfg = NoiseConfig(mask_ratio=0.3)
    counts = [corrupted_count(*corrupt(word(10, rng), cfg, rng)) for _ in range(10_000)]
    assert abs(np.mean(counts) - 3.0) <= 0.1


@settings(max_examples=200, deadline=None)
@given(n=st.integers(0, 20), ratio=st.floats(0, 1), span=st.floats(1, 8), seed=st.integers(0, 2**32))
def test_subsequence_and_clean_identity(n, ratio, span, seed):
    rng = np.random.default_rng(seed)
    w = word(n, rng)
    noisy, clean = corrupt(w, NoiseConfig(mask_ratio=ratio, mean_span=span), rng)
    assert clean == w
    assert len(noisy) <= len(clean)
    assert is_subsequence([t for t in noisy if t != MASK], clean)
    # spans never touch
    assert all(not (a == MASK and b == MASK) for a, b in zip(noisy, noisy[1:]))


def test_deletion_drops_masks():
    rng = np.random.default_rng(0)
    noisy, _ = corrupt([BOS, *range(5, 15), EOS], NoiseConfig(mask_ratio=0.5, delete_prob=1.0), rng)
    assert MASK not in noisy and len(noisy) == 7


def test_corrupt_is_deterministic():
    w = [BOS, *range(5, 17), EOS]
    cfg = NoiseConfig()
    a = [corrupt(w, cfg, np.random.default_rng(s))[0] for s in range(20)]
    b = [corrupt(w, cfg, np.random.default_rng(s))[0] for s in range(20)]
    assert a == b and len({tuple(x) for x in a}) > 1


def test_config_validation():
    with pytest.raises(ValueError):
        NoiseConfig(mask_ratio=1.5)
    with pytest.raises(ValueError):
        NoiseConfig(mean_span=0.5)
    with pytest.raises(ValueError):
        NoiseConfig(delete_prob=-0.1)


def test_stream():
    vocab = build_vocab(["tréan"])
    one = MonoWordCorpus(["tréan"])
    items = list(itertools.islice(make_pretrain_stream(one, vocab, NoiseConfig(), 5), 30))
    assert all(clean == vocab.encode("tréan") for _, clean in items)
    assert len({tuple(noisy) for noisy, _ in items}) > 1

    corpus = MonoWordCorpus(["an", "cù", "mòr", "tréan", "bhith"])
    vocab = build_vocab(corpus.words)
    first = lambda: list(itertools.islice(make_pretrain_stream(corpus, vocab, NoiseConfig(), 9), 23))
    assert first() == first()
    # each epoch visits every word once
    epoch = [c for _, c in first()[:5]]
    assert sorted(map(tuple, epoch)) == sorted(tuple(vocab.encode(w)) for w in corpus.words)

    with pytest.raises(ValueError):
        next(make_pretrain_stream(MonoWordCorpus([]), vocab, NoiseConfig(), 0))


def test_epoch_arithmetic():
    assert round(100_000 / 1862, 1) == 53.7
