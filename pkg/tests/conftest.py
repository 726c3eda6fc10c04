import numpy as np
import pytest

from lismore.corpus import ParallelExample
from lismore.model import Transformer, preset
from lismore.tokenizer import build_vocab

TOY_PAIRS = [
    ("trane", "tréan"), ("hest", "theist"), ("zramm", "dhream"), ("weit", "bhith"),
    ("dwgis i", "dtugas-sa"), ("eflay", "a' phláigh"), ("fean", "phéin"), ("gawe", "gabh"),
    ("di", "do"), ("za", "dhá"), ("grawġ", "grádh"), ("wēniᵗ", "bhean"), ("ne", "ní"),
    ("wlli", "bhfuil"), ("in", "an"), ("teak", "t-éag"), ("mir", "mar"), ("der", "deir"),
    ("zonicht", "dhona"), ("chotly", "chodlas"),
]


@pytest.fixture
def toy_examples():
    return [ParallelExample(s, t, i) for i, (s, t) in enumerate(TOY_PAIRS)]


@pytest.fixture
def toy_vocab(toy_examples):
    return build_vocab(t for ex in toy_examples for t in (ex.source, ex.target))


def random_model(vocab_size=12, seed=0, scale=0.3, **overrides):
    """Tiny model with enlarged random weights so gradients are not negligible."""
    cfg = preset("tiny", vocab_size, dropout=0.0, **overrides)
    model = Transformer(cfg, seed=seed)
    rng = np.random.default_rng(seed + 1000)
    for p in model.params.values():
        if p.data.ndim == 2:
            p.data[:] = rng.normal(0, scale, p.shape)
        else:
            p.data[:] += rng.normal(0, 0.1, p.shape)
    return model


# acceptance lines, echoed in the terminal summary so they survive output capture
ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
