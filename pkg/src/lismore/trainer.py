"""Single-example training loop with Adam and a linear warmup / linear decay schedule."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterator, Optional

import numpy as np

from .autograd import Tape
from .metrics import char_bleu_corpus
from .model import Transformer
from .seeding import derive_seed

log = logging.getLogger(__name__)


class TrainingDiverged(RuntimeError):
    """Non-finite loss; ``best`` holds the last good checkpoint."""

    def __init__(self, message: str, best: "CheckpointRecord", history: list):
        super().__init__(message)
        self.best = best
        self.history = history


@dataclass(frozen=True)
class OptimizerConfig:
    peak_lr: float = 5e-4
    warmup_updates: int = 4000
    max_updates: int = 100_000
    beta1: float = 0.9
    beta2: float = 0.98
    epsilon: float = 1e-6
    weight_decay: float = 0.0
    clip_norm: float = 1.0  # <= 0 disables clipping

    def __post_init__(self):
        if self.max_updates > 0 and not 0 <= self.warmup_updates < self.max_updates:
            raise ValueError(f"warmup_updates ({self.warmup_updates}) must be below max_updates ({self.max_updates})")
        if self.peak_lr <= 0 or self.epsilon <= 0:
            raise ValueError("peak_lr and epsilon must be positive")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("betas must lie in [0, 1)")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be non-negative")


def lr_at(step: int, cfg: OptimizerConfig) -> float:
    if not 0 <= step <= cfg.max_updates:
        raise ValueError(f"step {step} outside [0, {cfg.max_updates}]")
    if step <= cfg.warmup_updates:
        return cfg.peak_lr * step / cfg.warmup_updates if cfg.warmup_updates else cfg.peak_lr
    return cfg.peak_lr * (cfg.max_updates - step) / (cfg.max_updates - cfg.warmup_updates)


@dataclass
class OptimizerState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    t: int = 0


def adam_step(params: dict, grads: dict, state: OptimizerState, lr: float, cfg: OptimizerConfig) -> None:
    """Bias-corrected Adam, updating ``params`` (name -> ndarray) in place."""
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(f"non-finite gradient for parameter {name!r}")
    state.t += 1
    t = state.t
    b1, b2 = cfg.beta1, cfg.beta2
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            g = np.zeros_like(p)
        if g.shape != p.shape:
            raise ValueError(f"gradient shape {g.shape} != parameter shape {p.shape} for {name!r}")
        if cfg.weight_decay:
            g = g + cfg.weight_decay * p
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        v = state.v[name]
        m *= b1
        m += (1 - b1) * g
        v *= b2
        v += (1 - b2) * g * g
        m_hat = m / (1 - b1**t)
        v_hat = v / (1 - b2**t)
        p -= lr * m_hat / (np.sqrt(v_hat) + cfg.epsilon)


def clip_grad_norm(grads: dict, max_norm: float) -> float:
    total = math.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
    if max_norm > 0 and total > max_norm:
        scale = max_norm / (total + 1e-12)
        for g in grads.values():
            g *= scale
    return total


@dataclass
class CheckpointRecord:
    epoch: int
    updates: int
    metric: float
    model: Transformer


@dataclass
class HistoryRow:
    epoch: int
    updates: int
    train_loss: float
    eval_metric: float

    def to_tsv(self) -> str:
        return f"{self.epoch}\t{self.updates}\t{self.train_loss:.6f}\t{self.eval_metric:.6f}"


def write_history(rows, path) -> None:
    Path(path).write_text("".join(r.to_tsv() + "\n" for r in rows), encoding="utf-8")


def _better(new: float, old: float, higher: bool) -> bool:
    return new > old if higher else new < old


def train(
    model: Transformer,
    stream: Iterator[tuple],
    opt_cfg: OptimizerConfig,
    eval_fn: Callable[[Transformer], float],
    epoch_size: int,
    higher_is_better: bool = True,
    seed: int = 0,
    on_epoch: Optional[Callable[[HistoryRow], None]] = None,
) -> tuple[CheckpointRecord, list[HistoryRow]]:
    """Run exactly ``opt_cfg.max_updates`` single-example updates.

    The model is evaluated before training (epoch 0), after every
    ``epoch_size`` updates, and after a trailing partial epoch. The best
    snapshot wins on ``eval_fn``; ties keep the earlier epoch.
    """
    if epoch_size <= 0:
        raise ValueError("epoch_size must be positive")
    dropout_rng = np.random.Generator(np.random.PCG64(seed))
    state = OptimizerState()
    names = list(model.params)
    arrays = {n: model.params[n].data for n in names}

    score0 = eval_fn(model)
    history = [HistoryRow(0, 0, float("nan"), score0)]
    best = CheckpointRecord(0, 0, score0, model.copy())
    if on_epoch:
        on_epoch(history[-1])
    epoch, losses = 0, []
    started = time.time()
    model.zero_grad()
    for step in range(1, opt_cfg.max_updates + 1):
        src, tgt = next(stream)
        with Tape() as tape:
            loss = model.loss(src, tgt, dropout_rng)
        value = loss.item()
        if not math.isfinite(value):
            tape.clear()
            raise TrainingDiverged(f"non-finite loss at update {step}", best, history)
        tape.backward(loss)
        tape.clear()
        grads = {n: model.params[n].grad for n in names if model.params[n].grad is not None}
        clip_grad_norm(grads, opt_cfg.clip_norm)
        adam_step(arrays, grads, state, lr_at(step, opt_cfg), opt_cfg)
        model.zero_grad()
        losses.append(value)
        if step % epoch_size == 0 or step == opt_cfg.max_updates:
            epoch += 1
            metric = eval_fn(model)
            row = HistoryRow(epoch, step, float(np.mean(losses)), metric)
            history.append(row)
            losses = []
            if _better(metric, best.metric, higher_is_better):
                best = CheckpointRecord(epoch, step, metric, model.copy())
            log.info(
                "epoch %d | updates %d | loss %.4f | eval %.4f | %.0fs",
                epoch, step, row.train_loss, metric, time.time() - started,
            )
            if on_epoch:
                on_epoch(row)
    return best, history


def cycle_pairs(pairs: list, seed: int) -> Iterator[tuple]:
    """Endless reshuffled passes over encoded (source, target) pairs."""
    if not pairs:
        raise ValueError("no training pairs")
    epoch = 0
    while True:
        rng = np.random.Generator(np.random.PCG64(derive_seed(seed, f"shuffle:{epoch}")))
        for i in rng.permutation(len(pairs)):
            yield pairs[i]
        epoch += 1


def finetune(
    model: Transformer,
    vocab,
    train_examples,
    eval_examples,
    opt_cfg: OptimizerConfig,
    seed: int = 0,
    decode: Optional[Callable] = None,
    on_epoch=None,
) -> tuple[CheckpointRecord, list[HistoryRow]]:
    """Train on parallel pairs from (pre)trained weights, selecting by eval char BLEU."""
    # eval words may contain unseen characters; those encode as UNK
    missing = vocab.missing(t for ex in train_examples for t in (ex.source, ex.target))
    if missing:
        raise ValueError(f"vocabulary is missing characters: {' '.join(repr(c) for c in missing)}")
    if len(vocab) != model.config.vocab_size:
        raise ValueError(f"vocabulary size {len(vocab)} != model vocab_size {model.config.vocab_size}")
    pairs = [(vocab.encode(ex.source), vocab.encode(ex.target)) for ex in train_examples]
    decode = decode or (lambda m, ids: m.beam_decode(ids))

    def eval_bleu(m: Transformer) -> float:
        hyps = [vocab.decode(decode(m, vocab.encode(ex.source))) for ex in eval_examples]
        return char_bleu_corpus(hyps, [ex.target for ex in eval_examples]).score

    return train(
        model,
        cycle_pairs(pairs, derive_seed(seed, "shuffle")),
        opt_cfg,
        eval_bleu,
        epoch_size=len(pairs),
        seed=derive_seed(seed, "dropout"),
        on_epoch=on_epoch,
    )
