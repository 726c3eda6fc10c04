"""Flat key = value experiment configuration."""

from __future__ import annotations

import hashlib
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from .noising import NoiseConfig
from .trainer import OptimizerConfig

DIRECTIONS = ("bdl-gd", "gd-bdl")


@dataclass
class ExperimentConfig:
    direction: str = "bdl-gd"
    preset: str = "tiny"
    parallel: str = ""
    monolingual: str = ""
    lexicon: str = ""
    output_dir: str = "run"
    seed: int = 1
    n_eval: int = 50
    n_test: int = 50
    # optimizer
    peak_lr: float = 5e-4
    warmup_updates: int = 4000
    max_updates: int = 100_000
    beta1: float = 0.9
    beta2: float = 0.98
    epsilon: float = 1e-6
    weight_decay: float = 0.0
    clip_norm: float = 1.0
    # model
    dropout: float = 0.1
    ffn_dim: int = 0  # 0 keeps the preset value
    # denoising
    mask_ratio: float = 0.3
    mean_span: float = 3.0
    delete_prob: float = 0.0
    unique_words: bool = False
    pretrain_eval_words: int = 200
    # training / decoding
    epoch_size: int = 0  # 0 means one pass over the training data
    augment: bool = False
    beam_width: int = 5
    length_penalty: float = 1.0
    greedy: bool = False

    def validate(self) -> None:
        if self.direction not in DIRECTIONS:
            raise ValueError(f"direction must be one of {DIRECTIONS}, got {self.direction!r}")
        if self.beam_width < 1:
            raise ValueError("beam_width must be >= 1")
        self.optimizer()
        self.noise()

    def optimizer(self) -> OptimizerConfig:
        return OptimizerConfig(
            peak_lr=self.peak_lr,
            warmup_updates=self.warmup_updates,
            max_updates=self.max_updates,
            beta1=self.beta1,
            beta2=self.beta2,
            epsilon=self.epsilon,
            weight_decay=self.weight_decay,
            clip_norm=self.clip_norm,
        )

    def noise(self) -> NoiseConfig:
        return NoiseConfig(self.mask_ratio, self.mean_span, self.delete_prob, self.seed)

    def to_text(self) -> str:
        return "".join(f"{k} = {_fmt(v)}\n" for k, v in asdict(self).items())

    def digest(self) -> str:
        return hashlib.sha256(self.to_text().encode("utf-8")).hexdigest()

    def save(self, path) -> None:
        Path(path).write_text(self.to_text(), encoding="utf-8")

    def update(self, values: dict) -> "ExperimentConfig":
        types = {f.name: f.type for f in fields(self)}
        for key, raw in values.items():
            if key not in types:
                raise KeyError(f"unknown config key {key!r}")
            setattr(self, key, _parse(raw, getattr(ExperimentConfig, key, None), key))
        return self

    @classmethod
    def from_text(cls, text: str, origin: str = "<config>") -> "ExperimentConfig":
        values = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{origin}:{lineno}: expected 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            values[key] = value
        return cls().update(values)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        return cls.from_text(Path(path).read_text(encoding="utf-8"), str(path))


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    return repr(v) if isinstance(v, float) else str(v)


def _parse(raw, default, key):
    if not isinstance(raw, str):
        return raw
    if isinstance(default, bool):
        low = raw.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"{key}: expected a boolean, got {raw!r}")
    try:
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
    except ValueError:
        raise ValueError(f"{key}: cannot parse {raw!r}") from None
    return raw
