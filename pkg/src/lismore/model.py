"""Pre-LN encoder-decoder transformer over character ids.

Token embeddings are shared by the encoder input, the decoder input and the
output projection. Positions use learned embeddings, one table per side.
Sequences are unbatched: every forward pass handles a single (source, target)
pair, matching the batch size of 1 used throughout training.
"""

from __future__ import annotations

import hashlib
import json
import math
import struct
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import autograd as ag
from .autograd import Tensor
from .tokenizer import BOS, EOS, MAX_RAW_LEN, PAD, Vocabulary

NEG_INF = -np.inf
FORMAT_VERSION = 1
MAGIC = b"LSMRCKPT"


@dataclass(frozen=True)
class ModelConfig:
    num_layers: int = 2
    num_heads: int = 2
    embed_dim: int = 64
    ffn_dim: int = 256
    vocab_size: int = 0
    max_positions: int = MAX_RAW_LEN + 2
    dropout: float = 0.1

    def validate(self) -> None:
        if self.vocab_size <= 0:
            raise ValueError(f"vocab_size must be positive, got {self.vocab_size}")
        if min(self.num_layers, self.num_heads, self.embed_dim, self.ffn_dim) <= 0:
            raise ValueError(f"layer sizes must be positive: {self}")
        if self.embed_dim % self.num_heads:
            raise ValueError(f"embed_dim {self.embed_dim} not divisible by num_heads {self.num_heads}")
        if self.max_positions < MAX_RAW_LEN + 2:
            raise ValueError(f"max_positions must be at least {MAX_RAW_LEN + 2}")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError(f"dropout must be in [0, 1), got {self.dropout}")

    @property
    def head_dim(self) -> int:
        return self.embed_dim // self.num_heads


PRESETS = {
    "tiny": dict(num_layers=2, num_heads=2, embed_dim=64, ffn_dim=256),
    "base": dict(num_layers=6, num_heads=12, embed_dim=768, ffn_dim=3072),
}


def preset(name: str, vocab_size: int, **overrides) -> ModelConfig:
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    return ModelConfig(vocab_size=vocab_size, **{**PRESETS[name], **overrides})


def _attn_shapes(prefix: str, d: int) -> list[tuple[str, tuple]]:
    out = []
    for p in ("q", "k", "v", "o"):
        out += [(f"{prefix}.{p}_w", (d, d)), (f"{prefix}.{p}_b", (d,))]
    return out


def _ln_shapes(prefix: str, d: int) -> list[tuple[str, tuple]]:
    return [(f"{prefix}.gain", (d,)), (f"{prefix}.bias", (d,))]


def _ffn_shapes(prefix: str, d: int, f: int) -> list[tuple[str, tuple]]:
    return [(f"{prefix}.w1", (d, f)), (f"{prefix}.b1", (f,)), (f"{prefix}.w2", (f, d)), (f"{prefix}.b2", (d,))]


def param_shapes(cfg: ModelConfig) -> list[tuple[str, tuple]]:
    """Every learned array in checkpoint order. Shapes depend on ``cfg`` only."""
    cfg.validate()
    d, f, P = cfg.embed_dim, cfg.ffn_dim, cfg.max_positions
    shapes = [("embed.tokens", (cfg.vocab_size, d)), ("enc.positions", (P, d)), ("dec.positions", (P, d))]
    for i in range(cfg.num_layers):
        p = f"enc.{i}"
        shapes += _ln_shapes(f"{p}.ln_attn", d) + _attn_shapes(f"{p}.self", d)
        shapes += _ln_shapes(f"{p}.ln_ffn", d) + _ffn_shapes(f"{p}.ffn", d, f)
    shapes += _ln_shapes("enc.ln_final", d)
    for i in range(cfg.num_layers):
        p = f"dec.{i}"
        shapes += _ln_shapes(f"{p}.ln_self", d) + _attn_shapes(f"{p}.self", d)
        shapes += _ln_shapes(f"{p}.ln_cross", d) + _attn_shapes(f"{p}.cross", d)
        shapes += _ln_shapes(f"{p}.ln_ffn", d) + _ffn_shapes(f"{p}.ffn", d, f)
    shapes += _ln_shapes("dec.ln_final", d)
    return shapes


def count_params(cfg: ModelConfig) -> int:
    return sum(int(np.prod(s)) for _, s in param_shapes(cfg))


def init_params(cfg: ModelConfig, rng: np.random.Generator) -> dict[str, Tensor]:
    """N(0, 0.02) for matrices and embeddings, zeros for biases, ones for LN gains."""
    params = {}
    for name, shape in param_shapes(cfg):
        if name.endswith(".gain"):
            data = np.ones(shape)
        elif len(shape) == 1:
            data = np.zeros(shape)
        else:
            data = rng.normal(0.0, 0.02, size=shape)
        params[name] = Tensor(data, requires_grad=True, name=name)
    return params


def causal_mask(n: int) -> np.ndarray:
    """Additive mask: position i may attend to j <= i."""
    return np.triu(np.full((n, n), NEG_INF), k=1)


def padding_mask(ids: Sequence[int]) -> np.ndarray:
    """Additive key mask of shape (1, len) hiding PAD positions."""
    ids = np.asarray(ids)
    return np.where(ids == PAD, NEG_INF, 0.0)[None, :]


class Transformer:
    def __init__(self, config: ModelConfig, params: Optional[dict] = None, seed: int = 0):
        config.validate()
        self.config = config
        self.params = params if params is not None else init_params(config, np.random.default_rng(seed))
        expected = param_shapes(config)
        if [n for n, _ in expected] != list(self.params):
            raise ValueError("parameter names do not match the configuration")
        for name, shape in expected:
            if self.params[name].shape != shape:
                raise ValueError(f"{name}: shape {self.params[name].shape} != expected {shape}")

    def parameters(self) -> list[Tensor]:
        return list(self.params.values())

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.zero_grad()

    def num_params(self) -> int:
        return sum(p.data.size for p in self.params.values())

    def copy(self) -> "Transformer":
        fresh = {k: Tensor(v.data.copy(), requires_grad=True, name=k) for k, v in self.params.items()}
        return Transformer(self.config, fresh)

    # building blocks

    def _ln(self, name: str, x: Tensor) -> Tensor:
        return ag.layer_norm(x, self.params[f"{name}.gain"], self.params[f"{name}.bias"])

    def _linear(self, x: Tensor, w: str, b: str) -> Tensor:
        return x @ self.params[w] + self.params[b]

    def _attention(self, name: str, xq: Tensor, xkv: Tensor, mask: np.ndarray) -> Tensor:
        cfg = self.config
        h, dh = cfg.num_heads, cfg.head_dim
        lq, lk = xq.shape[0], xkv.shape[0]
        q = self._linear(xq, f"{name}.q_w", f"{name}.q_b").reshape(lq, h, dh).transpose(1, 0, 2)
        k = self._linear(xkv, f"{name}.k_w", f"{name}.k_b").reshape(lk, h, dh).transpose(1, 2, 0)
        v = self._linear(xkv, f"{name}.v_w", f"{name}.v_b").reshape(lk, h, dh).transpose(1, 0, 2)
        scores = (q @ k) * (1.0 / math.sqrt(dh)) + mask
        ctx = ag.softmax(scores, axis=-1) @ v
        ctx = ctx.transpose(1, 0, 2).reshape(lq, cfg.embed_dim)
        return self._linear(ctx, f"{name}.o_w", f"{name}.o_b")

    def _ffn(self, name: str, x: Tensor) -> Tensor:
        hidden = ag.gelu(self._linear(x, f"{name}.w1", f"{name}.b1"))
        return self._linear(hidden, f"{name}.w2", f"{name}.b2")

    def _embed(self, ids: np.ndarray, positions: str, rng) -> Tensor:
        x = ag.embedding_lookup(self.params["embed.tokens"], ids)
        x = x + self.params[positions][: len(ids)]
        return ag.dropout(x, self.config.dropout, rng)

    def _check_ids(self, ids: np.ndarray, what: str) -> None:
        if len(ids) > self.config.max_positions:
            raise ValueError(f"{what} length {len(ids)} exceeds max_positions {self.config.max_positions}")
        if len(ids) and (ids.min() < 0 or ids.max() >= self.config.vocab_size):
            raise IndexError(f"{what} contains ids outside vocabulary of size {self.config.vocab_size}")

    # public

    def encode(self, source_ids: Sequence[int], rng=None) -> tuple[Tensor, np.ndarray]:
        src = np.asarray(source_ids, dtype=np.int64)
        self._check_ids(src, "source")
        if len(src) == 0:
            raise ValueError("empty source sequence")
        pad = padding_mask(src)
        x = self._embed(src, "enc.positions", rng)
        p = self.config.dropout
        for i in range(self.config.num_layers):
            n = f"enc.{i}"
            h = self._ln(f"{n}.ln_attn", x)
            x = x + ag.dropout(self._attention(f"{n}.self", h, h, pad), p, rng)
            x = x + ag.dropout(self._ffn(f"{n}.ffn", self._ln(f"{n}.ln_ffn", x)), p, rng)
        return self._ln("enc.ln_final", x), pad

    def decode_step(self, memory: Tensor, src_pad: np.ndarray, target_in: Sequence[int], rng=None) -> Tensor:
        """Logits (len(target_in) x V) given encoder output ``memory``."""
        tgt = np.asarray(target_in, dtype=np.int64)
        self._check_ids(tgt, "target")
        n = len(tgt)
        self_mask = causal_mask(n) + padding_mask(tgt)
        x = self._embed(tgt, "dec.positions", rng)
        p = self.config.dropout
        for i in range(self.config.num_layers):
            name = f"dec.{i}"
            h = self._ln(f"{name}.ln_self", x)
            x = x + ag.dropout(self._attention(f"{name}.self", h, h, self_mask), p, rng)
            h = self._ln(f"{name}.ln_cross", x)
            x = x + ag.dropout(self._attention(f"{name}.cross", h, memory, src_pad), p, rng)
            x = x + ag.dropout(self._ffn(f"{name}.ffn", self._ln(f"{name}.ln_ffn", x)), p, rng)
        x = self._ln("dec.ln_final", x)
        return x @ self.params["embed.tokens"].T

    def forward(self, source_ids: Sequence[int], target_in: Sequence[int], rng=None) -> Tensor:
        """Next-token logits for every position of the shifted target.

        Passing ``rng`` enables dropout (training mode).
        """
        memory, pad = self.encode(source_ids, rng)
        return self.decode_step(memory, pad, target_in, rng)

    def loss(self, source_ids: Sequence[int], target_ids: Sequence[int], rng=None) -> Tensor:
        """Token cross-entropy of a BOS...EOS target under teacher forcing."""
        target_ids = list(target_ids)
        logits = self.forward(source_ids, target_ids[:-1], rng)
        return ag.cross_entropy(logits, target_ids[1:], ignore_id=PAD)

    def _next_logprobs(self, memory, pad, prefix) -> np.ndarray:
        logits = self.decode_step(memory, pad, prefix).data[-1]
        z = logits - logits.max()
        return z - np.log(np.exp(z).sum())

    def greedy_decode(self, source_ids: Sequence[int], max_len: int = MAX_RAW_LEN + 1) -> list[int]:
        """Argmax decoding from BOS; ties go to the lowest id. EOS is not returned."""
        self._check_max_len(max_len)
        memory, pad = self.encode(source_ids)
        out = [BOS]
        for _ in range(max_len):
            tok = int(np.argmax(self._next_logprobs(memory, pad, out)))
            if tok == EOS:
                break
            out.append(tok)
        return out[1:]

    def beam_decode(
        self,
        source_ids: Sequence[int],
        beam_width: int = 5,
        max_len: int = MAX_RAW_LEN + 1,
        length_penalty: float = 1.0,
    ) -> list[int]:
        """Beam search returning the best finished hypothesis (EOS stripped).

        Hypotheses are ranked by ``sum(logp) / len**length_penalty`` with the
        length counting the EOS token. Hypotheses still open after ``max_len``
        steps are finished as-is.
        """
        if beam_width < 1:
            raise ValueError("beam_width must be >= 1")
        self._check_max_len(max_len)
        memory, pad = self.encode(source_ids)
        live = [([BOS], 0.0)]
        # (tokens without BOS/EOS, summed logp, scored length)
        finished: list[tuple[list[int], float, int]] = []
        for _ in range(max_len):
            step = np.stack([self._next_logprobs(memory, pad, seq) for seq, _ in live])
            cum = step + np.array([lp for _, lp in live])[:, None]
            V = step.shape[1]
            # primary key: cumulative score; floating-point ties fall back to the
            # step log-prob, then to hypothesis order and lowest token id
            order = np.lexsort((-step.reshape(-1), -cum.reshape(-1)))[:beam_width]
            nxt = []
            for j in order:
                seq, _ = live[j // V]
                tok = int(j % V)
                score = float(cum.reshape(-1)[j])
                if tok == EOS:
                    finished.append((seq[1:], score, len(seq)))
                else:
                    nxt.append((seq + [tok], score))
            live = nxt
            if not live or len(finished) >= beam_width:
                break
        else:
            finished.extend((seq[1:], lp, len(seq) - 1) for seq, lp in live)

        def normalized(item):
            _, lp, n = item
            return lp / n**length_penalty if length_penalty else lp

        return max(finished, key=normalized)[0]

    def _check_max_len(self, max_len: int) -> None:
        if max_len < 1 or max_len + 1 > self.config.max_positions:
            raise ValueError(f"max_len {max_len} must be in [1, {self.config.max_positions - 1}]")

    # persistence

    def save(self, path, vocab: Vocabulary, meta: Optional[dict] = None) -> None:
        save_checkpoint(path, self, vocab, meta)


def save_checkpoint(path, model: Transformer, vocab: Vocabulary, meta: Optional[dict] = None) -> None:
    """Write a checkpoint.

    Layout: 8-byte magic, little-endian uint32 header length, UTF-8 JSON header
    (format version, config, vocabulary characters, parameter names and
    shapes, free-form meta), then every parameter as little-endian float64 in
    header order. Identical weights give identical bytes on every platform.
    """
    if len(vocab) != model.config.vocab_size:
        raise ValueError(f"vocabulary size {len(vocab)} != model vocab_size {model.config.vocab_size}")
    header = {
        "format_version": FORMAT_VERSION,
        "config": asdict(model.config),
        "vocab": vocab.chars,
        "params": [[name, list(p.shape)] for name, p in model.params.items()],
        "meta": meta or {},
    }
    blob = json.dumps(header, sort_keys=True, ensure_ascii=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for p in model.params.values():
            fh.write(p.data.astype("<f8").tobytes(order="C"))


def load_checkpoint(path) -> tuple[Transformer, Vocabulary, dict]:
    raw = Path(path).read_bytes()
    if raw[: len(MAGIC)] != MAGIC:
        raise ValueError(f"{path}: not a checkpoint file")
    off = len(MAGIC)
    (hlen,) = struct.unpack("<I", raw[off : off + 4])
    off += 4
    header = json.loads(raw[off : off + hlen].decode("utf-8"))
    off += hlen
    if header["format_version"] != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {header['format_version']}")
    config = ModelConfig(**header["config"])
    params = {}
    for name, shape in header["params"]:
        n = int(np.prod(shape))
        arr = np.frombuffer(raw, dtype="<f8", count=n, offset=off).reshape(shape)
        off += 8 * n
        params[name] = Tensor(arr.astype(np.float64), requires_grad=True, name=name)
    if off != len(raw):
        raise ValueError(f"{path}: {len(raw) - off} trailing bytes")
    return Transformer(config, params), Vocabulary(header["vocab"]), header["meta"]


def weights_digest(model: Transformer) -> str:
    h = hashlib.sha256()
    for name, p in model.params.items():
        h.update(name.encode())
        h.update(p.data.astype("<f8").tobytes())
    return h.hexdigest()
