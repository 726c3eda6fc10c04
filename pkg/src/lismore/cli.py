"""Command-line entry point: ``lismore <command> [--config FILE] [--key value ...]``."""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import platform
import sys
from dataclasses import fields, replace
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from . import __version__
from .augment import augment, augment_reverse, parse_lexicon
from .config import ExperimentConfig
from .corpus import DataSplit, load_monolingual, load_parallel, save_parallel, split, stats
from .metrics import char_bleu_corpus, rank_worst, transliterate_sequence
from .model import Transformer, count_params, load_checkpoint, preset, save_checkpoint, weights_digest
from .noising import corrupt, make_pretrain_stream
from .orthography import validate_batch
from .seeding import derive_seed, rng_for
from .tokenizer import Vocabulary, build_vocab
from .trainer import finetune, train, write_history

log = logging.getLogger("lismore")

SEED_LABELS = ("split", "init", "shuffle", "dropout", "pretrain", "heldout")


def file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(cfg: ExperimentConfig, command: str, extra: Optional[dict] = None) -> Path:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg.save(out / "config.txt")
    inputs = {}
    for key in ("parallel", "monolingual", "lexicon"):
        path = getattr(cfg, key)
        if path and Path(path).is_file():
            inputs[key] = {"path": path, "sha256": file_digest(path)}
    manifest = {
        "command": command,
        "config": {f.name: getattr(cfg, f.name) for f in fields(cfg)},
        "config_sha256": cfg.digest(),
        "seeds": {label: derive_seed(cfg.seed, label) for label in SEED_LABELS},
        "inputs": inputs,
        "versions": {"lismore": __version__, "python": platform.python_version(), "numpy": np.__version__},
        **(extra or {}),
    }
    path = out / f"manifest.{command}.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8")
    return path


def _require(cfg: ExperimentConfig, *keys: str) -> None:
    for key in keys:
        value = getattr(cfg, key)
        if not value:
            raise UsageError(f"--{key} is required")
        if not Path(value).exists():
            raise UsageError(f"--{key}: {value} does not exist")


class UsageError(ValueError):
    pass


def make_translator(model: Transformer, vocab: Vocabulary, cfg: ExperimentConfig) -> Callable[[str], str]:
    def translate(word: str) -> str:
        ids = vocab.encode(word)
        if cfg.greedy:
            out = model.greedy_decode(ids)
        else:
            out = model.beam_decode(ids, cfg.beam_width, length_penalty=cfg.length_penalty)
        return vocab.decode(out)

    return translate


def _decoder(cfg: ExperimentConfig):
    if cfg.greedy:
        return lambda m, ids: m.greedy_decode(ids)
    return lambda m, ids: m.beam_decode(ids, cfg.beam_width, length_penalty=cfg.length_penalty)


def _model_config(cfg: ExperimentConfig, vocab_size: int):
    overrides = {"dropout": cfg.dropout}
    if cfg.ffn_dim:
        overrides["ffn_dim"] = cfg.ffn_dim
    return preset(cfg.preset, vocab_size, **overrides)


def load_split(cfg: ExperimentConfig) -> DataSplit:
    """Seeded split of the parallel file, oriented for ``cfg.direction``."""
    examples = load_parallel(cfg.parallel)
    parts = split(examples, derive_seed(cfg.seed, "split"), cfg.n_eval, cfg.n_test)
    if cfg.direction == "gd-bdl":
        parts = DataSplit(
            [e.swapped() for e in parts.train],
            [e.swapped() for e in parts.eval],
            [e.swapped() for e in parts.test],
            parts.seed,
        )
    return parts


def _on_epoch(row) -> None:
    print(f"epoch {row.epoch}\tupdates {row.updates}\ttrain_loss {row.train_loss:.4f}\teval {row.eval_metric:.4f}", flush=True)


# commands


def cmd_pretrain(cfg: ExperimentConfig) -> Path:
    _require(cfg, "monolingual")
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    corpus = load_monolingual(cfg.monolingual, unique=cfg.unique_words)
    if not corpus.words:
        raise UsageError(f"{cfg.monolingual}: no usable words")
    texts = list(corpus.words)
    if cfg.parallel:
        _require(cfg, "parallel")
        texts += [t for ex in load_parallel(cfg.parallel) for t in (ex.source, ex.target)]
    vocab = build_vocab(texts)
    model = Transformer(_model_config(cfg, len(vocab)), seed=derive_seed(cfg.seed, "init"))
    noise = cfg.noise()

    held_rng = rng_for(cfg.seed, "heldout")
    idx = held_rng.choice(len(corpus), size=min(cfg.pretrain_eval_words, len(corpus)), replace=False)
    held = [corrupt(vocab.encode(corpus.words[i]), noise, held_rng) for i in sorted(idx)]

    def recon_loss(m: Transformer) -> float:
        return float(np.mean([m.loss(noisy, clean).item() for noisy, clean in held]))

    epoch_size = cfg.epoch_size or len(corpus)
    epochs = cfg.max_updates / epoch_size
    print(f"pretraining {count_params(model.config)} parameters on {len(corpus)} words "
          f"({corpus.dropped} dropped); {cfg.max_updates} updates = {epochs:.2f} epochs", flush=True)
    if cfg.max_updates and epochs < 1:
        print("note: update budget covers less than one pass over the corpus", flush=True)
    stream = make_pretrain_stream(corpus, vocab, noise, derive_seed(cfg.seed, "pretrain"))
    best, history = train(
        model, stream, cfg.optimizer(), recon_loss, epoch_size,
        higher_is_better=False, seed=derive_seed(cfg.seed, "dropout"), on_epoch=_on_epoch,
    )
    meta = {"stage": "pretrain", "epoch": best.epoch, "updates": best.updates, "metric": best.metric}
    save_checkpoint(out / "checkpoint_best.bin", best.model, vocab, meta)
    save_checkpoint(out / "checkpoint_last.bin", model, vocab, {"stage": "pretrain", "updates": cfg.max_updates})
    vocab.save(out / "vocab.tsv")
    write_history(history, out / "history.tsv")
    write_manifest(cfg, "pretrain", {
        "outputs": {"checkpoint_best.bin": file_digest(out / "checkpoint_best.bin")},
        "parameters": count_params(model.config),
    })
    print(f"best epoch {best.epoch}: reconstruction loss {best.metric:.4f}")
    return out / "checkpoint_best.bin"


def cmd_finetune(cfg: ExperimentConfig, from_checkpoint: Optional[str] = None) -> Path:
    _require(cfg, "parallel")
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    parts = load_split(cfg)
    parts.write_manifest(out)
    train_set = parts.train
    if cfg.augment:
        _require(cfg, "lexicon")
        lex = parse_lexicon(cfg.lexicon)
        expand = augment if cfg.direction == "bdl-gd" else augment_reverse
        train_set, report = expand(train_set, lex)
        (out / "augment_report.txt").write_text(report.render(), encoding="utf-8")
        print(f"augmented training set: {report.before} -> {report.after} examples", flush=True)
    if from_checkpoint:
        model, vocab, _ = load_checkpoint(from_checkpoint)
        model = Transformer(replace(model.config, dropout=cfg.dropout), model.params)
    else:
        vocab = build_vocab(t for ex in train_set for t in (ex.source, ex.target))
        model = Transformer(_model_config(cfg, len(vocab)), seed=derive_seed(cfg.seed, "init"))
    best, history = finetune(
        model, vocab, train_set, parts.eval, cfg.optimizer(),
        seed=cfg.seed, decode=_decoder(cfg), on_epoch=_on_epoch,
    )
    meta = {"stage": "finetune", "direction": cfg.direction, "epoch": best.epoch, "updates": best.updates,
            "eval_bleu": best.metric}
    ckpt = out / "checkpoint_best.bin"
    save_checkpoint(ckpt, best.model, vocab, meta)
    vocab.save(out / "vocab.tsv")
    write_history(history, out / "history.tsv")
    write_manifest(cfg, "finetune", {
        "from_checkpoint": {"path": from_checkpoint, "sha256": file_digest(from_checkpoint)} if from_checkpoint else None,
        "train_examples": len(train_set),
        "outputs": {"checkpoint_best.bin": file_digest(ckpt), "weights_sha256": weights_digest(best.model)},
    })
    print(f"best epoch {best.epoch}: eval char BLEU {best.metric:.2f}")
    return ckpt


def cmd_evaluate(cfg: ExperimentConfig, checkpoint: str, which: str, label: str = "") -> dict:
    _require(cfg, "parallel")
    model, vocab, meta = load_checkpoint(checkpoint)
    parts = load_split(cfg)
    examples = getattr(parts, which)
    translate = make_translator(model, vocab, cfg)
    hyps = [translate(ex.source) for ex in examples]
    refs = [ex.target for ex in examples]
    plain = char_bleu_corpus(hyps, refs)
    smooth = char_bleu_corpus(hyps, refs, smooth=True)
    label = label or Path(checkpoint).parent.name or cfg.preset
    print(plain)
    print(f"{label}\t{cfg.direction}\t{which}\t{plain.score:.2f}\t{smooth.score:.2f}")
    write_manifest(cfg, "evaluate", {
        "checkpoint": {"path": checkpoint, "sha256": file_digest(checkpoint)},
        "split": which, "bleu": plain.score, "bleu_smoothed": smooth.score,
    })
    return {"bleu": plain.score, "bleu_smoothed": smooth.score, "hyps": hyps}


def cmd_translit(cfg: ExperimentConfig, checkpoint: str, lines) -> list[str]:
    model, vocab, _ = load_checkpoint(checkpoint)
    translate = make_translator(model, vocab, cfg)
    outputs = [transliterate_sequence(translate, line) for line in lines]
    for o in outputs:
        print(o)
    return outputs


def cmd_error_analysis(cfg: ExperimentConfig, checkpoint: str, k: int, which: str = "test"):
    _require(cfg, "parallel")
    model, vocab, _ = load_checkpoint(checkpoint)
    examples = getattr(load_split(cfg), which)
    report = rank_worst(make_translator(model, vocab, cfg), examples, k)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "error_analysis.tsv").write_text(report.to_tsv(), encoding="utf-8")
    print(report.to_table(), end="")
    write_manifest(cfg, "error-analysis", {"checkpoint": {"path": checkpoint, "sha256": file_digest(checkpoint)},
                                           "k": k, "split": which})
    return report


def cmd_validate(path: str):
    words = [ln.split("\t", 1)[0] for ln in Path(path).read_text(encoding="utf-8").splitlines() if ln.strip()]
    summary = validate_batch(words)
    print(summary.to_tsv(), end="")
    print(summary.summary_line(), file=sys.stderr)
    return summary


def cmd_augment(cfg: ExperimentConfig, out_path: Optional[str] = None):
    _require(cfg, "parallel", "lexicon")
    examples = load_parallel(cfg.parallel)
    lex = parse_lexicon(cfg.lexicon)
    expand = augment if cfg.direction == "bdl-gd" else augment_reverse
    oriented = examples if cfg.direction == "bdl-gd" else [e.swapped() for e in examples]
    result, report = expand(oriented, lex)
    if cfg.direction == "gd-bdl":
        result = [e.swapped() for e in result]
    if out_path:
        save_parallel(result, out_path)
    else:
        for ex in result:
            print(f"{ex.source}\t{ex.target}")
    print(report.render(), end="", file=sys.stderr)
    return result, report


def cmd_stats(cfg: ExperimentConfig):
    _require(cfg, "parallel")
    report = stats(load_parallel(cfg.parallel))
    print(report.render(), end="")
    return report


# argument parsing


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key = value config file")
    group = p.add_argument_group("config overrides")
    for f in fields(ExperimentConfig):
        group.add_argument(f"--{f.name}", dest=f"cfg_{f.name}", metavar=f.name.upper(), default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lismore", description="Character-level transliteration toolkit.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pretrain", help="denoising pretraining on monolingual words")
    _add_config_flags(p)

    p = sub.add_parser("finetune", help="train on parallel word pairs")
    _add_config_flags(p)
    p.add_argument("--from-checkpoint", dest="from_checkpoint")

    p = sub.add_parser("evaluate", help="corpus char BLEU on a split")
    _add_config_flags(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--split", choices=("eval", "test"), default="test")
    p.add_argument("--label", default="")

    p = sub.add_parser("translit", help="transliterate lines word by word")
    _add_config_flags(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--input", help="file with one line per sequence")
    p.add_argument("text", nargs="*", help="text to transliterate")

    p = sub.add_parser("error-analysis", help="lowest sentence-BLEU examples")
    _add_config_flags(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--split", choices=("eval", "test"), default="test")

    p = sub.add_parser("validate", help="check broad/slender spelling agreement")
    p.add_argument("file")

    p = sub.add_parser("augment", help="expand a parallel TSV with heterographs")
    _add_config_flags(p)
    p.add_argument("--out")

    p = sub.add_parser("stats", help="parallel data statistics")
    _add_config_flags(p)
    return parser


def config_from_args(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config) if getattr(args, "config", None) else ExperimentConfig()
    overrides = {k[4:]: v for k, v in vars(args).items() if k.startswith("cfg_") and v is not None}
    cfg.update(overrides)
    cfg.validate()
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.command == "validate":
            cmd_validate(args.file)
            return 0
        cfg = config_from_args(args)
        if args.command == "pretrain":
            cmd_pretrain(cfg)
        elif args.command == "finetune":
            cmd_finetune(cfg, args.from_checkpoint)
        elif args.command == "evaluate":
            cmd_evaluate(cfg, args.checkpoint, args.split, args.label)
        elif args.command == "translit":
            if args.input:
                lines = Path(args.input).read_text(encoding="utf-8").splitlines()
            else:
                lines = [" ".join(args.text)] if args.text else sys.stdin.read().splitlines()
            cmd_translit(cfg, args.checkpoint, lines)
        elif args.command == "error-analysis":
            cmd_error_analysis(cfg, args.checkpoint, args.k, args.split)
        elif args.command == "augment":
            cmd_augment(cfg, args.out)
        elif args.command == "stats":
            cmd_stats(cfg)
    except (ValueError, KeyError, OSError, IndexError) as exc:
        msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        print(f"lismore {args.command}: error: {msg}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
