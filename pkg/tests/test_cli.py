import json

import pytest
from conftest import TOY_PAIRS

from lismore.cli import main
from lismore.config import ExperimentConfig
from lismore.model import load_checkpoint

FAST = ["--n_eval", "3", "--n_test", "3", "--greedy", "true", "--dropout", "0"]


@pytest.fixture
def data(tmp_path):
    par = tmp_path / "parallel.tsv"
    par.write_text("".join(f"{s}\t{t}\n" for s, t in TOY_PAIRS), encoding="utf-8")
    mono = tmp_path / "mono.txt"
    mono.write_text("an cù mòr tréan bhith dhá do mar deir bhean grádh\n", encoding="utf-8")
    lex = tmp_path / "lex.tsv"
    lex.write_text("tréan\t/tʲɾʲeːn/\ntrèan\t/tʲɾʲeːn/\nmar\t/mar/\nmhar\t/var/\n", encoding="utf-8")
    return tmp_path, par, mono, lex


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_pretrain_then_finetune(data, capsys):
    tmp, par, mono, _ = data
    pre = tmp / "pre"
    code, out, _ = run(capsys, "pretrain", "--monolingual", mono, "--parallel", par, "--output_dir", pre,
                       "--max_updates", "8", "--warmup_updates", "2", "--epoch_size", "4", "--pretrain_eval_words", "5")
    assert code == 0 and "best epoch" in out
    assert len((pre / "history.tsv").read_text().splitlines()) == 3
    manifest = json.loads((pre / "manifest.pretrain.json").read_text())
    assert manifest["inputs"]["monolingual"]["sha256"] and "heldout" in manifest["seeds"]

    ft = tmp / "ft"
    code, out, _ = run(capsys, "finetune", "--parallel", par, "--output_dir", ft, "--from-checkpoint",
                       pre / "checkpoint_best.bin", "--max_updates", "20", "--warmup_updates", "2", *FAST)
    assert code == 0, out
    model, vocab, meta = load_checkpoint(ft / "checkpoint_best.bin")
    assert meta["stage"] == "finetune"
    assert len(vocab) == len(load_checkpoint(pre / "checkpoint_best.bin")[1])
    assert (ft / "split.eval.idx").exists()


def test_pretrain_zero_updates(data, capsys):
    tmp, _, mono, _ = data
    code, _, _ = run(capsys, "pretrain", "--monolingual", mono, "--output_dir", tmp / "p0", "--max_updates", "0")
    assert code == 0
    assert (tmp / "p0" / "history.tsv").read_text().startswith("0\t0\tnan\t")


def test_finetune_augment_and_directions(data, capsys):
    tmp, par, _, lex = data
    out = tmp / "aug"
    code, _, _ = run(capsys, "finetune", "--parallel", par, "--lexicon", lex, "--augment", "true",
                     "--output_dir", out, "--max_updates", "0", "--warmup_updates", "0", *FAST)
    assert code == 0
    report = (out / "augment_report.txt").read_text(encoding="utf-8")
    assert "examples before" in report

    rev = tmp / "rev"
    code, _, _ = run(capsys, "finetune", "--parallel", par, "--direction", "gd-bdl", "--output_dir", rev,
                     "--max_updates", "0", "--warmup_updates", "0", *FAST)
    assert code == 0
    code, out_text, _ = run(capsys, "evaluate", "--parallel", par, "--direction", "gd-bdl", "--checkpoint",
                            rev / "checkpoint_best.bin", "--split", "eval", "--output_dir", rev, *FAST)
    assert code == 0 and "\tgd-bdl\teval\t" in out_text


def test_evaluate_translit_error_analysis(data, capsys):
    tmp, par, _, _ = data
    run_dir = tmp / "run"
    assert run(capsys, "finetune", "--parallel", par, "--output_dir", run_dir,
               "--max_updates", "10", "--warmup_updates", "2", *FAST)[0] == 0
    ckpt = run_dir / "checkpoint_best.bin"
    code, out, _ = run(capsys, "evaluate", "--parallel", par, "--checkpoint", ckpt, "--output_dir", run_dir, *FAST)
    assert code == 0 and out.startswith("BLEU = ")
    code, out, _ = run(capsys, "translit", "--checkpoint", ckpt, "--greedy", "true", "A", "wēniᵗ", "za")
    assert code == 0 and len(out.strip("\n").split(" ")) >= 3
    code, out, _ = run(capsys, "error-analysis", "--parallel", par, "--checkpoint", ckpt, "--k", "2",
                       "--output_dir", run_dir, *FAST)
    assert code == 0 and out.startswith("Input")
    assert len((run_dir / "error_analysis.tsv").read_text(encoding="utf-8").splitlines()) == 3


def test_validate_augment_stats(data, capsys):
    tmp, par, _, lex = data
    words = tmp / "words.txt"
    words.write_text("duigas\nchuaiseach\n[UNK]\n", encoding="utf-8")
    code, out, err = run(capsys, "validate", words)
    assert code == 0 and out.splitlines() == ["duigas\tinvalid\t3", "chuaiseach\tvalid\t", "[UNK]\tn/a\t"]
    assert "fraction_valid\t0.5000" in err

    dest = tmp / "augmented.tsv"
    code, _, err = run(capsys, "augment", "--parallel", par, "--lexicon", lex, "--out", dest)
    assert code == 0
    lines = dest.read_text(encoding="utf-8").splitlines()
    assert lines[: len(TOY_PAIRS)] == [f"{s}\t{t}" for s, t in TOY_PAIRS]
    # "mar" and "mhar" differ in pronunciation, so only tréan gains a pair
    assert lines[len(TOY_PAIRS):] == ["trane\ttrèan"]

    code, out, _ = run(capsys, "stats", "--parallel", par)
    assert code == 0 and "multi_word\t2" in out


def test_errors_exit_nonzero(data, capsys):
    tmp, par, _, _ = data
    code, _, err = run(capsys, "stats", "--parallel", tmp / "missing.tsv")
    assert code == 1 and err.startswith("lismore stats: error:")
    bad = tmp / "bad.tsv"
    bad.write_text("a\tb\tc\n")
    code, _, err = run(capsys, "stats", "--parallel", bad)
    assert code == 1 and ":1:" in err
    code, _, err = run(capsys, "stats", "--parallel", par, "--direction", "sideways")
    assert code == 1 and "direction" in err
    with pytest.raises(SystemExit):
        main(["no-such-command"])


def test_config_file_and_overrides(tmp_path, data, capsys):
    _, par, _, _ = data
    cfg_path = tmp_path / "exp.cfg"
    cfg_path.write_text(f"# experiment\nparallel = {par}\nseed = 9\nbeam_width = 3  # narrow\n", encoding="utf-8")
    cfg = ExperimentConfig.load(cfg_path)
    assert (cfg.seed, cfg.beam_width, cfg.parallel) == (9, 3, str(par))
    assert ExperimentConfig.from_text(cfg.to_text()) == cfg
    with pytest.raises(KeyError):
        ExperimentConfig.from_text("nonsense = 1")
    code, out, _ = run(capsys, "stats", "--config", cfg_path, "--seed", "4")
    assert code == 0 and out.startswith("examples\t20")
