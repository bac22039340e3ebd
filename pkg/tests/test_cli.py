import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from xferlat.cli import build_parser, main, parse_config
from xferlat.graph import parse_graph
from xferlat.inventory import parse_unified

DATA = Path(__file__).resolve().parents[1] / "src" / "xferlat" / "data"
EN, KO = str(DATA / "english.inv"), str(DATA / "korean.inv")
LEX, RULES = str(DATA / "cmudict_sample.txt"), str(DATA / "kr_transfer.rules")
TOY_LEX, TOY_RULES = str(DATA / "toy_lexicon.txt"), str(DATA / "toy.rules")


def test_inventory_tie(tmp_path, capsys):
    out = tmp_path / "u.inv"
    assert main(["inventory", "tie", "--l1", EN, "--l2", KO, "--out", str(out)]) == 0
    text = capsys.readouterr().out
    assert "#total\t62 (+1 silence)" in text
    assert len([ln for ln in text.splitlines() if not ln.startswith(("#", "l2"))]) == 13
    assert parse_unified(out.read_text()).speech_count == 62


def test_inventory_self_tie(tmp_path, capsys):
    assert main(["inventory", "tie", "--l1", EN, "--l2", EN, "--out",
                 str(tmp_path / "s.inv")]) == 0
    assert "#total\t39 (+1 silence)" in capsys.readouterr().out


def test_missing_file_exit_2(tmp_path, capsys):
    missing = str(tmp_path / "nope.inv")
    assert main(["inventory", "tie", "--l1", missing, "--l2", KO, "--out",
                 str(tmp_path / "x")]) == 2
    assert missing in capsys.readouterr().err


def test_lexicon_expand(tmp_path, capsys):
    fst = tmp_path / "thank.fst"
    assert main(["lexicon", "expand", "--lexicon", LEX, "--rules", RULES, "--word", "THANK",
                 "--fst", str(fst)]) == 0
    rows = capsys.readouterr().out.splitlines()
    assert rows[0] == "word\tindex\tvariant"
    assert rows[1] == "THANK\t0\tθ æ ŋ k"
    assert len(rows) == 7
    assert fst.exists() and Path(str(fst) + ".syms").exists()


def test_oov_exit_2(tmp_path, capsys):
    assert main(["graph", "compile-num", "--lexicon", LEX, "--rules", RULES,
                 "--transcript", "THANK ZEBRA", "--out", str(tmp_path / "n.fst")]) == 2
    assert "ZEBRA" in capsys.readouterr().err


def compile_pair(tmp_path, context="left_biphone"):
    num, den = tmp_path / "num.fst", tmp_path / "den.fst"
    assert main(["graph", "compile-num", "--lexicon", LEX, "--rules", RULES, "--transcript",
                 "THANK", "--context", context, "--out", str(num)]) == 0
    assert main(["graph", "compile-den", "--lexicon", LEX, "--context", context,
                 "--out", str(den)]) == 0
    return num, den


def write_scores(path, x):
    with open(path, "w") as f:
        f.write(f"{x.shape[0]} {x.shape[1]}\n")
        for row in x:
            f.write("\t".join(repr(float(v)) for v in row) + "\n")


def test_compile_and_score(tmp_path, capsys):
    num, den = compile_pair(tmp_path, "monophone")
    assert parse_graph(num.read_text()).check().kind == "numerator"
    assert parse_graph(den.read_text()).kind == "denominator"
    x = np.random.default_rng(0).normal(size=(10, 63))
    scores = tmp_path / "scores.tsv"
    write_scores(scores, x)
    grad = tmp_path / "grad.tsv"
    capsys.readouterr()
    assert main(["lfmmi", "score", "--num", str(num), "--den", str(den), "--scores",
                 str(scores), "--gradient", str(grad)]) == 0
    header, values = capsys.readouterr().out.splitlines()
    f, n, d = (float(v) for v in values.split("\t"))
    assert header == "objective\tnum_logprob\tden_logprob"
    assert f == pytest.approx(n - d)
    g = np.loadtxt(grad, skiprows=1)
    assert g.shape == (10, 63)
    assert np.allclose(g.sum(axis=1), 0.0, atol=1e-8)


def test_score_errors(tmp_path, capsys):
    num, den = compile_pair(tmp_path, "monophone")
    short = tmp_path / "short.tsv"
    write_scores(short, np.zeros((2, 63)))
    assert main(["lfmmi", "score", "--num", str(num), "--den", str(den),
                 "--scores", str(short)]) == 1
    bad = tmp_path / "bad.tsv"
    bad.write_text("3 63\n0 0\n")
    assert main(["lfmmi", "score", "--num", str(num), "--den", str(den),
                 "--scores", str(bad)]) == 2


def test_den_uniform_needs_no_lexicon(tmp_path):
    assert main(["graph", "compile-den", "--den", "uniform", "--context", "monophone",
                 "--out", str(tmp_path / "d.fst")]) == 0
    assert main(["graph", "compile-den", "--den", "bigram", "--out",
                 str(tmp_path / "d2.fst")]) == 2


def test_compile_is_idempotent(tmp_path):
    a = compile_pair(tmp_path / "a")
    b = compile_pair(tmp_path / "b")
    assert a[0].read_bytes() == b[0].read_bytes()
    assert a[1].read_bytes() == b[1].read_bytes()


def test_train_toy(tmp_path, capsys):
    out = tmp_path / "run"
    args = ["train", "toy", "--lexicon", TOY_LEX, "--rules", TOY_RULES, "--seed", "1",
            "--epochs", "1", "--n-train", "20", "--n-test", "10", "--out", str(out)]
    assert main(args) == 0
    loss = (out / "loss.tsv").read_text().splitlines()
    assert loss[0] == "epoch\tmulti_candidate\tcanonical_only" and len(loss) == 3
    assert (out / "model.bin").read_bytes()[:5] == b"XFLT1"
    report = dict(ln.split("\t") for ln in (out / "report.tsv").read_text().splitlines()[1:])
    assert set(report) == {"multi_candidate", "canonical_only", "chance", "chance_sigma"}


def pipeline_config(tmp_path, extra=""):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(f"l1 = {EN}\nl2 = {KO}\nlexicon = {LEX}\nrules = {RULES}\n"
                   f"train_lexicon = {TOY_LEX}\ntrain_rules = {TOY_RULES}\n"
                   "transcript = THANK\ncontext = monophone\nepochs = 1\nn_train = 20\n"
                   "n_test = 10\nout = out\n" + extra)
    return cfg


def test_pipeline_manifest_and_rerun(tmp_path, capsys):
    cfg = pipeline_config(tmp_path)
    assert main(["pipeline", "--config", str(cfg)]) == 0
    manifest = (tmp_path / "out" / "manifest.tsv").read_text()
    rows = manifest.splitlines()[1:]
    assert len(rows) == 6
    assert main(["pipeline", "--config", str(cfg)]) == 0
    assert (tmp_path / "out" / "manifest.tsv").read_text() == manifest


def test_pipeline_unknown_key(tmp_path, capsys):
    cfg = pipeline_config(tmp_path, "colour = red\n")
    assert main(["pipeline", "--config", str(cfg)]) == 2
    assert "colour" in capsys.readouterr().err


def test_parse_config_missing_keys():
    from xferlat.cli import UsageError
    with pytest.raises(UsageError, match="missing"):
        parse_config("seed = 1\n")


def _subparsers(parser):
    for action in parser._actions:
        if action.__class__.__name__ == "_SubParsersAction":
            for name, sub in action.choices.items():
                yield name, sub
                yield from _subparsers(sub)


def test_help_documents_defaults():
    for name, sub in _subparsers(build_parser()):
        for action in sub._actions:
            if action.option_strings and action.dest != "help":
                assert action.help, f"{name}: {action.dest} has no help"
        sub.format_help()


def test_console_entry_point():
    out = subprocess.run([sys.executable, "-m", "xferlat.cli", "train", "toy", "--help"],
                         capture_output=True, text=True, check=True).stdout
    assert "--variant-prob" in out and "(default: 0.7)" in out
