"""``xferlat`` command line: tie, expand, compile, score, train, pipeline."""

from __future__ import annotations

import argparse
import hashlib
import logging
import sys
from pathlib import Path

import numpy as np

from . import inventory as inv_mod
from . import wfst
from .graph import (LEFT_BIPHONE, MONOPHONE, ContextConfig, GraphError, compile_denominator,
                    compile_numerator, estimate_phone_bigram, parse_graph, uniform_bigram)
from .inventory import InventoryError
from .lexicon import (LexiconError, build_utterance_fsa, build_word_fst, load_lexicon,
                      word_variants)
from .lfmmi import InfeasibleError, lfmmi
from .rules import RuleError, parse_rules
from .wfst import FstError

log = logging.getLogger("xferlat")

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    """Bad input files or arguments (exit 2)."""


def _read(path) -> str:
    p = Path(path)
    if not p.exists() or p.is_dir():
        raise UsageError(f"file not found: {p}")
    return p.read_text(encoding="utf-8")


def _write(path, text: str):
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(text, encoding="utf-8")


def _unified(args):
    if getattr(args, "inventory", None):
        return inv_mod.parse_unified(_read(args.inventory))
    return inv_mod.default_unified()


def _lexicon(path, unified):
    _read(path)
    return load_lexicon(path, unified)


def _tsv(rows) -> str:
    return "".join("\t".join(str(c) for c in r) + "\n" for r in rows)


# inventory tie

def tie_report(unified) -> str:
    rows = [("l2", "l1", "class", "features")]
    for ko, en in unified.ties:
        ph = unified[en]
        rows.append((ko, en, ph.klass, ph.features.to_text()))
    counts = unified.tie_counts()
    rows.append(("#ties", len(unified.ties), "consonant", counts.get("consonant", 0)))
    rows.append(("#ties", len(unified.ties), "vowel", counts.get("vowel", 0)))
    rows.append(("#total", f"{unified.speech_count} (+1 silence)",
                 f"{unified.consonant_count}C", f"{unified.vowel_count}V"))
    return _tsv(rows)


def cmd_inventory(args) -> int:
    l1 = inv_mod.parse_inventory(_read(args.l1))
    l2 = inv_mod.parse_inventory(_read(args.l2))
    unified = inv_mod.tie_inventories(l1, l2, args.silence)
    _write(args.out, unified.to_text())
    report = tie_report(unified)
    if args.report:
        _write(args.report, report)
    sys.stdout.write(report)
    return EXIT_OK


# lexicon expand

def expand_table(lexicon, rules, words=None) -> str:
    rows = [("word", "index", "variant")]
    for w in words or lexicon.words():
        for i, v in enumerate(word_variants(w, lexicon, rules)):
            rows.append((w.upper(), i, " ".join(v)))
    return _tsv(rows)


def cmd_lexicon(args) -> int:
    unified = _unified(args)
    lexicon = _lexicon(args.lexicon, unified)
    rules = parse_rules(_read(args.rules), unified)
    table = expand_table(lexicon, rules, args.words)
    if args.fst:
        if not args.words or len(args.words) != 1:
            raise UsageError("--fst needs exactly one --word")
        fst = build_word_fst(args.words[0], lexicon, rules)
        _write(args.fst, wfst.fst_to_text(fst))
        _write(str(args.fst) + ".syms", lexicon.symbols.to_text())
    if args.out:
        _write(args.out, table)
    else:
        sys.stdout.write(table)
    return EXIT_OK


# graph compile-num / compile-den

def _context(unified, mode):
    return ContextConfig.for_inventory(unified, mode)


def cmd_compile_num(args) -> int:
    unified = _unified(args)
    lexicon = _lexicon(args.lexicon, unified)
    rules = parse_rules(_read(args.rules), unified)
    utt = build_utterance_fsa(args.transcript.split(), lexicon, rules,
                              optional_silence=not args.no_silence)
    graph = compile_numerator(utt, _context(unified, args.context))
    graph.check()
    _write(args.out, graph.to_text())
    log.info("numerator: %d states, %d arcs", graph.fst.num_states, graph.fst.num_arcs())
    return EXIT_OK


def denominator_lm(mode, lexicon, phones, add_k):
    if mode == "uniform":
        return uniform_bigram(phones)
    prons = [p for w in lexicon.words() for p in lexicon[w]]
    return estimate_phone_bigram(prons, phones, add_k)


def cmd_compile_den(args) -> int:
    unified = _unified(args)
    cfg = _context(unified, args.context)
    lexicon = _lexicon(args.lexicon, unified) if args.lexicon else None
    if args.den == "bigram" and lexicon is None:
        raise UsageError("--den bigram needs --lexicon")
    graph = compile_denominator(denominator_lm(args.den, lexicon, cfg.phones, args.add_k), cfg)
    _write(args.out, graph.to_text())
    log.info("denominator: %d states, %d arcs", graph.fst.num_states, graph.fst.num_arcs())
    return EXIT_OK


# lfmmi score

def parse_scores(text: str) -> np.ndarray:
    """Score matrix file: a ``T C`` header line, then T rows of C numbers."""
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    if not lines:
        raise UsageError("empty score file")
    try:
        T, C = (int(x) for x in lines[0].split())
        x = np.array([[float(v) for v in ln.split()] for ln in lines[1:]])
    except ValueError:
        raise UsageError("malformed score file") from None
    if x.shape != (T, C):
        raise UsageError(f"score matrix is {x.shape}, header says {(T, C)}")
    return x


def cmd_score(args) -> int:
    num = parse_graph(_read(args.num))
    den = parse_graph(_read(args.den))
    x = parse_scores(_read(args.scores))
    res = lfmmi(num, den, x)
    sys.stdout.write(_tsv([("objective", "num_logprob", "den_logprob"),
                           (repr(res.objective), repr(res.num_logprob), repr(res.den_logprob))]))
    if args.gradient:
        rows = [[repr(v) for v in row.tolist()] for row in res.gradient]
        _write(args.gradient, _tsv([x.shape] + rows))
    return EXIT_OK


# train toy

def run_train(lexicon, rules, outdir, seed, variant_prob, epochs, lr, batch, hidden,
              n_train, n_test):
    from .train import run_toy_experiment
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    exp = run_toy_experiment(lexicon, rules, seed=seed, variant_prob=variant_prob,
                             n_train=n_train, n_test=n_test, epochs=epochs, lr=lr,
                             batch=batch, hidden=hidden)
    loss = [("epoch", "multi_candidate", "canonical_only")]
    loss += [(i, repr(a), repr(b)) for i, (a, b) in
             enumerate(zip(exp.multi.loss_trace, exp.canonical.loss_trace))]
    _write(outdir / "loss.tsv", _tsv(loss))
    (outdir / "model.bin").write_bytes(exp.multi.model.to_bytes())
    _write(outdir / "report.tsv", _tsv([("condition", "value")] +
                                        [(k, repr(v)) for k, v in exp.report]))
    _write(outdir / "den.fst", exp.den_text)
    return exp


def cmd_train(args) -> int:
    unified = _unified(args)
    lexicon = _lexicon(args.lexicon, unified)
    rules = parse_rules(_read(args.rules), unified)
    exp = run_train(lexicon, rules, args.out, args.seed, args.variant_prob, args.epochs,
                    args.lr, args.batch, args.hidden, args.n_train, args.n_test)
    sys.stdout.write(_tsv(exp.report))
    return EXIT_OK


# pipeline

PIPELINE_DEFAULTS = {
    "l1": None, "l2": None, "lexicon": None, "rules": None, "out": "run",
    "transcript": "THANK", "context": LEFT_BIPHONE, "train_lexicon": None,
    "train_rules": None, "seed": "42", "variant_prob": "0.7", "epochs": "5",
    "lr": "0.05", "batch": "16", "hidden": "0", "n_train": "500", "n_test": "200",
}


def parse_config(text: str) -> dict:
    cfg = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"config line {lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in PIPELINE_DEFAULTS:
            raise UsageError(f"config line {lineno}: unknown key {key!r}")
        cfg[key] = value
    missing = [k for k, v in PIPELINE_DEFAULTS.items() if v is None and k not in cfg
               and not k.startswith("train_")]
    if missing:
        raise UsageError(f"config missing required keys: {', '.join(missing)}")
    return {**PIPELINE_DEFAULTS, **cfg}


def cmd_pipeline(args) -> int:
    """tie -> expand -> compile numerator and denominator -> train -> manifest.

    Relative paths in the config resolve against the config file's directory.
    """
    base = Path(args.config).resolve().parent
    cfg = parse_config(_read(args.config))

    def path(key):
        return None if cfg[key] is None else base / cfg[key]

    out = path("out")
    out.mkdir(parents=True, exist_ok=True)
    try:
        seed, epochs, batch = int(cfg["seed"]), int(cfg["epochs"]), int(cfg["batch"])
        hidden, n_train, n_test = int(cfg["hidden"]), int(cfg["n_train"]), int(cfg["n_test"])
        variant_prob, lr = float(cfg["variant_prob"]), float(cfg["lr"])
    except ValueError as err:
        raise UsageError(f"bad numeric config value: {err}") from None
    if cfg["context"] not in (MONOPHONE, LEFT_BIPHONE):
        raise UsageError(f"unknown context {cfg['context']!r}")

    l1 = inv_mod.parse_inventory(_read(path("l1")))
    l2 = inv_mod.parse_inventory(_read(path("l2")))
    unified = inv_mod.tie_inventories(l1, l2)
    _write(out / "unified.inv", unified.to_text())
    log.info("stage tie: %d phonemes", unified.speech_count)

    lexicon = _lexicon(path("lexicon"), unified)
    rules = parse_rules(_read(path("rules")), unified)
    _write(out / "variants.tsv", expand_table(lexicon, rules))
    log.info("stage expand: %d words", len(lexicon))

    ctx = _context(unified, cfg["context"])
    utt = build_utterance_fsa(cfg["transcript"].split(), lexicon, rules)
    num = compile_numerator(utt, ctx)
    _write(out / "num.fst", num.to_text())
    den = compile_denominator(denominator_lm("bigram", lexicon, ctx.phones, 1.0), ctx)
    _write(out / "den.fst", den.to_text())
    log.info("stage compile: num %d arcs, den %d arcs", num.fst.num_arcs(), den.fst.num_arcs())

    train_lex = _lexicon(path("train_lexicon"), unified) if cfg["train_lexicon"] else lexicon
    train_rules = parse_rules(_read(path("train_rules")), unified) if cfg["train_rules"] else rules
    run_train(train_lex, train_rules, out / "train", seed, variant_prob, epochs, lr, batch,
              hidden, n_train, n_test)
    log.info("stage train: done")

    artifacts = ["unified.inv", "variants.tsv", "num.fst", "den.fst",
                 "train/loss.tsv", "train/report.tsv"]
    rows = [("artifact", "sha256")]
    rows += [(a, hashlib.sha256((out / a).read_bytes()).hexdigest()) for a in artifacts]
    _write(out / "manifest.tsv", _tsv(rows))
    sys.stdout.write(_tsv(rows))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    p = argparse.ArgumentParser(prog="xferlat", formatter_class=fmt,
                                description="Pronunciation-variant LF-MMI toolkit.")
    p.add_argument("-v", "--verbose", action="count", default=0, help="more logging on stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def inventory_flag(sp):
        sp.add_argument("--inventory", default=None,
                        help="unified inventory file; None means the shipped English/Korean tie")

    inv = sub.add_parser("inventory", help="phoneme inventories", formatter_class=fmt)
    inv_sub = inv.add_subparsers(dest="action", required=True)
    tie = inv_sub.add_parser("tie", help="tie two inventories", formatter_class=fmt)
    tie.add_argument("--l1", required=True, help="target-language inventory")
    tie.add_argument("--l2", required=True, help="speakers' first-language inventory")
    tie.add_argument("--out", required=True, help="unified inventory output")
    tie.add_argument("--report", default=None, help="also write the tie report TSV here")
    tie.add_argument("--silence", default=inv_mod.DEFAULT_SILENCE, help="silence symbol")
    tie.set_defaults(func=cmd_inventory)

    lex = sub.add_parser("lexicon", help="pronunciation lexicons", formatter_class=fmt)
    lex_sub = lex.add_subparsers(dest="action", required=True)
    exp = lex_sub.add_parser("expand", help="list transfer-rule variants", formatter_class=fmt)
    exp.add_argument("--lexicon", required=True, help="CMUDict-format lexicon")
    exp.add_argument("--rules", required=True, help="transfer rule file")
    exp.add_argument("--word", "--words", dest="words", nargs="+", default=None,
                     help="only these words (default: all)")
    exp.add_argument("--out", default=None, help="output TSV; None means stdout")
    exp.add_argument("--fst", default=None,
                     help="also write the word FST here, with a .syms symbol table")
    inventory_flag(exp)
    exp.set_defaults(func=cmd_lexicon)

    gr = sub.add_parser("graph", help="compile training graphs", formatter_class=fmt)
    gr_sub = gr.add_subparsers(dest="action", required=True)
    num = gr_sub.add_parser("compile-num", help="numerator graph for one transcript",
                            formatter_class=fmt)
    num.add_argument("--lexicon", required=True, help="CMUDict-format lexicon")
    num.add_argument("--rules", required=True, help="transfer rule file")
    num.add_argument("--transcript", required=True, help="space-separated words")
    num.add_argument("--context", choices=(MONOPHONE, LEFT_BIPHONE), default=LEFT_BIPHONE,
                     help="pdf context")
    num.add_argument("--no-silence", action="store_true", help="disable optional silence")
    num.add_argument("--out", required=True, help="graph output (text FST)")
    inventory_flag(num)
    num.set_defaults(func=cmd_compile_num)
    den = gr_sub.add_parser("compile-den", help="phone-loop denominator graph",
                            formatter_class=fmt)
    den.add_argument("--den", choices=("bigram", "uniform"), default="bigram",
                     help="phone LM weighting")
    den.add_argument("--lexicon", default=None, help="lexicon for bigram estimation")
    den.add_argument("--add-k", type=float, default=1.0, help="bigram add-k smoothing")
    den.add_argument("--context", choices=(MONOPHONE, LEFT_BIPHONE), default=LEFT_BIPHONE,
                     help="pdf context")
    den.add_argument("--out", required=True, help="graph output (text FST)")
    inventory_flag(den)
    den.set_defaults(func=cmd_compile_den)

    lf = sub.add_parser("lfmmi", help="LF-MMI objective", formatter_class=fmt)
    lf_sub = lf.add_subparsers(dest="action", required=True)
    sc = lf_sub.add_parser("score", help="objective for one score matrix", formatter_class=fmt)
    sc.add_argument("--num", required=True, help="numerator graph")
    sc.add_argument("--den", required=True, help="denominator graph")
    sc.add_argument("--scores", required=True, help="'T C' header then T rows of log-scores")
    sc.add_argument("--gradient", default=None, help="write the T x C gradient here")
    sc.set_defaults(func=cmd_score)

    tr = sub.add_parser("train", help="synthetic training", formatter_class=fmt)
    tr_sub = tr.add_subparsers(dest="action", required=True)
    toy = tr_sub.add_parser("toy", help="multi-candidate vs canonical-only toy run",
                            formatter_class=fmt)
    toy.add_argument("--lexicon", required=True, help="CMUDict-format lexicon")
    toy.add_argument("--rules", required=True, help="transfer rule file")
    toy.add_argument("--seed", type=int, default=42, help="run seed")
    toy.add_argument("--variant-prob", type=float, default=0.7,
                     help="per-position probability of a non-canonical alternative")
    toy.add_argument("--epochs", type=int, default=5, help="training epochs")
    toy.add_argument("--lr", type=float, default=0.05, help="gradient ascent step")
    toy.add_argument("--batch", type=int, default=16, help="utterances per update")
    toy.add_argument("--hidden", type=int, default=0, help="hidden width (0 = affine)")
    toy.add_argument("--n-train", type=int, default=500, help="training utterances")
    toy.add_argument("--n-test", type=int, default=200, help="held-out utterances")
    toy.add_argument("--out", required=True, help="run directory")
    inventory_flag(toy)
    toy.set_defaults(func=cmd_train)

    pipe = sub.add_parser("pipeline", help="tie, expand, compile, train, manifest",
                          formatter_class=fmt)
    pipe.add_argument("--config", required=True, help="key=value config file")
    pipe.set_defaults(func=cmd_pipeline)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="xferlat: %(levelname)s: %(message)s",
                        stream=sys.stderr)
    try:
        return args.func(args)
    except (UsageError, InventoryError, RuleError, LexiconError, GraphError, FstError) as err:
        print(f"xferlat: error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except (InfeasibleError, ArithmeticError, ValueError) as err:
        print(f"xferlat: failed: {err}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
