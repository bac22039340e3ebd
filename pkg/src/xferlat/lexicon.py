"""CMUDict lexicons and pronunciation-variant acceptors."""

from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources
from math import prod
from typing import Sequence

from . import wfst
from .rules import DEFAULT_VARIANT_CAP, RuleError, VariantCapError, expand_pronunciation

_ALTERNATE = re.compile(r"^(.*)\((\d+)\)$")
_STRESS = re.compile(r"^([A-Za-z]+)[012]$")


class LexiconError(ValueError):
    pass


def phone_symbols(inventory) -> wfst.SymbolTable:
    """Symbol table over the unified phone set (speech phonemes + silence)."""
    return wfst.SymbolTable(inventory.symbols)


class Lexicon:
    def __init__(self, entries, inventory):
        self.entries = {w: list(p) for w, p in entries.items()}
        self.inventory = inventory
        self.symbols = phone_symbols(inventory)

    def __contains__(self, word):
        return word.upper() in self.entries

    def __getitem__(self, word) -> list:
        return self.entries[word.upper()]

    def __len__(self):
        return len(self.entries)

    def words(self):
        return sorted(self.entries)

    def __repr__(self):
        return f"Lexicon({len(self.entries)} words)"


def _resolve(token, inventory):
    try:
        return inventory.resolve(token)
    except KeyError:
        pass
    m = _STRESS.match(token)
    if m:
        return inventory.resolve(m.group(1))
    raise KeyError(token)


def parse_lexicon(text: str, inventory) -> Lexicon:
    """Parse CMUDict text (``WORD  PH1 PH2 ...``, ``WORD(2)`` alternates).

    Stress digits are stripped and symbols mapped to the unified inventory.
    """
    entries = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith(";;;") or line.startswith("#"):
            continue
        parts = line.split()
        word = parts[0].upper()
        m = _ALTERNATE.match(word)
        if m:
            word = m.group(1)
        if len(parts) < 2:
            raise LexiconError(f"line {lineno}: empty pronunciation for {word}")
        try:
            pron = tuple(_resolve(tok, inventory) for tok in parts[1:])
        except KeyError as err:
            raise LexiconError(f"line {lineno}: unknown phoneme {err.args[0]!r}") from None
        prons = entries.setdefault(word, [])
        if pron not in prons:
            prons.append(pron)
    return Lexicon(entries, inventory)


def load_lexicon(path, inventory) -> Lexicon:
    with open(path, encoding="utf-8") as f:
        return parse_lexicon(f.read(), inventory)


def default_lexicon(inventory, name="cmudict_sample.txt") -> Lexicon:
    text = resources.files("xferlat.data").joinpath(name).read_text("utf-8")
    return parse_lexicon(text, inventory)


def word_variants(word, lexicon, rules, cap=DEFAULT_VARIANT_CAP) -> list:
    """Distinct variants over all canonical pronunciations, in order."""
    if word not in lexicon:
        raise LexiconError(f"word not found: {word!r}")
    seen = []
    for canonical in lexicon[word]:
        for v in expand_pronunciation(canonical, rules, word.upper(), cap):
            if v not in seen:
                seen.append(v)
    if len(seen) > cap:
        raise VariantCapError(f"{word!r}: {len(seen)} variants exceed cap {cap}")
    return seen


def _sausage(canonical, rules, symbols):
    f = wfst.Fst(wfst.LOG, symbols)
    state = f.add_state()
    f.set_start(state)
    for sym in canonical:
        nxt = f.add_state()
        for alt in rules.options(sym):
            if not alt:
                f.add_arc(state, wfst.EPSILON, wfst.EPSILON, 0.0, nxt)
                continue
            cur = state
            for i, s in enumerate(alt):
                dest = nxt if i == len(alt) - 1 else f.add_state()
                lab = symbols.find(s)
                f.add_arc(cur, lab, lab, 0.0, dest)
                cur = dest
        state = nxt
    f.set_final(state)
    return f


def _trie(variants, symbols):
    f = wfst.Fst(wfst.LOG, symbols)
    f.set_start(f.add_state())
    children = {}
    for seq in variants:
        s = f.start
        for sym in seq:
            lab = symbols.find(sym)
            if (s, lab) not in children:
                nxt = f.add_state()
                f.add_arc(s, lab, lab, 0.0, nxt)
                children[(s, lab)] = nxt
            s = children[(s, lab)]
        f.set_final(s)
    return f


def build_word_fst(word, lexicon, rules, cap=DEFAULT_VARIANT_CAP) -> wfst.Fst:
    """Unweighted acceptor whose paths are exactly the word's variants.

    Each canonical pronunciation becomes a chain with one parallel arc per
    option at each position.  When those chains would accept a variant along
    two different paths (deletions, two-phone alternatives or overlapping
    canonicals) a prefix tree over the distinct variants is built instead, so
    every variant has exactly one path.
    """
    variants = word_variants(word, lexicon, rules, cap)
    symbols = lexicon.symbols
    prons = lexicon[word]
    raw = sum(prod(len(rules.options(s)) for s in c) for c in prons)
    empty = sum(all(() in rules.options(s) for s in c) for c in prons)
    if raw != len(variants) + empty:
        return _trie(variants, symbols)
    fst = _sausage(prons[0], rules, symbols)
    for c in prons[1:]:
        fst = wfst.union(fst, _sausage(c, rules, symbols))
    fst = wfst.remove_epsilon(fst)
    if fst.is_final(fst.start):
        fst.set_final(fst.start, wfst.NEG_INF)
        fst = wfst.connect(fst)
    return fst


@dataclass
class UtteranceFsa:
    fst: wfst.Fst
    transcript: tuple
    variant_counts: tuple
    optional_silence: bool

    @property
    def symbols(self):
        return self.fst.isymbols


def optional_silence_fst(symbols, silence) -> wfst.Fst:
    f = wfst.Fst(wfst.LOG, symbols)
    f.add_states(2)
    f.set_start(0)
    lab = symbols.find(silence)
    f.add_arc(0, lab, lab, 0.0, 1)
    f.set_final(0)
    f.set_final(1)
    return f


def build_utterance_fsa(transcript: Sequence[str], lexicon, rules,
                        optional_silence: bool = True,
                        cap=DEFAULT_VARIANT_CAP) -> UtteranceFsa:
    """Acceptor for every variant realization of a word sequence.

    With ``optional_silence`` a skippable silence phone is allowed before,
    between and after the words.
    """
    words = [w.upper() for w in transcript]
    if not words:
        raise LexiconError("empty transcript")
    for pos, w in enumerate(words):
        if w not in lexicon:
            raise LexiconError(f"OOV word {w!r} at position {pos}")
    symbols = lexicon.symbols
    sil = optional_silence_fst(symbols, lexicon.inventory.silence_symbol)
    parts, counts = [], []
    for w in words:
        try:
            fst = build_word_fst(w, lexicon, rules, cap)
        except RuleError as err:
            raise LexiconError(str(err)) from err
        counts.append(len(word_variants(w, lexicon, rules, cap)))
        if optional_silence:
            parts.append(sil)
        parts.append(fst)
    if optional_silence:
        parts.append(sil)
    fst = parts[0]
    for p in parts[1:]:
        fst = wfst.concat(fst, p)
    fst = wfst.remove_epsilon(fst)
    return UtteranceFsa(fst, tuple(words), tuple(counts), optional_silence)


def path_symbols(fst, paths):
    """Render enumerate_paths output label ids as symbol tuples."""
    return [tuple(fst.isymbols.find(i) for i in labels) for labels, _ in paths]
