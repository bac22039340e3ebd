"""Phonological transfer rules and pronunciation variant expansion.

Rule files hold one rule per line, ``source<TAB>alt|alt|...``, where each
alternative is a space-separated phoneme sequence (at most two symbols) or
``[del]`` for deletion.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from math import prod
from typing import Mapping, Sequence

DELETION = "[del]"
MAX_ALT_LENGTH = 2
DEFAULT_VARIANT_CAP = 256


class RuleError(ValueError):
    pass


class VariantCapError(RuleError):
    pass


@dataclass(frozen=True)
class TransferRule:
    source: str
    alternatives: tuple  # tuple of tuples of symbols; () is a deletion

    def __post_init__(self):
        if not self.alternatives:
            raise RuleError(f"rule for {self.source!r} has no alternatives")
        if len(set(self.alternatives)) != len(self.alternatives):
            raise RuleError(f"rule for {self.source!r} repeats an alternative")
        for alt in self.alternatives:
            if alt == (self.source,):
                raise RuleError(
                    f"rule for {self.source!r} lists the identity realization")
            if len(alt) > MAX_ALT_LENGTH:
                raise RuleError(
                    f"alternative {' '.join(alt)!r} is longer than {MAX_ALT_LENGTH}")

    @property
    def options(self) -> tuple:
        """All realizations at a matching position, identity first."""
        return ((self.source,),) + self.alternatives


class RuleSet:
    """Context-free transfer rules over a unified inventory."""

    def __init__(self, rules: Mapping[str, TransferRule], inventory):
        self.rules = dict(rules)
        self.inventory = inventory
        self._ids = {s: i for i, s in enumerate(inventory.symbols)}
        for rule in self.rules.values():
            for sym in (rule.source,) + tuple(s for a in rule.alternatives for s in a):
                if sym not in self._ids:
                    raise RuleError(f"unknown symbol {sym!r} in rule {rule.source!r}")

    def __len__(self):
        return len(self.rules)

    def __contains__(self, symbol):
        return symbol in self.rules

    def __getitem__(self, symbol) -> TransferRule:
        return self.rules[symbol]

    def options(self, symbol: str) -> tuple:
        rule = self.rules.get(symbol)
        return rule.options if rule else ((symbol,),)

    def sort_key(self, seq):
        return tuple(self._ids[s] for s in seq)

    def check_symbols(self, seq):
        for pos, sym in enumerate(seq):
            if sym not in self._ids:
                raise RuleError(f"unknown symbol {sym!r} at position {pos}")

    def to_text(self) -> str:
        lines = []
        for rule in self.rules.values():
            alts = "|".join(" ".join(a) if a else DELETION for a in rule.alternatives)
            lines.append(f"{rule.source}\t{alts}")
        return "\n".join(lines) + ("\n" if lines else "")

    def __repr__(self):
        return f"RuleSet({len(self.rules)} rules)"


def parse_rules(text: str, inventory) -> RuleSet:
    """Parse a rule file; symbols may be IPA or aliases known to ``inventory``."""

    def resolve(tok, lineno):
        try:
            return inventory.resolve(tok)
        except KeyError:
            raise RuleError(f"line {lineno}: unknown symbol {tok!r}") from None

    rules = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip(" \r\n")
        if not line.strip() or line.startswith("#"):
            continue
        source, sep, rest = line.partition("\t")
        if not sep:
            raise RuleError(f"line {lineno}: expected source<TAB>alternatives")
        source = resolve(source.strip(), lineno)
        if source in rules:
            raise RuleError(f"line {lineno}: duplicate rule for {source!r}")
        fields = [f.strip() for f in rest.split("|")]
        if not rest.strip() or any(not f for f in fields):
            raise RuleError(f"line {lineno}: empty alternatives field")
        alts = []
        for f in fields:
            if f == DELETION:
                alts.append(())
            else:
                alts.append(tuple(resolve(t, lineno) for t in f.split()))
        try:
            rules[source] = TransferRule(source, tuple(alts))
        except RuleError as err:
            raise RuleError(f"line {lineno}: {err}") from None
    return RuleSet(rules, inventory)


@dataclass(frozen=True)
class VariantSet:
    word: str
    canonical: tuple
    variants: tuple

    def __len__(self):
        return len(self.variants)

    def __iter__(self):
        return iter(self.variants)


def _distinct_realizations(seq, rules, limit):
    """Set of distinct nonempty realizations of ``seq``; None if over ``limit``."""
    prefixes = {()}
    for sym in seq:
        prefixes = {p + alt for p in prefixes for alt in rules.options(sym)}
        if len(prefixes) > limit:
            return None
    prefixes.discard(())
    return prefixes


def _is_collision_free(seq, rules) -> bool:
    return all(len(alt) == 1 for sym in seq for alt in rules.options(sym))


def expand_pronunciation(seq: Sequence[str], rules: RuleSet, word: str = "",
                         cap: int = DEFAULT_VARIANT_CAP) -> VariantSet:
    """All realizations of ``seq`` under independent per-position rule choices.

    The canonical sequence comes first; the others follow in lexicographic
    order of unified symbol ids.  Realizations that delete every phoneme are
    dropped.
    """
    seq = tuple(seq)
    if not seq:
        raise RuleError(f"empty pronunciation for {word!r}")
    rules.check_symbols(seq)
    raw = prod(len(rules.options(s)) for s in seq)
    if raw > cap and _is_collision_free(seq, rules):
        raise VariantCapError(f"{word or seq!r}: {raw} variants exceed cap {cap}")
    found = _distinct_realizations(seq, rules, 64 * cap)
    if found is None or len(found) > cap:
        raise VariantCapError(f"{word or seq!r}: variants exceed cap {cap}")
    found.discard(seq)
    rest = sorted(found, key=rules.sort_key)
    return VariantSet(word, seq, (seq,) + tuple(rest))


def variant_count(seq: Sequence[str], rules: RuleSet) -> int:
    """Number of distinct variants, without enumeration when no two choices
    can produce the same sequence."""
    seq = tuple(seq)
    if not seq:
        raise RuleError("empty pronunciation")
    rules.check_symbols(seq)
    if _is_collision_free(seq, rules):
        return prod(len(rules.options(s)) for s in seq)
    return len(_distinct_realizations(seq, rules, float("inf")))


def default_rules(inventory=None, name: str = "kr_transfer.rules") -> RuleSet:
    if inventory is None:
        from .inventory import default_unified
        inventory = default_unified()
    text = resources.files("xferlat.data").joinpath(name).read_text("utf-8")
    return parse_rules(text, inventory)
