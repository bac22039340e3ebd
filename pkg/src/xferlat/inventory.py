"""Phoneme inventories with articulatory features and L1/L2 phoneme tying.

Inventory files are UTF-8 text, one phoneme per line::

    symbol<TAB>class<TAB>feature=value;feature=value[<TAB>alias=A,B;note=...]

Lines starting with ``#`` are comments, except for the ``#language <tag>``
directive.  A unified inventory is written in the same format followed by a
``#SILENCE`` line, a ``#TIE ko -> en`` block for tied L2 phonemes and a
``#KEEP ko`` block for L2 phonemes that were added as new.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from typing import Iterable, Mapping, Optional

CONSONANT_FEATURES = {
    "place": ("bilabial", "labiodental", "dental", "alveolar", "postalveolar",
              "palatal", "velar", "glottal"),
    "manner": ("plosive", "nasal", "fricative", "affricative", "approximant",
               "lateral", "flap"),
    "voicing": ("voiced", "voiceless"),
    "aspiration": ("aspirated", "neutral", "tense"),
}

VOWEL_FEATURES = {
    "height": ("high", "mid", "low", "open"),
    "frontness": ("front", "central", "back"),
    "rounding": ("rounded", "unrounded"),
    "tenseness": ("tense", "lax", "unspecified"),
    # direction of the glide for diphthongs; "none" for monophthongs
    "glide": ("none", "palatal_on", "labial_on", "velar_on", "palatal_off",
              "labial_off"),
}

# features that may be omitted in a file, with their implied value
_OPTIONAL_DEFAULTS = {"glide": "none"}

FEATURE_GROUPS = {"consonant": CONSONANT_FEATURES, "vowel": VOWEL_FEATURES}
LANGUAGES = ("english", "korean", "unified")
DEFAULT_SILENCE = "sil"


class InventoryError(ValueError):
    """Raised for malformed inventory files or inconsistent tying."""


class AmbiguousTieError(InventoryError):
    def __init__(self, symbol, candidates):
        self.symbol = symbol
        self.candidates = tuple(candidates)
        super().__init__(
            f"ambiguous tie for {symbol!r}: matches {', '.join(self.candidates)}")


@dataclass(frozen=True)
class ArticulatoryFeatures:
    """Feature vector of one phoneme; only the group matching ``klass`` is set."""

    klass: str
    values: tuple = ()  # sorted (name, value) pairs

    def __post_init__(self):
        if self.klass not in FEATURE_GROUPS:
            raise InventoryError(f"unknown phoneme class {self.klass!r}")
        group = FEATURE_GROUPS[self.klass]
        names = {k for k, _ in self.values}
        for name, value in self.values:
            if name not in group:
                raise InventoryError(
                    f"feature {name!r} does not belong to class {self.klass!r}")
            if value not in group[name]:
                raise InventoryError(f"unknown value {name}={value!r}")
        missing = set(group) - names - set(_OPTIONAL_DEFAULTS)
        if missing:
            raise InventoryError(
                f"{self.klass} is missing features: {', '.join(sorted(missing))}")

    @classmethod
    def make(cls, klass: str, **features) -> "ArticulatoryFeatures":
        return cls(klass, tuple(sorted(features.items())))

    def get(self, name):
        for key, value in self.values:
            if key == name:
                return value
        return _OPTIONAL_DEFAULTS.get(name)

    def as_dict(self) -> dict:
        group = FEATURE_GROUPS[self.klass]
        return {name: self.get(name) for name in group}

    def to_text(self) -> str:
        parts = []
        for name, value in self.as_dict().items():
            if _OPTIONAL_DEFAULTS.get(name) == value:
                continue
            parts.append(f"{name}={value}")
        return ";".join(parts)


@dataclass(frozen=True)
class Phoneme:
    symbol: str
    language: str
    features: ArticulatoryFeatures
    onset_note: Optional[str] = None
    aliases: tuple = ()

    @property
    def klass(self) -> str:
        return self.features.klass

    def to_line(self) -> str:
        meta = []
        if self.aliases:
            meta.append("alias=" + ",".join(self.aliases))
        if self.onset_note:
            meta.append("note=" + self.onset_note)
        cols = [self.symbol, self.klass, self.features.to_text()]
        if meta:
            cols.append(";".join(meta))
        return "\t".join(cols)


def features_match(a: Phoneme, b: Phoneme) -> bool:
    """Tying predicate: same class and equal features.

    Vowel tenseness is a wildcard when either side is ``unspecified``.
    """
    fa, fb = a.features, b.features
    if fa.klass != fb.klass:
        return False
    for name in FEATURE_GROUPS[fa.klass]:
        va, vb = fa.get(name), fb.get(name)
        if name == "tenseness" and "unspecified" in (va, vb):
            continue
        if va != vb:
            return False
    return True


class _SymbolLookup:
    """Shared symbol/alias resolution for inventories."""

    phonemes: tuple

    def _build_index(self, extra: Mapping[str, str] = ()):
        self._by_symbol = {}
        self._alias = {}
        for i, ph in enumerate(self.phonemes):
            self._by_symbol[ph.symbol] = i
        for ph in self.phonemes:
            for alias in ph.aliases:
                if alias in self._by_symbol and alias != ph.symbol:
                    raise InventoryError(
                        f"alias {alias!r} of {ph.symbol!r} shadows a symbol")
                prev = self._alias.setdefault(alias, ph.symbol)
                if prev != ph.symbol:
                    raise InventoryError(
                        f"alias {alias!r} used by {prev!r} and {ph.symbol!r}")
        for alias, target in dict(extra).items():
            if alias not in self._by_symbol:
                self._alias.setdefault(alias, target)

    def __len__(self):
        return len(self.phonemes)

    def __iter__(self):
        return iter(self.phonemes)

    def __contains__(self, symbol):
        return symbol in self._by_symbol

    @property
    def symbols(self) -> tuple:
        return tuple(ph.symbol for ph in self.phonemes)

    @property
    def consonant_count(self) -> int:
        return sum(ph.klass == "consonant" for ph in self.phonemes)

    @property
    def vowel_count(self) -> int:
        return sum(ph.klass == "vowel" for ph in self.phonemes)

    def __getitem__(self, symbol) -> Phoneme:
        return self.phonemes[self._by_symbol[symbol]]

    def index(self, symbol: str) -> int:
        return self._by_symbol[symbol]

    def resolve(self, token: str) -> str:
        """Map an IPA symbol or alias to the canonical symbol."""
        if token in self._by_symbol:
            return token
        try:
            return self._alias[token]
        except KeyError:
            raise KeyError(f"unknown phoneme {token!r}") from None


class Inventory(_SymbolLookup):
    def __init__(self, language: str, phonemes: Iterable[Phoneme]):
        if language not in LANGUAGES:
            raise InventoryError(f"unknown language {language!r}")
        self.language = language
        self.phonemes = tuple(phonemes)
        seen = set()
        for ph in self.phonemes:
            if ph.symbol in seen:
                raise InventoryError(f"duplicate symbol {ph.symbol!r}")
            seen.add(ph.symbol)
        self._build_index()

    def without(self, *symbols) -> "Inventory":
        return Inventory(self.language,
                         [p for p in self.phonemes if p.symbol not in symbols])

    def to_text(self) -> str:
        lines = [f"#language {self.language}"]
        lines += [ph.to_line() for ph in self.phonemes]
        return "\n".join(lines) + "\n"

    def __repr__(self):
        return (f"Inventory({self.language}, {self.consonant_count}C+"
                f"{self.vowel_count}V)")


def _parse_line(line: str, lineno: int, language: str) -> Phoneme:
    cols = line.split("\t")
    if len(cols) not in (3, 4):
        raise InventoryError(f"line {lineno}: expected 3 or 4 tab-separated fields")
    symbol, klass, feats = (c.strip() for c in cols[:3])
    if not symbol:
        raise InventoryError(f"line {lineno}: empty symbol")
    if klass not in FEATURE_GROUPS:
        raise InventoryError(f"line {lineno}: unknown class {klass!r}")
    values = {}
    for tok in filter(None, (t.strip() for t in feats.split(";"))):
        name, sep, value = tok.partition("=")
        if not sep:
            raise InventoryError(f"line {lineno}: bad feature token {tok!r}")
        other = "vowel" if klass == "consonant" else "consonant"
        if name in FEATURE_GROUPS[other] and name not in FEATURE_GROUPS[klass]:
            raise InventoryError(
                f"line {lineno}: feature {name!r} is not valid for a {klass}")
        if name not in FEATURE_GROUPS[klass] or value not in FEATURE_GROUPS[klass][name]:
            raise InventoryError(f"line {lineno}: unknown feature token {tok!r}")
        if name in values:
            raise InventoryError(f"line {lineno}: repeated feature {name!r}")
        values[name] = value
    try:
        features = ArticulatoryFeatures.make(klass, **values)
    except InventoryError as err:
        raise InventoryError(f"line {lineno}: {err}") from None
    aliases, note = (), None
    if len(cols) == 4:
        for tok in filter(None, (t.strip() for t in cols[3].split(";"))):
            key, _, value = tok.partition("=")
            if key == "alias":
                aliases = tuple(a for a in value.split(",") if a)
            elif key == "note":
                note = value
            else:
                raise InventoryError(f"line {lineno}: unknown metadata {key!r}")
    return Phoneme(symbol, language, features, note, aliases)


def _scan(text: str, language: Optional[str]):
    """Yield (lineno, line) pairs and directives from an inventory file."""
    directives = {}
    body = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.rstrip("\r\n")
        if not line.strip():
            continue
        if line.startswith("#"):
            parts = line[1:].split(None, 1)
            if parts and parts[0] in ("language", "SILENCE", "TIE", "KEEP"):
                directives.setdefault(parts[0], []).append(
                    parts[1].strip() if len(parts) > 1 else "")
            continue
        body.append((lineno, line))
    lang = (directives.get("language") or [language or "english"])[0]
    return lang, body, directives


def parse_inventory(text: str, language: Optional[str] = None) -> Inventory:
    """Parse an inventory file.

    The ``#language`` directive, when present, overrides ``language``.
    """
    lang, body, _ = _scan(text, language)
    if lang not in LANGUAGES:
        raise InventoryError(f"unknown language {lang!r}")
    phonemes = []
    seen = set()
    for lineno, line in body:
        ph = _parse_line(line, lineno, lang)
        if ph.symbol in seen:
            raise InventoryError(f"line {lineno}: duplicate symbol {ph.symbol!r}")
        seen.add(ph.symbol)
        phonemes.append(ph)
    return Inventory(lang, phonemes)


class UnifiedInventory(_SymbolLookup):
    """L1 phonemes followed by the untied L2 phonemes, plus silence.

    ``phonemes`` holds the speech phonemes only; ``symbols`` appends the
    silence symbol, giving the phone set used for graph compilation.
    """

    def __init__(self, phonemes, tie_map, ties, silence_symbol=DEFAULT_SILENCE):
        self.phonemes = tuple(phonemes)
        self.tie_map = dict(tie_map)
        self.silence_symbol = silence_symbol
        # (l2 symbol, l1 symbol) pairs; the other tie_map entries map to themselves
        self.ties = tuple(ties)
        speech = [p.symbol for p in self.phonemes]
        if len(set(speech)) != len(speech):
            raise InventoryError("duplicate symbol in unified inventory")
        if silence_symbol in speech:
            raise InventoryError(f"silence symbol {silence_symbol!r} is a phoneme")
        extra = {k: v for k, v in self.tie_map.items()}
        extra.update({silence_symbol.upper(): silence_symbol, "<sil>": silence_symbol})
        self._build_index(extra)
        self._by_symbol[silence_symbol] = len(self.phonemes)
        for target in self.tie_map.values():
            if target not in self._by_symbol:
                raise InventoryError(f"tie target {target!r} not in inventory")

    @property
    def symbols(self) -> tuple:
        return tuple(p.symbol for p in self.phonemes) + (self.silence_symbol,)

    @property
    def speech_count(self) -> int:
        return len(self.phonemes)

    def __len__(self):
        return len(self.phonemes)

    def __getitem__(self, symbol) -> Phoneme:
        if symbol == self.silence_symbol:
            raise KeyError(f"{symbol!r} is the silence symbol")
        return super().__getitem__(symbol)

    def tie_counts(self) -> dict:
        """Number of cross-language ties per phoneme class."""
        counts = {"consonant": 0, "vowel": 0}
        for _, en in self.ties:
            counts[self[en].klass] += 1
        return counts

    def to_text(self) -> str:
        lines = ["#language unified"]
        lines += [ph.to_line() for ph in self.phonemes]
        lines.append(f"#SILENCE {self.silence_symbol}")
        tied = dict(self.ties)
        lines += [f"#TIE {ko} -> {en}" for ko, en in self.ties]
        lines += [f"#KEEP {ko}" for ko in self.tie_map if ko not in tied]
        return "\n".join(lines) + "\n"

    def __repr__(self):
        return (f"UnifiedInventory({self.consonant_count}C+{self.vowel_count}V"
                f" +{self.silence_symbol}, {len(self.ties)} ties)")


def parse_unified(text: str) -> UnifiedInventory:
    """Read a unified inventory written by :meth:`UnifiedInventory.to_text`."""
    _, body, directives = _scan(text, "unified")
    phonemes = [_parse_line(line, n, "unified") for n, line in body]
    silence = (directives.get("SILENCE") or [DEFAULT_SILENCE])[0]
    tie_map = {}
    ties = []
    for entry in directives.get("TIE", []):
        ko, sep, en = entry.partition("->")
        if not sep:
            raise InventoryError(f"bad #TIE line {entry!r}")
        ko, en = ko.strip(), en.strip()
        tie_map[ko] = en
        ties.append((ko, en))
    for symbol in directives.get("KEEP", []):
        tie_map[symbol] = symbol
    return UnifiedInventory(phonemes, tie_map, ties, silence)


def tie_inventories(l1: Inventory, l2: Inventory,
                    silence_symbol: str = DEFAULT_SILENCE) -> UnifiedInventory:
    """Merge ``l2`` into ``l1``, tying every L2 phoneme that has exactly one
    feature-matching L1 phoneme and appending the rest."""
    phonemes = list(l1.phonemes)
    taken = {p.symbol for p in phonemes}
    tie_map = {}
    ties = []
    for q in l2.phonemes:
        matches = [p.symbol for p in l1.phonemes if features_match(p, q)]
        if len(matches) > 1:
            raise AmbiguousTieError(q.symbol, matches)
        if matches:
            tie_map[q.symbol] = matches[0]
            ties.append((q.symbol, matches[0]))
            continue
        if q.symbol in taken:
            raise InventoryError(
                f"untied L2 symbol {q.symbol!r} collides with an L1 symbol")
        taken.add(q.symbol)
        phonemes.append(q)
        tie_map[q.symbol] = q.symbol
    return UnifiedInventory(phonemes, tie_map, ties, silence_symbol)


def _data_text(name: str) -> str:
    return resources.files("xferlat.data").joinpath(name).read_text("utf-8")


def default_english() -> Inventory:
    return parse_inventory(_data_text("english.inv"))


def default_korean() -> Inventory:
    return parse_inventory(_data_text("korean.inv"))


def default_unified() -> UnifiedInventory:
    return tie_inventories(default_english(), default_korean())
