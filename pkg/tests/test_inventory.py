import pytest
from hypothesis import given, settings, strategies as st

from xferlat.inventory import (CONSONANT_FEATURES, VOWEL_FEATURES, AmbiguousTieError,
                               ArticulatoryFeatures, InventoryError, Phoneme,
                               default_english, default_korean, features_match,
                               parse_inventory, parse_unified, tie_inventories)

# frozen output of the default tie
EXPECTED_TIES = (
    ("kʰ", "k"), ("tʰ", "t"), ("pʰ", "p"), ("tɕʰ", "tʃ"), ("s", "s"), ("h", "h"),
    ("m", "m"), ("n", "n"), ("ŋ", "ŋ"), ("i", "i"), ("e̞", "ɛ"), ("ʌ̹", "ʌ"), ("u", "u"),
)


def test_default_counts():
    en, ko = default_english(), default_korean()
    assert (en.consonant_count, en.vowel_count) == (24, 15)
    assert (ko.consonant_count, ko.vowel_count) == (19, 17)


def test_default_tie(unified):
    assert unified.ties == EXPECTED_TIES
    assert unified.tie_counts() == {"consonant": 9, "vowel": 4}
    assert (unified.consonant_count, unified.vowel_count) == (34, 28)
    assert unified.speech_count == 62
    assert len(unified.symbols) == 63
    assert unified.symbols[-1] == "sil"


def test_tie_map_resolves_korean_symbols(unified):
    assert unified.resolve("kʰ") == "k"
    assert unified.resolve("e̞") == "ɛ"
    assert unified.resolve("ɡ̊") == "ɡ̊"
    assert unified.resolve("TH") == "θ"


def test_self_tie_is_identity():
    en = default_english()
    u = tie_inventories(en, en)
    assert len(u.ties) == 39
    assert all(a == b for a, b in u.ties)
    assert u.speech_count == 39


def test_unified_round_trip(unified):
    again = parse_unified(unified.to_text())
    assert again.to_text() == unified.to_text()
    assert again.ties == unified.ties
    assert again.symbols == unified.symbols


def test_inventory_round_trip():
    en = default_english()
    assert parse_inventory(en.to_text()).to_text() == en.to_text()


def test_ambiguous_tie_aborts():
    text = ("#language english\n"
            "p\tconsonant\tplace=bilabial;manner=plosive;voicing=voiceless;aspiration=aspirated\n"
            "P2\tconsonant\tplace=bilabial;manner=plosive;voicing=voiceless;aspiration=aspirated\n")
    l1 = parse_inventory(text)
    l2 = parse_inventory("#language korean\n"
                         "pʰ\tconsonant\tplace=bilabial;manner=plosive;voicing=voiceless;"
                         "aspiration=aspirated\n")
    with pytest.raises(AmbiguousTieError) as err:
        tie_inventories(l1, l2)
    assert err.value.symbol == "pʰ"
    assert set(err.value.candidates) == {"p", "P2"}


@pytest.mark.parametrize("line, msg", [
    ("x\tconsonant\tplace=bilabial;manner=plosive;voicing=voiceless", "missing"),
    ("x\tconsonant\tplace=moon;manner=plosive;voicing=voiceless;aspiration=neutral", "unknown"),
    ("x\tvowel\tplace=bilabial", "not valid"),
    ("x\tglide\theight=high", "unknown class"),
    ("x consonant", "tab-separated"),
])
def test_malformed_lines(line, msg):
    with pytest.raises(InventoryError, match=msg):
        parse_inventory(line + "\n")


def test_duplicate_symbol():
    line = "i\tvowel\theight=high;frontness=front;rounding=unrounded;tenseness=tense\n"
    with pytest.raises(InventoryError, match="duplicate"):
        parse_inventory(line + line)


def test_tenseness_wildcard():
    def vowel(t):
        f = ArticulatoryFeatures.make("vowel", height="high", frontness="front",
                                      rounding="unrounded", tenseness=t)
        return Phoneme("i", "english", f)

    assert features_match(vowel("tense"), vowel("unspecified"))
    assert not features_match(vowel("tense"), vowel("lax"))


consonants = st.fixed_dictionaries({k: st.sampled_from(sorted(v))
                                    for k, v in CONSONANT_FEATURES.items()})
vowels = st.fixed_dictionaries({k: st.sampled_from(sorted(v))
                                for k, v in VOWEL_FEATURES.items()})


@settings(max_examples=200, deadline=None)
@given(a=consonants, b=consonants)
def test_consonant_match_is_feature_equality(a, b):
    pa = Phoneme("a", "english", ArticulatoryFeatures.make("consonant", **a))
    pb = Phoneme("b", "korean", ArticulatoryFeatures.make("consonant", **b))
    assert features_match(pa, pb) == (a == b)
    assert features_match(pa, pb) == features_match(pb, pa)


@settings(max_examples=200, deadline=None)
@given(a=vowels)
def test_features_text_round_trip(a):
    f = ArticulatoryFeatures.make("vowel", **a)
    line = "x\tvowel\t" + f.to_text() + "\n"
    assert parse_inventory(line).phonemes[0].features.as_dict() == f.as_dict()
