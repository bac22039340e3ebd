import pytest

from xferlat.inventory import default_unified
from xferlat.lexicon import default_lexicon
from xferlat.rules import default_rules


@pytest.fixture(scope="session")
def unified():
    return default_unified()


@pytest.fixture(scope="session")
def lexicon(unified):
    return default_lexicon(unified)


@pytest.fixture(scope="session")
def rules(unified):
    return default_rules(unified)


@pytest.fixture(scope="session")
def toy_lexicon(unified):
    return default_lexicon(unified, "toy_lexicon.txt")


@pytest.fixture(scope="session")
def toy_rules(unified):
    return default_rules(unified, "toy.rules")
