import numpy as np
import pytest

from raresynth import data as D
from raresynth.generators import GeneratorSpec, fit


@pytest.fixture(scope="session")
def raw_fixture():
    return D.generate_fixture_corpus(7, 5000, 0.02)


@pytest.fixture(scope="session")
def corpus(raw_fixture):
    return D.preprocess(raw_fixture)


@pytest.fixture(scope="session")
def gc_model(corpus):
    return fit(corpus.diversions, GeneratorSpec("GC", {}, 0))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    from . import verdicts

    if verdicts.LINES:
        terminalreporter.section("acceptance criteria")
        for line in verdicts.LINES:
            terminalreporter.write_line(line)
