import os
import sys

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def vocab():
    from leadsheet.vocab import build_vocab

    return build_vocab()


@pytest.fixture(scope="session")
def toy_sheets():
    from sheets import toy_corpus

    return toy_corpus(5)


@pytest.fixture(scope="session")
def toy_model(vocab, toy_sheets):
    from leadsheet.ngram import train
    from leadsheet.remi import encode

    return train([encode(s, vocab) for s in toy_sheets], vocab, order=4)


ACCEPTANCE: list[str] = []


@pytest.fixture(scope="session")
def acceptance_log():
    return ACCEPTANCE


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
