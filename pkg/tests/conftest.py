from __future__ import annotations

import pytest

from gtx.suite import load_fixture_grammar


@pytest.fixture(scope="session")
def counting_grammar():
    return load_fixture_grammar("counting")


@pytest.fixture
def counting_host(counting_grammar):
    # fresh copy per test; rules never mutate their input, but tests might
    return counting_grammar.start.copy()
