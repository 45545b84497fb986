import numpy as np
import pytest

from osclab.normal_form import analyze
from osclab.phase_model import corpus_names, corpus_phase


@pytest.fixture(scope="session")
def corpus():
    return {name: corpus_phase(name) for name in corpus_names()}


@pytest.fixture(scope="session")
def profiles(corpus):
    return {name: analyze(phase) for name, phase in corpus.items()}


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


_ACCEPTANCE = {}


class AcceptanceLog:
    """Collects one verdict line per acceptance criterion."""

    def record(self, number: int, ok: bool, detail: str):
        _ACCEPTANCE[number] = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        return ok


@pytest.fixture(scope="session")
def acceptance():
    return AcceptanceLog()


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        terminalreporter.write_line(_ACCEPTANCE[number])
