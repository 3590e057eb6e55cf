from pathlib import Path

import numpy as np
import pytest

from approachability import Game, example_game

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


@pytest.fixture
def fixtures() -> Path:
    return FIXTURES


@pytest.fixture
def ex1() -> Game:
    return example_game("example1")


@pytest.fixture
def xor() -> Game:
    return example_game("xor")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


CRITERIA: dict[int, str] = {}


def record(number: int, ok: bool, detail: str) -> None:
    """Store a one-line verdict for the summary, then fail the test if needed."""
    CRITERIA[number] = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
    assert ok, CRITERIA[number]


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for k in sorted(CRITERIA):
            terminalreporter.write_line(CRITERIA[k])
