from pathlib import Path

import numpy as np
import pytest

from coin import load_image

DATA = Path(__file__).parent / "data"


def pytest_addoption(parser):
    parser.addoption("--run-slow", action="store_true", help="run multi-hour reproduction jobs")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--run-slow"):
        return
    skip = pytest.mark.skip(reason="needs --run-slow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


@pytest.fixture(scope="session")
def crop():
    """64x64 crop of a natural photograph."""
    return load_image(DATA / "astronaut_64.png")


@pytest.fixture(scope="session")
def crops():
    return [load_image(p) for p in sorted(DATA.glob("*_64.png"))]


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE = []


@pytest.fixture
def report():
    """Record one acceptance line: report(name, passed, detail)."""
    def _report(name, passed, detail=""):
        ACCEPTANCE.append((name, bool(passed), detail))
        return passed
    return _report


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed, detail in ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")
