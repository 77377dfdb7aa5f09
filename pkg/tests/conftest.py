import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from fibwild.fixpoint import certify_fixed_point  # noqa: E402

# truncation degree at which the contraction block covers the slowly decaying phi tail
CERT_DEGREE = {3.8: 100, 5.1: 160}

_RUNS: dict = {}


def certified_run(d: float):
    if d not in _RUNS:
        N = CERT_DEGREE[d]
        _RUNS[d] = certify_fixed_point(d, N=N, K=N, delta=1e-10)
    return _RUNS[d]


@pytest.fixture(scope="session")
def run38():
    return certified_run(3.8)


@pytest.fixture(scope="session")
def run51():
    return certified_run(5.1)


@pytest.fixture(scope="session")
def E38(run38):
    assert run38.certificate.valid
    return run38.element


@pytest.fixture(scope="session")
def E51(run51):
    assert run51.certificate.valid
    return run51.element


# ---------------------------------------------------------------------------
# acceptance summary and opt-in long runs
# ---------------------------------------------------------------------------

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def record():
    def _record(criterion: str, passed: bool, detail: str):
        ACCEPTANCE_LINES.append(f"{criterion:<10} {'PASS' if passed else 'FAIL'}  {detail}")

    return _record


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run the long desk-scale acceptance runs")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip = pytest.mark.skip(reason="long desk-scale run; use --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
