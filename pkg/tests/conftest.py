from pathlib import Path

import pytest

from nwdkit.providers import cache_read

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def fixtures_dir():
    return FIXTURES


@pytest.fixture
def shakespeare():
    """Snapshot of the Shakespeare/Macbeth/Hamlet page counts."""
    return cache_read(FIXTURES / "shakespeare_counts.json").snapshot()


ACCEPTANCE = {}
CRITERIA = {
    1: "Shakespeare counts regression",
    2: "monotonicity condition examples",
    3: "triangle violation witness",
    4: "randomized corpus properties",
    5: "gap pipeline on three blobs",
    6: "eigen and k-means kernels",
    7: "Wilson intervals",
    8: "synthetic classification",
    9: "normalizer swap substitute",
}


def record_criterion(number, ok, detail):
    ACCEPTANCE[number] = (bool(ok), detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, title in CRITERIA.items():
        ok, detail = ACCEPTANCE.get(number, (False, "did not run to completion"))
        terminalreporter.write_line(f"criterion {number} {'PASS' if ok else 'FAIL'}: {title} ({detail})")
