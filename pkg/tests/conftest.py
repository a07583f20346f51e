import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from vacerr import indicator_basis, ou_reference  # noqa: E402
from vacerr.oracles import double_well_grid_reference  # noqa: E402


@pytest.fixture(scope="session")
def ou_indicator():
    basis = indicator_basis(20, 0.1)
    return ou_reference(6, quadrature=basis), basis


@pytest.fixture(scope="session")
def grid_cache(tmp_path_factory):
    return tmp_path_factory.mktemp("grid-cache")


@pytest.fixture(scope="session")
def dw_grid(grid_cache):
    return double_well_grid_reference(cache_dir=grid_cache)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
