from __future__ import annotations

import pytest
from hypothesis import settings

from pgdfit.electrothermal import solve_electrothermal
from pgdfit.engine import PgdConfig
from pgdfit.problems import model1d

settings.register_profile("pgdfit", max_examples=40, deadline=None)
settings.load_profile("pgdfit")

ROD_SETTINGS = PgdConfig(tol_fp=1e-7, tol_pgd=1e-2)


@pytest.fixture(scope="session")
def rod():
    return model1d()


@pytest.fixture(scope="session")
def rod_result(rod):
    return solve_electrothermal(rod.grid, rod.sigma, rod.lam, rod.bc_electric, rod.bc_thermal, ROD_SETTINGS)


# one line per acceptance criterion, filled by test_acceptance.py
ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
