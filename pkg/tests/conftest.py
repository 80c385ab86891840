import datetime as dt

import numpy as np
import pytest
from hypothesis import settings

from mfqvar import simulate, timegrid

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


def month_days(year, month, n):
    """``n`` consecutive weekdays starting on the first of the month."""
    d = dt.date(year, month, 1)
    out = []
    while len(out) < n:
        if d.weekday() < 5:
            out.append(d)
        d += dt.timedelta(days=1)
    return out


@pytest.fixture
def toy_panel():
    """Two daily months (Mar, Apr 2001) after 24 monthly values."""
    rng = np.random.default_rng(7)
    days = month_days(2001, 3, 20) + month_days(2001, 4, 21)
    months = np.arange(np.datetime64("1999-03"), np.datetime64("2001-04"))
    return timegrid.panel_from_arrays(days, rng.standard_normal(len(days)), months,
                                      rng.standard_normal(months.shape[0]), k_lags=24,
                                      x=np.abs(rng.standard_normal(len(days))))


@pytest.fixture(scope="session")
def dgp_panel():
    return simulate.simulate_dgp(simulate.DgpConfig(n_daily=3000, seed=42))


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def report_criterion():
    """Record one ``PASS``/``FAIL`` line per acceptance criterion."""

    def record(number, ok, detail):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
