from __future__ import annotations

from pathlib import Path

import pytest

from eventdur.prior_recovery import build_table

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def minute_table():
    """Train-scenario table: lambda 20..200 min, t_past 0..60 min, default sample count."""
    return build_table(20, 200, 1, range(0, 61), sample_count=1000, seed=7)


@pytest.fixture(scope="session")
def small_table():
    return build_table(20, 60, 2, range(0, 40), sample_count=500, seed=3)
