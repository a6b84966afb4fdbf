import pytest

from congruent import arith


@pytest.fixture(scope="session")
def table():
    return arith.default_table(3_000_000)
