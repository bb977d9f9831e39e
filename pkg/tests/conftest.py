import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from riskaudit.valuations import CoverageValuation, SingleItemValuation  # noqa: E402


@pytest.fixture
def abc():
    """Unit-weight universe {a, b, c}; item 1 covers {a, b}, item 2 covers {b, c}."""
    return CoverageValuation.from_sets({"1": ["a", "b"], "2": ["b", "c"]})


@pytest.fixture
def half_lottery():
    from riskaudit.mechanisms import make_lottery

    return make_lottery([(0, 0, 0), (5, 0.5, 1)])


@pytest.fixture
def pay2_lottery():
    """Item worth 10 allocated w.p. 1/2 for a flat payment of 2."""
    from riskaudit.mechanisms import make_lottery

    return make_lottery([(0, 0.5, 2)])


def S(x):
    return SingleItemValuation(x)
