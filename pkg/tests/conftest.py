import os

import pytest

from evoroute.expr import parse_expr

SCENARIO_DIR = os.path.join(os.path.dirname(__file__), "..", "scenarios")

# the example weight formula: (1.5*threshold)^2 / (1.5*threshold - util)^2
EXAMPLE_FORMULA = (
    "(((1.5 * threshold) * (1.5 * threshold)) / "
    "(((1.5 * threshold) - util) * ((1.5 * threshold) - util)))"
)


def scenario_path(name: str) -> str:
    return os.path.join(SCENARIO_DIR, f"{name}.scenario")


@pytest.fixture
def example_expr():
    return parse_expr(EXAMPLE_FORMULA)
