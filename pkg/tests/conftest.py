import numpy as np
import pytest

from mpm.cases import TEMPERATURE_FORMULA
from mpm.dynamics import BuildingTemperature
from mpm.formula import FormulaSpec
from mpm.precompute import compute_tables

# normalized form of the five-conjunct textbook formula on a 1-D line;
# only the index structure matters for the combinatorics tests
EXAMPLE_FORMULA = """
HU1 = box(0,10); HG = box(2,8); HF = box(4,6); HU2 = box(5,7);
G[0,2] HU1 && G[3,7] (HU1 & HG) && F[5,15] HF && G[8,11] HG && HU1 U'[8,14] HU2
"""


@pytest.fixture(scope="session")
def example_spec():
    return FormulaSpec.from_text(EXAMPLE_FORMULA, dim=1)


@pytest.fixture(scope="session")
def temp_model():
    return BuildingTemperature()


@pytest.fixture(scope="session")
def temp_spec():
    return FormulaSpec.from_text(TEMPERATURE_FORMULA, dim=1)


@pytest.fixture(scope="session")
def temp_tables(temp_model, temp_spec):
    X = compute_tables(temp_model, temp_spec, 0.02, "feasible")
    Y = compute_tables(temp_model, temp_spec, 0.02, "satisfiable")
    return X, Y


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# one line per acceptance criterion, printed after the run
CRITERIA: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(CRITERIA):
        terminalreporter.write_line(CRITERIA[n])
