import numpy as np
import pytest
from hypothesis import strategies as st

from molqed.core import AtomModel, two_level_model, validate_atom_model

CRITERIA = {}


def record_criterion(number: int, passed: bool, detail: str):
    CRITERIA[number] = (passed, detail)


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(CRITERIA):
        passed, detail = CRITERIA[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if passed else 'FAIL'}  {detail}")


def random_model(rng, n_levels=None, gap_range=(0.3, 2.0)) -> AtomModel:
    """Random valid model with distinct excited energies and a full dipole table."""
    n = n_levels or int(rng.integers(2, 6))
    energies = np.concatenate([[0.0], np.sort(rng.uniform(*gap_range, n - 1))])
    dip = {(i, j): tuple(rng.normal(size=3)) for i in range(n) for j in range(i + 1, n)}
    levels = tuple((f"L{i}", float(e)) for i, e in enumerate(energies))
    return validate_atom_model(AtomModel(levels, dip))


@st.composite
def atom_models(draw, max_levels=4):
    n = draw(st.integers(2, max_levels))
    gaps = draw(st.lists(st.floats(0.05, 5.0), min_size=n - 1, max_size=n - 1))
    energies = np.concatenate([[0.0], np.cumsum(gaps)])
    comp = st.floats(-2.0, 2.0, allow_nan=False)
    dip = {}
    for i in range(n):
        for j in range(i + 1, n):
            dip[(i, j)] = tuple(draw(st.lists(comp, min_size=3, max_size=3)))
    levels = tuple((f"L{i}", float(e)) for i, e in enumerate(energies))
    return validate_atom_model(AtomModel(levels, dip))


@pytest.fixture
def two_level():
    return two_level_model(1.0, (0.0, 0.0, 1.0))


@pytest.fixture
def rng():
    return np.random.default_rng(20261015)
