import math

import numpy as np
import pytest
from hypothesis import given

from molqed.core import (ATOMIC_UNITS, MODEL_UNITS, AtomModel, ModelError, PhysicalConstants,
                         ShiftResult, UnitError, convert_energy, hydrogen_lyman_alpha,
                         isotropic_model, load_atom_model, parse_atom_model, same_constants,
                         validate_atom_model)

from conftest import atom_models


def test_two_level_model_accepted():
    m = AtomModel((("g", 0.0), ("e", 1.0)), {(0, 1): (0, 0, 1)})
    assert validate_atom_model(m) is m


def test_asymmetric_dipoles_rejected():
    m = AtomModel((("g", 0.0), ("e", 1.0)), {(0, 1): (0, 0, 1), (1, 0): (0, 0, 2)})
    with pytest.raises(ModelError, match="asymmetric"):
        validate_atom_model(m)


def test_ground_not_minimal_rejected():
    m = AtomModel((("a", 1.0), ("b", 0.0)), {(0, 1): (0, 0, 1)}, ground_index=0)
    with pytest.raises(ModelError, match="ground not minimal"):
        validate_atom_model(m)


@pytest.mark.parametrize("levels,dip", [
    ((("g", math.nan), ("e", 1.0)), {(0, 1): (0, 0, 1)}),
    ((("g", 0.0), ("e", 1.0)), {(0, 1): (0, math.nan, 1)}),
])
def test_nan_entries_rejected(levels, dip):
    with pytest.raises(ModelError, match="NaN"):
        validate_atom_model(AtomModel(levels, dip))


def test_degenerate_ground_rejected():
    m = AtomModel((("a", 0.0), ("b", 0.0)), {(0, 1): (1, 0, 0)})
    with pytest.raises(ModelError, match="ground not minimal"):
        validate_atom_model(m)


def test_dipole_matrix_symmetric_with_zero_diagonal():
    m = AtomModel((("g", 0.0), ("e", 1.0)), {(0, 1): (1, 2, 3), (1, 1): (5, 5, 5)})
    mu = validate_atom_model(m).dipole_matrix()
    assert np.array_equal(mu[0, 1], mu[1, 0])
    assert not mu[1, 1].any()


@given(atom_models())
def test_validation_idempotent(model):
    assert validate_atom_model(validate_atom_model(model)) == model


def test_model_is_immutable(two_level):
    with pytest.raises(Exception):
        two_level.ground_index = 1
    with pytest.raises(TypeError):
        two_level.dipoles[(0, 1)] = (1, 1, 1)


@pytest.mark.parametrize("value,src,dst,expected", [
    (1.0, "eV", "eV", 1.0),
    (1.0, "eV", "J", 1.602176634e-19),
    (0.0, "J", "eV", 0.0),
])
def test_convert_energy_examples(value, src, dst, expected):
    assert convert_energy(value, src, dst) == expected


def test_convert_energy_roundtrip_and_model_units():
    x = convert_energy(2.5, "model", "eV", ATOMIC_UNITS)
    assert x == pytest.approx(2.5 * 27.211386245988, rel=1e-12)
    assert convert_energy(x, "eV", "model", ATOMIC_UNITS) == pytest.approx(2.5, rel=1e-15)


def test_convert_energy_unknown_tag():
    with pytest.raises(UnitError):
        convert_energy(1.0, "erg", "J")


def test_constants_positive():
    with pytest.raises(UnitError):
        PhysicalConstants("bad", 1.0, 0.0, 1.0, 1.0, 1.0)


def test_mixed_unit_systems_detected():
    with pytest.raises(UnitError, match="mixed"):
        same_constants(isotropic_model(), hydrogen_lyman_alpha())
    assert same_constants(isotropic_model(), isotropic_model()) is MODEL_UNITS


def test_shift_result_rejects_negative_convergence():
    with pytest.raises(ValueError):
        ShiftResult(1.0, "oracle", -1.0)


def test_hydrogen_dipole_value():
    m = hydrogen_lyman_alpha()
    mu = m.dipole_matrix()
    assert mu[0, 3, 2] == pytest.approx(0.744936, abs=1e-6)
    assert m.energies[1] == 0.375


CFG = """
[atom]
units = model
labels = g, e, f
energies = 0.0, 1.0, 1.5
dipoles =
    0 1  0.0 0.0 1.0
    1 2  0.5 0.0 0.0
"""


def test_parse_config():
    m = parse_atom_model(CFG)
    assert m.labels == ("g", "e", "f")
    assert m.dipole_matrix()[2, 1, 0] == 0.5


def test_parse_rejects_duplicate_rows():
    bad = CFG.replace("1 2  0.5 0.0 0.0", "0 1  0.0 0.0 1.0")
    with pytest.raises(ModelError, match="duplicate"):
        parse_atom_model(bad)


def test_parse_accepts_consistent_reverse_row():
    ok = CFG.replace("1 2  0.5 0.0 0.0", "1 0  0.0 0.0 1.0")
    parse_atom_model(ok)


@pytest.mark.parametrize("text,msg", [
    ("[other]\nx=1", "missing \\[atom\\]"),
    ("[atom]\nenergies = 0, x", "bad energies"),
    ("[atom]\nenergies = 0, 1\ndipoles = 0 1 0 0", "i j mx my mz"),
    ("[atom]\nunits = cgs\nenergies = 0, 1", "unknown unit system"),
])
def test_parse_errors(text, msg):
    with pytest.raises((ModelError, UnitError), match=msg):
        parse_atom_model(text)


def test_load_shipped_configs():
    from pathlib import Path
    root = Path(__file__).resolve().parents[1] / "configs"
    h = load_atom_model(root / "hydrogen_lyman.cfg")
    ref = hydrogen_lyman_alpha()
    assert h.constants == ATOMIC_UNITS
    assert np.allclose(h.dipole_matrix(), ref.dipole_matrix(), rtol=0, atol=1e-15)
