import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from molqed.core import IsotropyError, ModelError, PoleError, isotropic_model, two_level_model
from molqed.response import (alpha_dynamic, alpha_imaginary, beta_ground, beta_ground_array,
                             beta_imaginary, beta_isotropic_avg, beta_state, induced_dipole,
                             is_isotropic, isotropic_strengths, transition_groups)

from conftest import atom_models


def test_two_level_static_values(two_level):
    b = beta_ground(two_level, 0.0).components
    assert b[2, 2] == 2.0
    assert b[0, 0] == 0.0
    assert alpha_dynamic(two_level, 0, 0.0).components[2, 2] == 2.0


def test_two_level_frozen_values(two_level):
    assert beta_ground(two_level, 0.5).components[2, 2] == pytest.approx(4.0 / 3.0, rel=1e-15)
    assert alpha_dynamic(two_level, 0, 0.5).components[2, 2] == pytest.approx(8.0 / 3.0, rel=1e-15)
    assert alpha_imaginary(two_level, 1.0)[2, 2] == pytest.approx(1.0, rel=1e-15)


def test_beta_pole_for_excited_state(two_level):
    # from the excited level, E_LN = -1 so hbar*omega = 1 is a pole
    with pytest.raises(PoleError, match="e->g"):
        beta_state(two_level, 1, 1.0)


def test_alpha_resonance_raises(two_level):
    with pytest.raises(PoleError, match="resonant"):
        alpha_dynamic(two_level, 0, 1.0)


def test_damping_removes_pole(two_level):
    a = alpha_dynamic(two_level, 0, 1.0, gamma=0.01).components[2, 2]
    assert np.isfinite(a) and a.imag > 0


def test_invalid_arguments(two_level):
    with pytest.raises(ValueError):
        beta_ground(two_level, -1.0)
    with pytest.raises(ValueError):
        alpha_dynamic(two_level, 0, 0.5, gamma=-0.1)
    with pytest.raises(ModelError):
        beta_state(two_level, 5, 0.0)


@settings(max_examples=60, deadline=None)
@given(atom_models())
def test_static_beta_equals_static_alpha(model):
    b = beta_ground(model, 0.0).components
    a = alpha_dynamic(model, model.ground_index, 0.0).components
    assert np.allclose(b, a, rtol=0, atol=1e-12 * np.linalg.norm(a))


@settings(max_examples=60, deadline=None)
@given(atom_models(), st.floats(0.0, 10.0))
def test_alpha_is_even_part_of_beta(model, w):
    if np.min(np.abs(np.diff(model.energies)[None, :] - w)) < 1e-3 or \
            np.min(np.abs(model.energies[1:] - w)) < 1e-3:
        return
    b = beta_ground_array(model, np.array([w, -w]))
    a = alpha_dynamic(model, model.ground_index, w).components
    assert np.allclose(0.5 * (b[0] + b[1]), a, rtol=1e-9, atol=1e-9 * np.abs(a).max())


@settings(max_examples=60, deadline=None)
@given(atom_models(), st.floats(0.0, 50.0))
def test_ground_response_symmetric_psd_and_monotone(model, xi):
    a = alpha_imaginary(model, np.array([xi, xi + 0.5]))
    assert np.allclose(a[0], a[0].T)
    scale = max(np.abs(a[0]).max(), 1e-300)
    assert np.linalg.eigvalsh(a[0]).min() >= -1e-12 * scale
    # alpha(i xi) decreases in xi in the positive-semidefinite order
    assert np.linalg.eigvalsh(a[0] - a[1]).min() >= -1e-12 * scale


@settings(max_examples=40, deadline=None)
@given(atom_models(), st.floats(0.0, 20.0))
def test_beta_imaginary_hermitian_real_part(model, xi):
    b = beta_imaginary(model, xi)
    assert np.allclose(b, b.T)
    assert np.allclose(b.real, alpha_imaginary(model, xi), rtol=1e-12, atol=1e-14)


@settings(max_examples=40, deadline=None)
@given(atom_models(), st.floats(0.0, 4.0))
def test_vectorized_beta_matches_scalar(model, w):
    if np.min(np.abs(model.energies[1:] + w)) == 0:
        return
    vec = beta_ground_array(model, np.array([w]))[0]
    assert np.allclose(vec, beta_ground(model, w).components, rtol=1e-14, atol=0)


def test_kramers_kronig_damped_alpha():
    integrate = pytest.importorskip("scipy.integrate")
    model = two_level_model(1.0, (0.3, 0.0, 0.9))
    gamma = 0.05

    def im_alpha(w):
        a = alpha_dynamic(model, 0, abs(w), gamma).components.trace()
        return np.sign(w) * a.imag

    w0 = 0.6
    W = 400.0
    pv, _ = integrate.quad(im_alpha, -W, W, weight="cauchy", wvar=w0, limit=400)
    re = alpha_dynamic(model, 0, w0, gamma).components.trace().real
    assert pv / np.pi == pytest.approx(re, rel=1e-5)


def test_induced_dipole_along_field(two_level):
    p = induced_dipole(two_level, (0, 0, 1.0), 0.5)
    assert p == pytest.approx([0, 0, 4.0 / 3.0])
    with pytest.raises(ValueError):
        induced_dipole(two_level, (1, 0), 0.5)


def test_isotropic_strengths():
    m = isotropic_model(1.0, 0.5)
    (e, s), = isotropic_strengths(m)
    assert e == 1.0 and s == pytest.approx(0.5)
    assert beta_isotropic_avg(m, 0.0) == pytest.approx(1.0)
    assert is_isotropic(m)


def test_anisotropic_rejected(two_level):
    assert not is_isotropic(two_level)
    with pytest.raises(IsotropyError, match="isotropic polarizability"):
        isotropic_strengths(two_level)


def test_transition_groups_merge_degenerate_levels():
    groups = transition_groups(isotropic_model(2.0, 1.0))
    assert len(groups) == 1
    assert np.allclose(groups[0][1], np.eye(3))
