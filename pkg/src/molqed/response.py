"""Atomic response tensors built from a sum over levels."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import AtomModel, IsotropyError, ModelError, PoleError

POLE_RTOL = 1e-12


@dataclass(frozen=True)
class ResponseTensor:
    """A 3x3 response tensor at one angular frequency.

    ``kind`` is one of ``"beta-ground"``, ``"beta-state"``, ``"alpha"``.
    Components are complex only when ``damping > 0``.
    """

    omega: float
    components: np.ndarray
    kind: str
    damping: float = 0.0

    def __post_init__(self):
        comp = np.array(self.components)
        comp.setflags(write=False)
        object.__setattr__(self, "components", comp)

    def contract(self, left, right=None):
        """Return ``left^T T right`` (``right`` defaults to ``left``)."""
        right = left if right is None else right
        return np.asarray(left) @ self.components @ np.asarray(right)

    @property
    def trace(self):
        return np.trace(self.components)


def _check_state(model: AtomModel, state: int) -> int:
    if not 0 <= state < model.n_levels:
        raise ModelError(f"state index {state} out of range")
    return state


def _check_omega(omega: float, gamma: float):
    if not omega >= 0:
        raise ValueError(f"omega must be >= 0, got {omega}")
    if not gamma >= 0:
        raise ValueError(f"damping must be >= 0, got {gamma}")


def _transitions(model: AtomModel, state: int):
    """Yield (L, E_L - E_state, outer product mu mu) for every coupled L."""
    mu = model.dipole_matrix()
    energies = model.energies
    for L in range(model.n_levels):
        if L == state or not np.any(mu[state, L]):
            continue
        yield L, energies[L] - energies[state], np.outer(mu[state, L], mu[L, state])


def _label(model, a, b):
    return f"{model.labels[a]}->{model.labels[b]}"


def beta_state(model: AtomModel, state_index: int, omega: float,
               gamma: float = 0.0) -> ResponseTensor:
    """Pole-free-for-the-ground-state response ``sum_L 2 mu mu / (E_LN + hbar w)``."""
    _check_omega(omega, gamma)
    _check_state(model, state_index)
    hbar = model.constants.hbar
    hw = hbar * (omega + 1j * gamma) if gamma > 0 else hbar * omega
    out = np.zeros((3, 3), dtype=complex if gamma > 0 else float)
    for L, e_ln, mm in _transitions(model, state_index):
        denom = e_ln + hbar * omega
        if gamma == 0 and (denom == 0 or abs(denom) < POLE_RTOL * abs(e_ln)):
            raise PoleError(
                f"beta pole: hbar*omega={hbar * omega} hits transition "
                f"{_label(model, state_index, L)} (E_LN={e_ln})")
        out = out + 2.0 * mm / (e_ln + hw)
    return ResponseTensor(omega, out, "beta-state", gamma)


def beta_ground(model: AtomModel, omega: float) -> ResponseTensor:
    res = beta_state(model, model.ground_index, omega)
    return ResponseTensor(omega, res.components, "beta-ground", 0.0)


def alpha_dynamic(model: AtomModel, state_index: int, omega: float,
                  gamma: float = 0.0) -> ResponseTensor:
    """Dynamic polarizability ``sum_L 2 E_LN mu mu / (E_LN^2 - (hbar w)^2)``.

    With ``gamma > 0`` the frequency is replaced by ``omega + i gamma``.
    """
    _check_omega(omega, gamma)
    _check_state(model, state_index)
    hbar = model.constants.hbar
    hw = hbar * (omega + 1j * gamma) if gamma > 0 else hbar * omega
    out = np.zeros((3, 3), dtype=complex if gamma > 0 else float)
    for L, e_ln, mm in _transitions(model, state_index):
        if e_ln == 0:
            continue
        if gamma == 0 and abs(hbar * omega - abs(e_ln)) < POLE_RTOL * abs(e_ln):
            raise PoleError(
                f"alpha pole: hbar*omega={hbar * omega} is resonant with "
                f"{_label(model, state_index, L)} (|E_LN|={abs(e_ln)})")
        out = out + 2.0 * e_ln * mm / (e_ln * e_ln - hw * hw)
    return ResponseTensor(omega, out, "alpha", gamma)


def alpha_imaginary(model: AtomModel, xi, state_index: int | None = None) -> np.ndarray:
    """Polarizability at imaginary frequency ``i xi``; vectorized over ``xi``.

    Returns an array of shape ``xi.shape + (3, 3)``. Real and pole-free
    for the ground state.
    """
    state = model.ground_index if state_index is None else state_index
    xi = np.asarray(xi, dtype=float)
    hbar = model.constants.hbar
    out = np.zeros(xi.shape + (3, 3))
    for _, e_ln, mm in _transitions(model, state):
        if e_ln == 0:
            continue
        w = 2.0 * e_ln / (e_ln * e_ln + (hbar * xi) ** 2)
        out = out + w[..., None, None] * mm
    return out


def beta_imaginary(model: AtomModel, xi) -> np.ndarray:
    """Ground-state beta at complex frequency ``i xi``; complex, vectorized."""
    xi = np.asarray(xi, dtype=float)
    hbar = model.constants.hbar
    out = np.zeros(xi.shape + (3, 3), dtype=complex)
    for _, e_ln, mm in _transitions(model, model.ground_index):
        out = out + (2.0 / (e_ln + 1j * hbar * xi))[..., None, None] * mm
    return out


def beta_ground_array(model: AtomModel, omegas) -> np.ndarray:
    """Ground-state beta on an array of real frequencies; shape omegas.shape+(3,3)."""
    omegas = np.asarray(omegas, dtype=float)
    hbar = model.constants.hbar
    out = np.zeros(omegas.shape + (3, 3))
    for _, e_ln, mm in _transitions(model, model.ground_index):
        out = out + (2.0 / (e_ln + hbar * omegas))[..., None, None] * mm
    return out


def beta_isotropic_avg(model: AtomModel, omega: float) -> float:
    """Orientation average ``trace(beta_ground) / 3``."""
    return float(beta_ground(model, omega).trace / 3.0)


def induced_dipole(model: AtomModel, field_component, omega: float) -> np.ndarray:
    """Dipole induced by a field component oscillating at ``omega``."""
    field = np.asarray(field_component, dtype=float)
    if field.shape != (3,):
        raise ValueError("field component must be a 3-vector")
    return beta_ground(model, omega).components @ field


def transition_groups(model: AtomModel, state_index: int | None = None):
    """Group transitions from a level by energy.

    Returns a list of ``(E_LN, summed mu mu tensor)`` with the energies
    sorted ascending. Levels degenerate with the reference are skipped.
    """
    state = model.ground_index if state_index is None else state_index
    groups = {}
    for _, e_ln, mm in _transitions(model, state):
        if e_ln == 0:
            continue
        groups[e_ln] = groups.get(e_ln, 0) + mm
    return sorted(groups.items())


def isotropic_strengths(model: AtomModel, rtol: float = 1e-10):
    """Return ``[(E, s)]`` with ``alpha(w) = sum 2 E s / (E^2 - w^2)`` as a scalar.

    Raises
    ------
    IsotropyError
        If any transition group has a tensor not proportional to identity.
    """
    out = []
    for e, mm in transition_groups(model):
        s = np.trace(mm) / 3.0
        if np.max(np.abs(mm - s * np.eye(3))) > rtol * max(abs(s), 1e-300):
            raise IsotropyError("continuum path requires isotropic polarizability")
        out.append((e, s))
    return out


def is_isotropic(model: AtomModel) -> bool:
    try:
        isotropic_strengths(model)
    except IsotropyError:
        return False
    return True
