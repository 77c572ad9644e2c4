"""Finite-mode product-state machinery and effective-Hamiltonian elements.

Matrix elements use the total unperturbed energies of the states
involved. The transformation element between states m and n is

    z_mn = i hbar D_mn / (E_n - E_m),      D = mu . E(R),

and the effective Hamiltonian is ``(i / 2 hbar) [z, D]``. Diagonal
dipoles never enter: :meth:`AtomModel.dipole_matrix` zeroes them.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .core import (MODEL_UNITS, AtomModel, BasisSizeError, EnergyShellError, ModelError,
                   PhysicalConstants, same_constants)
from .response import alpha_dynamic, beta_state

DEFAULT_BASIS_CAP = 20000
SHELL_RTOL = 1e-10

# Value used for z on the energy shell inside the commutator path. It only
# ever multiplies exact zeros; tests perturb it to prove that.
_ON_SHELL_Z = 0.0


@dataclass(frozen=True)
class DiscreteModeSet:
    """Finite set of field modes evaluated at a few atom positions.

    Parameters
    ----------
    omegas : array (n_modes,)
        Angular frequencies, all positive.
    values : complex array (n_sites, n_modes, 3)
        Mode-function values at each site.
    labels : tuple of str
        Polarization/mode labels, one per mode.
    """

    omegas: np.ndarray
    values: np.ndarray
    labels: tuple = ()
    constants: PhysicalConstants = MODEL_UNITS

    def __post_init__(self):
        om = np.array(self.omegas, dtype=float).reshape(-1)
        vals = np.array(self.values, dtype=complex)
        if vals.ndim == 2:
            vals = vals[None]
        if vals.shape[1:] != (om.size, 3):
            raise ValueError(f"values shape {vals.shape} does not match {om.size} modes")
        if np.any(~(om > 0)):
            raise ValueError("all mode frequencies must be positive")
        labels = tuple(self.labels) or tuple(f"m{s}" for s in range(om.size))
        if len(labels) != om.size:
            raise ValueError("one label per mode required")
        om.setflags(write=False)
        vals.setflags(write=False)
        object.__setattr__(self, "omegas", om)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "labels", labels)

    @property
    def n_modes(self) -> int:
        return self.omegas.size

    @property
    def n_sites(self) -> int:
        return self.values.shape[0]

    @classmethod
    def from_real_profiles(cls, omegas, profiles, labels=(),
                           constants: PhysicalConstants = MODEL_UNITS):
        """Standing-wave style modes ``f = i g`` with real profiles ``g``."""
        return cls(omegas, 1j * np.asarray(profiles, dtype=float), labels, constants)

    def subset(self, indices) -> "DiscreteModeSet":
        idx = list(indices)
        return DiscreteModeSet(self.omegas[idx], self.values[:, idx],
                               tuple(self.labels[i] for i in idx), self.constants)


@dataclass(frozen=True, order=True)
class FockOccupation:
    """Photon counts per mode, stored densely as a tuple."""

    counts: tuple = ()

    def __post_init__(self):
        counts = tuple(int(n) for n in self.counts)
        if any(n < 0 for n in counts):
            raise ValueError("photon counts must be non-negative")
        object.__setattr__(self, "counts", counts)

    @classmethod
    def from_table(cls, table: dict, n_modes: int) -> "FockOccupation":
        counts = [0] * n_modes
        for s, n in table.items():
            counts[s] = n
        return cls(tuple(counts))

    @classmethod
    def vacuum(cls, n_modes: int) -> "FockOccupation":
        return cls((0,) * n_modes)

    @property
    def total(self) -> int:
        return sum(self.counts)

    def shifted(self, mode: int, delta: int) -> "FockOccupation | None":
        """Occupation with ``delta`` photons added to ``mode``; None if negative."""
        c = list(self.counts)
        c[mode] += delta
        if c[mode] < 0:
            return None
        return FockOccupation(tuple(c))

    def __str__(self):
        return "(" + ",".join(str(n) for n in self.counts) + ")"


@dataclass(frozen=True)
class ProductState:
    """An atomic level paired with a field occupation."""

    atom_level: int
    field: FockOccupation

    def energy(self, model: AtomModel, modes: DiscreteModeSet) -> float:
        return float(model.energies[self.atom_level]
                     + model.constants.hbar * np.dot(self.field.counts, modes.omegas))

    def describe(self, model: AtomModel) -> str:
        return f"|{self.field}; {model.labels[self.atom_level]}>"


def _occupations(n_modes: int, total: int):
    """All occupations with the given total, first mode filled first."""
    if n_modes == 0:
        if total == 0:
            yield ()
        return
    for first in range(total, -1, -1):
        for rest in _occupations(n_modes - 1, total - first):
            yield (first,) + rest


def basis_size(n_modes: int, max_total_photons: int, n_levels: int) -> int:
    return n_levels * math.comb(n_modes + max_total_photons, max_total_photons)


def enumerate_states(modes: DiscreteModeSet, max_total_photons: int, model: AtomModel,
                     cap: int = DEFAULT_BASIS_CAP) -> list:
    """All product states with at most ``max_total_photons`` photons.

    Ordered by total photon number, then occupation (first mode most
    occupied first), then atomic level.
    """
    if max_total_photons < 0:
        raise ValueError("max_total_photons must be >= 0")
    size = basis_size(modes.n_modes, max_total_photons, model.n_levels)
    if size > cap:
        raise BasisSizeError(f"basis of {size} states exceeds cap {cap}")
    out = []
    for total in range(max_total_photons + 1):
        for occ in _occupations(modes.n_modes, total):
            f = FockOccupation(occ)
            out.extend(ProductState(lvl, f) for lvl in range(model.n_levels))
    return out


def classify_photon_transition(src: FockOccupation, dst: FockOccupation) -> str:
    """Tag the photon-number change between two occupations.

    Returns one of ``"diagonal"``, ``"same-mode-pair"``,
    ``"two-mode-pair"``, ``"exchange"`` (one mode +1, another -1) or
    ``"forbidden"``.
    """
    if len(src.counts) != len(dst.counts):
        raise ValueError("occupations refer to different mode sets")
    diff = [b - a for a, b in zip(src.counts, dst.counts) if b != a]
    if not diff:
        return "diagonal"
    if len(diff) == 1 and abs(diff[0]) == 2:
        return "same-mode-pair"
    if len(diff) == 2 and all(abs(d) == 1 for d in diff):
        return "two-mode-pair" if diff[0] == diff[1] else "exchange"
    return "forbidden"


# ------------------------------------------------------------ elements

def _check_inputs(modes, model, site):
    same_constants(modes, model)
    if not 0 <= site < modes.n_sites:
        raise ValueError(f"site {site} out of range for {modes.n_sites} sites")


def coupling_element(bra: ProductState, ket: ProductState, modes: DiscreteModeSet,
                     model: AtomModel, site: int = 0, mu=None) -> complex:
    """``<bra| mu . E(R) |ket>`` with one-photon ladder factors."""
    if mu is None:
        mu = model.dipole_matrix()
    d = mu[bra.atom_level, ket.atom_level]
    if not d.any():
        return 0j
    a, b = bra.field.counts, ket.field.counts
    changed = [s for s in range(len(a)) if a[s] != b[s]]
    if len(changed) != 1:
        return 0j
    s = changed[0]
    f = modes.values[site, s]
    if a[s] == b[s] - 1:          # photon absorbed from ket
        return complex(np.dot(d, f) * math.sqrt(b[s]))
    if a[s] == b[s] + 1:          # photon emitted
        return complex(np.dot(d, np.conj(f)) * math.sqrt(b[s] + 1))
    return 0j


def _energy_scale(model: AtomModel, modes: DiscreteModeSet, *states) -> float:
    hw = model.constants.hbar * (modes.omegas.max() if modes.n_modes else 0.0)
    e = model.energies
    scale = max(np.max(np.abs(e)), e.max() - e.min(), hw)
    for st in states:
        scale = max(scale, abs(st.energy(model, modes)))
    return scale if scale > 0 else 1.0


def _on_shell(e1, e2, scale) -> bool:
    return abs(e1 - e2) < SHELL_RTOL * scale


def z_matrix_element(bra: ProductState, ket: ProductState, modes: DiscreteModeSet,
                     model: AtomModel, site: int = 0) -> complex:
    """Transformation-operator element ``i hbar D_mn / (E_n - E_m)``."""
    _check_inputs(modes, model, site)
    em, en = bra.energy(model, modes), ket.energy(model, modes)
    if _on_shell(em, en, _energy_scale(model, modes, bra, ket)):
        raise EnergyShellError(
            f"z undefined on the energy shell: {bra.describe(model)}, {ket.describe(model)}")
    d = coupling_element(bra, ket, modes, model, site)
    return 1j * model.constants.hbar * d / (en - em)


def _one_photon_neighbours(state: ProductState, n_modes: int, n_levels: int, mu):
    """States reachable from ``state`` by one application of mu . E."""
    for s in range(n_modes):
        for delta in (1, -1):
            occ = state.field.shifted(s, delta)
            if occ is None:
                continue
            for L in range(n_levels):
                if mu[state.atom_level, L].any():
                    yield ProductState(L, occ)


def heff_matrix_element(bra: ProductState, ket: ProductState, modes: DiscreteModeSet,
                        model: AtomModel, site: int = 0) -> complex:
    """Effective-Hamiltonian element from the explicit double sum.

    ``-1/2 sum_l D_ml D_ln [1/(E_l - E_m) - 1/(E_n - E_l)]``, summed over
    intermediate states one photon away from ``ket``.
    """
    _check_inputs(modes, model, site)
    mu = model.dipole_matrix()
    em, en = bra.energy(model, modes), ket.energy(model, modes)
    scale = _energy_scale(model, modes, bra, ket)
    if bra != ket and _on_shell(em, en, scale):
        raise EnergyShellError(
            f"pair on the energy shell: {bra.describe(model)}, {ket.describe(model)}")
    total = 0j
    for mid in _one_photon_neighbours(ket, modes.n_modes, model.n_levels, mu):
        d_ln = coupling_element(mid, ket, modes, model, site, mu)
        if d_ln == 0:
            continue
        d_ml = coupling_element(bra, mid, modes, model, site, mu)
        if d_ml == 0:
            continue
        el = mid.energy(model, modes)
        if _on_shell(el, em, scale) or _on_shell(el, en, scale):
            raise EnergyShellError(
                f"intermediate state {mid.describe(model)} is on the energy shell")
        total += d_ml * d_ln * (1.0 / (el - em) - 1.0 / (en - el))
    return -0.5 * total


def heff_via_commutator(bra: ProductState, ket: ProductState, modes: DiscreteModeSet,
                        model: AtomModel, site: int = 0, basis=None) -> complex:
    """Effective-Hamiltonian element as ``(i/2hbar) <bra|[z, D]|ket>``.

    The identity is resolved over the full enumerated basis with one
    photon more than the larger of the two states (or over ``basis``).
    """
    _check_inputs(modes, model, site)
    mu = model.dipole_matrix()
    hbar = model.constants.hbar
    em, en = bra.energy(model, modes), ket.energy(model, modes)
    if basis is None:
        top = max(bra.field.total, ket.field.total) + 1
        basis = enumerate_states(modes, top, model)
    scale = _energy_scale(model, modes, bra, ket)
    if bra != ket and _on_shell(em, en, scale):
        raise EnergyShellError(
            f"pair on the energy shell: {bra.describe(model)}, {ket.describe(model)}")

    def z_elem(a, ea, b, eb, factor):
        # z_ab. Diagonal entries enter as z_mm D_mn - D_mn z_nn and cancel
        # for any uniform convention; other on-shell entries must meet a
        # zero partner.
        if _on_shell(ea, eb, scale):
            if factor != 0 and a != b:
                raise EnergyShellError(
                    f"commutator needs z between on-shell states "
                    f"{a.describe(model)} and {b.describe(model)}")
            return _ON_SHELL_Z
        return 1j * hbar * coupling_element(a, b, modes, model, site, mu) / (eb - ea)

    total = 0j
    for mid in basis:
        el = mid.energy(model, modes)
        d_ln = coupling_element(mid, ket, modes, model, site, mu)
        d_ml = coupling_element(bra, mid, modes, model, site, mu)
        total += z_elem(bra, em, mid, el, d_ln) * d_ln
        total -= d_ml * z_elem(mid, el, ket, en, d_ml)
    return 1j / (2.0 * hbar) * total


def first_order_residual(bra: ProductState, ket: ProductState, modes: DiscreteModeSet,
                         model: AtomModel, site: int = 0) -> float:
    """``|D_mn + (i/hbar) [z, H0]_mn|`` for an off-shell pair."""
    d = coupling_element(bra, ket, modes, model, site)
    z = z_matrix_element(bra, ket, modes, model, site)
    comm = z * (ket.energy(model, modes) - bra.energy(model, modes))
    return abs(d + 1j / model.constants.hbar * comm)


def heff_diagonal_nphoton(modes: DiscreteModeSet, mode_index: int, n_photons: int,
                          model: AtomModel, state_index: int, site: int = 0) -> float:
    """Diagonal element with ``n_photons`` in one mode and vacuum elsewhere.

    ``-1/2 f^dagger (2 n alpha(w) + beta_N(w)) f`` from the response tensors.
    """
    _check_inputs(modes, model, site)
    w = modes.omegas[mode_index]
    f = modes.values[site, mode_index]
    beta = beta_state(model, state_index, w).components
    tensor = beta
    if n_photons:
        tensor = tensor + 2 * n_photons * alpha_dynamic(model, state_index, w).components
    return float(-0.5 * np.real(np.conj(f) @ tensor @ f))


def heff_offdiag_two_photon(modes: DiscreteModeSet, mode_a: int, mode_b: int,
                            model: AtomModel, state_index: int, site: int = 0) -> complex:
    """``<1_a 1_b, N|H|0, N>`` for two distinct modes initially empty."""
    _check_inputs(modes, model, site)
    if mode_a == mode_b:
        raise ValueError("two distinct modes required")
    wa, wb = modes.omegas[mode_a], modes.omegas[mode_b]
    s = alpha_dynamic(model, state_index, wa).components \
        + alpha_dynamic(model, state_index, wb).components
    fa = np.conj(modes.values[site, mode_a])
    fb = np.conj(modes.values[site, mode_b])
    return complex(-0.5 * fa @ s @ fb)


def mode_set_from_section(section, constants: PhysicalConstants, source: str = "<config>",
                          n_sites: int | None = None) -> DiscreteModeSet:
    """Build a mode set from a ``[modes]`` config section.

    Rows are ``omega g_x g_y g_z ...`` with one real profile triple per
    site; mode values are ``f = i g``. ``sites`` defaults to 1.
    """
    sites = n_sites if n_sites is not None else int(section.get("sites", "1"))
    rows = [r.replace(",", " ").split() for r in section.get("rows", "").splitlines()
            if r.strip()]
    if not rows:
        raise ModelError(f"{source}: no mode rows")
    try:
        data = np.array([[float(t) for t in r] for r in rows])
    except ValueError:
        raise ModelError(f"{source}: non-numeric mode row") from None
    if data.ndim != 2 or data.shape[1] != 1 + 3 * sites:
        raise ModelError(f"{source}: each mode row needs omega plus 3 numbers per site "
                         f"({sites} sites)")
    if np.any(data[:, 0] <= 0):
        raise ModelError(f"{source}: mode frequencies must be positive")
    profiles = data[:, 1:].reshape(len(rows), sites, 3).transpose(1, 0, 2)
    return DiscreteModeSet.from_real_profiles(data[:, 0], profiles, constants=constants)


def heff_matrix(modes: DiscreteModeSet, max_total_photons: int, model: AtomModel,
                site: int = 0):
    """Dense effective-Hamiltonian matrix over the enumerated basis.

    Returns ``(basis, matrix)``. Distinct pairs on the energy shell are
    undefined and are set to NaN.
    """
    basis = enumerate_states(modes, max_total_photons, model)
    n = len(basis)
    mat = np.full((n, n), np.nan + 0j)
    energies = [st.energy(model, modes) for st in basis]
    scale = max(_energy_scale(model, modes, *basis), 1e-300)
    for i, j in itertools.product(range(n), repeat=2):
        if i != j and _on_shell(energies[i], energies[j], scale):
            continue
        if j < i and not np.isnan(mat[j, i]):
            mat[i, j] = np.conj(mat[j, i])
            continue
        mat[i, j] = heff_matrix_element(basis[i], basis[j], modes, model, site)
    return basis, mat
