"""Brute-force reference calculations on truncated Fock bases.

The full multipolar coupling ``-sum_X mu_X . E(R_X)`` is assembled as a
dense matrix, then treated by Rayleigh-Schroedinger perturbation theory
or exact diagonalization. Terms belonging to particular atoms are
separated by multilinear bookkeeping: each correction is expanded as a
sum over "words" naming which atom's coupling sits in each slot, so
self-energy pieces drop out exactly instead of by subtraction.
"""

from __future__ import annotations

import configparser
import itertools
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import (AtomModel, BasisSizeError, DegeneracyError, ModelError, QEDError,
                   load_atom_model, same_constants)
from .discrete import (DEFAULT_BASIS_CAP, DiscreteModeSet, FockOccupation, _occupations,
                       enumerate_states, heff_matrix_element, mode_set_from_section)
from .shifts import dispersion_three_body, dispersion_two_atom_discrete

DEGENERACY_RTOL = 1e-9
HERMITIAN_RTOL = 1e-12


@dataclass(frozen=True)
class MultiState:
    """Levels of several atoms plus a field occupation."""

    levels: tuple
    field: FockOccupation


@dataclass(frozen=True)
class DenseOperator:
    basis: tuple
    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "basis", tuple(self.basis))

    def __add__(self, other: "DenseOperator") -> "DenseOperator":
        if self.basis != other.basis:
            raise ValueError("operators act on different bases")
        return DenseOperator(self.basis, self.matrix + other.matrix)

    def is_hermitian(self, rtol: float = HERMITIAN_RTOL) -> bool:
        m = self.matrix
        scale = max(np.max(np.abs(m)), 1e-300)
        return bool(np.max(np.abs(m - m.conj().T)) <= rtol * scale)


# ------------------------------------------------------------ builders

def multi_atom_basis(modes: DiscreteModeSet, models, max_photons: int,
                     cap: int = DEFAULT_BASIS_CAP) -> tuple:
    n_level_combos = int(np.prod([m.n_levels for m in models]))
    n_occ = sum(1 for t in range(max_photons + 1) for _ in _occupations(modes.n_modes, t))
    if n_level_combos * n_occ > cap:
        raise BasisSizeError(f"basis of {n_level_combos * n_occ} states exceeds cap {cap}")
    level_sets = list(itertools.product(*[range(m.n_levels) for m in models]))
    out = []
    for t in range(max_photons + 1):
        for occ in _occupations(modes.n_modes, t):
            f = FockOccupation(occ)
            out.extend(MultiState(lv, f) for lv in level_sets)
    return tuple(out)


def build_hamiltonian(modes: DiscreteModeSet, atoms, max_photons: int,
                      cap: int = DEFAULT_BASIS_CAP, split: bool = False):
    """Unperturbed and interaction operators on a truncated product basis.

    Parameters
    ----------
    atoms : sequence of (AtomModel, site index)
    split : bool
        If True, return ``(H0, [V_X for each atom])`` instead of the sum.
    """
    models = [m for m, _ in atoms]
    same_constants(modes, *models)
    hbar = models[0].constants.hbar
    basis = multi_atom_basis(modes, models, max_photons, cap)
    index = {st: i for i, st in enumerate(basis)}
    n = len(basis)
    h0 = np.array([sum(m.energies[l] for m, l in zip(models, st.levels))
                   + hbar * np.dot(st.field.counts, modes.omegas) for st in basis])
    parts = []
    for x, (model, site) in enumerate(atoms):
        mu = model.dipole_matrix()
        v = np.zeros((n, n), dtype=complex)
        for j, st in enumerate(basis):
            lx = st.levels[x]
            for s in range(modes.n_modes):
                f = modes.values[site, s]
                ns = st.field.counts[s]
                for delta in (1, -1):
                    occ = st.field.shifted(s, delta)
                    if occ is None:
                        continue
                    amp = np.sqrt(ns + 1) * f.conj() if delta == 1 else np.sqrt(ns) * f
                    for L in range(model.n_levels):
                        d = mu[L, lx]
                        if not d.any():
                            continue
                        levels = st.levels[:x] + (L,) + st.levels[x + 1:]
                        i = index.get(MultiState(levels, occ))
                        if i is not None:
                            v[i, j] -= np.dot(d, amp)
        parts.append(DenseOperator(basis, v))
    H0 = DenseOperator(basis, np.diag(h0))
    if split:
        return H0, parts
    total = parts[0]
    for p in parts[1:]:
        total = total + p
    return H0, total


def exact_diagonalize(H: DenseOperator):
    """Ascending eigenvalues and the ground eigenvector."""
    if not H.is_hermitian(1e-10):
        raise QEDError("exact_diagonalize needs a Hermitian matrix")
    w, v = np.linalg.eigh(H.matrix)
    return w, v[:, 0]


# ------------------------------------------------------------ perturbation theory

def _resolvent(H0: DenseOperator, state: int):
    """Diagonal of ``Q / (E_0 - H0)`` with a degeneracy check."""
    e = np.real(np.diag(H0.matrix))
    e0 = e[state]
    gaps = e0 - e
    scale = max(np.max(np.abs(e)), 1e-300)
    for k in np.flatnonzero(np.abs(gaps) < DEGENERACY_RTOL * scale):
        if k != state:
            raise DegeneracyError(
                f"state {H0.basis[state]} is degenerate with {H0.basis[k]}")
    r = np.zeros_like(gaps)
    mask = np.arange(e.size) != state
    r[mask] = 1.0 / gaps[mask]
    return r


def _terms_multilinear(r, state, V1, V2, V3, V4):
    """Fourth-order RS energy as a multilinear form in four couplings."""
    e = np.zeros(r.size, dtype=complex)
    e[state] = 1.0
    bra = lambda V: e @ V                       # <0| V
    ket = lambda V: V @ e                       # V |0>
    rr = r * r
    t1 = bra(V1) @ (r * (V2 @ (r * (V3 @ (r * ket(V4))))))
    t2 = -(bra(V1) @ (r * ket(V2))) * (bra(V3) @ (rr * ket(V4)))
    t3 = -V1[state, state] * (bra(V2) @ (rr * (V3 @ (r * ket(V4))))
                              + bra(V2) @ (r * (V3 @ (rr * ket(V4)))))
    t4 = V1[state, state] * V2[state, state] * (bra(V3) @ (rr * r * ket(V4)))
    return t1 + t2 + t3 + t4


def rs_perturbation_energy(H0: DenseOperator, V: DenseOperator, state: int,
                           order: int = 4) -> list:
    """Rayleigh-Schroedinger corrections ``[E1, ..., E_order]`` (order <= 4).

    Sum-over-states formulas with ``R = Q / (E_0 - H0)``::

        E2 = <V R V>
        E3 = <V R V R V> - E1 <V R^2 V>
        E4 = <V R V R V R V> - E2 <V R^2 V>
             - E1 (<V R^2 V R V> + <V R V R^2 V>) + E1^2 <V R^3 V>
    """
    if not 1 <= order <= 4:
        raise ValueError("order must be between 1 and 4")
    r = _resolvent(H0, state)
    v = V.matrix
    e1 = v[state, state]
    vk = v[:, state]
    vb = v[state, :]
    out = [e1]
    if order >= 2:
        out.append(vb @ (r * vk))
    if order >= 3:
        out.append(vb @ (r * (v @ (r * vk))) - e1 * (vb @ (r * r * vk)))
    if order >= 4:
        out.append(_terms_multilinear(r, state, v, v, v, v))
    return [complex(x).real if abs(complex(x).imag) <= 1e-12 * max(abs(x), 1e-300)
            else complex(x) for x in out]


def fourth_order_cross(H0: DenseOperator, parts, state: int, counts) -> float:
    """Part of E4 with ``counts[X]`` factors of atom X's coupling.

    Sums the multilinear fourth-order form over every arrangement of the
    atom labels with the requested multiplicities.
    """
    if sum(counts) != 4:
        raise ValueError("counts must add up to 4")
    r = _resolvent(H0, state)
    labels = [x for x, c in enumerate(counts) for _ in range(c)]
    total = 0j
    for word in set(itertools.permutations(labels)):
        total += _terms_multilinear(r, state, *(parts[x].matrix for x in word))
    return float(np.real(total))


def rs_graded(H0: DenseOperator, parts, state: int, order: int) -> list:
    """RS corrections split by how many times each coupling appears.

    Returns a list whose entry ``n - 1`` maps exponent tuples (one count
    per coupling, summing to ``n``) to the matching part of ``E_n``. Uses
    the recursion ``E_n = <0|V|psi_{n-1}>`` and
    ``psi_n = R (V psi_{n-1} - sum_j E_j psi_{n-j})`` with intermediate
    normalization, carried out separately for every exponent tuple.
    """
    r = _resolvent(H0, state)
    mats = [p.matrix for p in parts]
    m = len(mats)
    zero = (0,) * m
    unit = [tuple(int(i == x) for i in range(m)) for x in range(m)]
    vec0 = np.zeros(r.size, dtype=complex)
    vec0[state] = 1.0
    psi = [{zero: vec0}]
    energies = []

    def sub(a, b):
        d = tuple(i - j for i, j in zip(a, b))
        return d if min(d) >= 0 else None

    for n in range(1, order + 1):
        keys = [k for k in itertools.product(range(n + 1), repeat=m) if sum(k) == n]
        en, pn = {}, {}
        for key in keys:
            acc_e = 0j
            acc_v = np.zeros(r.size, dtype=complex)
            for x in range(m):
                prev = sub(key, unit[x])
                if prev is None or prev not in psi[n - 1]:
                    continue
                w = mats[x] @ psi[n - 1][prev]
                acc_e += w[state]
                acc_v += w
            en[key] = acc_e
        for key in keys:
            acc_v = np.zeros(r.size, dtype=complex)
            for x in range(m):
                prev = sub(key, unit[x])
                if prev is not None and prev in psi[n - 1]:
                    acc_v += mats[x] @ psi[n - 1][prev]
            for j in range(1, n):
                for ekey, ev in energies[j - 1].items():
                    rest = sub(key, ekey)
                    if rest is not None and rest in psi[n - j]:
                        acc_v -= ev * psi[n - j][rest]
            pn[key] = r * acc_v
        energies.append(en)
        psi.append(pn)
    return [{k: float(np.real(v)) for k, v in e.items()} for e in energies]


# ------------------------------------------------------------ comparisons

@dataclass(frozen=True)
class ComparisonReport:
    brute_force: float
    effective: float
    relative_difference: float
    basis_size: int
    runtime_s: float
    details: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {"brute_force_energy": self.brute_force,
                "effective_energy": self.effective,
                "relative_difference": self.relative_difference,
                "basis_size": self.basis_size,
                "runtime_s": self.runtime_s,
                **self.details}


def _relative(a: float, b: float) -> float:
    scale = max(abs(a), abs(b))
    return abs(a - b) / scale if scale > 0 else 0.0


def compare_effective_vs_fourth_order(model_a: AtomModel, model_b: AtomModel,
                                      modes: DiscreteModeSet, sites=(0, 1)) -> ComparisonReport:
    """Two-atom cross energy: fourth-order brute force vs effective second order.

    (a) the part of the fourth-order RS energy with two couplings of each
    atom, from the full multipolar interaction on a two-photon basis;
    (b) :func:`~molqed.shifts.dispersion_two_atom_discrete`.
    """
    if modes.n_modes > 10:
        raise ValueError("comparison limited to 10 modes")
    if model_a.n_levels > 3 or model_b.n_levels > 3:
        raise ValueError("comparison limited to 3 levels per atom")
    t0 = time.perf_counter()
    atoms = [(model_a, sites[0]), (model_b, sites[1])]
    H0, parts = build_hamiltonian(modes, atoms, 2, split=True)
    ground = H0.basis.index(MultiState((model_a.ground_index, model_b.ground_index),
                                       FockOccupation.vacuum(modes.n_modes)))
    brute = fourth_order_cross(H0, parts, ground, (2, 2))
    eff = dispersion_two_atom_discrete(model_a, model_b, modes, sites).value
    return ComparisonReport(brute, eff, _relative(brute, eff), len(H0.basis),
                            time.perf_counter() - t0)


def compare_three_body(models, modes: DiscreteModeSet, sites=(0, 1, 2)) -> ComparisonReport:
    """Three-atom term: sixth-order brute force vs effective third order."""
    t0 = time.perf_counter()
    atoms = list(zip(models, sites))
    H0, parts = build_hamiltonian(modes, atoms, 3, split=True)
    ground = H0.basis.index(MultiState(tuple(m.ground_index for m in models),
                                       FockOccupation.vacuum(modes.n_modes)))
    brute = rs_graded(H0, parts, ground, 6)[5][(2, 2, 2)]
    eff = dispersion_three_body(models, modes, sites).value
    return ComparisonReport(brute, eff, _relative(brute, eff), len(H0.basis),
                            time.perf_counter() - t0)


def single_atom_heff_operator(modes: DiscreteModeSet, model: AtomModel, max_photons: int,
                              site: int = 0) -> DenseOperator:
    """Effective Hamiltonian of one atom on its product basis.

    Distinct pairs on the energy shell are left at zero.
    """
    basis = enumerate_states(modes, max_photons, model)
    energies = np.array([st.energy(model, modes) for st in basis])
    scale = max(np.max(np.abs(energies)), 1e-300)
    n = len(basis)
    m = np.zeros((n, n), dtype=complex)
    for i, j in itertools.product(range(n), repeat=2):
        if i != j and abs(energies[i] - energies[j]) < 1e-10 * scale:
            continue
        m[i, j] = heff_matrix_element(basis[i], basis[j], modes, model, site)
    return DenseOperator(basis, m)


# ------------------------------------------------------------ config

def load_oracle_config(path):
    """Read a two-atom comparison setup.

    Format::

        [oracle]
        model_a = two_level.cfg      ; paths relative to this file
        model_b = two_level.cfg
        [modes]
        ; omega, then real profile g at site A and at site B (f = i g)
        rows =
            0.53  0.10 0.00 0.20   -0.05 0.10 0.30
    """
    path = Path(path)
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        if not cp.read(path):
            raise ModelError(f"cannot read {path}")
    except configparser.Error as exc:
        raise ModelError(f"{path}: malformed config: {exc}".replace("\n", " ")) from None
    try:
        ma = load_atom_model(path.parent / cp["oracle"]["model_a"].strip())
        mb = load_atom_model(path.parent / cp["oracle"]["model_b"].strip())
        section = cp["modes"]
    except KeyError as exc:
        raise ModelError(f"{path}: missing entry {exc}") from None
    modes = mode_set_from_section(section, same_constants(ma, mb), str(path), n_sites=2)
    return ma, mb, modes
