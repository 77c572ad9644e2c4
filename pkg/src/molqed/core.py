"""Constants, unit systems, atom models and the shared error types.

Everything here is immutable once built. An :class:`AtomModel` carries
the :class:`PhysicalConstants` it was written in, so every downstream
routine draws hbar and c from a single record and mixing unit systems
is caught at the point where two inputs meet.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType
from typing import Mapping

import numpy as np

# Exact SI values (2019 redefinition) and CODATA 2018 atomic-unit values.
ELECTRONVOLT_J = 1.602176634e-19
HARTREE_J = 4.3597447222071e-18
BOHR_M = 5.29177210903e-11
FINE_STRUCTURE_INV = 137.035999084


class QEDError(ValueError):
    """Base class for every domain error raised by this package."""


class ModelError(QEDError):
    """An atom model violates one of its invariants."""


class UnitError(QEDError):
    """Unknown unit tag or mixed unit systems."""


class PoleError(QEDError):
    """A response function was evaluated on one of its poles."""


class EnergyShellError(QEDError):
    """A transformation element was requested on the energy shell."""


class BasisSizeError(QEDError):
    """An enumerated basis would exceed the configured cap."""


class ConvergenceError(QEDError):
    """A quadrature failed to reach its target tolerance."""


class DegeneracyError(QEDError):
    """Nondegenerate perturbation theory was asked about a degenerate level."""


class IsotropyError(QEDError):
    """An operation that needs a scalar polarizability got a tensor."""


@dataclass(frozen=True)
class PhysicalConstants:
    """Unit system in Gaussian-type conventions.

    Parameters
    ----------
    name : str
        Short tag written into output headers.
    hbar, c, e_charge : float
        Reduced Planck constant, speed of light and elementary charge.
    energy_unit_J : float
        Size of one energy unit in joules (used by :func:`convert_energy`).
    length_unit_m : float
        Size of one length unit in metres.
    """

    name: str
    hbar: float
    c: float
    e_charge: float
    energy_unit_J: float
    length_unit_m: float

    def __post_init__(self):
        for key in ("hbar", "c", "e_charge", "energy_unit_J", "length_unit_m"):
            v = getattr(self, key)
            if not (math.isfinite(v) and v > 0):
                raise UnitError(f"constant {key} must be finite and positive, got {v}")

    @property
    def force_unit_N(self) -> float:
        return self.energy_unit_J / self.length_unit_m


# hbar = c = e = 1; the reference energy is one hartree and the reference
# length is one bohr unless a caller builds its own record.
MODEL_UNITS = PhysicalConstants("model", 1.0, 1.0, 1.0, HARTREE_J, BOHR_M)
ATOMIC_UNITS = PhysicalConstants("atomic", 1.0, FINE_STRUCTURE_INV, 1.0, HARTREE_J, BOHR_M)

UNIT_SYSTEMS = {"model": MODEL_UNITS, "atomic": ATOMIC_UNITS}


def same_constants(*items) -> PhysicalConstants:
    """Return the shared constants record of ``items`` or raise UnitError."""
    records = [it.constants for it in items]
    first = records[0]
    for rec in records[1:]:
        if rec != first:
            raise UnitError(f"mixed unit systems: {first.name} and {rec.name}")
    return first


@dataclass(frozen=True)
class AtomModel:
    """Level energies and a real, symmetric transition-dipole table.

    Parameters
    ----------
    levels : tuple of (str, float)
        Labels and energies, ordered by non-decreasing energy.
    dipoles : mapping
        ``{(l, m): (mx, my, mz)}``. Only one of ``(l, m)`` and ``(m, l)``
        needs to be given; if both are, they must agree.
    ground_index : int
        Index of the lowest level.
    constants : PhysicalConstants
        Unit system the numbers are expressed in.
    """

    levels: tuple
    dipoles: Mapping = field(default_factory=dict)
    ground_index: int = 0
    constants: PhysicalConstants = MODEL_UNITS

    def __post_init__(self):
        levels = tuple((str(lab), float(e)) for lab, e in self.levels)
        object.__setattr__(self, "levels", levels)
        table = {}
        for key, vec in dict(self.dipoles).items():
            i, j = (int(key[0]), int(key[1]))
            table[(i, j)] = tuple(float(x) for x in vec)
        object.__setattr__(self, "dipoles", MappingProxyType(table))

    @property
    def n_levels(self) -> int:
        return len(self.levels)

    @property
    def energies(self) -> np.ndarray:
        return np.array([e for _, e in self.levels], dtype=float)

    @property
    def labels(self) -> tuple:
        return tuple(lab for lab, _ in self.levels)

    def dipole_matrix(self) -> np.ndarray:
        """Transition dipoles as an ``(n, n, 3)`` array, diagonal zeroed."""
        n = self.n_levels
        mat = np.zeros((n, n, 3))
        for (i, j), vec in self.dipoles.items():
            if i == j:
                continue
            mat[i, j] = vec
            mat[j, i] = vec
        return mat

    def scaled(self, factor: float) -> "AtomModel":
        """Copy with every dipole multiplied by ``factor``."""
        table = {k: tuple(factor * x for x in v) for k, v in self.dipoles.items()}
        return AtomModel(self.levels, table, self.ground_index, self.constants)


def validate_atom_model(model: AtomModel) -> AtomModel:
    """Check the model invariants and return the model unchanged.

    Raises
    ------
    ModelError
        On the first violated invariant: malformed indices, non-finite
        entries, a non-minimal ground level, decreasing energies or an
        asymmetric dipole table.
    """
    n = model.n_levels
    if n < 1:
        raise ModelError("model has no levels")
    energies = model.energies
    if not np.all(np.isfinite(energies)):
        raise ModelError("NaN or infinite level energy")
    for (i, j), vec in model.dipoles.items():
        if not (0 <= i < n and 0 <= j < n):
            raise ModelError(f"dipole index ({i}, {j}) out of range for {n} levels")
        if len(vec) != 3:
            raise ModelError(f"dipole ({i}, {j}) is not a 3-vector")
        if not all(math.isfinite(x) for x in vec):
            raise ModelError(f"NaN or infinite dipole entry at ({i}, {j})")
    g = model.ground_index
    if not 0 <= g < n:
        raise ModelError(f"ground_index {g} out of range")
    others = np.delete(energies, g)
    if others.size and not np.all(energies[g] < others):
        raise ModelError("ground not minimal: ground energy must be strictly lowest")
    if np.any(np.diff(energies) < 0):
        raise ModelError("level energies must be non-decreasing with index")
    for (i, j), vec in model.dipoles.items():
        back = model.dipoles.get((j, i))
        if back is not None and tuple(back) != tuple(vec):
            raise ModelError(f"asymmetric dipoles: ({i}, {j}) != ({j}, {i})")
    return model


ENERGY_UNITS = ("model", "eV", "J", "hartree")


def convert_energy(value: float, src: str, dst: str,
                   constants: PhysicalConstants = MODEL_UNITS) -> float:
    """Linear conversion between energy units.

    ``"model"`` means one energy unit of ``constants``.
    """
    scale = {
        "model": constants.energy_unit_J,
        "eV": ELECTRONVOLT_J,
        "J": 1.0,
        "hartree": HARTREE_J,
    }
    for tag in (src, dst):
        if tag not in scale:
            raise UnitError(f"unknown unit tag {tag!r}; expected one of {ENERGY_UNITS}")
    if src == dst:
        return value
    return value * scale[src] / scale[dst]


@dataclass(frozen=True)
class ShiftResult:
    """An energy shift together with how it was obtained."""

    value: float
    method: str
    convergence: float = 0.0
    metadata: Mapping = field(default_factory=dict)

    def __post_init__(self):
        if self.method not in ("discrete-sum", "continuum-quadrature", "oracle"):
            raise ValueError(f"unknown method tag {self.method!r}")
        if not self.convergence >= 0:
            raise ValueError("convergence estimate must be non-negative")
        object.__setattr__(self, "metadata", MappingProxyType(dict(self.metadata)))


# ---------------------------------------------------------------- models

def two_level_model(gap: float = 1.0, dipole=(0.0, 0.0, 1.0),
                    constants: PhysicalConstants = MODEL_UNITS) -> AtomModel:
    """Ground and one excited level with a single transition dipole."""
    return validate_atom_model(
        AtomModel((("g", 0.0), ("e", gap)), {(0, 1): tuple(dipole)}, 0, constants))


def isotropic_model(gap: float = 1.0, strength: float = 1.0,
                    constants: PhysicalConstants = MODEL_UNITS) -> AtomModel:
    """Ground level plus three degenerate p-like sublevels.

    ``strength`` is the squared dipole of each sublevel, so the
    polarizability is the scalar ``2 strength gap / (gap**2 - w**2)``.
    """
    d = math.sqrt(strength)
    levels = (("s", 0.0), ("px", gap), ("py", gap), ("pz", gap))
    dip = {(0, 1): (d, 0.0, 0.0), (0, 2): (0.0, d, 0.0), (0, 3): (0.0, 0.0, d)}
    return validate_atom_model(AtomModel(levels, dip, 0, constants))


def hydrogen_lyman_alpha() -> AtomModel:
    """Hydrogen reduced to its 1s -> 2p transition, in atomic units.

    Gap 3/8 hartree; radial matrix element |<1s|z|2p0>| = 2**7.5 / 3**5 bohr
    for each of the three Cartesian 2p sublevels.
    """
    dz = 2 ** 7.5 / 3 ** 5
    return isotropic_model(0.375, dz * dz, ATOMIC_UNITS)


# ---------------------------------------------------------------- config

def _parse_floats(text: str) -> list:
    return [float(tok) for tok in text.replace(",", " ").split()]


def parse_atom_model(text: str, source: str = "<string>") -> AtomModel:
    """Parse an INI-style atom description.

    Format::

        [atom]
        units = model            ; or atomic
        labels = g, e            ; optional
        energies = 0.0, 1.0
        ground_index = 0         ; optional
        dipoles =
            0 1  0.0 0.0 1.0     ; i j mx my mz, one row per pair
    """
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ModelError(f"{source}: malformed config: {exc}".replace("\n", " ")) from None
    if not cp.has_section("atom"):
        raise ModelError(f"{source}: missing [atom] section")
    sec = cp["atom"]
    units = sec.get("units", "model").strip()
    if units not in UNIT_SYSTEMS:
        raise UnitError(f"{source}: unknown unit system {units!r}")
    try:
        energies = _parse_floats(sec["energies"])
    except KeyError:
        raise ModelError(f"{source}: missing 'energies'") from None
    except ValueError as exc:
        raise ModelError(f"{source}: bad energies: {exc}") from None
    if "labels" in sec:
        labels = [s.strip() for s in sec["labels"].split(",")]
        if len(labels) != len(energies):
            raise ModelError(f"{source}: {len(labels)} labels for {len(energies)} energies")
    else:
        labels = [str(i) for i in range(len(energies))]
    table = {}
    for lineno, row in enumerate(sec.get("dipoles", "").splitlines()):
        row = row.strip()
        if not row:
            continue
        toks = row.replace(",", " ").split()
        if len(toks) != 5:
            raise ModelError(f"{source}: dipole row {row!r} needs 'i j mx my mz'")
        try:
            i, j = int(toks[0]), int(toks[1])
            vec = tuple(float(t) for t in toks[2:])
        except ValueError:
            raise ModelError(f"{source}: cannot parse dipole row {row!r}") from None
        if (i, j) in table:
            raise ModelError(f"{source}: duplicate dipole row ({i}, {j})")
        table[(i, j)] = vec
    ground = sec.getint("ground_index", 0)
    model = AtomModel(tuple(zip(labels, energies)), table, ground, UNIT_SYSTEMS[units])
    return validate_atom_model(model)


def load_atom_model(path) -> AtomModel:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ModelError(f"cannot read {path}: {exc.strerror}") from None
    return parse_atom_model(text, str(path))
