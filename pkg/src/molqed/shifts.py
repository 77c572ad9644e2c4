"""Energy shifts built from the second-order effective Hamiltonian.

Continuum results use exponential UV regularization where a cutoff is
needed. Distance-dependent potentials that are UV finite are evaluated
on the imaginary frequency axis, where the integrands are smooth and
non-oscillatory; the real-axis mode sums serve as cross-checks.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .core import AtomModel, QEDError, ShiftResult, same_constants
from .discrete import DiscreteModeSet, FockOccupation, ProductState, heff_matrix_element
from .modes import (GeometrySpec, QuadratureSpec, continuum_integrate, gauss_panel,
                    mode_values, polarization_vectors, radial_integrate,
                    transverse_kernel_parts)
from .response import (alpha_dynamic, beta_ground, beta_ground_array, beta_imaginary,
                       isotropic_strengths, transition_groups)


@dataclass(frozen=True)
class PotentialCurve:
    abscissa: np.ndarray
    values: tuple
    geometry: str
    models: tuple = ()

    def __post_init__(self):
        x = np.array(self.abscissa, dtype=float)
        if x.ndim != 1 or len(self.values) != x.size:
            raise ValueError("abscissa and values must have equal length")
        if np.any(np.diff(x) <= 0):
            raise ValueError("abscissa must be strictly increasing")
        x.setflags(write=False)
        object.__setattr__(self, "abscissa", x)
        object.__setattr__(self, "values", tuple(self.values))

    @property
    def energies(self) -> np.ndarray:
        return np.array([v.value for v in self.values])

    @property
    def convergence(self) -> np.ndarray:
        return np.array([v.convergence for v in self.values])


@dataclass(frozen=True)
class PowerLawFit:
    exponent: float
    amplitude: float
    window: tuple
    residual: float


# ------------------------------------------------------------ single atom

def vacuum_shift(model: AtomModel, geometry, position, quad: QuadratureSpec | None = None,
                 site: int = 0) -> ShiftResult:
    """Second-order ground-state shift from zero-photon virtual processes.

    ``geometry`` is a :class:`DiscreteModeSet` (finite sum over its
    modes at ``site``) or a :class:`GeometrySpec`, in which case the
    continuum integral is regularized by ``exp(-k / k_c)`` with
    ``k_c = quad.cutoff``. The conducting-plane value is the free-space
    value plus :func:`cp_surface_potential` at the atom height.
    """
    if isinstance(geometry, DiscreteModeSet):
        same_constants(geometry, model)
        total = 0.0
        for s, w in enumerate(geometry.omegas):
            f = geometry.values[site, s]
            total += np.real(np.conj(f) @ beta_ground(model, w).components @ f)
        return ShiftResult(-0.5 * total, "discrete-sum", 0.0,
                           {"modes": geometry.n_modes, "site": site})
    same_constants(geometry, model)
    if quad is None or quad.cutoff is None:
        raise QEDError("vacuum shift in the continuum needs an exponential cutoff")
    kc = quad.cutoff
    c = model.constants

    def integrand(k, dirs, lam):
        # |exp(i k.R)|^2 = 1: the position drops out of f* f exactly
        beta = beta_ground_array(model, c.c * k)
        e = polarization_vectors(dirs)[lam - 1]
        ebe = np.einsum("ai,rij,aj->ra", e, beta, e)
        return -0.5 * (2 * math.pi * c.hbar * c.c * k * np.exp(-k / kc))[:, None] * ebe

    res = continuum_integrate(integrand, quad)
    value = float(np.real(res.value))
    conv = res.error / abs(value) if value else res.error
    meta = {"regularized": True, "cutoff": kc, "geometry": geometry.kind,
            "nodes_radial": res.nodes_radial, "nodes_angular": res.nodes_angular}
    if geometry.kind == "conducting-plane":
        z = float(np.asarray(position, dtype=float)[2])
        surf = _cp_value(model, z, quad)
        value += surf.value
        conv = max(conv, surf.convergence)
        meta["surface_part"] = surf.value
    return ShiftResult(value, "continuum-quadrature", conv, meta)


def _cp_value(model: AtomModel, z: float, quad: QuadratureSpec) -> ShiftResult:
    """Plane-minus-free shift at height z, on the imaginary frequency axis.

    The real-k integrand is ``k^3 beta(ck) exp(-k/k_c)`` times the angular
    kernels of the image term; rotating ``k -> i u`` (the poles of beta
    sit at negative k) leaves a monotone integrand in ``u``.
    """
    if not z > 0:
        raise QEDError(f"distance to the plane must be positive, got {z}")
    c = model.constants
    kc = quad.cutoff

    def f(u):
        b = beta_imaginary(model, c.c * u)
        if kc is not None:
            b = b * np.exp(-1j * u / kc)[:, None, None]
        bzz = np.real(b[:, 2, 2])
        bpar = 0.5 * np.real(b[:, 0, 0] + b[:, 1, 1])
        zz = u / z ** 2 + 1 / (2 * z ** 3)
        par = 2 * u * u / z + u / z ** 2 + 1 / (2 * z ** 3)
        return -(c.hbar * c.c / (4 * math.pi)) * np.exp(-2 * u * z) * (bzz * zz + bpar * par)

    scales = [e / (c.hbar * c.c) for e, _ in transition_groups(model)] + [1 / (2 * z)]
    if kc is not None:
        scales.append(kc)
    res = radial_integrate(f, scales, quad, f"surface potential at z={z:g}")
    value = float(np.real(res.value))
    return ShiftResult(value, "continuum-quadrature", res.error / abs(value) if value else 0.0,
                       {"z": z, "cutoff": kc, "nodes": res.nodes_radial})


def cp_surface_potential(model: AtomModel, distance_grid,
                         quad: QuadratureSpec | None = None) -> PotentialCurve:
    """Atom-conductor potential ``E_plane(z) - E_free`` on a grid of heights."""
    quad = quad or QuadratureSpec()
    zs = np.asarray(distance_grid, dtype=float)
    if np.any(zs <= 0):
        raise QEDError("all distances to the plane must be positive")
    values = [_cp_value(model, z, quad) for z in zs]
    return PotentialCurve(zs, values, "conducting-plane", (model,))


def cp_surface_real_axis(model: AtomModel, z: float, quad: QuadratureSpec) -> ShiftResult:
    """Same potential as a real-k mode integral of the density difference.

    Uses the plane and free mode functions directly; needs a cutoff and
    enough angular nodes to resolve ``cos(2 k_z z)`` up to a few ``k_c``.
    """
    if quad.cutoff is None:
        raise QEDError("real-axis surface integral needs a cutoff")
    c = model.constants
    kc = quad.cutoff
    plane = GeometrySpec("conducting-plane", 1.0, c)
    free = GeometrySpec("free-space", 1.0, c)
    r = np.array([0.0, 0.0, z])

    def integrand(k, dirs, lam):
        beta = beta_ground_array(model, c.c * k)
        fp = mode_values(plane, k, dirs, lam, r)
        ff = mode_values(free, k, dirs, lam, r)
        dens = (np.einsum("rai,rij,raj->ra", fp.conj(), beta, fp)
                - np.einsum("rai,rij,raj->ra", ff.conj(), beta, ff))
        return -0.5 * dens * np.exp(-k / kc)[:, None]

    res = continuum_integrate(integrand, quad)
    value = float(np.real(res.value))
    return ShiftResult(value, "continuum-quadrature", res.error / abs(value) if value else 0.0,
                       {"z": z, "cutoff": kc})


# ------------------------------------------------------------ two atoms

def _frequency_groups(modes: DiscreteModeSet, site_a: int, site_b: int):
    """Distinct frequencies and ``P_w = sum_{k at w} f_k(A) (x) f_k(B)*``."""
    omegas, inverse = np.unique(modes.omegas, return_inverse=True)
    fa = modes.values[site_a]
    fb = modes.values[site_b]
    pair = np.einsum("si,sj->sij", fa, fb.conj())
    groups = np.zeros((omegas.size, 3, 3), dtype=complex)
    np.add.at(groups, inverse, pair)
    return omegas, groups


def dispersion_two_atom_discrete(model_a: AtomModel, model_b: AtomModel,
                                 modes: DiscreteModeSet, sites=(0, 1),
                                 static: bool = False) -> ShiftResult:
    """Second-order cross energy of two ground-state atoms over a mode set.

    Intermediate states carry two photons. Each distinct two-photon
    state is counted once; in terms of ordered mode pairs ``(k, k')``::

        dE = -sum_{k,k'} Re[conj(m_A) m_B] / (hbar (w + w')),
        m_X = -1/2 f_k(X)* . (a_X(w) + a_X(w')) . f_k'(X)*.

    ``static=True`` replaces every polarizability by its zero-frequency
    value.
    """
    hbar = same_constants(model_a, model_b, modes).hbar
    omegas, P = _frequency_groups(modes, *sites)
    n = omegas.size

    def alphas(model):
        if static:
            a0 = alpha_dynamic(model, model.ground_index, 0.0).components
            return np.broadcast_to(a0, (n, 3, 3))
        return np.array([alpha_dynamic(model, model.ground_index, w).components
                         for w in omegas])

    aa, ab = alphas(model_a), alphas(model_b)
    total = 0.0
    for i in range(n):
        sa = aa[i][None] + aa               # (n, 3, 3), pair (i, j)
        sb = ab[i][None] + ab
        prod = 0.25 * np.einsum("jab,jcd,ac,jbd->j", sa, sb, P[i], P)
        total -= np.sum(np.real(prod) / (hbar * (omegas[i] + omegas)))
    return ShiftResult(float(total), "discrete-sum", 0.0,
                       {"modes": modes.n_modes, "frequency_groups": n, "static": static})


def _isotropic_alpha_imag(model: AtomModel):
    groups = isotropic_strengths(model)
    c = model.constants

    def alpha(u):
        out = np.zeros_like(u)
        for e, s in groups:
            out = out + 2 * e * s / (e * e + (c.hbar * c.c * u) ** 2)
        return out
    return alpha, [e / (c.hbar * c.c) for e, _ in groups]


def dispersion_two_atom_continuum(model_a: AtomModel, model_b: AtomModel, separation: float,
                                  quad: QuadratureSpec | None = None) -> ShiftResult:
    """Free-space dispersion energy of two isotropic ground-state atoms.

    The double wavevector integral, after the polarization sums and the
    direction integrals, is rotated onto the imaginary frequency axis::

        dE = -(hbar c / (pi R^6)) int_0^inf du a_A(icu) a_B(icu) e^{-2uR}
             (3 + 6x + 5x^2 + 2x^3 + x^4),   x = uR.
    """
    c = same_constants(model_a, model_b)
    quad = quad or QuadratureSpec()
    R = float(separation)
    if not R > 0:
        raise QEDError("separation must be positive")
    alpha_a, ka = _isotropic_alpha_imag(model_a)
    alpha_b, kb = _isotropic_alpha_imag(model_b)

    def f(u):
        x = u * R
        poly = 3 + x * (6 + x * (5 + x * (2 + x)))
        return alpha_a(u) * alpha_b(u) * np.exp(-2 * x) * poly

    res = radial_integrate(f, ka + kb + [1 / R], quad, f"dispersion integral at R={R:g}")
    value = -(c.hbar * c.c / (math.pi * R ** 6)) * float(np.real(res.value))
    conv = res.error / abs(res.value) if res.value else 0.0
    return ShiftResult(value, "continuum-quadrature", conv,
                       {"R": R, "nodes": res.nodes_radial})


def static_kernel_moments(s, R: float):
    """``int_0^inf k^3 e^{-sk} (A(kR), B(kR)) dk`` in closed form.

    ``A = j0 + c`` and ``B = -j0 - 3c`` are the isotropic and ``RR``
    parts of the transverse kernel; the Laplace transforms follow from
    ``k^n e^{-(s - iR) k}``.
    """
    z = np.asarray(s, dtype=float) - 1j * R
    mj0 = np.imag(2 / z ** 3) / R
    mc = np.real(1 / z ** 2) / R ** 2 - np.imag(1 / z) / R ** 3
    return mj0 + mc, -mj0 - 3 * mc


def static_kernel_moments_quadrature(s: float, R: float, n: int = 32):
    """Direct Gauss evaluation of :func:`static_kernel_moments` (checks only).

    Panels one oscillation period wide, ``n`` nodes each, out to ``k = 80/s``.
    """
    top = 80.0 / s
    width = min(2 * math.pi / R, top)
    edges = np.linspace(0.0, top, int(math.ceil(top / width)) + 1)
    k, w = (np.concatenate(p) for p in zip(*(gauss_panel(a, b, n)
                                            for a, b in zip(edges[:-1], edges[1:]))))
    j0, c = transverse_kernel_parts(k * R)
    weight = w * k ** 3 * np.exp(-s * k)
    return np.sum(weight * (j0 + c)), np.sum(weight * (-j0 - 3 * c))


def dispersion_far_zone_static(model_a: AtomModel, model_b: AtomModel, separation: float,
                               quad: QuadratureSpec | None = None) -> ShiftResult:
    """Dispersion energy with both polarizabilities frozen at zero frequency.

    Real-k pipeline: the polarization sums and direction integrals give
    the transverse kernel ``tau(kR)``; ``1/(k + k')`` is written as a
    Laplace integral so the double radial integral factorizes::

        dE = -(hbar c / pi^2) a_A(0) a_B(0) int_eta^inf ds M(s) : M(s),
        M(s) = int_0^inf k^3 e^{-sk} tau(kR) dk,   eta = 1 / k_c.
    """
    c = same_constants(model_a, model_b)
    quad = quad or QuadratureSpec()
    R = float(separation)
    if not R > 0:
        raise QEDError("separation must be positive")
    a_a = sum(2 * s / e for e, s in isotropic_strengths(model_a))
    a_b = sum(2 * s / e for e, s in isotropic_strengths(model_b))
    eta = 0.0 if quad.cutoff is None else 1.0 / quad.cutoff

    def f(s):
        A, B = static_kernel_moments(s + eta, R)
        return 3 * A * A + 2 * A * B + B * B

    res = radial_integrate(f, [R], quad, f"static kernel integral at R={R:g}")
    value = -(c.hbar * c.c / math.pi ** 2) * a_a * a_b * float(res.value)
    conv = res.error / abs(res.value) if res.value else 0.0
    return ShiftResult(value, "continuum-quadrature", conv,
                       {"R": R, "cutoff": quad.cutoff, "nodes": res.nodes_radial})


def dispersion_curve(model_a: AtomModel, model_b: AtomModel, separations,
                     quad: QuadratureSpec | None = None, static: bool = False) -> PotentialCurve:
    fn = dispersion_far_zone_static if static else dispersion_two_atom_continuum
    Rs = np.asarray(separations, dtype=float)
    values = [fn(model_a, model_b, R, quad) for R in Rs]
    return PotentialCurve(Rs, values, "free-space", (model_a, model_b))


# ------------------------------------------------------------ three atoms

def _two_photon_states(n_modes: int):
    """Distinct two-photon occupations: doubly occupied modes and pairs."""
    out = []
    for a in range(n_modes):
        for b in range(a, n_modes):
            counts = [0] * n_modes
            counts[a] += 1
            counts[b] += 1
            out.append(FockOccupation(tuple(counts)))
    return out


def dispersion_three_body(models, modes: DiscreteModeSet, sites=(0, 1, 2)) -> ShiftResult:
    """Third-order energy from the ground-state effective Hamiltonians.

    Uses ``V = H_A + H_B + H_C`` with each ``H_X`` the effective
    Hamiltonian of atom X held in its ground state, and keeps the terms
    in which all three atoms appear once::

        E3 = sum_{XYZ} sum_{I,J} V^X_0I V^Y_IJ V^Z_J0 / (D_I D_J)
             - sum_{XYZ} V^X_00 sum_I V^Y_0I V^Z_I0 / D_I^2,

    with ``D_I = E_0 - E_I`` and the sums over the six orderings of
    (A, B, C). Intermediate states carry two photons.
    """
    if len(models) != 3 or len(sites) != 3:
        raise ValueError("three models and three sites are required")
    hbar = same_constants(*models, modes).hbar
    occs = _two_photon_states(modes.n_modes)
    vac = FockOccupation.vacuum(modes.n_modes)
    denom = np.array([-hbar * np.dot(o.counts, modes.omegas) for o in occs])
    zero_col, diag, full = [], [], []
    for model, site in zip(models, sites):
        g = model.ground_index
        v0 = ProductState(g, vac)
        states = [ProductState(g, o) for o in occs]
        zero_col.append(np.array([heff_matrix_element(st, v0, modes, model, site)
                                  for st in states]))
        diag.append(heff_matrix_element(v0, v0, modes, model, site))
        full.append(np.array([[heff_matrix_element(a, b, modes, model, site)
                               for b in states] for a in states]))
    total = 0j
    for x, y, z in itertools.permutations(range(3)):
        left = zero_col[x].conj() / denom
        right = zero_col[z] / denom
        total += left @ full[y] @ right
        total -= diag[x] * np.sum(zero_col[y].conj() * zero_col[z] / denom ** 2)
    return ShiftResult(float(np.real(total)), "discrete-sum", 0.0,
                       {"modes": modes.n_modes, "intermediates": len(occs),
                        "imag_residual": float(abs(np.imag(total)))})


# ------------------------------------------------------------ fits

def fit_power_law(curve: PotentialCurve, window=None) -> PowerLawFit:
    """Least-squares line through ``log|E|`` against ``log R`` on ``window``.

    ``window`` is a half-open index range ``(start, stop)``; default is
    the whole curve.
    """
    start, stop = (0, len(curve.values)) if window is None else window
    x = curve.abscissa[start:stop]
    y = curve.energies[start:stop]
    if x.size < 3:
        raise QEDError("power-law fit needs at least 3 points")
    if np.any(x <= 0) or np.unique(x).size != x.size:
        raise QEDError("degenerate abscissa for a log-log fit")
    if np.any(y == 0) or not (np.all(y > 0) or np.all(y < 0)):
        raise QEDError("energies change sign (or vanish) inside the fit window")
    lx, ly = np.log(x), np.log(np.abs(y))
    (p, la), res, *_ = np.polyfit(lx, ly, 1, full=True)
    resid = math.sqrt(res[0] / x.size) if res.size else 0.0
    amp = math.copysign(math.exp(la), y[0])
    return PowerLawFit(float(p), amp, (start, stop), resid)


def local_forces(curve: PotentialCurve, half_width: int = 2) -> np.ndarray:
    """Forces ``-dE/dR`` from power laws fitted around each point.

    Negative values are attractive. Each window holds ``2 half_width + 1``
    points, shifted inward at the curve ends.
    """
    n = len(curve.values)
    width = min(2 * half_width + 1, n)
    if width < 3:
        raise QEDError("force estimate needs at least 3 points")
    out = np.empty(n)
    for i in range(n):
        lo = min(max(i - half_width, 0), n - width)
        fit = fit_power_law(curve, (lo, lo + width))
        R = curve.abscissa[i]
        out[i] = -fit.exponent * fit.amplitude * R ** (fit.exponent - 1)
    return out
