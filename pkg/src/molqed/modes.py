"""Field geometries, mode functions and the continuum quadrature engine.

Free-space modes are plane waves ``i sqrt(2 pi hbar w / V) e exp(i k.r)``.
Conducting-plane modes (plane at z = 0, atoms at z > 0) are an incident
wave plus its mirror image, with the tangential field reversed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .core import MODEL_UNITS, ConvergenceError, PhysicalConstants
from .discrete import DiscreteModeSet

MIRROR = np.array([-1.0, -1.0, 1.0])


@dataclass(frozen=True)
class GeometrySpec:
    """Boundary-condition family and quantization volume."""

    kind: str = "free-space"
    volume: float = 1.0
    constants: PhysicalConstants = MODEL_UNITS

    def __post_init__(self):
        if self.kind not in ("free-space", "conducting-plane"):
            raise ValueError(f"unknown geometry kind {self.kind!r}")
        if not self.volume > 0:
            raise ValueError("quantization volume must be positive")


@dataclass(frozen=True)
class ModeFunctionValue:
    k: np.ndarray
    polarization: int
    value: np.ndarray


@dataclass(frozen=True)
class QuadratureSpec:
    """Quadrature settings for continuum mode sums.

    Parameters
    ----------
    nodes_radial : int
        Gauss-Legendre nodes per radial panel.
    nodes_angular : int
        Nodes in cos(theta) and in phi.
    cutoff : float or None
        Exponential cutoff scale k_c; None means no cutoff.
    tol : float
        Target relative error.
    max_refinements : int
        Node doublings allowed after the first comparison.
    radial_scale : float or None
        Mapping scale for the half-line when no cutoff is set.
    """

    nodes_radial: int = 64
    nodes_angular: int = 24
    cutoff: float | None = None
    tol: float = 1e-8
    max_refinements: int = 4
    radial_scale: float | None = None

    def __post_init__(self):
        if self.nodes_radial < 2 or self.nodes_angular < 2:
            raise ValueError("node counts must be >= 2")
        if self.cutoff is not None and not self.cutoff > 0:
            raise ValueError("cutoff must be positive")
        if not self.tol > 0:
            raise ValueError("tolerance must be positive")

    def doubled(self) -> "QuadratureSpec":
        return QuadratureSpec(2 * self.nodes_radial, 2 * self.nodes_angular, self.cutoff,
                              self.tol, self.max_refinements, self.radial_scale)


@dataclass(frozen=True)
class QuadratureResult:
    value: complex
    error: float
    nodes_radial: int
    nodes_angular: int


# ------------------------------------------------------------ polarization

def _unit(k) -> np.ndarray:
    k = np.asarray(k, dtype=float)
    norm = np.linalg.norm(k, axis=-1, keepdims=True)
    if np.any(norm == 0):
        raise ValueError("wavevector must be nonzero")
    return k / norm


def polarization_vectors(k):
    """Right-handed transverse pair ``(e1, e2)`` for each direction.

    ``e1`` is along ``z x k`` (``x`` when ``k`` is along ``z``) and
    ``e2 = k x e1``. Works on a single vector or an ``(..., 3)`` array.
    """
    kh = _unit(k)
    zhat = np.zeros_like(kh)
    zhat[..., 2] = 1.0
    e1 = np.cross(zhat, kh)
    n1 = np.linalg.norm(e1, axis=-1, keepdims=True)
    along = n1[..., 0] < 1e-14
    e1 = np.where(along[..., None], np.array([1.0, 0.0, 0.0]), e1 / np.where(n1 == 0, 1, n1))
    e2 = np.cross(kh, e1)
    return e1, e2


def polarization_sum(k) -> np.ndarray:
    """Transverse projector ``delta - k k`` summed over both polarizations."""
    kh = _unit(k)
    return np.eye(3) - np.outer(kh, kh)


def mode_values(geometry: GeometrySpec, k, dirs, lam: int, r) -> np.ndarray:
    """Mode-function values on a grid of magnitudes and directions.

    ``k`` has shape ``(Nr,)``, ``dirs`` shape ``(Na, 3)``; the result is
    complex with shape ``(Nr, Na, 3)``.
    """
    if lam not in (1, 2):
        raise ValueError("polarization index must be 1 or 2")
    k = np.asarray(k, dtype=float)
    if np.any(k <= 0):
        raise ValueError("wavevector must be nonzero")
    dirs = _unit(np.atleast_2d(dirs))
    r = np.asarray(r, dtype=float)
    c = geometry.constants
    e = polarization_vectors(dirs)[lam - 1]                        # (Na, 3)
    amp = np.sqrt(2 * math.pi * c.hbar * c.c * k / geometry.volume)  # (Nr,)
    kr = np.outer(k, dirs @ r)                                    # (Nr, Na)
    if geometry.kind == "free-space":
        wave = np.exp(1j * kr)[..., None] * e[None]
        return 1j * amp[:, None, None] * wave
    if not r[2] > 0:
        raise ValueError("position must lie in front of the plane (z > 0)")
    kbar_r = np.outer(k, (dirs * np.array([1.0, 1.0, -1.0])) @ r)
    wave = (np.exp(1j * kr)[..., None] * e[None]
            + np.exp(1j * kbar_r)[..., None] * (MIRROR * e)[None])
    return 1j * (amp / math.sqrt(2.0))[:, None, None] * wave


def _single(geometry, k, lam, r, kind):
    if geometry.kind != kind:
        raise ValueError(f"geometry must be {kind}")
    k = np.asarray(k, dtype=float)
    kn = np.linalg.norm(k)
    if kn == 0:
        raise ValueError("wavevector must be nonzero")
    val = mode_values(geometry, [kn], k[None] / kn, lam, r)[0, 0]
    return ModeFunctionValue(k, lam, val)


def mode_function_free(geometry: GeometrySpec, k, lam: int, r) -> ModeFunctionValue:
    """Plane-wave mode ``i sqrt(2 pi hbar w / V) e_lambda exp(i k.r)``."""
    return _single(geometry, k, lam, r, "free-space")


def mode_function_plane(geometry: GeometrySpec, k, lam: int, r) -> ModeFunctionValue:
    """Perfect-conductor half-space mode: incident plus mirrored wave.

    ``(f_inc + M f_refl) / sqrt(2)`` with ``M = diag(-1, -1, 1)``, so the
    local density averages to the free-space one away from the plane
    when wavevectors range over all of k-space.
    """
    return _single(geometry, k, lam, r, "conducting-plane")


# ------------------------------------------------------------ kernels

def _series(x2, coeffs):
    out = np.zeros_like(x2)
    for c in reversed(coeffs):
        out = out * x2 + c
    return out


_NTERMS = 14
# Taylor coefficients in x^2 of the kernels below, used for |x| < 1.
_J0 = [(-1) ** n / math.factorial(2 * n + 1) for n in range(_NTERMS)]
_C = [(-1) ** (n + 1) * (1 / math.factorial(2 * n + 2) - 1 / math.factorial(2 * n + 3))
      for n in range(_NTERMS)]
_C2 = [(-1) ** n * 2 / (math.factorial(2 * n) * (2 * n + 3)) for n in range(_NTERMS)]


def transverse_kernel_parts(x):
    """``(j0(x), c(x))`` with ``c = cos x / x^2 - sin x / x^3``.

    The direction average of the transverse projector times a plane-wave
    phase is ``(1 - RR) j0 + (1 - 3 RR) c``.
    """
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1.0
    xs = np.where(small, 1.0, x)
    x2 = x * x
    j0 = np.where(small, _series(x2, _J0), np.sin(xs) / xs)
    c = np.where(small, _series(x2, _C), np.cos(xs) / xs ** 2 - np.sin(xs) / xs ** 3)
    return j0, c


def transverse_kernel(x, rhat) -> np.ndarray:
    """``(1/4pi) int dOmega (1 - kk) exp(i k.R)`` for ``x = kR``; shape x.shape+(3,3)."""
    rhat = _unit(rhat)
    j0, c = transverse_kernel_parts(x)
    rr = np.outer(rhat, rhat)
    eye = np.eye(3)
    return j0[..., None, None] * (eye - rr) + c[..., None, None] * (eye - 3 * rr)


def plane_angular_kernels(x):
    """``int_{-1}^{1} cos(x u) du`` and ``int_{-1}^{1} u^2 cos(x u) du``."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1.0
    xs = np.where(small, 1.0, x)
    x2 = x * x
    c0 = 2 * np.where(small, _series(x2, _J0), np.sin(xs) / xs)
    c2 = np.where(small, _series(x2, _C2),
                  2 * np.sin(xs) / xs + 4 * np.cos(xs) / xs ** 2 - 4 * np.sin(xs) / xs ** 3)
    return c0, c2


# ------------------------------------------------------------ quadrature

@lru_cache(maxsize=64)
def _leggauss(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_panel(a: float, b: float, n: int):
    x, w = _leggauss(n)
    half = 0.5 * (b - a)
    return a + half * (x + 1), half * w


def gauss_half_line(start: float, scale: float, n: int):
    """Nodes on ``[start, inf)`` via ``u = start + scale t / (1 - t)``."""
    t, w = gauss_panel(0.0, 1.0, n)
    return start + scale * t / (1 - t), w * scale / (1 - t) ** 2


def _panels(breakpoints, ratio=4.0):
    """Panel edges from 0 through the breakpoints, geometrically refined."""
    pts = sorted({float(b) for b in breakpoints if b > 0})
    edges = [0.0]
    for b in pts:
        lo = edges[-1]
        if lo > 0:
            while b / lo > ratio:
                lo *= ratio
                edges.append(lo)
        edges.append(b)
    return edges


def half_line_rule(breakpoints, n: int):
    """Composite rule on ``[0, inf)``: Gauss panels up to the last breakpoint, mapped tail."""
    edges = _panels(breakpoints)
    xs, ws = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        x, w = gauss_panel(a, b, n)
        xs.append(x)
        ws.append(w)
    tail = edges[-1]
    x, w = gauss_half_line(tail, tail if tail > 0 else 1.0, n)
    xs.append(x)
    ws.append(w)
    return np.concatenate(xs), np.concatenate(ws)


def _refine(evaluate, spec: QuadratureSpec, what: str):
    """Node-doubling driver shared by the integrators."""
    spec_now = spec
    prev = evaluate(spec_now)
    for _ in range(spec.max_refinements + 1):
        spec_next = spec_now.doubled()
        cur = evaluate(spec_next)
        err = float(np.abs(cur - prev))
        if err <= spec.tol * float(np.abs(cur)) or err == 0.0:
            return QuadratureResult(cur, err, spec_next.nodes_radial, spec_next.nodes_angular)
        prev, spec_now = cur, spec_next
    raise ConvergenceError(
        f"{what}: error estimate {err:.3g} above tolerance {spec.tol:g} x |{cur:.6g}| "
        f"after {spec.max_refinements} refinements")


def radial_integrate(f, breakpoints, spec: QuadratureSpec,
                     what: str = "radial integral") -> QuadratureResult:
    """Integrate a vectorized ``f(u)`` over ``[0, inf)`` with node doubling.

    ``breakpoints`` are the length scales where ``f`` changes character;
    panels are placed between them.
    """
    def evaluate(s):
        u, w = half_line_rule(breakpoints, s.nodes_radial)
        return np.sum(w * f(u))

    return _refine(evaluate, spec, what)


def angular_rule(n: int):
    """Product Gauss rule on the sphere: directions (n*n, 3) and weights."""
    ct, wt = gauss_panel(-1.0, 1.0, n)
    ph, wp = gauss_panel(0.0, 2 * math.pi, n)
    st = np.sqrt(1 - ct ** 2)
    dirs = np.stack([np.outer(st, np.cos(ph)), np.outer(st, np.sin(ph)),
                     np.outer(ct, np.ones_like(ph))], axis=-1).reshape(-1, 3)
    return dirs, np.outer(wt, wp).reshape(-1)


def continuum_integrate(integrand, spec: QuadratureSpec) -> QuadratureResult:
    """``(2 pi)^-3 int d^3k sum_lambda integrand(k, khat, lambda)``.

    ``integrand(k, khat, lam)`` receives radial nodes ``k`` of shape
    ``(Nr,)``, directions ``khat`` of shape ``(Na, 3)`` and ``lam`` in
    {1, 2}, and returns an ``(Nr, Na)`` array. Radial nodes follow
    ``k = s t / (1 - t)`` with ``s`` the cutoff (or ``radial_scale``).
    """
    scale = spec.cutoff if spec.cutoff is not None else spec.radial_scale
    if scale is None:
        raise ValueError("continuum_integrate needs a cutoff or a radial_scale")

    def evaluate(s):
        k, wk = gauss_half_line(0.0, scale, s.nodes_radial)
        dirs, wa = angular_rule(s.nodes_angular)
        total = 0j
        for lam in (1, 2):
            vals = np.asarray(integrand(k, dirs, lam))
            total += np.einsum("r,ra,a->", wk * k * k, vals, wa)
        return total / (2 * math.pi) ** 3

    return _refine(evaluate, spec, "continuum integral")


# ------------------------------------------------------------ mode sets

def free_space_lattice(box_length: float, n_max: int, positions,
                       constants: PhysicalConstants = MODEL_UNITS,
                       form_cutoff: float | None = None,
                       k_max: float | None = None) -> DiscreteModeSet:
    """Periodic-box plane-wave modes evaluated at ``positions``.

    Wavevectors ``2 pi n / L`` with ``|n_i| <= n_max`` (optionally also
    ``|k| <= k_max``), two polarizations each. ``form_cutoff`` multiplies
    every mode by ``exp(-k / (2 k_c))``, so a product of two mode values
    carries ``exp(-k / k_c)``.
    """
    pos = np.atleast_2d(np.asarray(positions, dtype=float))
    rng = np.arange(-n_max, n_max + 1)
    n = np.stack(np.meshgrid(rng, rng, rng, indexing="ij"), axis=-1).reshape(-1, 3)
    n = n[np.any(n != 0, axis=1)]
    kvec = 2 * math.pi / box_length * n
    kn = np.linalg.norm(kvec, axis=1)
    if k_max is not None:
        keep = kn <= k_max
        n, kvec, kn = n[keep], kvec[keep], kn[keep]
    e1, e2 = polarization_vectors(kvec)
    volume = box_length ** 3
    amp = np.sqrt(2 * math.pi * constants.hbar * constants.c * kn / volume)
    if form_cutoff is not None:
        amp = amp * np.exp(-kn / (2 * form_cutoff))
    phase = np.exp(1j * pos @ kvec.T)                       # (sites, modes)
    vals = []
    for e in (e1, e2):
        vals.append(1j * (amp[None, :, None] * e[None]) * phase[..., None])
    values = np.concatenate(vals, axis=1)
    omegas = np.concatenate([constants.c * kn] * 2)
    labels = tuple(f"n{tuple(int(v) for v in nn)}l{lam}" for lam in (1, 2) for nn in n)
    return DiscreteModeSet(omegas, values, labels, constants)
