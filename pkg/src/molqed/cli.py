"""Command-line front end.

Each subcommand writes CSV tables and a ``manifest.json`` into ``--out``.
``replay MANIFEST`` re-runs a recorded invocation.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .core import QEDError, load_atom_model
from .discrete import heff_matrix, mode_set_from_section
from .modes import GeometrySpec, QuadratureSpec
from .oracle import compare_effective_vs_fourth_order, load_oracle_config
from .response import alpha_dynamic, beta_ground, beta_state
from .shifts import (PotentialCurve, cp_surface_potential, dispersion_far_zone_static,
                     dispersion_two_atom_continuum, fit_power_law, local_forces,
                     vacuum_shift)

UNIT_LABELS = {
    "model": {"energy": "model energy", "length": "model length", "omega": "model 1/time",
              "force": "model force", "response": "model dipole^2/energy",
              "wavenumber": "model 1/length"},
    "atomic": {"energy": "hartree", "length": "bohr", "omega": "hartree/hbar",
               "force": "hartree/bohr", "response": "bohr^3", "wavenumber": "1/bohr"},
}
COMPONENTS = ("xx", "xy", "xz", "yx", "yy", "yz", "zx", "zy", "zz")
FILE_PARAMS = ("model", "model_a", "model_b", "modes", "config")


# ------------------------------------------------------------ helpers

def _fmt(x) -> str:
    return repr(float(x))


def _digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _units(constants):
    return UNIT_LABELS[constants.name]


def _quad(args) -> QuadratureSpec:
    return QuadratureSpec(nodes_radial=args.nodes_radial, nodes_angular=args.nodes_angular,
                          cutoff=args.cutoff, tol=args.tol)


def _map(fn, items, workers: int):
    if workers <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _fit_report(curve: PotentialCurve):
    n = len(curve.values)
    if n < 3:
        return {}
    w = max(3, n // 4)
    out = {}
    for name, window in (("low_end", (0, w)), ("high_end", (n - w, n))):
        try:
            f = fit_power_law(curve, window)
        except QEDError as exc:
            out[name] = {"error": str(exc)}
            continue
        out[name] = {"exponent": f.exponent, "amplitude": f.amplitude,
                     "window": list(f.window), "residual": f.residual}
    return out


def _curve_rows(curve: PotentialCurve, constants):
    forces = local_forces(curve) if len(curve.values) >= 3 else np.full(len(curve.values), np.nan)
    rows = []
    for x, v, f in zip(curve.abscissa, curve.values, forces):
        rows.append([_fmt(x), _fmt(v.value), _fmt(f), _fmt(f * constants.force_unit_N),
                     _fmt(v.convergence)])
    return rows


def _curve_header(xname, constants):
    u = _units(constants)
    return [f"{xname} ({u['length']})", f"energy ({u['energy']})", f"force ({u['force']})",
            "force (N)", "convergence (relative)"]


def _grid(lo, hi, n, log=True):
    if not (0 < lo < hi) or n < 1:
        raise QEDError("grid needs 0 < min < max and at least one point")
    return np.geomspace(lo, hi, n) if log else np.linspace(lo, hi, n)


# ------------------------------------------------------------ subcommands

def cmd_response(args, out: Path) -> dict:
    model = load_atom_model(args.model)
    if args.points < 1 or args.omega_max < 0:
        raise QEDError("need --points >= 1 and --omega-max >= 0")
    omegas = np.linspace(0.0, args.omega_max, args.points)
    u = _units(model.constants)
    damped = args.kind != "beta-ground" and args.gamma > 0
    header = [f"omega ({u['omega']})", "kind"]
    for c in COMPONENTS:
        header.append(f"{c} ({u['response']})")
        if damped:
            header.append(f"{c}_imag ({u['response']})")
    rows = []
    for w in omegas:
        if args.kind == "beta-ground":
            t = beta_ground(model, w)
        elif args.kind == "beta-state":
            t = beta_state(model, args.state, w, args.gamma)
        else:
            t = alpha_dynamic(model, args.state, w, args.gamma)
        row = [_fmt(w), t.kind]
        for v in np.asarray(t.components).reshape(-1):
            row.append(_fmt(np.real(v)))
            if damped:
                row.append(_fmt(np.imag(v)))
        rows.append(row)
    _write_csv(out / "response.csv", header, rows)
    return {"outputs": ["response.csv"]}


def cmd_heff_matrix(args, out: Path) -> dict:
    model = load_atom_model(args.model)
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        cp.read_string(Path(args.modes).read_text(), source=args.modes)
    except (OSError, configparser.Error) as exc:
        raise QEDError(f"cannot read mode file {args.modes}: {exc}".replace("\n", " "))
    if not cp.has_section("modes"):
        raise QEDError(f"{args.modes}: missing [modes] section")
    modes = mode_set_from_section(cp["modes"], model.constants, args.modes)
    basis, mat = heff_matrix(modes, args.max_photons, model, args.site)
    u = _units(model.constants)
    rows = [[i, j, _fmt(mat[i, j].real), _fmt(mat[i, j].imag)]
            for i in range(len(basis)) for j in range(len(basis))]
    _write_csv(out / "heff_matrix.csv",
               ["row", "col", f"real ({u['energy']})", f"imag ({u['energy']})"], rows)
    brows = [[i, st.atom_level, model.labels[st.atom_level],
              " ".join(str(n) for n in st.field.counts), _fmt(st.energy(model, modes))]
             for i, st in enumerate(basis)]
    _write_csv(out / "basis.csv",
               ["index", "level", "label", "occupations", f"energy ({u['energy']})"], brows)
    undefined = int(np.isnan(mat.real).sum())
    return {"outputs": ["heff_matrix.csv", "basis.csv"], "basis_size": len(basis),
            "undefined_on_shell_elements": undefined}


def cmd_lamb(args, out: Path) -> dict:
    model = load_atom_model(args.model)
    geom = GeometrySpec(args.geometry, 1.0, model.constants)
    u = _units(model.constants)
    rows = []
    for kc in args.cutoff:
        quad = QuadratureSpec(args.nodes_radial, args.nodes_angular, kc, args.tol)
        res = vacuum_shift(model, geom, [0.0, 0.0, args.z], quad)
        rows.append([_fmt(kc), _fmt(res.value), _fmt(res.convergence)])
    _write_csv(out / "lamb.csv",
               [f"cutoff ({u['wavenumber']})", f"regularized energy ({u['energy']})",
                "convergence (relative)"], rows)
    return {"outputs": ["lamb.csv"], "label": "regularized (cutoff-dependent) vacuum shift"}


def _cp_point(payload):
    model_path, z, quad = payload
    return cp_surface_potential(load_atom_model(model_path), [z], quad).values[0]


def cmd_cp_surface(args, out: Path) -> dict:
    model = load_atom_model(args.model)
    zs = _grid(args.zmin, args.zmax, args.points)
    quad = _quad(args)
    vals = _map(_cp_point, [(args.model, z, quad) for z in zs], args.workers)
    curve = PotentialCurve(zs, vals, "conducting-plane", (model,))
    _write_csv(out / "cp_surface.csv", _curve_header("z", model.constants),
               _curve_rows(curve, model.constants))
    return {"outputs": ["cp_surface.csv"], "fits": _fit_report(curve)}


def _dispersion_point(payload):
    path_a, path_b, R, quad, static = payload
    fn = dispersion_far_zone_static if static else dispersion_two_atom_continuum
    return fn(load_atom_model(path_a), load_atom_model(path_b), R, quad)


def cmd_dispersion(args, out: Path) -> dict:
    ma, mb = load_atom_model(args.model_a), load_atom_model(args.model_b)
    Rs = _grid(args.rmin, args.rmax, args.points)
    quad = _quad(args)
    vals = _map(_dispersion_point,
                [(args.model_a, args.model_b, R, quad, args.static) for R in Rs], args.workers)
    curve = PotentialCurve(Rs, vals, "free-space", (ma, mb))
    _write_csv(out / "dispersion.csv", _curve_header("R", ma.constants),
               _curve_rows(curve, ma.constants))
    return {"outputs": ["dispersion.csv"], "fits": _fit_report(curve)}


def cmd_oracle(args, out: Path) -> dict:
    ma, mb, modes = load_oracle_config(args.config)
    report = compare_effective_vs_fourth_order(ma, mb, modes)
    data = report.as_dict()
    data.pop("runtime_s")
    with open(out / "oracle_report.json", "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return {"outputs": ["oracle_report.json"], "report": report.as_dict()}


COMMANDS = {"response": cmd_response, "heff-matrix": cmd_heff_matrix, "lamb": cmd_lamb,
            "cp-surface": cmd_cp_surface, "dispersion": cmd_dispersion,
            "oracle": cmd_oracle}


# ------------------------------------------------------------ parser

def _add_quad(p, cutoff_default=None):
    p.add_argument("--nodes-radial", type=int, default=64)
    p.add_argument("--nodes-angular", type=int, default=24)
    p.add_argument("--cutoff", type=float, default=cutoff_default,
                   help="exponential cutoff scale k_c (default: none)")
    p.add_argument("--tol", type=float, default=1e-8)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="molqed", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", default="out", help="output directory (default ./out)")

    p = sub.add_parser("response", help="response tensors on a frequency grid")
    p.add_argument("--model", required=True)
    p.add_argument("--omega-max", type=float, required=True)
    p.add_argument("--points", type=int, required=True)
    p.add_argument("--kind", choices=("beta-ground", "beta-state", "alpha"),
                   default="beta-ground")
    p.add_argument("--state", type=int, default=0)
    p.add_argument("--gamma", type=float, default=0.0)
    common(p)

    p = sub.add_parser("heff-matrix", help="dense effective Hamiltonian over a basis")
    p.add_argument("--model", required=True)
    p.add_argument("--modes", required=True, help="mode file with a [modes] section")
    p.add_argument("--max-photons", type=int, default=2)
    p.add_argument("--site", type=int, default=0)
    common(p)

    p = sub.add_parser("lamb", help="cutoff-regularized vacuum shift")
    p.add_argument("--model", required=True)
    p.add_argument("--cutoff", type=float, nargs="+", required=True)
    p.add_argument("--geometry", choices=("free-space", "conducting-plane"),
                   default="free-space")
    p.add_argument("--z", type=float, default=1.0, help="height above the plane")
    p.add_argument("--nodes-radial", type=int, default=64)
    p.add_argument("--nodes-angular", type=int, default=24)
    p.add_argument("--tol", type=float, default=1e-8)
    common(p)

    p = sub.add_parser("cp-surface", help="atom-conductor potential curve")
    p.add_argument("--model", required=True)
    p.add_argument("--zmin", type=float, required=True)
    p.add_argument("--zmax", type=float, required=True)
    p.add_argument("--points", type=int, required=True)
    p.add_argument("--workers", type=int, default=1, help="parallel workers (opt-in)")
    _add_quad(p)
    common(p)

    p = sub.add_parser("dispersion", help="two-atom dispersion curve")
    p.add_argument("--model-a", required=True)
    p.add_argument("--model-b", required=True)
    p.add_argument("--rmin", type=float, required=True)
    p.add_argument("--rmax", type=float, required=True)
    p.add_argument("--points", type=int, required=True)
    p.add_argument("--static", action="store_true", help="zero-frequency polarizabilities")
    p.add_argument("--workers", type=int, default=1, help="parallel workers (opt-in)")
    _add_quad(p)
    common(p)

    p = sub.add_parser("oracle", help="brute-force comparisons")
    osub = p.add_subparsers(dest="action", required=True)
    q = osub.add_parser("compare", help="fourth order vs effective second order")
    q.add_argument("--config", required=True)
    common(q)

    p = sub.add_parser("replay", help="re-run from a manifest")
    p.add_argument("manifest")
    p.add_argument("--out", default=None, help="output directory (default: recorded one)")
    return parser


def _resolved(args) -> dict:
    params = {k: v for k, v in vars(args).items() if k not in ("command", "out")}
    for key in FILE_PARAMS:
        if params.get(key) is not None:
            params[key] = str(Path(params[key]).resolve())
    return params


def execute(command: str, params: dict, out: Path) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    args = argparse.Namespace(**params)
    inputs = {}
    for key in FILE_PARAMS:
        if params.get(key) is not None:
            try:
                inputs[params[key]] = _digest(params[key])
            except OSError as exc:
                raise QEDError(f"cannot read {params[key]}: {exc.strerror}") from None
    t0 = time.perf_counter()
    extra = COMMANDS[command](args, out)
    manifest = {"subcommand": command, "parameters": params, "input_digests": inputs,
                "tool_version": __version__, "runtime_s": time.perf_counter() - t0,
                "deterministic": params.get("workers", 1) <= 1, **extra}
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")
    return manifest


def replay(manifest_path, out=None) -> dict:
    try:
        data = json.loads(Path(manifest_path).read_text())
        command, params = data["subcommand"], data["parameters"]
    except (OSError, ValueError, KeyError) as exc:
        raise QEDError(f"unreadable manifest {manifest_path}: {exc}") from None
    if command not in COMMANDS:
        raise QEDError(f"manifest names unknown subcommand {command!r}")
    for path, digest in data.get("input_digests", {}).items():
        if _digest(path) != digest:
            raise QEDError(f"input {path} changed since the recorded run")
    target = Path(out) if out is not None else Path(manifest_path).parent
    return execute(command, params, target)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "replay":
            replay(args.manifest, args.out)
        else:
            execute(args.command, _resolved(args), Path(args.out))
    except (QEDError, ValueError, OSError) as exc:
        msg = " ".join(str(exc).split())
        print(f"molqed {args.command}: error: {msg}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
