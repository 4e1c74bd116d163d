"""Command-line front end: ``affinekahler {classify,extend,soliton,qe,catalog}``.

Jobs are TOML documents with the blocks ``[surface]``, ``[tensorT]``,
``[phi]``, ``[potential]`` and ``[options]``.  Reports go to stdout as
markdown, or as JSON with ``--json``.

Exit codes: 0 success, 1 an asserted verdict was false, 2 bad job
specification, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__
from . import catalog as cat
from . import extension as ext
from . import parallel as par
from .scalarfield.expr import SURFACE_VARS, DomainError, ExprError, parse_expr
from .surface import (
    GAMMA_KEYS, AffineSurface, ExprTensor11, PreconditionError, RicciSymmetricField, SymBilinField,
    is_projectively_flat, recurrence_form, ricci_matrices, ricci_rank,
)

EXIT_OK, EXIT_CHECK, EXIT_SPEC, EXIT_NUMERIC = 0, 1, 2, 3

DEFAULTS = {
    "tol": 1e-8,
    "grid": 5,
    "seed": 0,
    "orientation": 0,
    "points": 5,
    "fibers": 3,
    "bach_tol": 1e-7,
    "weyl_tol": 1e-8,
    "residual_tol": 1e-7,
    "isotropy_tol": 1e-10,
}


class SpecError(ValueError):
    pass


# --------------------------------------------------------------------------
# job specification

def _domain(block, default):
    d = block.get("domain", default)
    try:
        (a, b), (c, e) = d
        return ((float(a), float(b)), (float(c), float(e)))
    except (TypeError, ValueError):
        raise SpecError(f"domain must be [[a, b], [c, d]], got {d!r}") from None


def build_surface(block) -> AffineSurface:
    if not isinstance(block, dict):
        raise SpecError("missing [surface] block")
    kind = block.get("kind")
    if kind == "catalog":
        name = block.get("name")
        params = block.get("params", {})
        try:
            S, _ = cat.make(name, **params)
        except cat.CatalogError as exc:
            raise SpecError(str(exc)) from None
        return S
    allowed = {"kind", "domain", "name"}
    if kind == "TypeA" or kind == "TypeB":
        prefix = "g" if kind == "TypeA" else "c"
        keys = [prefix + k for k in GAMMA_KEYS]
        extra = set(block) - allowed - set(keys)
        if extra:
            raise SpecError(f"unknown keys in [surface]: {sorted(extra)}")
        vals = []
        for k in keys:
            v = block.get(k, 0.0)
            if not isinstance(v, (int, float)) or isinstance(v, bool):
                raise SpecError(f"{kind} coefficient {k} must be a number")
            vals.append(float(v))
        if kind == "TypeA":
            return AffineSurface.type_a(*vals, domain=_domain(block, ((-1, 1), (-1, 1))))
        dom = _domain(block, ((0.5, 2.0), (-1, 1)))
        if dom[0][0] <= 0:
            raise SpecError("Type B domain needs x1 > 0")
        return AffineSurface.type_b(*vals, domain=dom)
    if kind == "General":
        keys = ["g" + k for k in GAMMA_KEYS]
        extra = set(block) - allowed - set(keys)
        if extra:
            raise SpecError(f"unknown keys in [surface]: {sorted(extra)}")
        if "domain" not in block:
            raise SpecError("General surfaces need a domain")
        gam = {k: block[k] for k in keys if k in block}
        for k, v in gam.items():
            if not isinstance(v, (str, int, float)) or isinstance(v, bool):
                raise SpecError(f"{k} must be a number or an expression string")
        return AffineSurface.general(_domain(block, None), **gam)
    raise SpecError(f"surface kind must be TypeA, TypeB, General or catalog, got {kind!r}")


def build_tensor(block, S, tol):
    if block is None:
        return None, None
    if "id" in block:
        c = float(block["id"])
        return ExprTensor11.from_matrix([[c, 0.0], [0.0, c]]), f"{c!r}*id"
    if block.get("use") == "solved-generator":
        rep = par.solve_parallel(S, tol)
        idx = int(block.get("index", 0))
        if idx >= len(rep.generators):
            raise SpecError(f"surface has only {len(rep.generators)} solved generators")
        g = rep.generators[idx]
        return g.field, g.describe()
    m = block.get("matrix")
    if m is None or len(m) != 2 or any(len(r) != 2 for r in m):
        raise SpecError("[tensorT] needs matrix = [[a, b], [c, d]], id = c or use = 'solved-generator'")
    pre = block.get("prefactor")
    pre = parse_expr(pre, SURFACE_VARS) if isinstance(pre, str) else None
    T = ExprTensor11.from_matrix([[_entry(v) for v in r] for r in m], pre)
    return T, T.describe()


def _entry(v):
    if isinstance(v, bool) or not isinstance(v, (str, int, float)):
        raise SpecError(f"tensor entries must be numbers or strings, got {v!r}")
    return parse_expr(v, SURFACE_VARS) if isinstance(v, str) else float(v)


def build_phi(block, S, T, pot):
    if block is None:
        return None
    if block.get("fill"):
        if T is None:
            raise SpecError("phi fill needs a [tensorT] block")
        if pot is None or "f" not in pot:
            raise SpecError("phi fill needs f in [potential]")
        mirrored = bool(block.get("mirrored", False))
        free = (block.get("b11", 0.0), block.get("b12", 0.0)) if mirrored else (
            block.get("b12", 0.0), block.get("b22", 0.0))
        return ext.PhiFill(S, T, pot["f"], float(pot.get("mu", 0.0)), free, mirrored)
    extra = set(block) - {"b11", "b12", "b22"}
    if extra:
        raise SpecError(f"unknown keys in [phi]: {sorted(extra)}")
    return SymBilinField.from_values(block.get("b11", 0.0), block.get("b12", 0.0), block.get("b22", 0.0))


def load_spec(path):
    try:
        with open(path, "rb") as fh:
            spec = tomllib.load(fh)
    except OSError as exc:
        raise SpecError(f"cannot read {path}: {exc}") from None
    except tomllib.TOMLDecodeError as exc:
        raise SpecError(f"invalid TOML: {exc}") from None
    unknown = set(spec) - {"surface", "tensorT", "phi", "potential", "options"}
    if unknown:
        raise SpecError(f"unknown blocks {sorted(unknown)}")
    return spec


def options(spec, args):
    opts = dict(DEFAULTS)
    given = spec.get("options", {})
    for k, v in given.items():
        if k == "assert":
            continue
        if k not in DEFAULTS:
            raise SpecError(f"unknown option {k!r}")
        opts[k] = v
    for k in ("tol", "grid", "seed", "orientation"):
        v = getattr(args, k, None)
        if v is not None:
            opts[k] = v
    if opts["orientation"] not in (0, 1, -1):
        raise SpecError("orientation must be +1 or -1")
    opts["grid"] = int(opts["grid"])
    opts["seed"] = int(opts["seed"])
    return opts, dict(given.get("assert", {}))


# --------------------------------------------------------------------------
# report helpers

def _num(x):
    x = float(x)
    return 0.0 if x == 0 else float(f"{x:.12g}")


def _arr(a):
    return np.vectorize(_num, otypes=[float])(np.asarray(a, dtype=float)).tolist()


def _check(value, tol, ok=None):
    value = _num(value)
    return {"value": value, "tol": tol, "pass": bool(value <= tol) if ok is None else bool(ok)}


def _sample_points(S, opts, n=None):
    rng = np.random.default_rng(opts["seed"])
    return S.sample(opts["points"] if n is None else n, rng), rng


def _ext_points(S, opts):
    base, rng = _sample_points(S, opts)
    fib = rng.uniform(-1.0, 1.0, size=(opts["fibers"], 2))
    return np.array([np.r_[b, y] for b in base for y in fib])


def _surface_info(S):
    return {"kind": S.kind, "name": S.name, "gammas": S.gamma_dict(), "domain": _arr(S.domain)}


def classify_report(S, opts):
    tol = opts["tol"]
    grid = S.grid(opts["grid"])
    samp, _ = _sample_points(S, opts, 3)
    rho = ricci_matrices(S, samp)
    rs = 0.5 * (rho + np.swapaxes(rho, 1, 2))
    rank, sign = ricci_rank(S, grid, tol)
    rep = {"surface": _surface_info(S), "tolerances": {"rank": tol, "recurrence": tol}}
    rep["ricci"] = {
        "points": _arr(samp),
        "rho": _arr(rho),
        "rho_s": _arr(rs),
        "rho_sk": _arr(rho - rs),
        "rank_rho_s": rank,
        "det_sign_rho_s": sign,
    }
    if rank > 0:
        b = RicciSymmetricField(S)
        omegas = [recurrence_form(S, b, p, tol) for p in grid]
        rec = all(w is not None for w in omegas)
        rep["recurrence"] = {
            "recurrent": rec,
            "omega_samples": [_arr(w) for w in omegas[:3]] if rec else None,
            "tol": tol,
        }
    else:
        rep["recurrence"] = {"recurrent": None, "note": "rho_s vanishes", "tol": tol}
    pf, worst = is_projectively_flat(S, grid, tol)
    rep["projectively_flat"] = {"value": bool(pf), "residual": _num(worst), "tol": tol}
    pr = par.solve_parallel(S, tol, grid)
    rep["parallel"] = {
        "dim": pr.dim,
        "generators": [g.describe() for g in pr.generators],
        "classes": pr.classes,
        "lemma": pr.lemma,
        "residual": _num(pr.residual),
        "residual_tol": max(tol, 1e-8),
        "basis_complete": pr.basis_complete,
        "notes": pr.notes,
    }
    verdicts = {"dim": pr.dim, "recurrent": rep["recurrence"]["recurrent"], "rank": rank,
                "projectively_flat": bool(pf)}
    return rep, verdicts


def extend_report(S, spec, opts):
    T, tdesc = build_tensor(spec.get("tensorT"), S, opts["tol"])
    phi = build_phi(spec.get("phi"), S, T, spec.get("potential"))
    g = ext.build_extension(S, phi, T, opts["orientation"])
    pts = _ext_points(S, opts)
    packets = ext.curvature_packets(g, pts)
    bach = max(float(np.abs(p.bach).max()) for p in packets)
    wp = max(float(np.abs(p.weyl_plus).max()) for p in packets)
    wm = max(float(np.abs(p.weyl_minus).max()) for p in packets)
    bsym = max(float(np.abs(p.bach - p.bach.T).max()) for p in packets)
    gi = [np.linalg.inv(g.values([p.point])[0]) for p in packets]
    btr = max(abs(float(np.einsum("ij,ij", a, p.bach))) for a, p in zip(gi, packets))
    rep = {
        "surface": _surface_info(S),
        "tensorT": tdesc,
        "metric": g.describe(),
        "orientation": g.sign(),
        "points": len(pts),
        "bach_max": _check(bach, opts["bach_tol"]),
        "bach_symmetry": _check(bsym, 1e-9),
        "bach_trace": _check(btr, 1e-9),
        "weyl_plus_max": _check(wp, opts["weyl_tol"]),
        "weyl_minus_max": _check(wm, opts["weyl_tol"]),
    }
    verdicts = {"bach_flat": rep["bach_max"]["pass"], "self_dual": rep["weyl_minus_max"]["pass"],
                "anti_self_dual": rep["weyl_plus_max"]["pass"]}
    return rep, verdicts


def potential_report(S, spec, opts, qe):
    pot = spec.get("potential")
    if not pot or "f" not in pot:
        raise SpecError("[potential] needs f")
    f = pot["f"]
    mu = float(pot.get("mu", 0.0)) if qe else 0.0
    lam = float(pot.get("lambda", 0.0))
    T, tdesc = build_tensor(spec.get("tensorT"), S, opts["tol"])
    warnings = []
    phi_block = spec.get("phi")
    if phi_block and phi_block.get("fill") and T is not None:
        mirrored = bool(phi_block.get("mirrored", False))
        try:
            ext.fill_phi(S, T, f, mu, (0.0, 0.0), mirrored, S.grid(opts["grid"]), opts["tol"])
        except PreconditionError as exc:
            warnings.append(f"{exc}; a nonzero residual is expected")
    phi = build_phi(phi_block, S, T, dict(pot, mu=mu))
    g = ext.build_extension(S, phi, T, opts["orientation"])
    pts = _ext_points(S, opts)
    res = max(float(np.abs(ext.qe_residual_4d(g, f, mu, lam, p)).max()) for p in pts)
    iso = max(abs(ext.isotropy_check(g, f, p)) for p in pts)
    key = "qe_residual_max" if qe else "soliton_residual_max"
    rep = {
        "surface": _surface_info(S),
        "tensorT": tdesc,
        "f": f,
        "mu": mu,
        "lambda": lam,
        "points": len(pts),
        key: _check(res, opts["residual_tol"]),
        "isotropy_max": _check(iso, opts["isotropy_tol"]),
        "warnings": warnings,
    }
    verdicts = {"qe" if qe else "soliton": rep[key]["pass"], "isotropic": rep["isotropy_max"]["pass"]}
    return rep, verdicts


# --------------------------------------------------------------------------
# output

def to_markdown(rep, title):
    lines = [f"# {title}", ""]

    def emit(d, depth):
        for k, v in d.items():
            pad = "  " * depth
            if isinstance(v, dict) and not {"value", "tol"} <= set(v):
                lines.append(f"{pad}- **{k}**")
                emit(v, depth + 1)
            elif isinstance(v, dict):
                mark = "within" if v.get("pass", True) else "exceeds"
                lines.append(f"{pad}- {k}: {v['value']} (tol {v['tol']}, {mark})")
            else:
                lines.append(f"{pad}- {k}: {json.dumps(v, sort_keys=True)}")

    emit(rep, 0)
    return "\n".join(lines) + "\n"


def emit(rep, args, title):
    rep = dict(rep, version=__version__)
    if args.json:
        sys.stdout.write(json.dumps(rep, sort_keys=True, indent=2) + "\n")
    else:
        sys.stdout.write(to_markdown(rep, title))


def _asserts(verdicts, wanted):
    bad = []
    for k, v in wanted.items():
        if k not in verdicts:
            raise SpecError(f"cannot assert unknown verdict {k!r}")
        if verdicts[k] != v:
            bad.append(f"asserted {k} = {v!r}, got {verdicts[k]!r}")
    return bad


# --------------------------------------------------------------------------
# commands

def _run_job(args, kind):
    spec = load_spec(args.spec)
    opts, wanted = options(spec, args)
    S = build_surface(spec.get("surface"))
    if kind == "classify":
        rep, verdicts = classify_report(S, opts)
    elif kind == "extend":
        if "tensorT" not in spec:
            raise SpecError("extend needs a [tensorT] block")
        rep, verdicts = extend_report(S, spec, opts)
    else:
        rep, verdicts = potential_report(S, spec, opts, kind == "qe")
    rep["options"] = {k: opts[k] for k in sorted(opts)}
    bad = _asserts(verdicts, wanted)
    rep["asserts"] = {"failed": bad, "checked": sorted(wanted)}
    emit(rep, args, f"affinekahler {kind}")
    return EXIT_CHECK if bad else EXIT_OK


def _parse_params(items):
    out = {}
    for it in items:
        if "=" not in it:
            raise SpecError(f"parameters are key=value, got {it!r}")
        k, v = it.split("=", 1)
        try:
            out[k] = float(v)
        except ValueError:
            raise SpecError(f"parameter {k} must be a number") from None
    return out


def _run_catalog(args):
    if args.action == "list":
        rep = {"entries": [{"name": e.name, "description": e.description, "params": e.params}
                           for e in cat.ENTRIES.values()]}
        emit(rep, args, "catalog")
        return EXIT_OK
    if args.action == "show":
        if not args.name:
            raise SpecError("catalog show needs an entry name")
        try:
            S, e = cat.make(args.name, **_parse_params(args.params))
        except cat.CatalogError as exc:
            raise SpecError(str(exc)) from None
        emit({"surface": _surface_info(S), "expected": e.summary()}, args, f"catalog {args.name}")
        return EXIT_OK
    results = {}
    failed = 0
    jobs = [(n, {}, S, e) for n, S, e in cat.entries()] + cat.families_grid()
    for name, params, S, e in jobs:
        label = name + ("" if not params else " " + ",".join(f"{k}={v}" for k, v in params.items()))
        checks = cat.run_checks(S, e, seed=args.seed or 0)
        ok = all(c[0] for c in checks.values())
        failed += not ok
        results[label] = {"pass": ok, "failed_checks": sorted(k for k, c in checks.items() if not c[0])}
    emit({"results": results, "total": len(jobs), "failed": failed}, args, "catalog run-all")
    return EXIT_CHECK if failed else EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="affinekahler", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"affinekahler {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", help="machine-readable output")
    common.add_argument("--tol", type=float, default=None)
    common.add_argument("--grid", type=int, default=None)
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--orientation", type=int, choices=(1, -1), default=None)
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in (("classify", "Ricci data, recurrence and parallel tensors"),
                        ("extend", "Bach and Weyl checks on the Riemannian extension"),
                        ("soliton", "gradient Ricci soliton residual"),
                        ("qe", "quasi-Einstein residual")):
        sp = sub.add_parser(name, parents=[common], help=help_)
        sp.add_argument("spec", help="TOML job file")
    cp = sub.add_parser("catalog", parents=[common], help="built-in surfaces")
    cp.add_argument("action", choices=("list", "show", "run-all"))
    cp.add_argument("name", nargs="?")
    cp.add_argument("params", nargs="*", help="key=value parameters for show")
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "catalog":
            return _run_catalog(args)
        return _run_job(args, args.command)
    except (SpecError, ExprError, cat.CatalogError) as exc:
        if isinstance(exc, DomainError):
            print(f"numeric error: {exc}", file=sys.stderr)
            return EXIT_NUMERIC
        print(f"spec error: {exc}", file=sys.stderr)
        return EXIT_SPEC
    except PreconditionError as exc:
        print(f"spec error: {exc}", file=sys.stderr)
        return EXIT_SPEC
    except (DomainError, ArithmeticError, np.linalg.LinAlgError, RuntimeError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
