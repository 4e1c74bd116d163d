"""Acceptance criteria, one PASS/FAIL line per criterion.

    pytest tests/test_acceptance.py -v     (lines are repeated in the summary)
    python3 tests/test_acceptance.py       (lines only)

Each test records its verdict before asserting, so a failing criterion still
prints its measured value next to the tolerance.
"""

import numpy as np
import pytest

from affinekahler import catalog
from affinekahler import parallel as par
from affinekahler.catalog import field_match
from affinekahler.extension import (
    build_extension, curvature_packets, default_orientation, fd_christoffel, fd_riemann,
    fill_phi, isotropy_check, qe_residual_4d,
)
from affinekahler.scalarfield import parse_expr
from affinekahler.surface import (
    AffineSurface, ExprTensor11, RicciSymmetricField, gamma_jets, recurrence_form, ricci_matrices,
    ricci_rank, rho_s_is_zero,
)

RESULTS = {}
V2 = ("x1", "x2")


def record(n, title, ok, detail):
    RESULTS[n] = (bool(ok), title, detail)
    print(acceptance_line(n))
    return ok


def acceptance_line(n):
    ok, title, detail = RESULTS[n]
    return f"[{'PASS' if ok else 'FAIL'}] criterion {n:2d}  {title}: {detail}"


def sym(r):
    return 0.5 * (r + np.swapaxes(r, -1, -2))


def ext_points(S, nbase, nfiber, seed):
    rng = np.random.default_rng(seed)
    base = S.sample(nbase, rng)
    fib = rng.uniform(-1.0, 1.0, size=(nfiber, 2))
    return np.array([np.r_[b, y] for b in base for y in fib])


def is_recurrent(S, pts):
    b = RicciSymmetricField(S)
    return all(recurrence_form(S, b, p[None]) is not None for p in pts)


# --------------------------------------------------------------------------

def test_c1_convention_calibration():
    S = AffineSurface.general(((0.5, 1.5), (0.5, 1.5)), g121="x1", g221="x2", g222="x1")
    T = AffineSurface.general(((0.5, 1.5), (0.5, 1.5)), g121="x1*x2", g221="x1^2*x2 + x2^3",
                              g222="x1*x2")
    worst = 0.0
    for surf in (S, T):
        pts = surf.grid()
        rs = sym(ricci_matrices(surf, pts))
        G = gamma_jets(surf, pts, 1)
        # d1 Gamma_22^1 - d2 Gamma_12^1 (jet index 1 = d/dx1, 2 = d/dx2)
        want = G[:, 1, 1, 0, 1] - G[:, 0, 1, 0, 2]
        full = np.zeros_like(rs)
        full[:, 1, 1] = want
        worst = max(worst, float(np.abs(rs - full).max()))
    Q, _ = catalog.make("Q", c=1.0)
    pts = Q.grid()
    rho = ricci_matrices(Q, pts)
    q_err = float(np.abs(rho[:, 0, 1] - pts[:, 0] ** -2.0).max())
    ok = worst <= 1e-9 and q_err <= 1e-12
    record(1, "convention calibration", ok,
           f"rho_s vs d1G22^1 - d2G12^1 max err {worst:.2e} (tol 1e-9); "
           f"Q_1 rho_12 vs x1^-2 max err {q_err:.2e} (tol 1e-12)")
    assert ok


def _printed_bases():
    """``(label, surface, [fields])`` for every printed basis."""
    out = []
    for name in ("zero-rho_s", "zero-rho_s-psi", "kahler-full", "para-full"):
        S, e = catalog.make(name)
        out.append((name, S, list(e.generators)))
    for c in (1.0, 2.5, -1.0, -0.5):
        S, _ = catalog.make("Q", c=c)
        out.append((f"Q_c c={c:g}", S, [f for _, f in par.q_basis(c)]))
    S, _ = catalog.make("Q", c=0.0)
    out.append(("Q_0 as printed", S, [f for _, f in par.q_basis(0.0, verified=False)]))
    for sign, label in ((1, "P+"), (-1, "P-")):
        for c in (1.0, -2.0):
            S, _ = catalog.make(label, c=c)
            out.append((f"{label} c={c:g}", S, [f for _, f in par.p_basis(sign, c)]))
    return out


def test_c2_printed_bases():
    bad = []
    worst_ok = 0.0
    for label, S, fields in _printed_bases():
        grid = S.grid(5)
        res = max(par.is_parallel(S, f, grid)[1] for f in fields)
        if res > 1e-8:
            bad.append(f"{label} residual {res:.3g}")
        else:
            worst_ok = max(worst_ok, res)
    S, _ = catalog.make("Q", c=0.0)
    fixed = max(par.is_parallel(S, f, S.grid(5))[1] for _, f in par.q_basis(0.0))
    detail = (f"worst passing residual {worst_ok:.2e} (tol 1e-8); failing: "
              f"{'; '.join(bad) if bad else 'none'}; corrected Q_0 basis residual {fixed:.2e}")
    record(2, "printed parallel bases", not bad, detail)
    assert not bad, detail


def _type_a_rank1_surfaces(n, seed):
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n:
        g111, g121, g221, g222 = rng.uniform(-2, 2, size=4).round(3)
        S = AffineSurface.type_a(g111, 0.0, g121, 0.0, g221, g222)
        if ricci_rank(S)[0] == 1:
            out.append(S)
    return out


def _type_a_rank2_surfaces(n, seed):
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n:
        S = AffineSurface.type_a(*rng.uniform(-2, 2, size=6).round(3))
        if ricci_rank(S)[0] == 2:
            out.append(S)
    return out


def test_c3_type_a_rank_one():
    worst = 0.0
    dims1 = []
    for S in _type_a_rank1_surfaces(20, 31):
        rep = par.typeA_solve(S)
        dims1.append(rep.dim)
        if rep.dim != 1:
            continue
        g111, _, g121, _, _, g222 = S.constants
        want = ExprTensor11.from_matrix(
            [[0, 1], [0, 0]], parse_expr(f"exp(({-g111})*x1 + ({g222 - g121})*x2)", V2))
        pts = S.sample(10, np.random.default_rng(1))
        worst = max(worst, 1 - field_match(rep.generators[0].field, want, pts))
    dims2 = [par.typeA_solve(S).dim for S in _type_a_rank2_surfaces(20, 32)]
    ok = all(d == 1 for d in dims1) and worst <= 1e-10 and all(d == 0 for d in dims2)
    record(3, "rank-one Type A generator", ok,
           f"rank-1 dims {sorted(set(dims1))}, 1 - cosine max {worst:.2e} (tol 1e-10); "
           f"rank-2 dims {sorted(set(dims2))}")
    assert ok


def test_c4_non_recurrent_example():
    S, e = catalog.make("R52")
    pts = S.grid()
    err = float(np.abs(sym(ricci_matrices(S, pts)) - e.rho_s(pts)).max())
    dim = par.solve_parallel(S).dim
    b = RicciSymmetricField(S)
    forms = [recurrence_form(S, b, p[None]) for p in pts]
    none = all(w is None for w in forms)
    ok = err <= 1e-9 and dim == 0 and none
    record(4, "rank-one, non-recurrent Type B", ok,
           f"rho_s err {err:.2e} (tol 1e-9), dim {dim}, recurrence_form None at "
           f"{sum(w is None for w in forms)}/{len(pts)} points")
    assert ok


def test_c5_type_b_families():
    worst_match = 0.0
    worst_rho = 0.0
    bad = []
    for name, params, S, e in catalog.families_grid():
        rep = par.typeB_solve(S)
        pts = S.sample(10, np.random.default_rng(5))
        rho = ricci_matrices(S, pts)
        if e.rho is not None:
            worst_rho = max(worst_rho, float(np.abs(rho - e.rho(pts)).max()))
        if e.rho_s is not None:
            worst_rho = max(worst_rho, float(np.abs(sym(rho) - e.rho_s(pts)).max()))
        if rep.dim != 1:
            bad.append(f"{name} {params} dim {rep.dim}")
            continue
        worst_match = max(worst_match, 1 - field_match(rep.generators[0].field, e.generators[0], pts))
    # dim 2 never occurs: the report type refuses to hold it, so reaching here is the check
    ok = not bad and worst_match <= 1e-8 and worst_rho <= 1e-9
    record(5, "Type B generator families", ok,
           f"{len(catalog.families_grid())} points, 1 - match max {worst_match:.2e} (tol 1e-8), "
           f"rho/rho_s err {worst_rho:.2e} (tol 1e-9), wrong dims: {bad or 'none'}, dim 2 never")
    assert ok


# each proof display, written literally in the normal-form coordinates
def _omega_printed_nilpotent(S, pts):
    rs = RicciSymmetricField(S).jets(pts, 1)
    G = gamma_jets(S, pts, 0)[..., 0]
    dlog = rs[:, 1, 1, 1:3] / rs[:, 1, 1, :1]
    return np.stack([dlog[:, 0], -(2 * G[:, 0, 1, 0] - dlog[:, 1])], 1)


def _omega_printed_kahler(S, pts):
    rs = RicciSymmetricField(S).jets(pts, 1)
    G = gamma_jets(S, pts, 0)[..., 0]
    d11 = rs[:, 0, 0, 1] / rs[:, 0, 0, 0]
    d22 = rs[:, 1, 1, 2] / rs[:, 1, 1, 0]
    return np.stack([-(2 * G[:, 0, 0, 0] - d11), -(2 * G[:, 0, 0, 1] - d22)], 1)


def _omega_printed_para(S, pts):
    rs = RicciSymmetricField(S).jets(pts, 1)
    G = gamma_jets(S, pts, 0)[..., 0]
    dlog = rs[:, 0, 1, 1:3] / rs[:, 0, 1, :1]
    return np.stack([-(G[:, 0, 0, 0] - dlog[:, 0]), -(G[:, 1, 1, 1] - dlog[:, 1])], 1)


OMEGA_DISPLAYS = {
    "nilpotent-normal": _omega_printed_nilpotent,
    "kahler-normal": _omega_printed_kahler,
    "para-normal": _omega_printed_para,
}


def _predicted_class(S, grid):
    if not is_recurrent(S, grid):
        return None
    rank, sign = ricci_rank(S, grid)
    if rank == 1:
        return par.NILPOTENT
    return par.KAHLER if sign > 0 else par.PARA


def test_c6_trichotomy():
    mismatches = []
    n = 0
    jobs = [(name, S) for name, S, _ in catalog.entries()]
    jobs += [(f"{name} {p}", S) for name, p, S, _ in catalog.families_grid()]
    for label, S in jobs:
        grid = S.grid()
        if rho_s_is_zero(S, grid):
            continue
        n += 1
        rep = par.solve_parallel(S)
        got = rep.classes[0] if rep.dim == 1 else None
        want = _predicted_class(S, grid)
        if got != want:
            mismatches.append(f"{label}: solver {got}, Ricci data {want}")
    omega_err = {}
    for name, display in OMEGA_DISPLAYS.items():
        S, e = catalog.make(name)
        pts = S.sample(10, np.random.default_rng(6))
        b = RicciSymmetricField(S)
        w = np.array([recurrence_form(S, b, p[None]) for p in pts])
        omega_err[name] = float(np.abs(w - display(S, pts)).max() / max(1.0, np.abs(w).max()))
    # the Kahler display with the dx2 sign of Gamma_11^2 reversed
    S, e = catalog.make("kahler-normal")
    pts = S.sample(10, np.random.default_rng(6))
    b = RicciSymmetricField(S)
    w = np.array([recurrence_form(S, b, p[None]) for p in pts])
    alt = _omega_printed_kahler(S, pts)
    alt[:, 1] += 4 * gamma_jets(S, pts, 0)[:, 0, 0, 1, 0]
    corrected = float(np.abs(w - alt).max() / max(1.0, np.abs(w).max()))
    bad_omega = {k: v for k, v in omega_err.items() if v > 1e-7}
    ok = not mismatches and not bad_omega
    errs = ", ".join(f"{k} {v:.2e}" for k, v in omega_err.items())
    record(6, "class <=> Ricci data and recurrence", ok,
           f"{n} surfaces with rho_s != 0, class mismatches: {mismatches or 'none'}; "
           f"omega vs displays: {errs} (tol 1e-7); Kahler with dx2 sign reversed {corrected:.2e}")
    assert ok


PHIS = {
    "zero": None,
    "polynomial": {"b11": "x1*x2", "b12": "x2^3", "b22": "x1^2 + 1"},
    "trigonometric": {"b11": "sin(x2)", "b12": "cos(x1*x2)", "b22": "sin(x1)*cos(x2)"},
}


def _max(pks, attr):
    return max(float(np.abs(getattr(p, attr)).max()) for p in pks)


def test_c7_bach_flatness():
    nil = []
    for name in ("B-const-t12", "nilpotent-normal"):
        S, _ = catalog.make(name)
        T = par.solve_parallel(S).generators[0].field
        for phi in PHIS.values():
            pts = ext_points(S, 5, 3, 7)
            nil.append(_max(curvature_packets(build_extension(S, phi, T), pts), "bach"))
    cid_b, cid_w = 0.0, 0.0
    for name in ("B-const-t12", "nilpotent-normal", "R52"):
        S, _ = catalog.make(name)
        gm = build_extension(S, PHIS["trigonometric"], ExprTensor11.from_matrix([[2, 0], [0, 2]]))
        pks = curvature_packets(gm, ext_points(S, 5, 3, 8))
        cid_b = max(cid_b, _max(pks, "bach"))
        cid_w = max(cid_w, _max(pks, "weyl_minus"))
    S, _ = catalog.make("B-const-diag")
    gm = build_extension(S, None, ExprTensor11.from_matrix([[1, 0], [0, -1]]))
    para = _max(curvature_packets(gm, ext_points(S, 5, 3, 9)), "bach")
    ok = max(nil) <= 1e-7 and cid_b <= 1e-7 and cid_w <= 1e-9 and para > 1e-3
    record(7, "Bach flatness", ok,
           f"nilpotent max |B| {max(nil):.2e} (tol 1e-7); 2 id max |B| {cid_b:.2e} (tol 1e-7), "
           f"W- {cid_w:.2e} (tol 1e-9); para-Kahler max |B| {para:.3g} (> 1e-3)")
    assert ok


def test_c8_duality():
    s = default_orientation()
    S, _ = catalog.make("typeA-rank1")
    gm = build_extension(S, None, par.typeA_solve(S).generators[0].field)
    wp = _max(curvature_packets(gm, ext_points(S, 5, 3, 10), ("weyl",)), "weyl_plus")
    B, _ = catalog.make("B-const-t12")
    gm = build_extension(B, None, par.typeB_solve(B).generators[0].field)
    pks = curvature_packets(gm, ext_points(B, 5, 3, 11), ("weyl",))
    both = min(_max(pks, "weyl_plus"), _max(pks, "weyl_minus"))
    ok = wp <= 1e-8 and both > 1e-3
    record(8, "self-duality under one orientation", ok,
           f"orientation {s:+d}; Type A rank-one W+ {wp:.2e} (tol 1e-8); "
           f"nilpotent Type B min(W+, W-) {both:.3g} (> 1e-3)")
    assert ok


def _soliton_cases():
    S, _ = catalog.make("nilpotent-normal")
    yield "nilpotent normal form", S, ExprTensor11.from_matrix([[0, 1], [0, 0]]), "x2^2 + sin(x2)"
    A, _ = catalog.make("typeA-rank1")
    yield "Type A rank one", A, par.typeA_solve(A).generators[0].field, "x2^2"


def test_c9_solitons_and_quasi_einstein():
    worst, iso, pert = 0.0, 0.0, np.inf
    for label, S, T, f in _soliton_cases():
        for mu in (0.0, 1.0, 2.0):
            phi = fill_phi(S, T, f, mu, free=("x1*x2", "cos(x1)"))
            gm = build_extension(S, phi, T)
            pts = ext_points(S, 10, 1, 12)
            worst = max(worst, max(float(np.abs(qe_residual_4d(gm, f, mu, 0.0, p[None])).max())
                                   for p in pts))
            iso = max(iso, max(abs(isotropy_check(gm, f, p[None])) for p in pts))
            # phi_11 + 1, other components kept
            bumped = max(float(np.abs(qe_residual_4d(build_extension(S, _Bumped(phi), T), f, mu, 0.0,
                                                     p[None])).max()) for p in pts)
            pert = min(pert, bumped)
    ok = worst <= 1e-7 and iso <= 1e-10 and pert > 1e-2
    record(9, "soliton and quasi-Einstein constructions", ok,
           f"max residual (mu = 0, 1, 2) {worst:.2e} (tol 1e-7), |dh|^2 {iso:.2e} (tol 1e-10), "
           f"after phi_11 + 1 min residual {pert:.3g} (> 1e-2)")
    assert ok


class _Bumped:
    def __init__(self, phi):
        self.phi = phi

    def jets(self, points, order, variables=V2):
        j = self.phi.jets(points, order, variables).copy()
        j[:, 0, 0, 0] += 1.0
        return j


def test_c10_holonomy_oracle():
    bad = []
    n = 0
    surfs = [(name, S) for name, S, _ in catalog.entries()]
    surfs += [(f"{name} {p}", S) for name, p, S, _ in catalog.families_grid()]
    rng = np.random.default_rng(40)
    surfs += [(f"random A {i}", AffineSurface.type_a(*rng.uniform(-2, 2, 6).round(2))) for i in range(20)]
    surfs += [(f"random B {i}", AffineSurface.type_b(*rng.uniform(-2, 2, 6).round(2))) for i in range(20)]
    worst_loop = 0.0
    for label, S in surfs:
        n += 1
        rep = par.solve_parallel(S)
        h, _ = par.holonomy_fixed_space(S)
        if h != rep.dim + 1:
            bad.append(f"{label}: holonomy {h}, solver {rep.dim}")
        for g in rep.generators:
            for loop in par.default_loops(S):
                t0 = g.field.values(loop[:1])[0]
                t1 = par.parallel_transport(S, t0, loop)
                worst_loop = max(worst_loop, float(np.abs(t1 - t0).max() / max(1.0, np.abs(t0).max())))
    ok = not bad and worst_loop <= 1e-6
    record(10, "holonomy oracle", ok,
           f"{n} surfaces, dimension mismatches: {bad or 'none'}; "
           f"loop transport max deviation {worst_loop:.2e} (tol 1e-6)")
    assert ok


def test_c11_jets_against_finite_differences():
    worst_c, worst_r = 0.0, 0.0
    n = 0
    for name, S, _ in catalog.entries():
        rep = par.solve_parallel(S)
        T = rep.generators[0].field if rep.generators else None
        gm = build_extension(S, PHIS["trigonometric"], T)
        pts = ext_points(S, 20, 1, 13)
        for p, pk in zip(pts, curvature_packets(gm, pts, want=())):
            worst_c = max(worst_c, float(np.abs(fd_christoffel(gm, p) - pk.christoffel).max()))
            worst_r = max(worst_r, float(np.abs(fd_riemann(gm, p) - pk.riemann).max()))
        n += 1
    ok = worst_c <= 1e-4 and worst_r <= 1e-4
    record(11, "jets vs finite differences", ok,
           f"{n} extensions x 20 points, Christoffel {worst_c:.2e}, Riemann {worst_r:.2e} (tol 1e-4)")
    assert ok


if __name__ == "__main__":
    import sys

    tests = [v for k, v in sorted(globals().items()) if k.startswith("test_c")]
    tests.sort(key=lambda f: int(f.__name__.split("_")[1][1:]))
    for t in tests:
        try:
            t()
        except AssertionError:
            pass
    sys.exit(0 if all(r[0] for r in RESULTS.values()) else 1)
