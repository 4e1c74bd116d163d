"""Parallel trace-free (1,1)-tensors: solvers, recognisers and a transport oracle.

On homogeneous surfaces a parallel field is an exponential (Type A) or a
power of ``x1`` (Type B) times a constant trace-free matrix, so the search is
a pair of 3x3 eigenproblems.  Normal-form recognisers cover the general
case where the Christoffel symbols already sit in canonical coordinates.
Parallel transport along polylines gives an independent upper bound on the
dimension through the fixed space of loop holonomies.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .scalarfield.expr import Func, Num, Potential, Var, to_string
from .surface import (
    AffineSurface, ExprTensor11, MatrixExpTensor11, PreconditionError, RicciSymmetricField,
    Tensor11Field, _as_tensor11, as_points, covariant_derivative_11_many, gamma_jets,
    recurrence_form, ricci_matrices, ricci_rank, rho_s_is_zero,
)
from .scalarfield.jets import eval_jets

KAHLER = "Kahler"
PARA = "ParaKahler"
NILPOTENT = "NilpotentKahler"
ID_COMPONENT = "non-trace-free-id-component"

# trace-free basis {e11 - e22, e12, e21}
TF_BASIS = (
    np.array([[1.0, 0.0], [0.0, -1.0]]),
    np.array([[0.0, 1.0], [0.0, 0.0]]),
    np.array([[0.0, 0.0], [1.0, 0.0]]),
)


class ParallelError(RuntimeError):
    """Internal inconsistency (a structural theorem was violated)."""


def tf_coords(m) -> np.ndarray:
    m = np.asarray(m)
    return np.array([m[0, 0], m[0, 1], m[1, 0]])


def tf_matrix(v) -> np.ndarray:
    v = np.asarray(v)
    return np.array([[v[0], v[1]], [v[2], -v[0]]])


def ad_operator(G) -> np.ndarray:
    """3x3 matrix of ``t -> -[G, t]`` on the trace-free basis."""
    G = np.asarray(G, dtype=float)
    return np.column_stack([tf_coords(-(G @ e - e @ G)) for e in TF_BASIS])


def _ad_eigenvalues(G):
    # eigenvalues of ad(G) are 0 and +-(l1 - l2); (l1 - l2)^2 = tr^2 - 4 det
    G = np.asarray(G, dtype=float)
    disc = np.trace(G) ** 2 - 4.0 * np.linalg.det(G)
    r = cmath.sqrt(disc)
    vals = [0.0, r, -r]
    out = []
    for v in vals:
        if not any(abs(v - w) <= 1e-12 * max(1.0, abs(w)) for w in out):
            out.append(complex(v))
    return out


def _nullspace(m, tol):
    u, s, vh = np.linalg.svd(m)
    scale = max(1.0, s[0] if len(s) else 0.0)
    rank = int(np.sum(s > tol * scale))
    return vh[rank:].conj().T


def christoffel_matrix(S: AffineSurface, k: int, p=None) -> np.ndarray:
    """``(Gamma_k)^i_l = Gamma_{kl}^i`` (constants for Type A, ``C`` for Type B)."""
    if S.kind in ("TypeA", "TypeB"):
        c = dict(zip(("111", "112", "121", "122", "221", "222"), S.constants))

        def g(i, j, kk):
            a, b = sorted((i, j))
            return c[f"{a}{b}{kk}"]
    else:
        G = gamma_jets(S, np.atleast_2d(p), 0)[0, ..., 0]

        def g(i, j, kk):
            return G[i - 1, j - 1, kk - 1]
    return np.array([[g(k, l, i) for l in (1, 2)] for i in (1, 2)], dtype=float)


# --------------------------------------------------------------------------
# reports

@dataclass
class Generator:
    field: Tensor11Field
    cls: str
    matrix: np.ndarray = None
    exponent: tuple = None  # (a1, a2) for Type A, (alpha,) for Type B
    part: str = "real"
    residual: float = float("nan")

    def describe(self):
        return self.field.describe()


@dataclass
class ParallelReport:
    dim: int
    generators: list
    lemma: str
    residual: float = 0.0
    notes: list = field(default_factory=list)
    basis_complete: bool = True

    def __post_init__(self):
        if self.dim == 2:
            raise ParallelError("dim P0 = 2 is impossible on an affine surface")
        if self.dim < len(self.generators):
            raise ParallelError("more generators than the reported dimension")
        if self.dim > len(self.generators) and self.basis_complete:
            raise ParallelError("dimension exceeds listed generators without an incomplete-basis note")

    @property
    def classes(self):
        return [g.cls for g in self.generators]


# --------------------------------------------------------------------------
# verification helpers

def is_parallel(S: AffineSurface, T, grid=None, tol=1e-8):
    """Max over the grid of ``|nabla T| / |T|`` against ``tol``."""
    T = _as_tensor11(T)
    pts = as_points(grid, S)
    dT = covariant_derivative_11_many(S, T, pts)
    tv = T.values(pts)
    num = np.linalg.norm(dT.reshape(len(pts), -1), axis=1)
    den = np.linalg.norm(tv.reshape(len(pts), -1), axis=1)
    if np.any(den == 0):
        return False, float("inf")
    res = float(np.max(num / den))
    return res <= tol, res


def classify_generator(T, grid_points, tol=1e-8):
    """Kahler / para-Kahler / nilpotent from ``det T`` on the grid.

    Returns ``(class, normalised_field_values, det)``.  The normalised values
    are ``T / sqrt|det|`` at the grid points (``T`` itself when nilpotent).
    """
    T = _as_tensor11(T)
    pts = np.atleast_2d(np.asarray(grid_points, dtype=float))
    tv = T.values(pts)
    tr = np.abs(tv[:, 0, 0] + tv[:, 1, 1])
    size = np.linalg.norm(tv.reshape(len(pts), -1), axis=1)
    if np.any(tr > tol * np.maximum(size, 1e-300)):
        raise PreconditionError("tensor is not trace free")
    det = np.linalg.det(tv)
    rel = det / np.maximum(size ** 2, 1e-300)
    if np.all(np.abs(rel) <= tol):
        return NILPOTENT, tv, 0.0
    spread = float(np.max(det) - np.min(det))
    if spread > 1e-6 * max(np.max(np.abs(det)), 1e-300):
        raise PreconditionError("det T is not constant, so T cannot be parallel")
    d = float(np.mean(det))
    cls = KAHLER if d > 0 else PARA
    return cls, tv / math.sqrt(abs(d)), d


def _clean(v, rel=1e-13):
    v = np.asarray(v, dtype=float).copy()
    v[np.abs(v) < rel * max(1.0, np.abs(v).max())] = 0.0
    return v


def _normalise_tf(t):
    """Scale a trace-free matrix to the printed normalisation.

    ``t12 = 1`` if possible, else ``t21 = 1``, else ``t11 = 1``.
    """
    t = np.asarray(t)
    for idx in ((0, 1), (1, 0), (0, 0)):
        if abs(t[idx]) > 1e-10 * max(1e-300, np.abs(t).max()):
            return t / t[idx]
    return t


def _tensor_from(t, prefactor=None):
    return ExprTensor11.from_matrix(_clean(t).tolist(), prefactor)


def _finish(S, gens, lemma, dim, notes, grid, tol, complete=True):
    pts = as_points(grid, S)
    worst = 0.0
    for g in gens:
        ok, res = is_parallel(S, g.field, pts, max(tol, 1e-8))
        g.residual = res
        worst = max(worst, res)
        if not ok:
            notes.append(f"generator failed verification (residual {res:.3g})")
    return ParallelReport(dim, gens, lemma, worst, notes, complete)


# --------------------------------------------------------------------------
# Type A

def _joint_solutions(ops, tol):
    """Joint eigen-solutions of commuting-on-solutions 3x3 operators.

    Returns a list of ``(eigenvalues, vectors)`` with complex entries.
    """
    cand = [_ad_eigenvalues_from_op(op) for op in ops]
    sols = []
    for a1 in cand[0]:
        for a2 in cand[1]:
            stack = np.vstack([ops[0] - a1 * np.eye(3), ops[1] - a2 * np.eye(3)])
            ns = _nullspace(stack.astype(complex), tol)
            if ns.shape[1]:
                sols.append(((a1, a2), ns))
    return sols


def _ad_eigenvalues_from_op(op):
    # op = -ad(G); its spectrum is 0, +-sqrt(disc) with disc recoverable from the trace of op^2
    disc = 0.5 * float(np.trace(op @ op))
    r = cmath.sqrt(disc)
    out = []
    for v in (0.0, r, -r):
        if not any(abs(v - w) <= 1e-12 * max(1.0, abs(w)) for w in out):
            out.append(complex(v))
    return out


def _split_real(vals, vecs):
    """Real generators from complex joint solutions (conjugates deduplicated)."""
    out = []
    if all(abs(v.imag) <= 1e-12 * max(1.0, abs(v)) for v in vals):
        # real eigenvalues: a real basis of the (complex) null space
        basis = np.hstack([vecs.real, vecs.imag])
        u, s, vh = np.linalg.svd(basis, full_matrices=False)
        k = int(np.sum(s > 1e-9 * max(1.0, s[0])))
        for i in range(k):
            out.append((tuple(v.real for v in vals), u[:, i], "real"))
        return out
    if not any(v.imag > 0 or (v.imag == 0 and False) for v in vals) and vals[0].imag < 0:
        return out
    for i in range(vecs.shape[1]):
        w = vecs[:, i]
        w = w / w[np.argmax(np.abs(w))]
        out.append((vals, w, "complex"))
    return out


def typeA_solve(S: AffineSurface, tol=1e-8, grid=None) -> ParallelReport:
    if S.kind != "TypeA":
        raise PreconditionError("typeA_solve needs a Type A surface")
    G1 = christoffel_matrix(S, 1)
    G2 = christoffel_matrix(S, 2)
    rho = ricci_matrices(S, [S.center])[0]
    scale = max(1.0, np.abs(G1).max() ** 2, np.abs(G2).max() ** 2)
    notes = []
    if np.abs(rho).max() <= 1e-12 * scale:
        gens = _flat_typeA_generators(S, G1, G2)
        notes.append("flat: generators are parallel transports of the trace-free basis")
        err = transport_crosscheck(S, gens)
        notes.append(f"transport cross-check max deviation {err:.3g}")
        return _finish(S, gens, "typeA-flat", 3, notes, grid, tol)

    ops = (ad_operator(G1), ad_operator(G2))
    gens = []
    x1, x2 = Var("x1"), Var("x2")
    for vals, vecs in _joint_solutions(ops, tol):
        for a, w, kind in _split_real(vals, vecs):
            if kind == "complex":
                raise ParallelError("complex exponent on a non-flat Type A surface")
            t = _normalise_tf(tf_matrix(w))
            a1, a2 = (0.0 if abs(v) < 1e-14 else float(v) for v in a)
            pre = Func("exp", Num(a1) * x1 + Num(a2) * x2) if (a1 or a2) else None
            fld = _tensor_from(t, pre)
            cls, _, _ = classify_generator(fld, S.grid(3), 1e-8)
            gens.append(Generator(fld, cls, _clean(t), (a1, a2)))
    dim = len(gens)
    rank = np.linalg.matrix_rank(rho, tol=1e-10 * max(1.0, np.abs(rho).max()))
    if (dim == 1) != (rank == 1):
        notes.append(f"inconsistent: dim {dim} with rank(rho) {rank}")
    if dim > 1:
        raise ParallelError(f"non-flat Type A surface produced dim {dim}")
    if any(g.cls != NILPOTENT for g in gens):
        notes.append("inconsistent: non-nilpotent generator on a Type A surface")
    lemma = "typeA-nilpotent" if dim else "typeA-trivial"
    return _finish(S, gens, lemma, dim, notes, grid, tol)


def _gl_ops(G1, G2):
    # row-major vec: d_k vec T = (-(G_k kron I) + (I kron G_k^T)) vec T
    eye = np.eye(2)
    return tuple(-np.kron(G, eye) + np.kron(eye, G.T) for G in (G1, G2))


def _flat_typeA_generators(S, G1, G2):
    if not (np.any(G1) or np.any(G2)):
        return [Generator(_tensor_from(e), classify_generator(_tensor_from(e), [S.center])[0],
                          e.copy()) for e in TF_BASIS]
    ops = _gl_ops(G1, G2)
    gens = []
    for e in TF_BASIS:
        fld = MatrixExpTensor11(e.copy(), ops, tuple(S.center))
        cls, _, _ = classify_generator(fld, S.grid(3), 1e-8)
        gens.append(Generator(fld, cls, e.copy()))
    return gens


def transport_crosscheck(S, gens, n_targets=4):
    """Max deviation between a field's values and transport of its centre value."""
    c = np.array(S.center)
    targets = S.grid(2)[:n_targets]
    worst = 0.0
    for g in gens:
        t0 = g.field.values([c])[0]
        for q in targets:
            got = parallel_transport(S, t0, [c, q])
            want = g.field.values([q])[0]
            worst = max(worst, float(np.abs(got - want).max() / max(1.0, np.abs(want).max())))
    return worst


# --------------------------------------------------------------------------
# Type B

Q_TOL = 1e-12


def _match_q(C):
    c111, c112, c121, c122, c221, c222 = C
    if abs(c111) < Q_TOL and abs(c121 - 1) < Q_TOL and abs(c122) < Q_TOL and abs(c221) < Q_TOL \
            and abs(c222 - 1) < Q_TOL:
        return c112
    return None


def _match_p(C):
    c111, c112, c121, c122, c221, c222 = C
    c = c112
    if c == 0 or abs(c121) > Q_TOL:
        return None
    for sign in (1, -1):
        want = (-sign * c * c + 1, c, 0.0, -sign * c * c, sign * 1.0, sign * 2 * c)
        if all(abs(a - b) < Q_TOL * max(1.0, abs(b)) for a, b in zip(C, want)):
            return sign, c
    return None


def q_basis(c, verified=True):
    """Trace-free parallel basis for ``Q_c`` as real fields.

    For ``c < 0`` the complex power-form pair is split into real and
    imaginary parts.  For ``c = 0`` the verified log basis is returned unless
    ``verified=False``, which gives the entries exactly as commonly printed.
    """
    x1 = Var("x1")
    L = Func("log", x1)
    out = [("real", ExprTensor11.from_matrix([[0.0, 1.0], [c, 0.0]]))]
    if c > 0:
        r = math.sqrt(c)
        out.append(("real", ExprTensor11.from_matrix([[r, 1.0], [-c, -r]], x1 ** (2 * r))))
        out.append(("real", ExprTensor11.from_matrix([[-r, 1.0], [-c, r]], x1 ** (-2 * r))))
    elif c < 0:
        s = math.sqrt(-c)
        ang = Num(2 * s) * L
        co, si = Func("cos", ang), Func("sin", ang)
        # x1^{2is} (A + iB), A = [[0,1],[-c,0]], B = diag(s, -s)
        re = [[-s * si, co], [Num(-c) * co, Num(s) * si]]
        im = [[Num(s) * co, si], [Num(-c) * si, Num(-s) * co]]
        out.append(("re", ExprTensor11.from_matrix(re)))
        out.append(("im", ExprTensor11.from_matrix(im)))
    else:
        if verified:
            out.append(("real", ExprTensor11.from_matrix([[1.0, Num(2.0) * L], [0.0, -1.0]])))
            out.append(("real", ExprTensor11.from_matrix([[-L, Num(1.0) - L ** 2], [1.0, L]])))
        else:
            out.append(("real", ExprTensor11.from_matrix([[-L, Num(1.0) - L ** 2], [1.0, -L]])))
            out.append(("real", ExprTensor11.from_matrix([[-L, Num(-1.0) - L ** 2], [1.0, -L]])))
    return out


def p_basis(sign, c):
    """Trace-free parallel basis of the surfaces ``P^{+-}_{0,c}``."""
    x1, x2 = Var("x1"), Var("x2")
    inv = x1 ** (-1)
    u = x1 - Num(sign * 2 * c) * x2
    v = x1 - Num(sign * c) * x2
    b1 = [[-c, 1.0], [-c * c, c]]
    b2 = [[Num(sign * 0.5) * u, x2], [Num(sign * c) * v, Num(-sign * 0.5) * u]]
    b3 = [[Num(float(sign)) * x2 * v, x2 ** 2], [-(v ** 2), Num(-float(sign)) * x2 * v]]
    return [("real", ExprTensor11.from_matrix(b, inv)) for b in (b1, b2, b3)]


def _power_generators(ops, tol):
    """Power-form generators ``(x1)^alpha t`` from ``-ad C1`` and ``ad C2``."""
    A1, A2 = ops
    x1 = Var("x1")
    L = Func("log", x1)
    gens = []
    for alpha in _ad_eigenvalues_from_op(A1):
        stack = np.vstack([A1 - alpha * np.eye(3), A2]).astype(complex)
        ns = _nullspace(stack, tol)
        if not ns.shape[1]:
            continue
        if abs(alpha.imag) <= 1e-12 * max(1.0, abs(alpha)):
            a = alpha.real
            a = 0.0 if abs(a) < 1e-14 else a
            basis = np.hstack([ns.real, ns.imag])
            u, s, _ = np.linalg.svd(basis, full_matrices=False)
            k = min(ns.shape[1], int(np.sum(s > 1e-9 * max(1.0, s[0]))))
            for i in range(k):
                t = _normalise_tf(tf_matrix(u[:, i]))
                pre = x1 ** a if a else None
                gens.append((_tensor_from(t, pre), _clean(t), (a,), "real"))
        elif alpha.imag > 0:
            beta, gam = alpha.real, alpha.imag
            for i in range(ns.shape[1]):
                w = ns[:, i]
                w = w / w[np.argmax(np.abs(w))]
                tr, ti = tf_matrix(w.real), tf_matrix(w.imag)
                ang = Num(gam) * L
                co, si = Func("cos", ang), Func("sin", ang)
                pre = x1 ** beta if abs(beta) > 1e-14 else Num(1.0)
                re = [[pre * (co * float(tr[i_, j_]) - si * float(ti[i_, j_])) for j_ in range(2)]
                      for i_ in range(2)]
                im = [[pre * (si * float(tr[i_, j_]) + co * float(ti[i_, j_])) for j_ in range(2)]
                      for i_ in range(2)]
                gens.append((ExprTensor11.from_matrix(re), None, (complex(alpha),), "re"))
                gens.append((ExprTensor11.from_matrix(im), None, (complex(alpha),), "im"))
    return gens


def _typeB_lemma(t, alpha):
    if abs(alpha) < 1e-12:
        if abs(t[0, 1]) > 1e-12:
            return "typeB-const-t12"
        if abs(t[1, 0]) > 1e-12:
            return "typeB-const-t21"
        return "typeB-const-diag"
    return "typeB-power-t12" if abs(t[0, 1]) > 1e-12 else "typeB-power-t21"


def typeB_solve(S: AffineSurface, tol=1e-8, grid=None) -> ParallelReport:
    if S.kind != "TypeB":
        raise PreconditionError("typeB_solve needs a Type B surface")
    C1 = christoffel_matrix(S, 1)
    C2 = christoffel_matrix(S, 2)
    ops = (ad_operator(C1), -ad_operator(C2))
    found = _power_generators(ops, tol)
    notes = []
    pts = as_points(grid, S)
    probe = S.grid(3)
    if rho_s_is_zero(S, pts):
        q = _match_q(S.constants)
        p = _match_p(S.constants)
        if q is not None:
            gens = [Generator(f, classify_generator(f, probe)[0], part=part) for part, f in q_basis(q)]
            lemma = "typeB-Qc"
            if q == 0:
                notes.append("Q_0 basis uses the verified log form")
            return _finish(S, gens, lemma, 3, notes, grid, tol)
        if p is not None:
            gens = [Generator(f, classify_generator(f, probe)[0], part=part)
                    for part, f in p_basis(*p)]
            return _finish(S, gens, "typeB-P+" if p[0] > 0 else "typeB-P-", 3, notes, grid, tol)
        gens = [Generator(f, classify_generator(f, probe)[0], m, e, part) for f, m, e, part in found]
        complete = len(gens) >= 3
        if not complete:
            notes.append("incomplete basis: rho_s = 0 outside the literal normal forms")
        return _finish(S, gens[:3], "typeB-rho_s-zero", 3, notes, grid, tol, complete)

    if any(part != "real" for *_, part in found):
        raise ParallelError("complex exponent with rho_s != 0")
    gens = []
    for f, m, e, part in found:
        cls, _, _ = classify_generator(f, probe)
        gens.append(Generator(f, cls, m, e, part))
    if len(gens) > 1:
        raise ParallelError(f"rho_s != 0 but {len(gens)} power-form generators found")
    lemma = _typeB_lemma(gens[0].matrix, gens[0].exponent[0]) if gens else "typeB-trivial"
    return _finish(S, gens, lemma, len(gens), notes, grid, tol)


# --------------------------------------------------------------------------
# normal forms of general surfaces

def _vals(S, pts):
    jets = gamma_jets(S, pts, 1)
    G = jets[..., 0]
    dG = jets[..., 1:3]  # d1, d2
    return G, dG


def _zero(x, scale, tol):
    return bool(np.all(np.abs(x) <= tol * scale))


def _potential(name, g1, g2, S):
    return Potential(name, (g1, g2), tuple(S.center))


def recognize_normal_form(S: AffineSurface, grid=None, tol=1e-8):
    """Match the canonical Christoffel forms; return ``(tag, [fields])`` or ``None``."""
    pts = as_points(grid, S)
    G, dG = _vals(S, pts)
    scale = max(1.0, float(np.abs(G).max()), float(np.abs(dG).max()))
    g = lambda i, j, k: G[:, i - 1, j - 1, k - 1]
    d = lambda i, j, k, v: dG[:, i - 1, j - 1, k - 1, v - 1]
    z = lambda *xs: all(_zero(x, scale, tol) for x in xs)
    gam = S.gamma

    nil = z(g(1, 1, 1), g(1, 1, 2), g(1, 2, 2), g(2, 2, 2) - g(1, 2, 1))
    nil_int = z(d(1, 2, 1, 2) - d(2, 2, 1, 1))
    kah = z(g(1, 1, 1) - g(1, 2, 2), g(1, 1, 1) + g(2, 2, 1), g(1, 1, 2) + g(1, 2, 1),
            g(1, 2, 1) - g(2, 2, 2))
    kah_int = z(d(1, 1, 2, 2) - d(1, 1, 1, 1))
    para = z(g(1, 1, 2), g(1, 2, 1), g(1, 2, 2), g(2, 2, 1))
    para_int = z(d(1, 1, 1, 2) + d(2, 2, 2, 1))

    if nil and nil_int:
        phi = _potential("phi", gam(1, 2, 1), gam(2, 2, 1), S)
        basis = [ExprTensor11.from_matrix([[0.0, 1.0], [0.0, 0.0]]),
                 ExprTensor11.from_matrix([[1.0, Num(2.0) * phi], [0.0, -1.0]]),
                 ExprTensor11.from_matrix([[-phi, -(phi ** 2)], [1.0, phi]])]
        return "zero-rho_s", basis
    if kah and kah_int:
        psi = _potential("psi", Num(2.0) * gam(1, 1, 2), Num(2.0) * gam(1, 1, 1), S)
        c, s = Func("cos", psi), Func("sin", psi)
        basis = [ExprTensor11.from_matrix([[0.0, -1.0], [1.0, 0.0]]),
                 ExprTensor11.from_matrix([[c, -s], [-s, -c]]),
                 ExprTensor11.from_matrix([[s, c], [c, -s]])]
        return "kahler-full", basis
    if para and para_int:
        theta = _potential("theta", gam(1, 1, 1), -gam(2, 2, 2), S)
        basis = [ExprTensor11.from_matrix([[1.0, 0.0], [0.0, -1.0]]),
                 ExprTensor11.from_matrix([[0.0, 1.0], [0.0, 0.0]], Func("exp", -theta)),
                 ExprTensor11.from_matrix([[0.0, 0.0], [1.0, 0.0]], Func("exp", theta))]
        return "para-full", basis
    if nil:
        return "nilpotent", [ExprTensor11.from_matrix([[0.0, 1.0], [0.0, 0.0]])]
    if kah:
        return "kahler", [ExprTensor11.from_matrix([[0.0, -1.0], [1.0, 0.0]])]
    if para:
        return "para", [ExprTensor11.from_matrix([[1.0, 0.0], [0.0, -1.0]])]
    return None


def nilpotent_normal_basis(S):
    """The three-element basis for the nilpotent normal form with a potential.

    Uses ``psi`` with ``Gamma_12^1 = -d1 psi``, ``Gamma_22^1 = -d2 psi``.
    """
    psi = _potential("psi", -S.gamma(1, 2, 1), -S.gamma(2, 2, 1), S)
    return [ExprTensor11.from_matrix([[0.0, 1.0], [0.0, 0.0]]),
            ExprTensor11.from_matrix([[psi, -(psi ** 2)], [1.0, -psi]]),
            ExprTensor11.from_matrix([[1.0, Num(-2.0) * psi], [0.0, -1.0]])]


def construct_nilpotent_from_recurrence(S: AffineSurface, grid=None, tol=1e-8, mirrored=False):
    """Build ``T = exp(-int eta) d1 (x) dx2`` on kernel-aligned coordinates.

    With ``mirrored=True`` the roles of ``x1`` and ``x2`` are exchanged and the
    result is ``T = exp(-int eta') d2 (x) dx1``.
    """
    pts = as_points(grid, S)
    G, dG = _vals(S, pts)
    scale = max(1.0, float(np.abs(G).max()))
    a, b = (0, 1) if not mirrored else (1, 0)
    # standard role: Gamma_11^2 = Gamma_12^2 = 0
    if not (_zero(G[:, a, a, b], scale, tol) and _zero(G[:, a, b, b], scale, tol)):
        raise PreconditionError("kernel-aligned Christoffel conditions fail")
    rank, _ = ricci_rank(S, pts)
    rho = ricci_matrices(S, pts)
    rs = 0.5 * (rho + np.swapaxes(rho, 1, 2))
    rscale = max(1e-300, float(np.abs(rs).max()))
    if rank != 1 or not (_zero(rs[:, a, a], rscale, tol) and _zero(rs[:, a, b], rscale, tol)):
        raise PreconditionError("rho_s is not rank one with the expected kernel")
    ia, ib = a + 1, b + 1
    ga = S.gamma
    eta_a = ga(ia, ia, ia)
    eta_b = ga(ia, ib, ia) - ga(ib, ib, ib)
    # closedness d_a eta_b - d_b eta_a
    ja = eval_jets(eta_a, pts, 1, ("x1", "x2"))
    jb = eval_jets(eta_b, pts, 1, ("x1", "x2"))
    curl = jb[:, 1 + a] - ja[:, 1 + b]
    cscale = max(1.0, float(np.abs(ja[:, 1:]).max()), float(np.abs(jb[:, 1:]).max()))
    if not _zero(curl, cscale, tol):
        raise PreconditionError(f"eta is not closed (residual {np.abs(curl).max():.3g})")
    grad = (eta_a, eta_b) if not mirrored else (eta_b, eta_a)
    pot = Potential("eta", grad, tuple(S.center))
    comp = Func("exp", -pot)
    m = [[0.0, comp], [0.0, 0.0]] if not mirrored else [[0.0, 0.0], [comp, 0.0]]
    T = ExprTensor11.from_matrix(m)
    ok, res = is_parallel(S, T, pts, max(tol, 1e-8))
    if not ok:
        raise PreconditionError(f"constructed tensor is not parallel (residual {res:.3g})")
    return T


# --------------------------------------------------------------------------
# parallel transport oracle

def _segment_stages(S, p, q, n):
    s = np.linspace(0.0, 1.0, n + 1)
    h = 1.0 / n
    d = np.asarray(q) - np.asarray(p)
    nodes = np.concatenate([s[:-1], s[:-1] + 0.5 * h, s[1:]])
    pts = np.asarray(p)[None] + nodes[:, None] * d[None]
    G = gamma_jets(S, pts, 0)[..., 0]  # (M, k, l, i)
    A = np.einsum("mkli,k->mil", G, d)
    A = A.reshape(3, n, 2, 2).transpose(1, 0, 2, 3)
    return np.ascontiguousarray(A), np.full(n, h)


def parallel_transport(S: AffineSurface, t0, path, rel_step=1e-3, backend=None):
    """Transport ``t0`` (one 2x2 matrix or a stack) along a polyline with RK4."""
    path = np.atleast_2d(np.asarray(path, dtype=float))
    if len(path) < 2:
        raise ValueError("path needs at least two points")
    S.check_points(path)
    t = np.asarray(t0, dtype=float)
    single = t.ndim == 2
    t = t.reshape(-1, 2, 2)
    seg = np.linalg.norm(np.diff(path, axis=0), axis=1)
    total = float(seg.sum())
    if total == 0:
        return t[0] if single else t
    if rel_step <= 0 or rel_step < 1e-9:
        raise ValueError("step underflow")
    run = {"numba": _kernels.rk4_transport_numba, "numpy": _kernels.rk4_transport_numpy}.get(
        backend, _kernels.rk4_transport)
    stages, steps = [], []
    for p, q, ls in zip(path[:-1], path[1:], seg):
        if ls == 0:
            continue
        n = max(1, math.ceil(ls / (rel_step * total) - 1e-9))
        st, h = _segment_stages(S, p, q, n)
        stages.append(st)
        steps.append(h)
    out = run(np.concatenate(stages), np.concatenate(steps), t)
    return out[0] if single else out


def default_loops(S: AffineSurface, frac=0.35):
    """Four rectangular loops based at the domain centre, one per quadrant."""
    c = np.array(S.center)
    w = frac * 0.5 * (S.domain[0][1] - S.domain[0][0])
    h = frac * 0.5 * (S.domain[1][1] - S.domain[1][0])
    loops = []
    for sx, sy in ((1, 1), (-1, 1), (-1, -1), (1, -1)):
        loops.append(np.array([c, c + [sx * w, 0], c + [sx * w, sy * h], c + [0, sy * h], c]))
    return loops


def holonomy_fixed_space(S: AffineSurface, loops=None, tol=1e-7):
    """Fixed space of the loop holonomies acting on 2x2 matrices.

    Returns ``(dim, candidates)``; ``id`` is always a candidate, so this is an
    upper bound for ``1 + dim P0``.
    """
    loops = default_loops(S) if loops is None else loops
    if len(loops) < 2:
        raise ValueError("need at least two loops")
    basis = np.eye(4).reshape(4, 2, 2)
    blocks = []
    for loop in loops:
        loop = np.asarray(loop, dtype=float)
        if np.linalg.norm(loop[0] - loop[-1]) > 1e-12:
            raise ValueError("loop must be closed")
        out = parallel_transport(S, basis, loop)
        M = out.reshape(4, 4).T  # column k = image of basis k
        blocks.append(M - np.eye(4))
    ns = _nullspace(np.vstack(blocks), tol)
    cands = [ns[:, i].reshape(2, 2) for i in range(ns.shape[1])]
    return ns.shape[1], cands


# --------------------------------------------------------------------------
# dispatcher

def solve_parallel(S: AffineSurface, tol=1e-8, grid=None) -> ParallelReport:
    """Pick the solver for the surface kind; general surfaces use normal forms."""
    if S.kind == "TypeA":
        return typeA_solve(S, tol, grid)
    if S.kind == "TypeB":
        return typeB_solve(S, tol, grid)
    pts = as_points(grid, S)
    probe = S.grid(3)
    hit = recognize_normal_form(S, pts, tol)
    if hit is not None:
        tag, basis = hit
        gens = [Generator(f, classify_generator(f, probe)[0]) for f in basis]
        dim = len(gens)
        if dim == 1 and rho_s_is_zero(S, pts):
            return _finish(S, gens, tag, 3, ["incomplete basis: rho_s = 0"], grid, tol, False)
        return _finish(S, gens, tag, dim, [], grid, tol)
    for mirrored in (False, True):
        try:
            T = construct_nilpotent_from_recurrence(S, pts, tol, mirrored)
        except PreconditionError:
            continue
        tag = "nilpotent-constructed" + ("-mirrored" if mirrored else "")
        return _finish(S, [Generator(T, NILPOTENT)], tag, 1, [], grid, tol)
    dim, _ = holonomy_fixed_space(S)
    notes = ["no normal form matched; dimension from the holonomy bound"]
    d0 = max(dim - 1, 0)
    if d0 == 2:
        # the bound overshoots and dim 2 cannot occur, so at most 1 remains
        notes.append("holonomy bound 2 is not sharp; reporting the upper bound 1")
        d0 = 1
    return ParallelReport(d0, [], "unrecognised", 0.0, notes, d0 == 0)
