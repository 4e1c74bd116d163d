"""Named surfaces with their expected curvature and parallel-tensor data.

Every entry builds an :class:`~affinekahler.surface.AffineSurface` and an
:class:`Expectation` holding the closed-form data the surface is known to
satisfy.  :func:`run_checks` compares those closed forms with what the
package computes; running it over :func:`entries` and :func:`families_grid`
is the master regression suite.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import parallel as par
from .scalarfield.expr import SURFACE_VARS, parse_expr
from .surface import (
    AffineSurface, ExprTensor11, det_sign, recurrence_form, ricci_matrices, ricci_rank,
)


class CatalogError(ValueError):
    pass


@dataclass
class Expectation:
    location: str
    rho: Optional[Callable] = None  # points -> (N, 2, 2) full Ricci
    rho_s: Optional[Callable] = None  # points -> (N, 2, 2) symmetric part
    dim: Optional[int] = None
    generators: list = field(default_factory=list)  # printed fields
    classes: list = field(default_factory=list)
    lemma: Optional[str] = None
    recurrent: Optional[bool] = None
    omega: Optional[Callable] = None  # points -> (N, 2)
    notes: list = field(default_factory=list)

    def summary(self):
        return {
            "location": self.location,
            "dim": self.dim,
            "classes": list(self.classes),
            "lemma": self.lemma,
            "recurrent": self.recurrent,
            "generators": [g.describe() for g in self.generators],
            "notes": list(self.notes),
        }


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    description: str
    params: dict
    build: Callable

    def make(self, **params):
        unknown = set(params) - set(self.params)
        if unknown:
            raise CatalogError(f"{self.name}: unknown parameters {sorted(unknown)}")
        full = dict(self.params)
        full.update({k: float(v) for k, v in params.items()})
        return self.build(**full)


def _x1(p):
    return np.atleast_2d(p)[:, 0]


def _const_over_x1sq(m, scale=1.0):
    m = np.asarray(m, dtype=float)
    return lambda p: scale * m[None] / _x1(p)[:, None, None] ** 2


def _const(m):
    m = np.asarray(m, dtype=float)
    return lambda p: np.broadcast_to(m, (len(np.atleast_2d(p)), 2, 2)).copy()


def _wedge12(a):
    return np.array([[0.0, a], [-a, 0.0]])


def _pointwise(fn):
    """Wrap ``fn(x1, x2) -> 2x2 nested list`` as a batched closed form."""
    def run(p):
        p = np.atleast_2d(p)
        return np.array([np.array(fn(x, y), dtype=float) for x, y in p[:, :2]])
    return run


def _require(cond, msg):
    if not cond:
        raise CatalogError(msg)


def _mat(m):
    return ExprTensor11.from_matrix(np.asarray(m, dtype=float).tolist())


# --------------------------------------------------------------------------
# Type A

def _type_a_rank1(g111, g121, g221, g222, name, location):
    S = AffineSurface.type_a(g111=g111, g121=g121, g221=g221, g222=g222, name=name)
    r22 = -g121 ** 2 + g111 * g221 + g121 * g222
    a1, a2 = -g111, g222 - g121
    gen = ExprTensor11.from_matrix([[0.0, f"exp({a1!r}*x1 + {a2!r}*x2)"], [0.0, 0.0]])
    rank1 = abs(r22) > 1e-12
    e = Expectation(location, rho=_const([[0.0, 0.0], [0.0, r22]]),
                    dim=1 if rank1 else 3, generators=[gen] if rank1 else [],
                    classes=[par.NILPOTENT] if rank1 else [],
                    lemma="typeA-nilpotent" if rank1 else "typeA-flat",
                    recurrent=True if rank1 else None)
    return S, e


def _flat():
    S = AffineSurface.type_a(name="flat")
    e = Expectation("zero connection", rho=_const(np.zeros((2, 2))), dim=3,
                    generators=[_mat(m) for m in par.TF_BASIS],
                    classes=[par.PARA, par.NILPOTENT, par.NILPOTENT], lemma="typeA-flat")
    return S, e


def _m2():
    return _type_a_rank1(-1.0, -0.5, 0.0, 0.0, "M2", "Type A model M_2 with parameter -1/2")


def _m5(c):
    return _type_a_rank1(-1.0, c, -1.0, 2 * c, "M5", "Type A model M_5 with parameter 0")


def _typeA_rank1(g111, g121, g221, g222):
    _require(abs(-g121 ** 2 + g111 * g221 + g121 * g222) > 1e-12,
             "rank-one family needs -g121^2 + g111 g221 + g121 g222 != 0")
    return _type_a_rank1(g111, g121, g221, g222, "typeA-rank1",
                         "Type A surfaces with Gamma_11^2 = Gamma_12^2 = 0")


def _typeA_generic():
    # all-ones constants are flat; these give rank(rho) = 2
    S = AffineSurface.type_a(1.0, 0.5, -1.0, 2.0, 0.3, 1.0, name="typeA-generic")
    e = Expectation("rank-two Ricci Type A surface", dim=0, lemma="typeA-trivial", recurrent=None)
    return S, e


# --------------------------------------------------------------------------
# Type B with rho_s = 0

def _q(c):
    S = AffineSurface.type_b(0.0, c, 1.0, 0.0, 0.0, 1.0, name="Q")
    basis = [f for _, f in par.q_basis(c)]
    classes = [par.classify_generator(f, S.grid(3))[0] for f in basis]
    notes = ["log basis verified by nabla T = 0"] if c == 0 else []
    e = Expectation("Q_c model, Ricci display and parallel basis",
                    rho=_const_over_x1sq(_wedge12(1.0)), rho_s=_const_over_x1sq(np.zeros((2, 2))),
                    dim=3, generators=basis, classes=classes, lemma="typeB-Qc", notes=notes)
    return S, e


def _p(sign, c):
    _require(c != 0, "P models need c != 0")
    S = AffineSurface.type_b(-sign * c * c + 1, c, 0.0, -sign * c * c, float(sign), 2 * sign * c,
                             name="P+" if sign > 0 else "P-")
    basis = [f for _, f in par.p_basis(sign, c)]
    classes = [par.classify_generator(f, S.grid(3))[0] for f in basis]
    e = Expectation("P_{0,c} models, Ricci display and parallel basis",
                    rho=_const_over_x1sq(_wedge12(sign * c)), rho_s=_const_over_x1sq(np.zeros((2, 2))),
                    dim=3, generators=basis, classes=classes,
                    lemma="typeB-P+" if sign > 0 else "typeB-P-")
    return S, e


# --------------------------------------------------------------------------
# Type B with rho_s != 0

R52_C222 = (3 + 2 * math.sqrt(3)) / 3


def _r52():
    S = AffineSurface.type_b(1, 1, 1, 1, 1, R52_C222, name="R52")
    r3 = math.sqrt(3)
    m = [[1 + 2 / r3, 1 / r3], [1 / r3, 2 / r3 - 1]]
    e = Expectation("rank-one non-recurrent Type B example", rho_s=_const_over_x1sq(m), dim=0,
                    lemma="typeB-trivial", recurrent=False)
    return S, e


def _b_power_gen(alpha, t):
    pre = parse_expr(f"x1^{alpha!r}", SURFACE_VARS) if alpha else None
    return ExprTensor11.from_matrix(np.asarray(t, dtype=float).tolist(), pre)


def _class_of(t):
    d = np.linalg.det(np.asarray(t, dtype=float))
    if abs(d) <= 1e-12:
        return par.NILPOTENT
    return par.KAHLER if d > 0 else par.PARA


def _b_const_t12(t11, t21, c221, c222):
    """Constant generator with ``t12 = 1``; needs ``C22^1 != 0``."""
    _require(c221 != 0, "family needs C22^1 != 0")
    k = c222 + 2 * c221 * t11
    C = (c221 * t21 + 2 * k * t11, k * t21, k, c221 * t21, c221, c222)
    S = AffineSurface.type_b(*C, name="B-const-t12")
    t = [[t11, 1.0], [t21, -t11]]
    e = Expectation("constant generator, t^1_2 = 1",
                    rho_s=_const_over_x1sq([[t21, -t11], [-t11, -1.0]], c221), dim=1,
                    generators=[_b_power_gen(0.0, t)], classes=[_class_of(t)],
                    lemma="typeB-const-t12", recurrent=True)
    return S, e


def _b_const_t21(t11, c112, c122):
    """Constant generator with ``t21 = 1``, ``t12 = 0``; needs ``C12^2 != 0``."""
    _require(c122 != 0, "family needs C12^2 != 0")
    C = (c122 + 2 * c112 * t11, c112, 0.0, c122, 0.0, -2 * c122 * t11)
    S = AffineSurface.type_b(*C, name="B-const-t21")
    t = [[t11, 0.0], [1.0, -t11]]
    e = Expectation("constant generator, t^2_1 = 1",
                    rho=_const_over_x1sq([[1.0, -2 * t11], [0.0, 0.0]], c122), dim=1,
                    generators=[_b_power_gen(0.0, t)], classes=[_class_of(t)],
                    lemma="typeB-const-t21", recurrent=True)
    return S, e


def _b_const_diag(c111, c222):
    _require(c222 != 0, "family needs C22^2 != 0")
    S = AffineSurface.type_b(c111, 0.0, 0.0, 0.0, 0.0, c222, name="B-const-diag")
    t = [[1.0, 0.0], [0.0, -1.0]]
    e = Expectation("diagonal constant generator",
                    rho=_const_over_x1sq([[0.0, 1.0], [0.0, 0.0]], c222), dim=1,
                    generators=[_b_power_gen(0.0, t)], classes=[par.PARA],
                    lemma="typeB-const-diag", recurrent=True)
    return S, e


def b_power_t12_alpha(t11, c111, c221, c222):
    return -c111 + t11 * (2 * c222 + 3 * c221 * t11)


def _b_power_t12(t11, c111, c221, c222):
    alpha = b_power_t12_alpha(t11, c111, c221, c222)
    _require(c221 != 0, "family needs C22^1 != 0")
    _require(abs(alpha) > 1e-9 and abs(alpha + 1) > 1e-9, "family needs alpha not in {0, -1}")
    C = (c111, t11 * (-c111 + t11 * (c222 + c221 * t11)), c222 + 2 * c221 * t11,
         -c221 * t11 ** 2, c221, c222)
    S = AffineSurface.type_b(*C, name="B-power-t12")
    t = [[t11, 1.0], [-t11 ** 2, -t11]]
    e = Expectation("power generator with t^1_2 = 1",
                    rho_s=_const_over_x1sq([[t11 ** 2, t11], [t11, 1.0]], -c221 * (1 + alpha)),
                    dim=1, generators=[_b_power_gen(alpha, t)], classes=[par.NILPOTENT],
                    lemma="typeB-power-t12", recurrent=True)
    return S, e


def _b_power_t21(c111, c112, c122):
    alpha = c111 - c122
    _require(abs(alpha) > 1e-9 and abs(alpha + 1) > 1e-9, "family needs alpha not in {0, -1}")
    _require(c122 != 0, "family needs C12^2 != 0 so that rho != 0")
    S = AffineSurface.type_b(c111, c112, 0.0, c122, 0.0, 0.0, name="B-power-t21")
    t = [[0.0, 0.0], [1.0, 0.0]]
    e = Expectation("power generator along d2 (x) dx1",
                    rho=_const_over_x1sq([[1.0, 0.0], [0.0, 0.0]], (1 + alpha) * c122), dim=1,
                    generators=[_b_power_gen(alpha, t)], classes=[par.NILPOTENT],
                    lemma="typeB-power-t21", recurrent=True)
    return S, e


# --------------------------------------------------------------------------
# general surfaces in normal form

UNIT_BOX = ((0.5, 1.5), (0.5, 1.5))


def _zero_rho_s_phi():
    # phi = x1^2
    S = AffineSurface.general(UNIT_BOX, name="zero-rho_s", g121="2*x1", g221="0", g222="2*x1")
    tag, basis = par.recognize_normal_form(S)
    e = Expectation("zero rho_s normal form with potential phi = x1^2",
                    rho=_const(_wedge12(-2.0)), dim=3, generators=basis,
                    classes=[par.NILPOTENT, par.PARA, par.PARA], lemma="zero-rho_s",
                    notes=["potential gauged to vanish at the domain centre"])
    return S, e


def _zero_rho_s_psi():
    # psi = x1 x2^2 with Gamma_12^1 = -d1 psi, Gamma_22^1 = -d2 psi
    S = AffineSurface.general(UNIT_BOX, name="zero-rho_s-psi", g121="-(x2^2)", g221="-2*x1*x2",
                              g222="-(x2^2)")
    basis = par.nilpotent_normal_basis(S)
    e = Expectation("nilpotent normal form with potential psi = x1 x2^2",
                    rho_s=_const(np.zeros((2, 2))), dim=3, generators=basis,
                    classes=[par.NILPOTENT, par.PARA, par.PARA], lemma="zero-rho_s")
    return S, e


NIL_BOX = ((0.5, 1.5), (0.75, 1.5))


def _nilpotent_normal():
    S = AffineSurface.general(NIL_BOX, name="nilpotent-normal", g121="x1*x2",
                              g221="x1^2*x2 + x2^3", g222="x1*x2")
    rs = _pointwise(lambda x, y: [[0.0, 0.0], [0.0, 2 * x * y - x]])

    def omega(p):
        p = np.atleast_2d(p)
        x, y = p[:, 0], p[:, 1]
        r = 2 * x * y - x
        return np.stack([(2 * y - 1) / r, -(2 * x * y - 2 * x / r)], 1)

    e = Expectation("nilpotent normal form, recurrence form display", rho_s=rs, dim=1,
                    generators=[_mat([[0.0, 1.0], [0.0, 0.0]])], classes=[par.NILPOTENT],
                    lemma="nilpotent", recurrent=True, omega=omega)
    return S, e


def _kahler_normal():
    # a = x1 x2, b = x2^2: G11^1 = G12^2 = -G22^1 = a, G11^2 = -G12^1 = -G22^2 = -b
    S = AffineSurface.general(UNIT_BOX, name="kahler-normal", g111="x1*x2", g122="x1*x2",
                              g221="-x1*x2", g112="-(x2^2)", g121="x2^2", g222="x2^2")
    rs = _pointwise(lambda x, y: [[-3 * y, 0.0], [0.0, -3 * y]])

    def omega(p):
        # dx2 coefficient is d2 log rho_s22 - 2 Gamma_12^1
        p = np.atleast_2d(p)
        x, y = p[:, 0], p[:, 1]
        return np.stack([-2 * x * y, 1.0 / y + 2 * (-(y ** 2))], 1)

    e = Expectation("Kahler normal form, recurrence form display", rho_s=rs, dim=1,
                    generators=[_mat([[0.0, -1.0], [1.0, 0.0]])], classes=[par.KAHLER],
                    lemma="kahler", recurrent=True, omega=omega,
                    notes=["dx2 coefficient uses Gamma_12^1 (equivalently -Gamma_11^2)"])
    return S, e


def _para_normal():
    S = AffineSurface.general(UNIT_BOX, name="para-normal", g111="x1*x2^2")
    rs = _pointwise(lambda x, y: [[0.0, -x * y], [-x * y, 0.0]])

    def omega(p):
        p = np.atleast_2d(p)
        x, y = p[:, 0], p[:, 1]
        return np.stack([-(x * y ** 2 - 1.0 / x), 1.0 / y], 1)

    e = Expectation("para-Kahler normal form, recurrence form display", rho_s=rs, dim=1,
                    generators=[_mat([[1.0, 0.0], [0.0, -1.0]])], classes=[par.PARA],
                    lemma="para", recurrent=True, omega=omega)
    return S, e


def _kahler_full():
    # psi = x1 x2: G11^1 = d2 psi / 2, G11^2 = d1 psi / 2
    S = AffineSurface.general(UNIT_BOX, name="kahler-full", g111="0.5*x1", g122="0.5*x1",
                              g221="-0.5*x1", g112="0.5*x2", g121="-0.5*x2", g222="-0.5*x2")
    _, basis = par.recognize_normal_form(S)
    e = Expectation("Kahler normal form with potential psi = x1 x2",
                    rho_s=_const(np.zeros((2, 2))), dim=3, generators=basis,
                    classes=[par.KAHLER, par.PARA, par.PARA], lemma="kahler-full")
    return S, e


def _para_full():
    # theta = x1 x2: G11^1 = d1 theta, G22^2 = -d2 theta
    S = AffineSurface.general(UNIT_BOX, name="para-full", g111="x2", g222="-x1")
    _, basis = par.recognize_normal_form(S)
    e = Expectation("para-Kahler normal form with potential theta = x1 x2",
                    rho_s=_const(np.zeros((2, 2))), dim=3, generators=basis,
                    classes=[par.PARA, par.NILPOTENT, par.NILPOTENT], lemma="para-full")
    return S, e


_ENTRIES = [
    CatalogEntry("flat", "zero connection on a box", {}, _flat),
    CatalogEntry("M2", "Type A model with a nilpotent parallel tensor", {}, _m2),
    CatalogEntry("M5", "Type A family with a nilpotent parallel tensor", {"c": 0.0}, _m5),
    CatalogEntry("typeA-rank1", "Type A with Gamma_11^2 = Gamma_12^2 = 0",
                 {"g111": 1.0, "g121": 2.0, "g221": 3.0, "g222": 5.0}, _typeA_rank1),
    CatalogEntry("typeA-generic", "Type A with rank-two Ricci tensor", {},
                 _typeA_generic),
    CatalogEntry("Q", "Type B model Q_c (rho_s = 0)", {"c": 1.0}, _q),
    CatalogEntry("P+", "Type B model P+_{0,c} (rho_s = 0)", {"c": 1.0}, lambda c: _p(1, c)),
    CatalogEntry("P-", "Type B model P-_{0,c} (rho_s = 0)", {"c": 1.0}, lambda c: _p(-1, c)),
    CatalogEntry("R52", "Type B, rank-one rho_s that is not recurrent", {}, _r52),
    CatalogEntry("B-const-t12", "Type B family, constant generator with t12 = 1",
                 {"t11": 0.3, "t21": -0.09, "c221": 1.0, "c222": 0.5}, _b_const_t12),
    CatalogEntry("B-const-t21", "Type B family, constant generator with t21 = 1",
                 {"t11": 0.5, "c112": 1.0, "c122": 2.0}, _b_const_t21),
    CatalogEntry("B-const-diag", "Type B family, generator diag(1, -1)",
                 {"c111": 0.7, "c222": 1.5}, _b_const_diag),
    CatalogEntry("B-power-t12", "Type B family, power generator with t12 = 1",
                 {"t11": 0.5, "c111": 0.3, "c221": 1.0, "c222": 1.0}, _b_power_t12),
    CatalogEntry("B-power-t21", "Type B family, power generator along d2 (x) dx1",
                 {"c111": 2.0, "c112": 0.0, "c122": 0.5}, _b_power_t21),
    CatalogEntry("zero-rho_s", "normal form with rho_s = 0 (potential phi)", {}, _zero_rho_s_phi),
    CatalogEntry("zero-rho_s-psi", "nilpotent normal form with rho_s = 0 (potential psi)", {},
                 _zero_rho_s_psi),
    CatalogEntry("nilpotent-normal", "nilpotent normal form with rho_s != 0", {}, _nilpotent_normal),
    CatalogEntry("kahler-normal", "Kahler normal form with rho_s != 0", {}, _kahler_normal),
    CatalogEntry("para-normal", "para-Kahler normal form with rho_s != 0", {}, _para_normal),
    CatalogEntry("kahler-full", "Kahler normal form with rho_s = 0", {}, _kahler_full),
    CatalogEntry("para-full", "para-Kahler normal form with rho_s = 0", {}, _para_full),
]

ENTRIES = {e.name: e for e in _ENTRIES}


def names():
    return [e.name for e in _ENTRIES]


def make(name, **params):
    """``(surface, expectation)`` for a catalog entry."""
    try:
        entry = ENTRIES[name]
    except KeyError:
        raise CatalogError(f"unknown catalog entry {name!r}") from None
    return entry.make(**params)


def entries():
    """Every entry at its default parameters, as ``(name, surface, expectation)``."""
    return [(e.name,) + e.make() for e in _ENTRIES]


# small deterministic parameter sweeps (at most 5 values each)
FAMILY_SWEEPS = {
    "B-const-t12": {"t11": (-0.5, 0.0, 0.5), "t21": (-1.0, 0.25, 1.0), "c221": (1.0, -2.0),
                    "c222": (0.0, 0.5)},
    "B-const-t21": {"t11": (-0.5, 0.0, 0.5, 1.0), "c112": (0.0, 1.0, -1.0), "c122": (2.0, -1.0)},
    "B-const-diag": {"c111": (-1.0, 0.0, 0.5), "c222": (1.5, -2.0, 0.7)},
    "B-power-t12": {"t11": (-0.5, 0.0, 0.5), "c111": (0.3, -1.2, 2.0), "c221": (1.0, -0.5),
                    "c222": (0.0, 1.0)},
    "B-power-t21": {"c111": (-0.5, 1.0, 2.5), "c112": (0.0, 1.0), "c122": (-1.0, 0.5, 2.0)},
}


def families_grid():
    """Sweep every Type B family over its grid, skipping invalid points."""
    out = []
    for name, sweep in FAMILY_SWEEPS.items():
        keys = list(sweep)
        for vals in itertools.product(*(sweep[k] for k in keys)):
            params = dict(zip(keys, vals))
            try:
                S, e = make(name, **params)
            except CatalogError:
                continue
            out.append((name, params, S, e))
    return out


# --------------------------------------------------------------------------
# checks

def field_match(F, G, points):
    """Cosine similarity of two sampled (1,1)-fields (1 means equal up to scale)."""
    u = F.values(points).ravel()
    v = G.values(points).ravel()
    return float(abs(u @ v) / (np.linalg.norm(u) * np.linalg.norm(v)))


def _rel(a, b):
    return float(np.abs(a - b).max() / max(1.0, np.abs(b).max()))


def run_checks(S, e: Expectation, seed=0, npts=10, holonomy=True):
    """Compare computed data with the expectation; returns ``{check: (ok, value, tol)}``."""
    rng = np.random.default_rng(seed)
    pts = S.sample(npts, rng)
    grid = S.grid()
    out = {}
    rho = ricci_matrices(S, pts)
    rs = 0.5 * (rho + np.swapaxes(rho, 1, 2))
    if e.rho is not None:
        v = _rel(rho, e.rho(pts))
        out["rho"] = (v <= 1e-9, v, 1e-9)
    if e.rho_s is not None:
        v = _rel(rs, e.rho_s(pts))
        out["rho_s"] = (v <= 1e-9, v, 1e-9)
    rep = par.solve_parallel(S)
    if e.dim is not None:
        out["dim"] = (rep.dim == e.dim, rep.dim, e.dim)
    if e.lemma is not None:
        out["lemma"] = (rep.lemma == e.lemma, rep.lemma, e.lemma)
    worst = 0.0
    for g in e.generators:
        worst = max(worst, par.is_parallel(S, g, grid, 1e-8)[1])
    if e.generators:
        out["printed_parallel"] = (worst <= 1e-8, worst, 1e-8)
    if e.dim == 1 and e.generators and rep.generators:
        sim = field_match(rep.generators[0].field, e.generators[0], pts)
        out["generator_match"] = (sim >= 1 - 1e-10, 1 - sim, 1e-10)
    if e.classes and len(rep.generators) == len(e.classes) and e.dim == 1:
        out["class"] = (rep.classes == list(e.classes), rep.classes[0], e.classes[0])
    if e.recurrent is not None:
        is_rec = True
        om = []
        for p in pts:
            w = recurrence_form(S, _rs_field(S), p)
            if w is None:
                is_rec = False
                break
            om.append(w)
        out["recurrent"] = (is_rec == e.recurrent, is_rec, e.recurrent)
        if e.omega is not None and is_rec:
            v = _rel(np.array(om), e.omega(pts))
            out["omega"] = (v <= 1e-7, v, 1e-7)
    if e.dim == 1 and e.recurrent and rep.generators:
        out["trichotomy"] = _trichotomy(S, rep.classes[0], grid)
    if holonomy:
        h, _ = par.holonomy_fixed_space(S)
        out["holonomy"] = (h == rep.dim + 1, h, rep.dim + 1)
    return out


def _rs_field(S):
    from .surface import RicciSymmetricField

    return RicciSymmetricField(S)


def _trichotomy(S, cls, grid):
    rank, sign = ricci_rank(S, grid)
    want = {1: par.NILPOTENT}.get(rank) if rank == 1 else (par.KAHLER if sign > 0 else par.PARA)
    return (cls == want, cls, want)
