"""Truncated multivariate Taylor jets.

Storage convention: a jet of order ``k`` in ``d`` variables is a vector of
``binomial(k + d, d)`` RAW partial derivatives ``d^alpha f(p)`` (not divided
by ``alpha!``), one per multi-index ``|alpha| <= k``, in graded order (all
order-0 entries, then order 1, ...).  Raw storage makes differentiation a
gather and keeps curvature formulas index-transparent; the product is the
Leibniz rule, a truncated convolution with multinomial weights.

Batched jets are plain ``ndarray`` objects of shape ``(..., ncoef)``; the
:class:`Jet` class wraps a single point for the public API.
"""

from __future__ import annotations

import itertools
import math
from functools import lru_cache

import numpy as np

from .. import _kernels
from .expr import (
    EXTENSION_VARS, SURFACE_VARS, Add, Div, DomainError, Expr, ExprError, Func,
    Mul, Neg, Num, Pow, Potential, Sub, Var, free_vars,
)

MAX_ORDER = 6


class JetSpace:
    """Index tables for jets of a given dimension and order."""

    def __init__(self, dim: int, order: int):
        if order < 0 or order > MAX_ORDER:
            raise ValueError(f"jet order must be in 0..{MAX_ORDER}, got {order}")
        self.dim = dim
        self.order = order
        idx = []
        for total in range(order + 1):
            for combo in itertools.combinations_with_replacement(range(dim), total):
                alpha = [0] * dim
                for v in combo:
                    alpha[v] += 1
                idx.append(tuple(alpha))
        # combinations_with_replacement yields graded-lex; keep the order stable
        self.multi_indices = idx
        self.index = {a: i for i, a in enumerate(idx)}
        self.ncoef = len(idx)
        assert self.ncoef == math.comb(order + dim, dim)
        self.total_order = np.array([sum(a) for a in idx])

        ia, ib, ic, w = [], [], [], []
        for c, gamma in enumerate(idx):
            for a, alpha in enumerate(idx):
                beta = tuple(g - x for g, x in zip(gamma, alpha))
                if min(beta) < 0:
                    continue
                weight = 1
                for g, x in zip(gamma, alpha):
                    weight *= math.comb(g, x)
                ia.append(a)
                ib.append(self.index[beta])
                ic.append(c)
                w.append(float(weight))
        self.mul_table = (
            np.array(ia, dtype=np.int64),
            np.array(ib, dtype=np.int64),
            np.array(ic, dtype=np.int64),
            np.array(w),
            self.ncoef,
        )

    def __repr__(self):
        return f"JetSpace(dim={self.dim}, order={self.order})"

    @property
    def lower(self) -> "JetSpace":
        return get_space(self.dim, self.order - 1)

    def deriv_index(self, var: int) -> np.ndarray:
        """Source indices such that ``a[..., deriv_index(v)]`` is ``d_v a``."""
        return _deriv_index(self.dim, self.order, var)


@lru_cache(maxsize=None)
def get_space(dim: int, order: int) -> JetSpace:
    return JetSpace(dim, order)


@lru_cache(maxsize=None)
def _deriv_index(dim, order, var):
    src = get_space(dim, order)
    dst = get_space(dim, order - 1)
    out = []
    for alpha in dst.multi_indices:
        beta = list(alpha)
        beta[var] += 1
        out.append(src.index[tuple(beta)])
    return np.array(out, dtype=np.int64)


# --------------------------------------------------------------------------
# batched jet algebra (arrays of shape (..., ncoef))

def jmul(a: np.ndarray, b: np.ndarray, space: JetSpace) -> np.ndarray:
    a, b = np.broadcast_arrays(a, b)
    shape = a.shape
    out = _kernels.jet_mul(a.reshape(-1, shape[-1]), b.reshape(-1, shape[-1]), space.mul_table)
    return out.reshape(shape)


def jconst(value, space: JetSpace, shape=None) -> np.ndarray:
    if shape is None:
        shape = np.shape(value)
    out = np.zeros(tuple(shape) + (space.ncoef,))
    out[..., 0] = value
    return out


def jderiv(a: np.ndarray, space: JetSpace, var: int) -> np.ndarray:
    """Partial derivative; the result lives in ``space.lower``."""
    return a[..., space.deriv_index(var)]


def jgrad(a: np.ndarray, space: JetSpace) -> np.ndarray:
    """Stack of partials along a new axis just before the coefficient axis."""
    return np.stack([jderiv(a, space, v) for v in range(space.dim)], axis=-2)


def jtruncate(a: np.ndarray, space: JetSpace, order: int) -> np.ndarray:
    return a[..., : get_space(space.dim, order).ncoef]


def jcompose(a: np.ndarray, derivs: np.ndarray, space: JetSpace) -> np.ndarray:
    """``f(a)`` given ``derivs[..., m] = f^(m)(a0)`` for ``m = 0..order``."""
    d = a.copy()
    d[..., 0] = 0.0
    out = jconst(derivs[..., 0], space)
    power = jconst(1.0, space, a.shape[:-1])
    fact = 1.0
    for m in range(1, space.order + 1):
        power = jmul(power, d, space)
        fact *= m
        out = out + (derivs[..., m] / fact)[..., None] * power
    return out


def jinv(a: np.ndarray, space: JetSpace) -> np.ndarray:
    a0 = a[..., 0]
    if np.any(a0 == 0):
        raise DomainError("division by zero")
    m = np.arange(space.order + 1)
    derivs = np.stack([(-1.0) ** k * math.factorial(k) * a0 ** (-(k + 1.0)) for k in m], axis=-1)
    return jcompose(a, derivs, space)


def jeinsum(subscripts: str, a: np.ndarray, b: np.ndarray, space: JetSpace) -> np.ndarray:
    """Tensor contraction of two jet-valued arrays with the truncated product.

    ``subscripts`` uses ordinary einsum notation for the tensor axes only; the
    trailing coefficient axis is handled here.
    """
    ins, out = subscripts.replace(" ", "").split("->")
    sa, sb = ins.split(",")
    t = "Z"
    ia, ib, ic, w, ncoef = space.mul_table
    at = a[..., ia] * w
    bt = b[..., ib]
    prod = np.einsum(f"{sa}{t},{sb}{t}->{out}{t}", at, bt, optimize=True)
    starts = _starts(space)
    return np.add.reduceat(prod, starts, axis=-1)


@lru_cache(maxsize=None)
def _starts_cached(dim, order):
    space = get_space(dim, order)
    return np.searchsorted(space.mul_table[2], np.arange(space.ncoef))


def _starts(space):
    return _starts_cached(space.dim, space.order)


# --------------------------------------------------------------------------
# expression -> jets

def _variables_for(e: Expr, variables):
    if variables is not None:
        return tuple(variables)
    names = free_vars(e)
    if names & {"y1", "y2"}:
        return EXTENSION_VARS
    return SURFACE_VARS


def eval_jets(e: Expr, points, order: int, variables=None) -> np.ndarray:
    """Batched jets of ``e`` at ``points`` (shape ``(N, D)``) -> ``(N, ncoef)``."""
    variables = _variables_for(e, variables)
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[1] != len(variables):
        raise ValueError(f"points have {pts.shape[1]} coordinates, context has {len(variables)}")
    space = get_space(len(variables), order)
    return _JetEvaluator(pts, variables, space).run(e)


class _JetEvaluator:
    def __init__(self, pts, variables, space):
        self.pts = pts
        self.variables = variables
        self.space = space
        self.n = pts.shape[0]
        self.memo = {}

    def run(self, e):
        out = self.go(e)
        if not np.all(np.isfinite(out)):
            raise DomainError("non-finite jet coefficient")
        return out

    def go(self, node):
        key = id(node)
        hit = self.memo.get(key)
        if hit is not None:
            return hit[1]
        out = self._eval(node)
        # keep node alive so id() stays unique during this evaluation
        self.memo[key] = (node, out)
        return out

    def _eval(self, node):
        sp = self.space
        if isinstance(node, Num):
            return jconst(np.full(self.n, node.value), sp)
        if isinstance(node, Var):
            if node.name not in self.variables:
                raise ExprError(f"variable {node.name!r} not in context {self.variables}")
            v = self.variables.index(node.name)
            out = jconst(self.pts[:, v], sp)
            if sp.order >= 1:
                unit = [0] * sp.dim
                unit[v] = 1
                out[:, sp.index[tuple(unit)]] = 1.0
            return out
        if isinstance(node, Potential):
            return self._potential(node)
        if isinstance(node, Neg):
            return -self.go(node.arg)
        if isinstance(node, Add):
            return self.go(node.left) + self.go(node.right)
        if isinstance(node, Sub):
            return self.go(node.left) - self.go(node.right)
        if isinstance(node, Mul):
            return jmul(self.go(node.left), self.go(node.right), sp)
        if isinstance(node, Div):
            num = self.go(node.left)
            den = self.go(node.right)
            if isinstance(node.right, Num):
                return num / node.right.value
            return jmul(num, jinv(den, sp), sp)
        if isinstance(node, Pow):
            return self._pow(self.go(node.base), node.exponent)
        if isinstance(node, Func):
            return self._func(node.name, self.go(node.arg))
        raise TypeError(f"unknown node {node!r}")

    def _pow(self, a, p):
        sp = self.space
        a0 = a[..., 0]
        if p.is_integer() and p >= 0:
            k = int(p)
            result = jconst(1.0, sp, a.shape[:-1])
            base = a
            while k:
                if k & 1:
                    result = jmul(result, base, sp)
                k >>= 1
                if k:
                    base = jmul(base, base, sp)
            return result
        if p.is_integer():
            if np.any(a0 == 0):
                raise DomainError("negative power of zero")
            return jinv(self._pow(a, -p), sp)
        if np.any(a0 <= 0):
            raise DomainError(f"non-integer power {p} of non-positive value")
        coef = np.ones(sp.order + 1)
        for m in range(1, sp.order + 1):
            coef[m] = coef[m - 1] * (p - m + 1)
        derivs = np.stack([coef[m] * a0 ** (p - m) for m in range(sp.order + 1)], axis=-1)
        return jcompose(a, derivs, sp)

    def _func(self, name, a):
        sp = self.space
        a0 = a[..., 0]
        k = sp.order
        if name == "exp":
            e0 = np.exp(a0)
            derivs = np.stack([e0] * (k + 1), axis=-1)
        elif name == "sin" or name == "cos":
            s, c = np.sin(a0), np.cos(a0)
            cycle = [s, c, -s, -c] if name == "sin" else [c, -s, -c, s]
            derivs = np.stack([cycle[m % 4] for m in range(k + 1)], axis=-1)
        elif name == "log":
            if np.any(a0 <= 0):
                raise DomainError("log of non-positive value")
            ds = [np.log(a0)]
            for m in range(1, k + 1):
                ds.append((-1.0) ** (m - 1) * math.factorial(m - 1) * a0 ** (-float(m)))
            derivs = np.stack(ds, axis=-1)
        elif name == "sqrt":
            if np.any(a0 <= 0):
                raise DomainError("sqrt of non-positive value")
            return self._pow(a, 0.5)
        else:
            raise TypeError(f"unknown function {name!r}")
        return jcompose(a, derivs, sp)

    def _potential(self, node):
        from .potential import potential_values

        sp = self.space
        out = jconst(potential_values(node, self.pts, self.variables), sp)
        if sp.order == 0:
            return out
        sub = _JetEvaluator(self.pts, self.variables, sp.lower)
        sub.memo = {}
        grads = {}
        for i, v in enumerate(node.variables):
            grads[self.variables.index(v)] = sub.go(node.grad[i])
        for c, alpha in enumerate(sp.multi_indices):
            if c == 0:
                continue
            v = next(j for j, x in enumerate(alpha) if x)
            if v not in grads:
                continue
            beta = list(alpha)
            beta[v] -= 1
            out[:, c] = grads[v][:, sp.lower.index[tuple(beta)]]
        # mixed partials with a variable outside the potential's own are zero
        for c, alpha in enumerate(sp.multi_indices):
            if any(alpha[j] for j in range(sp.dim) if j not in grads):
                out[:, c] = 0.0
        return out


# --------------------------------------------------------------------------
# single-point public API

class Jet:
    """Raw partial derivatives of a scalar at one point, up to ``order``.

    ``jet[(1, 0)]`` is ``d f / d x1``; ``jet[(0, 2)]`` is ``d^2 f / d x2^2``.
    """

    __slots__ = ("point", "order", "coeffs", "space")

    def __init__(self, point, order, coeffs):
        self.point = tuple(float(x) for x in point)
        self.order = int(order)
        self.space = get_space(len(self.point), self.order)
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape != (self.space.ncoef,):
            raise ValueError(f"expected {self.space.ncoef} coefficients, got {coeffs.shape}")
        coeffs.setflags(write=False)
        self.coeffs = coeffs

    @property
    def value(self) -> float:
        return float(self.coeffs[0])

    def __getitem__(self, alpha) -> float:
        alpha = tuple(int(a) for a in alpha)
        if sum(alpha) > self.order:
            raise KeyError(f"multi-index {alpha} exceeds jet order {self.order}")
        return float(self.coeffs[self.space.index[alpha]])

    def items(self):
        return zip(self.space.multi_indices, self.coeffs)

    def _common(self, other):
        if not isinstance(other, Jet):
            other = Jet(self.point, self.order, jconst(float(other), self.space))
        if other.point != self.point:
            raise ValueError("jets at different base points")
        k = min(self.order, other.order)
        sp = get_space(len(self.point), k)
        return sp, self.coeffs[: sp.ncoef], other.coeffs[: sp.ncoef]

    def __add__(self, other):
        sp, a, b = self._common(other)
        return Jet(self.point, sp.order, a + b)

    __radd__ = __add__

    def __sub__(self, other):
        sp, a, b = self._common(other)
        return Jet(self.point, sp.order, a - b)

    def __neg__(self):
        return Jet(self.point, self.order, -self.coeffs)

    def __mul__(self, other):
        sp, a, b = self._common(other)
        return Jet(self.point, sp.order, jmul(a[None], b[None], sp)[0])

    __rmul__ = __mul__

    def __repr__(self):
        return f"Jet(point={self.point}, order={self.order}, value={self.value:.6g})"


def eval_jet(e: Expr, p, k: int, variables=None) -> Jet:
    """Jet of ``e`` at the single point ``p`` up to order ``k`` (0..4 typical)."""
    p = np.asarray(p, dtype=float)
    if variables is None:
        variables = _variables_for(e, None)
        if len(p) != len(variables):
            variables = EXTENSION_VARS[: len(p)]
    coeffs = eval_jets(e, p[None], k, variables)[0]
    return Jet(p, k, coeffs)
