"""Central finite differences, used only as an independent oracle."""

from __future__ import annotations

import itertools

import numpy as np

from .expr import DomainError, EXTENSION_VARS, Expr, evaluate

# second-order accurate central stencils, offsets -r..r
_STENCILS = {
    0: np.array([1.0]),
    1: np.array([-0.5, 0.0, 0.5]),
    2: np.array([1.0, -2.0, 1.0]),
    3: np.array([-0.5, 1.0, 0.0, -1.0, 0.5]),
    4: np.array([1.0, -4.0, 6.0, -4.0, 1.0]),
}


def default_step(order: int) -> float:
    return 1e-3 if order <= 2 else 1e-2


def fd_partial(e: Expr, p, multi_index, h=None, variables=None, domain=None) -> float:
    """Estimate ``d^alpha e (p)`` with a tensor-product central stencil.

    ``domain`` is an optional box ``[(lo, hi), ...]``; a stencil point outside
    it raises :class:`DomainError` instead of silently sampling there.
    """
    p = np.asarray(p, dtype=float)
    alpha = tuple(int(a) for a in multi_index)
    if len(alpha) != len(p):
        raise ValueError("multi-index length must match point dimension")
    total = sum(alpha)
    if total > 4:
        raise ValueError("finite-difference oracle supports total order <= 4")
    if h is None:
        h = default_step(total)
    if variables is None:
        variables = EXTENSION_VARS[: len(p)]

    axes = []
    for a in alpha:
        w = _STENCILS[a]
        r = (len(w) - 1) // 2
        axes.append([(k - r, w[k]) for k in range(len(w)) if w[k] != 0.0])

    offsets, weights = [], []
    for combo in itertools.product(*axes):
        offsets.append([o for o, _ in combo])
        weights.append(np.prod([w for _, w in combo]))
    pts = p + h * np.array(offsets, dtype=float)
    if domain is not None:
        lo = np.array([b[0] for b in domain])
        hi = np.array([b[1] for b in domain])
        if np.any(pts < lo) or np.any(pts > hi):
            raise DomainError("finite-difference stencil leaves the domain")
    vals = evaluate(e, pts, variables)
    return float(np.dot(weights, vals) / h ** total)
