"""Values of gradient-defined potentials by adaptive line integration."""

from __future__ import annotations

import numpy as np
from scipy.integrate import quad_vec

from .expr import Potential, evaluate

QUAD_EPSREL = 1e-12
QUAD_EPSABS = 1e-13


def potential_values(node: Potential, points, variables) -> np.ndarray:
    """Integrate ``node.grad`` from ``node.base`` to each point.

    The path runs parallel to the first axis, then parallel to the second.
    ``quad_vec`` integrates all points at once with a shared adaptive mesh.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    idx = [variables.index(v) for v in node.variables]
    q = pts[:, idx]
    b = np.asarray(node.base, dtype=float)
    g1, g2 = node.grad
    sv = tuple(node.variables)

    def leg1(s):
        x = np.column_stack([b[0] + s * (q[:, 0] - b[0]), np.full(len(q), b[1])])
        return evaluate(g1, x, sv) * (q[:, 0] - b[0])

    def leg2(s):
        x = np.column_stack([q[:, 0], b[1] + s * (q[:, 1] - b[1])])
        return evaluate(g2, x, sv) * (q[:, 1] - b[1])

    v1, _ = quad_vec(leg1, 0.0, 1.0, epsrel=QUAD_EPSREL, epsabs=QUAD_EPSABS, norm="max")
    v2, _ = quad_vec(leg2, 0.0, 1.0, epsrel=QUAD_EPSREL, epsabs=QUAD_EPSABS, norm="max")
    return np.asarray(v1 + v2, dtype=float)
