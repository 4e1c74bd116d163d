"""Hot numeric kernels with a numba path and a pure-numpy path.

Two kernels dominate runtime: the truncated product of batched jets (every
node of every expression evaluation) and the RK4 sweep of the parallel
transport equation.  Both have an ``@njit`` implementation and a vectorised
numpy implementation computing the same arithmetic.

Backend selection happens once at import from ``AFFINEKAHLER_BACKEND``
(``numba`` by default, ``numpy`` to disable compilation).  If numba cannot be
imported the numpy path is used silently.  Both implementations stay
importable under explicit names for tests and benchmarks.
"""

from __future__ import annotations

import os

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f


BACKEND = os.environ.get("AFFINEKAHLER_BACKEND", "numba").strip().lower()
if BACKEND not in ("numba", "numpy"):
    raise ImportError(f"AFFINEKAHLER_BACKEND must be 'numba' or 'numpy', got {BACKEND!r}")
if not HAVE_NUMBA:
    BACKEND = "numpy"
USE_NUMBA = BACKEND == "numba"


# --------------------------------------------------------------------------
# truncated jet product


@njit(cache=True)
def _jet_mul_numba(a, b, ia, ib, ic, w, ncoef):
    m = a.shape[0]
    out = np.zeros((m, ncoef))
    nt = ia.shape[0]
    for r in range(m):
        for t in range(nt):
            out[r, ic[t]] += w[t] * a[r, ia[t]] * b[r, ib[t]]
    return out


def _jet_mul_numpy(a, b, ia, ib, ic, w, ncoef):
    prod = a[:, ia] * b[:, ib] * w
    out = np.zeros((a.shape[0], ncoef))
    # ic is sorted, so reduceat groups each output coefficient
    starts = np.searchsorted(ic, np.arange(ncoef))
    out[:, :] = np.add.reduceat(prod, starts, axis=1)
    return out


def jet_mul_numba(a, b, table):
    ia, ib, ic, w, ncoef = table
    return _jet_mul_numba(np.ascontiguousarray(a), np.ascontiguousarray(b), ia, ib, ic, w, ncoef)


def jet_mul_numpy(a, b, table):
    ia, ib, ic, w, ncoef = table
    return _jet_mul_numpy(a, b, ia, ib, ic, w, ncoef)


# --------------------------------------------------------------------------
# RK4 sweep for dT/ds = -(A(s) T - T A(s))


@njit(cache=True)
def _rk4_numba(stages, h, t0):
    # stages[n, q] is A at s_n, s_n + h/2, s_n + h for q = 0, 1, 2
    nsteps = stages.shape[0]
    m = t0.shape[0]
    t = t0.copy()
    k1 = np.empty((2, 2))
    k2 = np.empty((2, 2))
    k3 = np.empty((2, 2))
    k4 = np.empty((2, 2))
    y = np.empty((2, 2))
    for r in range(m):
        for n in range(nsteps):
            hn = h[n]
            for q in range(4):
                if q == 0:
                    a = stages[n, 0]
                    for i in range(2):
                        for j in range(2):
                            y[i, j] = t[r, i, j]
                elif q == 1:
                    a = stages[n, 1]
                    for i in range(2):
                        for j in range(2):
                            y[i, j] = t[r, i, j] + 0.5 * hn * k1[i, j]
                elif q == 2:
                    a = stages[n, 1]
                    for i in range(2):
                        for j in range(2):
                            y[i, j] = t[r, i, j] + 0.5 * hn * k2[i, j]
                else:
                    a = stages[n, 2]
                    for i in range(2):
                        for j in range(2):
                            y[i, j] = t[r, i, j] + hn * k3[i, j]
                for i in range(2):
                    for j in range(2):
                        v = 0.0
                        for l in range(2):
                            v += a[i, l] * y[l, j] - y[i, l] * a[l, j]
                        if q == 0:
                            k1[i, j] = -v
                        elif q == 1:
                            k2[i, j] = -v
                        elif q == 2:
                            k3[i, j] = -v
                        else:
                            k4[i, j] = -v
            for i in range(2):
                for j in range(2):
                    t[r, i, j] += hn / 6.0 * (k1[i, j] + 2.0 * k2[i, j] + 2.0 * k3[i, j] + k4[i, j])
    return t


def _generator(a):
    # vec(T) row-major: vec(A T) = (A kron I) vec T, vec(T A) = (I kron A^T) vec T
    eye = np.eye(2)
    return -np.einsum("...il,jk->...ijlk", a, eye).reshape(a.shape[:-2] + (4, 4)) + np.einsum(
        "ik,...lj->...ijkl", eye, a
    ).reshape(a.shape[:-2] + (4, 4))


def _rk4_numpy(stages, h, t0):
    l0 = _generator(stages[:, 0])
    lh = _generator(stages[:, 1])
    l1 = _generator(stages[:, 2])
    eye = np.eye(4)
    hh = h[:, None, None]
    k1 = l0
    k2 = lh @ (eye + 0.5 * hh * k1)
    k3 = lh @ (eye + 0.5 * hh * k2)
    k4 = l1 @ (eye + hh * k3)
    steps = eye + hh / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    # ordered product steps[N-1] ... steps[0] by pairwise reduction
    while steps.shape[0] > 1:
        if steps.shape[0] % 2:
            steps = np.concatenate([steps, eye[None]], axis=0)
        steps = steps[1::2] @ steps[0::2]
    prop = steps[0]
    vec = t0.reshape(t0.shape[0], 4)
    return (vec @ prop.T).reshape(t0.shape)


def rk4_transport_numba(stages, h, t0):
    return _rk4_numba(np.ascontiguousarray(stages, dtype=float), np.ascontiguousarray(h, dtype=float),
                      np.ascontiguousarray(t0, dtype=float))


def rk4_transport_numpy(stages, h, t0):
    return _rk4_numpy(np.asarray(stages, dtype=float), np.asarray(h, dtype=float),
                      np.asarray(t0, dtype=float))


if USE_NUMBA:
    jet_mul = jet_mul_numba
    rk4_transport = rk4_transport_numba
else:
    jet_mul = jet_mul_numpy
    rk4_transport = rk4_transport_numpy
