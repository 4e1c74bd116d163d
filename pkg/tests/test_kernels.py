import os
import subprocess
import sys

import numpy as np
import pytest

from affinekahler import _kernels
from affinekahler.parallel import _segment_stages
from affinekahler.scalarfield import get_space
from affinekahler.surface import AffineSurface

needs_numba = pytest.mark.skipif(not _kernels.HAVE_NUMBA, reason="numba not importable")


@needs_numba
@pytest.mark.parametrize("dim,order", [(2, 4), (4, 2), (4, 4)])
def test_jet_mul_backends_agree(dim, order, rng):
    sp = get_space(dim, order)
    a = rng.normal(size=(50, sp.ncoef))
    b = rng.normal(size=(50, sp.ncoef))
    x = _kernels.jet_mul_numba(a, b, sp.mul_table)
    y = _kernels.jet_mul_numpy(a, b, sp.mul_table)
    assert np.allclose(x, y, rtol=1e-13, atol=1e-12)


@needs_numba
def test_rk4_backends_agree(rng):
    S = AffineSurface.type_b(0.5, 1, -1, 0.3, 1, 2.0)
    stages, h = _segment_stages(S, (0.8, -0.5), (1.5, 0.6), 500)
    t0 = rng.normal(size=(3, 2, 2))
    x = _kernels.rk4_transport_numba(stages, h, t0)
    y = _kernels.rk4_transport_numpy(stages, h, t0)
    assert np.allclose(x, y, rtol=1e-12, atol=1e-13)


SCRIPT = """
from affinekahler import _kernels, catalog
from affinekahler.extension import build_extension, curvature_packet
from affinekahler.parallel import solve_parallel
S, _ = catalog.make("B-const-t12")
T = solve_parallel(S).generators[0].field
gm = build_extension(S, {"b11": "x1*x2", "b22": "sin(x2)"}, T)
pk = curvature_packet(gm, (1.1, 0.4, 0.3, -0.2))
print(_kernels.BACKEND, repr(float(abs(pk.riemann).sum())))
"""


def _run(backend):
    env = dict(os.environ, AFFINEKAHLER_BACKEND=backend)
    return subprocess.run([sys.executable, "-c", SCRIPT], env=env, capture_output=True, text=True)


def test_env_var_selects_backend():
    outs = {}
    for b in ("numpy", "numba"):
        r = _run(b)
        assert r.returncode == 0, r.stderr
        name, val = r.stdout.split()
        if _kernels.HAVE_NUMBA:
            assert name == b
        outs[b] = float(val)
    assert outs["numpy"] == pytest.approx(outs["numba"], rel=1e-12)


def test_bad_backend_rejected():
    r = _run("fortran")
    assert r.returncode != 0 and "AFFINEKAHLER_BACKEND" in r.stderr
