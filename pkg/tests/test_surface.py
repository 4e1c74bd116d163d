import numpy as np
import pytest
from hypothesis import given, strategies as st

from affinekahler import catalog
from affinekahler.scalarfield import DomainError, fd_partial, parse_expr
from affinekahler.surface import (
    AffineSurface, ExprTensor11, PreconditionError, RicciSymmetricField, SymBilinField,
    affine_qe_residual, calibration_self_test, covariant_derivative_02, covariant_derivative_11,
    is_projectively_flat, kernel_recurrence_checks, recurrence_form, ricci_at, ricci_matrices,
    ricci_rank, rho_s_is_zero,
)

coef = st.floats(-3, 3, allow_nan=False).map(lambda v: round(v, 3))
six = st.tuples(coef, coef, coef, coef, coef, coef)


def test_calibration_identities():
    r1, r2 = calibration_self_test()
    assert r1 <= 1e-9 and r2 <= 1e-12


def test_q1_ricci():
    S = AffineSurface.type_b(c112=1, c121=1, c222=1, domain=((0.5, 3.0), (0.0, 6.0)))
    d = ricci_at(S, (2.0, 5.0))
    assert d.rho[0, 1] == pytest.approx(0.25, abs=1e-12)
    assert d.rho[1, 0] == pytest.approx(-0.25, abs=1e-12)
    assert np.abs(d.rho_s).max() <= 1e-12


def test_nilpotent_family_rho_s():
    # rho_s = (d1 G22^1 - d2 G12^1) dx2 dx2 for G11^k = G12^2 = 0, G12^1 = G22^2
    S = AffineSurface.general(((0.1, 2.0), (0.1, 2.0)), g121="x1^2", g221="x2*x1^3", g222="x1^2")
    pts = S.grid()
    rs = np.array([ricci_at(S, p).rho_s for p in pts])
    want = 3 * pts[:, 0] ** 2 * pts[:, 1]
    assert np.abs(rs[:, 1, 1] - want).max() <= 1e-9
    assert np.abs(rs[:, 0, :]).max() <= 1e-12


def test_rank_and_sign_on_normal_forms():
    assert ricci_rank(catalog.make("kahler-normal")[0]) == (2, 1)
    assert ricci_rank(catalog.make("para-normal")[0]) == (2, -1)
    assert ricci_rank(catalog.make("nilpotent-normal")[0])[0] == 1
    assert rho_s_is_zero(catalog.make("Q")[0])


def test_projective_flatness():
    ok, _ = is_projectively_flat(AffineSurface.type_a(g111=1.0, g121=2.0, g221=-1.0, g222=0.5))
    assert ok
    S = AffineSurface.general(((0.1, 2.0), (0.1, 2.0)), g121="x1", g221="x2", g222="x1^2")
    ok, worst = is_projectively_flat(S)
    assert not ok and worst > 1e-3


@given(six)
def test_ricci_split_type_a(g):
    S = AffineSurface.type_a(*g)
    d = ricci_at(S, (0.1, -0.2))
    assert np.array_equal(d.rho_s, d.rho_s.T)
    assert np.array_equal(d.rho_sk, -d.rho_sk.T)
    assert np.allclose(d.rho_s + d.rho_sk, d.rho, rtol=0, atol=1e-15)


@given(six, st.floats(0.6, 1.9), st.floats(-0.9, 0.9))
def test_type_b_ricci_scales_as_inverse_square(c, x, y):
    S = AffineSurface.type_b(*c)
    r1 = ricci_matrices(S, (x, y))[0]
    r2 = ricci_matrices(S, (1.0, 0.0))[0] / x ** 2
    assert np.allclose(r1, r2, atol=1e-12)


def test_type_b_domain():
    with pytest.raises(DomainError):
        AffineSurface.type_b(1, domain=((-1.0, 1.0), (0.0, 1.0)))
    with pytest.raises(DomainError):
        ricci_at(AffineSurface.type_b(1), (3.0, 0.0))


def test_symbilin_reads_symmetric():
    b = SymBilinField.from_values(1.0, 2.0, 3.0)
    assert b.component(1, 0) is b.component(0, 1)


GEN = AffineSurface.general(((0.5, 1.5), (0.5, 1.5)), g111="sin(x2)", g112="x1*x2",
                            g121="x1^2", g122="cos(x1)", g221="x2^3", g222="exp(x1-x2)")
T_EXPR = [["x1*x2", "sin(x1)"], ["x2^2", "exp(x2)"]]


def _fd_grad(text, p):
    e = parse_expr(text, ("x1", "x2"))
    return np.array([fd_partial(e, p, a, variables=("x1", "x2")) for a in ((1, 0), (0, 1))])


def _gam(p):
    from affinekahler.surface import gamma_jets
    return gamma_jets(GEN, np.atleast_2d(p), 0)[0, ..., 0]


def test_cov_11_against_fd():
    T = ExprTensor11.from_matrix(T_EXPR)
    for p in GEN.sample(5, np.random.default_rng(1)):
        G = _gam(p)
        Tv = T.values(p[None])[0]
        dT = np.array([[_fd_grad(T_EXPR[i][j], p) for j in range(2)] for i in range(2)])
        want = dT + np.einsum("kli,lj->ijk", G, Tv) - np.einsum("kjl,il->ijk", G, Tv)
        assert np.abs(covariant_derivative_11(GEN, T, p[None]) - want).max() <= 1e-5


def test_cov_02_against_fd():
    B = [["x1*x2", "x2^2"], ["x2^2", "sin(x1)"]]
    b = SymBilinField.from_values(*(parse_expr(t, ("x1", "x2")) for t in ("x1*x2", "x2^2", "sin(x1)")))
    for p in GEN.sample(5, np.random.default_rng(2)):
        G = _gam(p)
        bv = np.array([[parse_expr(B[i][j], ("x1", "x2")) for j in range(2)] for i in range(2)])
        vals = np.array([[float(fd_partial(bv[i, j], p, (0, 0), variables=("x1", "x2")))
                          for j in range(2)] for i in range(2)])
        db = np.array([[_fd_grad(B[i][j], p) for j in range(2)] for i in range(2)])
        want = db - np.einsum("kil,lj->ijk", G, vals) - np.einsum("kjl,il->ijk", G, vals)
        assert np.abs(covariant_derivative_02(GEN, b, p[None]) - want).max() <= 1e-5


def test_recurrence_on_nilpotent_normal_form():
    S, e = catalog.make("nilpotent-normal")
    p = np.array([[1.1, 1.2]])
    w = recurrence_form(S, RicciSymmetricField(S), p)
    assert w is not None
    assert np.allclose(w, e.omega(p)[0], atol=1e-9)


def test_kernel_recurrence_checks_agree():
    for name in ("nilpotent-normal", "R52", "B-const-t12", "B-power-t12"):
        S, _ = catalog.make(name)
        try:
            flags = kernel_recurrence_checks(S)
        except PreconditionError:
            continue
        assert len(set(flags)) == 1, (name, flags)
    assert kernel_recurrence_checks(catalog.make("nilpotent-normal")[0]) == (True, True, True)
    assert kernel_recurrence_checks(catalog.make("R52")[0]) == (False, False, False)


def test_affine_qe_residual_zero_potential_is_twice_rho_s():
    S, _ = catalog.make("kahler-normal")
    p = (1.0, 0.8)
    assert np.allclose(affine_qe_residual(S, "0", 2.0, p), 2 * ricci_at(S, p).rho_s)
