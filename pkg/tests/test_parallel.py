import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from affinekahler import parallel as par
from affinekahler.parallel import (
    KAHLER, NILPOTENT, PARA, ParallelError, ParallelReport, ad_operator, classify_generator,
    holonomy_fixed_space, is_parallel, p_basis, parallel_transport, q_basis, solve_parallel,
    tf_coords, tf_matrix, typeA_solve, typeB_solve,
)
from affinekahler.catalog import field_match
from affinekahler.scalarfield import parse_expr
from affinekahler.surface import AffineSurface, ExprTensor11, PreconditionError, ricci_rank

coef = st.floats(-2, 2, allow_nan=False).map(lambda v: round(v, 2))
mat = st.lists(coef, min_size=4, max_size=4).map(lambda v: np.array(v).reshape(2, 2))


@given(mat)
def test_ad_operator_trace_free_and_spectrum(G):
    op = ad_operator(G)
    assert abs(np.trace(op)) <= 1e-12
    ev = np.linalg.eigvals(op)
    lam = np.sqrt(complex(0.5 * np.trace(op @ op)))
    for w in (0, lam, -lam):
        # a 3x3 Jordan block limits eigvals accuracy to ~eps^(1/3)
        assert np.abs(ev - w).min() <= 1e-4 * max(1.0, np.abs(op).max())


@given(st.lists(coef, min_size=3, max_size=3))
def test_tf_roundtrip(v):
    m = tf_matrix(v)
    assert abs(np.trace(m)) == 0
    assert np.allclose(tf_coords(m), v)


def test_dim_two_is_rejected():
    with pytest.raises(ParallelError):
        ParallelReport(2, [], "x")
    with pytest.raises(ParallelError):
        ParallelReport(1, [], "x")
    ParallelReport(1, [], "x", basis_complete=False)


def test_classify_generator():
    pts = np.array([[0.7, 0.2], [1.3, -0.4]])
    assert classify_generator([[0, -2], [2, 0]], pts)[0] == KAHLER
    assert classify_generator([[3, 0], [0, -3]], pts)[0] == PARA
    assert classify_generator([[0, 5], [0, 0]], pts)[0] == NILPOTENT
    with pytest.raises(PreconditionError):
        classify_generator([[1, 0], [0, 1]], pts)


def _rank1_typeA(vals):
    g111, g121, g221, g222 = vals
    return AffineSurface.type_a(g111, 0.0, g121, 0.0, g221, g222)


@given(st.tuples(coef, coef, coef, coef))
def test_rank_one_type_a_has_one_nilpotent_generator(vals):
    S = _rank1_typeA(vals)
    rank, _ = ricci_rank(S)
    assume(rank == 1)
    rep = typeA_solve(S)
    assert rep.dim == 1 and rep.classes == [NILPOTENT]
    g111, g121, _, g222 = vals
    want = ExprTensor11.from_matrix([[0, 1], [0, 0]],
                                    parse_expr(f"exp({-g111}*x1 + ({g222 - g121})*x2)", ("x1", "x2")))
    assert field_match(rep.generators[0].field, want, S.grid()) >= 1 - 1e-10


@given(st.tuples(coef, coef, coef, coef, coef, coef))
def test_type_a_dimension_equals_holonomy_minus_one(g):
    S = AffineSurface.type_a(*g)
    rep = typeA_solve(S)
    assert rep.dim in (0, 1, 3)
    assert holonomy_fixed_space(S)[0] == rep.dim + 1
    for gen in rep.generators:
        assert is_parallel(S, gen.field, S.grid(), 1e-8)[0]


def test_flat_type_a():
    S = AffineSurface.type_a(1.0, 1.0, 1.0, 1.0, 1.0, 1.0)
    rep = typeA_solve(S)
    assert rep.dim == 3 and rep.lemma == "typeA-flat"
    assert typeA_solve(AffineSurface.type_a()).dim == 3


@pytest.mark.parametrize("c", [-2.0, -0.5, 0.0, 0.25, 1.0, 3.0])
def test_q_basis_parallel(c):
    from affinekahler.catalog import make
    S, _ = make("Q", c=c)
    basis = q_basis(c)
    assert len(basis) == 3
    for _, f in basis:
        ok, res = is_parallel(S, f, S.grid(), 1e-8)
        assert ok, res
    v = np.array([f.values(np.array([S.center]))[0].ravel() for _, f in basis])
    assert np.linalg.matrix_rank(v, 1e-9) == 3


def test_q0_literal_entries_are_not_parallel():
    from affinekahler.catalog import make
    S, _ = make("Q", c=0.0)
    res = [is_parallel(S, f, S.grid())[1] for _, f in q_basis(0.0, verified=False)[1:]]
    assert min(res) > 1.0


@pytest.mark.parametrize("sign", [1, -1])
@pytest.mark.parametrize("c", [-1.5, 0.5, 2.0])
def test_p_basis_parallel(sign, c):
    from affinekahler.catalog import make
    S, _ = make("P+" if sign > 0 else "P-", c=c)
    for _, f in p_basis(sign, c):
        assert is_parallel(S, f, S.grid(), 1e-8)[0]
    assert typeB_solve(S).dim == 3


@given(st.tuples(coef, coef, coef, coef, coef, coef))
def test_type_b_dimension_equals_holonomy_minus_one(c):
    S = AffineSurface.type_b(*c)
    rep = typeB_solve(S)
    assert rep.dim in (0, 1, 3)
    h, _ = holonomy_fixed_space(S)
    assert h == rep.dim + 1
    for gen in rep.generators:
        assert is_parallel(S, gen.field, S.grid(), 1e-8)[0]


def test_transport_returns_solved_generator():
    from affinekahler.catalog import make
    S, _ = make("B-power-t12")
    gen = solve_parallel(S).generators[0].field
    for loop in par.default_loops(S):
        t0 = gen.values(loop[:1])[0]
        t1 = parallel_transport(S, t0, loop)
        assert np.abs(t1 - t0).max() <= 1e-6 * np.abs(t0).max()


def test_transport_backends_agree():
    from affinekahler import _kernels
    if not _kernels.HAVE_NUMBA:
        pytest.skip("numba not importable")
    S = AffineSurface.type_b(0.3, 1.0, 0.0, 0.5, -1.0, 0.2)
    loop = par.default_loops(S)[0]
    a = parallel_transport(S, np.eye(2), loop, backend="numba")
    b = parallel_transport(S, np.eye(2), loop, backend="numpy")
    assert np.allclose(a, b, atol=1e-13)


def test_transport_rejects_bad_paths():
    S = AffineSurface.type_a(1.0)
    with pytest.raises(ValueError):
        parallel_transport(S, np.eye(2), [(0, 0)])
    with pytest.raises(ValueError):
        holonomy_fixed_space(S, [np.array([(0, 0), (0.1, 0), (0.1, 0.1)])] * 2)


def test_construct_from_recurrence():
    box = ((0.5, 1.5), (0.5, 1.5))
    S = AffineSurface.general(box, g111="x2", g121="x1", g221="x1*x2^2", g222="x2")
    rep = solve_parallel(S)
    assert rep.lemma == "nilpotent-constructed" and rep.dim == 1
    M = AffineSurface.general(box, g222="x1", g122="x2", g112="x2*x1^2", g111="x1")
    rep = solve_parallel(M)
    assert rep.lemma == "nilpotent-constructed-mirrored" and rep.dim == 1
    assert is_parallel(M, rep.generators[0].field, M.grid())[0]


def test_unrecognised_general_surface_uses_holonomy():
    S = AffineSurface.general(((0.5, 1.5), (0.5, 1.5)), g111="x1*x2", g121="x2", g221="x1^3",
                              g222="x1")
    rep = solve_parallel(S)
    assert rep.dim == 0 and rep.lemma == "unrecognised"
