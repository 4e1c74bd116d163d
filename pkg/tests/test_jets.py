import itertools
from math import comb, factorial

import numpy as np
import pytest
from hypothesis import given, strategies as st

from affinekahler.scalarfield import eval_jet, eval_jets, fd_partial, get_space, parse_expr
from affinekahler.scalarfield.jets import jinv, jmul, jtruncate

V2 = ("x1", "x2")


def test_exp_jet():
    j = eval_jet(parse_expr("exp(x1)", V2), (0, 0), 2, V2)
    assert [j[a] for a in [(0, 0), (1, 0), (2, 0)]] == pytest.approx([1, 1, 1])
    assert [j[a] for a in [(0, 1), (1, 1), (0, 2)]] == [0, 0, 0]


def test_polynomial_jet():
    j = eval_jet(parse_expr("x1^2*x2", V2), (2, 3), 2, V2)
    got = [j[a] for a in [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]]
    assert got == pytest.approx([12, 12, 4, 6, 4, 0], abs=1e-14)


def test_reciprocal_jet_matches_oracle():
    e = parse_expr("x1^(-1)", V2)
    j = eval_jet(e, (2, 0), 3, V2)
    want = [0.5, -0.25, 0.25, -0.375]
    got = [j[(k, 0)] for k in range(4)]
    assert got == pytest.approx(want, rel=1e-14)
    for k in range(1, 4):
        assert fd_partial(e, (2, 0), (k, 0), variables=V2) == pytest.approx(want[k], abs=1e-3)


def test_fd_examples():
    assert abs(fd_partial(parse_expr("sin(x2)", V2), (0, 0), (0, 1), variables=V2) - 1) <= 1e-6
    assert abs(fd_partial(parse_expr("x1^3", V2), (1, 0), (3, 0), variables=V2) - 6) <= 1e-3


@pytest.mark.parametrize("dim,order", [(2, 0), (2, 4), (4, 2), (4, 4)])
def test_coefficient_count(dim, order):
    assert get_space(dim, order).ncoef == comb(order + dim, dim)


def _monomial_partial(i, j, a, b, p):
    # d^a/dx1^a d^b/dx2^b of x1^i x2^j
    if a > i or b > j:
        return 0.0
    c = factorial(i) / factorial(i - a) * factorial(j) / factorial(j - b)
    return c * p[0] ** (i - a) * p[1] ** (j - b)


@given(st.lists(st.integers(-5, 5), min_size=15, max_size=15),
       st.floats(-2, 2), st.floats(-2, 2))
def test_polynomial_exactness(coeffs, x, y):
    monos = [(i, j) for i in range(5) for j in range(5 - i)]
    text = " + ".join(f"({c})*x1^{i}*x2^{j}" for c, (i, j) in zip(coeffs, monos))
    jet = eval_jet(parse_expr(text, V2), (x, y), 4, V2)
    for alpha, val in jet.items():
        want = sum(c * _monomial_partial(i, j, *alpha, (x, y)) for c, (i, j) in zip(coeffs, monos))
        assert val == pytest.approx(want, rel=1e-12, abs=1e-10)


COMPOSITES = [
    "exp(x1*x2 - x2^2)",
    "log(2 + x1^2 + x2^2)*sin(x1)",
    "cos(x1 + x2)^3",
    "sin(x1*x2)/(3 + x1^2)",
    "sqrt(4 + x1^2)*exp(-x2)",
]


@pytest.mark.parametrize("text", COMPOSITES)
def test_composite_against_fd(text):
    e = parse_expr(text, V2)
    pts = np.random.default_rng(7).uniform(-1, 1, size=(20, 2))
    jets = eval_jets(e, pts, 4, V2)
    sp = get_space(2, 4)
    for p, coef in zip(pts, jets):
        for alpha, k in sp.index.items():
            if sum(alpha) == 0:
                continue
            tol = 1e-5 if sum(alpha) <= 2 else 1e-2
            fd = fd_partial(e, p, alpha, variables=V2)
            assert abs(coef[k] - fd) <= tol * max(1.0, abs(fd)), (text, alpha)


@given(st.sampled_from(COMPOSITES), st.sampled_from(COMPOSITES),
       st.floats(-1, 1), st.floats(-1, 1))
def test_product_rule(a, b, x, y):
    ea, eb = parse_expr(a, V2), parse_expr(b, V2)
    prod = parse_expr(f"({a})*({b})", V2)
    ja, jb = eval_jet(ea, (x, y), 4, V2), eval_jet(eb, (x, y), 4, V2)
    jp = eval_jet(prod, (x, y), 4, V2)
    assert np.allclose((ja * jb).coeffs, jp.coeffs, rtol=1e-11, atol=1e-11)


def test_truncation_takes_min_order():
    e = parse_expr("exp(x1)*x2", V2)
    a, b = eval_jet(e, (0.2, 0.3), 4, V2), eval_jet(e, (0.2, 0.3), 2, V2)
    assert (a * b).order == 2 and (a + b).order == 2
    sp = get_space(2, 4)
    assert np.array_equal(jtruncate(a.coeffs, sp, 2), a.coeffs[:6])


def test_inverse_jet():
    sp = get_space(4, 3)
    e = parse_expr("2 + sin(x1*y1) + x2*y2^2")
    pts = np.random.default_rng(3).uniform(-0.5, 0.5, size=(6, 4))
    a = eval_jets(e, pts, 3)
    one = jmul(a, jinv(a, sp), sp)
    want = np.zeros_like(one)
    want[:, 0] = 1
    assert np.allclose(one, want, atol=1e-13)


def test_four_variable_mixed_partial():
    e = parse_expr("x1*x2*y1*y2^2")
    j = eval_jet(e, (1.0, 2.0, 3.0, 0.5), 4)
    assert j[(1, 1, 1, 1)] == pytest.approx(2 * 0.5)
    assert j[(0, 0, 0, 2)] == pytest.approx(2 * 1 * 2 * 3)
