import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from distjets.evaluator import (JetSample, assemble_Ak, chain_lower_bound, curve_polynomial,
                                evaluate, inequality_scan, norm_Ak, random_jets)
from distjets.geometry import jets, parse_shape
from distjets.recursion import PolyTensor, squared_norm_expr


def circle_jets(R, a_max=3):
    return jets(parse_shape(f"circle:R={R}"), np.array([0.3]), a_max).sample()


def test_p32_on_circle(table):
    val = evaluate(table[(3, 2)], circle_jets(2.0))
    # outward normal: B(e, e) = -(1/R) nu
    jd = jets(parse_shape("circle:R=2"), np.array([0.3]), 0)
    nu = jd.normal[:, 0]
    sign = np.sign(np.dot(nu, jd.point))
    assert val.shape == (1, 1, 1, 1)
    assert val[0, 0, 0, 0] * sign == pytest.approx(-0.5, abs=1e-12)


def test_p44_on_unit_circle(table):
    assert evaluate(table[(4, 4)], circle_jets(1.0))[0, 0, 0, 0, 0] == pytest.approx(-3, abs=1e-12)


def test_zero_tensor_evaluates_to_zero(table):
    out = evaluate(PolyTensor(5, 1), circle_jets(1.0))
    assert out.shape == (1, 1, 1, 1, 1, 1) and not out.any()


def test_k2_norm_is_dimension(table):
    rng = np.random.default_rng(0)
    for n, m in [(1, 1), (2, 1), (2, 2)]:
        assert np.allclose(norm_Ak(random_jets(n, m, 0, 4, rng), table, 2), n)


@pytest.mark.parametrize("k,want", [(3, 3.0), (4, 33.0)])
def test_unit_circle_norms(table, k, want):
    assert norm_Ak(circle_jets(1.0), table, k)[0] == pytest.approx(want, abs=1e-12)


@pytest.mark.parametrize("k", [3, 4, 5, 6])
def test_circle_scaling(table, k):
    base = norm_Ak(circle_jets(1.0), table, k)[0]
    for R in (0.5, 3.0):
        assert norm_Ak(circle_jets(R), table, k)[0] == pytest.approx(base * R ** (2 * (2 - k)), rel=1e-8)


def test_exact_rational_evaluation(table):
    rng = np.random.default_rng(1)
    flt = random_jets(1, 1, 1, 1, rng)
    obj = JetSample(1, 1, [np.vectorize(lambda v: sp.Rational(v))(b).astype(object) for b in flt.bjets])
    exact = evaluate(table[(4, 2)], obj)
    assert np.allclose(exact.astype(float), evaluate(table[(4, 2)], flt), rtol=1e-14)


def test_missing_jet_order(table):
    with pytest.raises(ValueError):
        evaluate(table[(5, 4)], random_jets(1, 1, 0, 1, np.random.default_rng(0)))


def test_jet_shape_checked():
    with pytest.raises(ValueError):
        JetSample(2, 1, [np.zeros((1, 2, 2, 2))])


def test_random_jets_are_normal_and_symmetric():
    j = random_jets(2, 2, 2, 5, np.random.default_rng(3))
    b = j.bjets[0]
    assert not b[..., :2].any()
    assert np.allclose(b, np.swapaxes(b, 1, 2))
    assert np.allclose(j.b_norm(), 1.0)
    d2 = j.bjets[2]
    assert np.allclose(d2, np.swapaxes(d2, 3, 4))


def test_assembled_tensor_is_symmetric(table):
    j = random_jets(2, 1, 1, 2, np.random.default_rng(5))
    a = assemble_Ak(j, table, 3)
    for perm in [(0, 2, 1, 3), (0, 3, 2, 1), (0, 2, 3, 1)]:
        assert np.allclose(a, a.transpose(perm))
    assert np.allclose(np.sum(a.reshape(2, -1) ** 2, axis=1), norm_Ak(j, table, 3))


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 2), m=st.integers(1, 2))
def test_a3_is_three_b_squared(table, seed, n, m):
    j = random_jets(n, m, 0, 3, np.random.default_rng(seed))
    assert np.allclose(norm_Ak(j, table, 3), 3 * j.b_norm() ** 2, rtol=1e-12)


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), k=st.integers(3, 6))
def test_flat_jets_respect_chain_bound(table, seed, k):
    j = random_jets(2, 2, k - 3, 4, np.random.default_rng(seed), zero_derivatives=True)
    assert np.all(norm_Ak(j, table, k) >= chain_lower_bound(j, k) * (1 - 1e-12))


def test_scan_k3_curve(table):
    rep = inequality_scan(table, 3, 1, 1, 1000, seed=42)
    assert rep.min_ratio == pytest.approx(3.0, abs=1e-12)
    assert rep.c_hat == pytest.approx(3.0, abs=1e-12)


def test_scan_is_deterministic(table):
    a = inequality_scan(table, 4, 2, 2, 500, seed=7).to_dict()
    b = inequality_scan(table, 4, 2, 2, 500, seed=7).to_dict()
    assert a == b and a["min_ratio"] > 0 and a["chain_bound_violations"] == 0


def test_scan_rejects_small_k(table):
    with pytest.raises(ValueError):
        inequality_scan(table, 2, 1, 1, 10)


@pytest.mark.parametrize("k,expected", [
    (3, "3*kappa0**2"),
    (4, "33*kappa0**4 + 4*kappa1**2"),
    (5, "765*kappa0**6 - 90*kappa0**3*kappa2 + 460*kappa0**2*kappa1**2 + 5*kappa2**2"),
])
def test_curve_polynomials(table, k, expected):
    poly, syms = curve_polynomial(squared_norm_expr(table, k))
    assert sp.expand(poly - sp.sympify(expected, locals={s.name: s for s in syms})) == 0
