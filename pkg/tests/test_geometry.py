import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from distjets.geometry import (DistanceField, Immersion, ImmersionError, ProjectionError,
                               StepTooLargeError, default_step, fd_Ak, jets, oracle_compare,
                               parse_shape, project, project_many, sample_parameters,
                               verify_prop1)

ELLIPSE = parse_shape("ellipse:a=2,b=1")
TORUS = parse_shape("torus3:R=2,r=0.5")


def rotation(dim, seed):
    q, _ = np.linalg.qr(np.random.default_rng(seed).standard_normal((dim, dim)))
    return q


@pytest.mark.parametrize("text", ["circle:R=1", "ellipse:a=2,b=1", "torus3:R=2,r=0.5",
                                  "clifford4:R=1", "plane", "line"])
def test_parse_roundtrip(text):
    im = parse_shape(text)
    assert parse_shape(str(im)) == im


@pytest.mark.parametrize("bad", ["blob", "circle", "circle:R=-1", "ellipse:a=2", "circle:R",
                                 "torus3:R=1,r=2", "circle:R=1,q=2"])
def test_parse_rejects(bad):
    with pytest.raises(ValueError):
        parse_shape(bad)


def test_circle_projection_closed_form():
    df = DistanceField(parse_shape("circle:R=2"))
    for rho in (1.2, 2.0, 2.7):
        foot, eta = project(df, np.array([rho, 0.0]))
        assert eta == pytest.approx((rho - 2) ** 2, abs=1e-12)
        assert np.allclose(foot, [2.0, 0.0], atol=1e-12)


def test_projection_of_points_on_the_curve():
    df = DistanceField(TORUS)
    u = sample_parameters(TORUS, 6)
    pts = TORUS.param(u)
    feet, eta, _ = project_many(df, pts)
    assert np.all(eta < 1e-24) and np.allclose(feet, pts, atol=1e-12)


def test_ellipse_projection_vs_dense_sampling():
    x = np.array([3.0, 0.2])
    _, eta = project(DistanceField(ELLIPSE), x)
    t = np.linspace(0, 2 * np.pi, 1_000_000, endpoint=False)
    dense = np.min((2 * np.cos(t) - x[0]) ** 2 + (np.sin(t) - x[1]) ** 2)
    assert eta == pytest.approx(dense, abs=1e-9)
    assert eta <= dense


def test_projection_failure_is_reported():
    df = DistanceField(parse_shape("plane"))
    with pytest.raises(ProjectionError):
        project(df, np.array([100.0, 0.0, 0.1]), seeds=4)


def test_circle_jets():
    R = 2.0
    jd = jets(parse_shape(f"circle:R={R}"), np.array([0.7]), 2)
    nu = jd.normal[:, 0]
    outward = np.sign(np.dot(nu, jd.point))
    assert jd.bjets[0][0, 0, 1] * outward == pytest.approx(-1 / R, abs=1e-12)
    assert np.allclose(jd.frame.T @ jd.frame, np.eye(2), atol=1e-10)
    # D^1 B of a circle: normal part 0, tangent part -kappa^2 from the frozen label
    assert jd.bjets[1][0, 0, 0, 1] == pytest.approx(0, abs=1e-12)


@pytest.mark.parametrize("shape", ["ellipse:a=2,b=1", "torus3:R=2,r=0.5", "clifford4:R=1.5"])
def test_jet_invariants(shape):
    im = parse_shape(shape)
    for u in sample_parameters(im, 3):
        jd = jets(im, u, 1)
        assert np.allclose(jd.frame.T @ jd.frame, np.eye(im.dim), atol=1e-10)
        b = jd.bjets[0]
        assert np.abs(b[..., : im.n]).max() < 1e-10
        assert np.allclose(b, np.swapaxes(b, 0, 1), atol=1e-12)
        assert np.allclose(np.einsum("aal->l", b) @ jd.frame.T, jd.mean_curvature)
        # tangent frame spans the image of the differential
        eps = 1e-6
        for a in range(im.n):
            du = np.zeros(im.n)
            du[a] = eps
            dx = (im.param(u + du) - im.param(u - du)) / (2 * eps)
            assert np.linalg.norm(jd.normal.T @ dx) < 1e-8


def test_ellipse_curvature_matches_closed_form():
    a, b = 2.0, 1.0
    for t in (0.0, 0.4, 1.3, 2.9):
        jd = jets(ELLIPSE, np.array([t]), 0)
        kappa = a * b / (a * a * math.sin(t) ** 2 + b * b * math.cos(t) ** 2) ** 1.5
        assert abs(jd.bjets[0][0, 0, 1]) == pytest.approx(kappa, rel=1e-12)


def test_torus_outer_equator():
    jd = jets(TORUS, np.array([0.0, 0.0]), 0)
    lam = np.sort(np.abs(np.linalg.eigvalsh(jd.bjets[0][..., 2])))
    assert np.allclose(lam, [1 / 2.5, 1 / 0.5], atol=1e-12)


def test_clifford_torus():
    R = 1.5
    jd = jets(parse_shape(f"clifford4:R={R}"), np.array([0.3, 1.1]), 1)
    assert np.sum(jd.bjets[0] ** 2) == pytest.approx(2 / R ** 2, rel=1e-12)
    assert np.abs(jd.bjets[1][..., 2:]).max() < 1e-12


def test_degenerate_immersion():
    flat = Immersion("circle", (("R", 1.0),), ((0.0, 0.0), (0.0, 0.0)))
    with pytest.raises(ImmersionError):
        jets(flat, np.array([0.1]), 0)


def test_unit_circle_third_derivative():
    df = DistanceField(parse_shape("circle:R=1"))
    a3 = fd_Ak(df, np.array([1.0, 0.0]), 3, 1e-2, guess=np.array([0.0])).tensor
    assert a3[1, 1, 0] == pytest.approx(-1.0, abs=1e-6)
    assert a3[1, 1, 1] == pytest.approx(0.0, abs=1e-6)


def test_hessian_is_tangent_projection():
    df = DistanceField(ELLIPSE)
    jd = jets(ELLIPSE, np.array([0.8]), 0)
    a2 = fd_Ak(df, jd.point, 2, default_step(df, jd), guess=jd.u).tensor
    assert np.allclose(a2, jd.tangent @ jd.tangent.T, atol=1e-6)


def test_flat_plane_has_no_higher_derivatives():
    df = DistanceField(parse_shape("plane"))
    x = np.array([0.3, -0.2, 0.0])
    for k in (3, 4):
        assert np.abs(fd_Ak(df, x, k, 1e-2).tensor).max() < 1e-6


def test_stencil_outside_neighbourhood():
    df = DistanceField(parse_shape("circle:R=1"))
    with pytest.raises(StepTooLargeError):
        fd_Ak(df, np.array([1.0, 0.0]), 3, 0.4)


def test_fd_order_range():
    df = DistanceField(parse_shape("circle:R=1"))
    with pytest.raises(ValueError):
        fd_Ak(df, np.array([1.0, 0.0]), 7, 1e-2)


def test_fd_asymmetry_and_order():
    df = DistanceField(ELLIPSE)
    jd = jets(ELLIPSE, np.array([0.5]), 0)
    res = fd_Ak(df, jd.point, 3, default_step(df, jd), guess=jd.u, estimate_order=True)
    assert res.asymmetry < 1e-5
    assert res.observed_order >= 2


@pytest.mark.parametrize("k", [3, 4])
def test_fd_scaling(k):
    lam = 1.7
    big = parse_shape(f"ellipse:a={2 * lam},b={lam}")
    u = np.array([0.9])
    small_jd, big_jd = jets(ELLIPSE, u, 0), jets(big, u, 0)
    t_small = fd_Ak(DistanceField(ELLIPSE), small_jd.point, k, 1e-2, guess=u).tensor
    t_big = fd_Ak(DistanceField(big), big_jd.point, k, 1e-2 * lam, guess=u).tensor
    assert np.linalg.norm(t_big - lam ** (2 - k) * t_small) < 1e-3 * np.linalg.norm(t_big)


@settings(max_examples=5, deadline=None)
@given(seed=st.integers(0, 1000))
def test_fd_norm_is_rotation_invariant(seed):
    rot = ELLIPSE.rotated(rotation(2, seed))
    u = np.array([1.1])
    n0 = np.linalg.norm(fd_Ak(DistanceField(ELLIPSE), ELLIPSE.param(u), 3, 1e-2, guess=u).tensor)
    n1 = np.linalg.norm(fd_Ak(DistanceField(rot), rot.param(u), 3, 1e-2, guess=u).tensor)
    assert n1 == pytest.approx(n0, rel=1e-8)


def test_verify_prop1_plane_is_trivial():
    rep = verify_prop1(parse_shape("plane"), 3)
    assert max(rep["max_abs_error"].values()) < 1e-8


def test_verify_prop1_circle():
    rep = verify_prop1(parse_shape("circle:R=1.5"), 4)
    assert max(rep["max_abs_error"].values()) < 1e-6
    assert set(rep["max_abs_error"]) == {
        "gradient_is_projection", "hessian_is_tangent_projection", "b_from_a", "a3_from_b",
        "mean_curvature_trace", "hessian_eta_normal_projection"}


def test_oracle_compare_on_circle(table):
    rep = oracle_compare(parse_shape("circle:R=1"), table, [3, 4], 2)
    assert rep["by_k"][4]["norm_Ak"] == pytest.approx([33.0, 33.0], abs=1e-9)
    assert rep["by_k"][3]["max_component_error"] < 1e-6
