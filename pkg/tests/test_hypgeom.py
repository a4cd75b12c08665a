import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from hyperoep.asymptotic import busemann_ball
from hyperoep.errors import CoverageError, DomainError, ModelMismatchError
from hyperoep.hypgeom import (
    Composition,
    Geodesic,
    HyperbolicTranslation,
    IdealPoint,
    Model,
    ModelPoint,
    ParabolicTranslation,
    Reflection,
    Rotation,
    TotallyGeodesicHyperplane,
    ball_distance,
    conformal_gradient,
    conformal_hessian,
    convert_model,
    geodesic_through,
    gradient_norm_identity,
    hyperbolic_distance,
    hyperbolic_laplacian,
    invariance_check,
    metric,
    parabolic_factors,
    parabolic_translate,
    reflect,
    rotation_factors,
)

rng = np.random.default_rng(12345)


def random_ball(n, size, rmax=0.95):
    v = rng.normal(size=(size, n))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    r = rmax * rng.uniform(size=(size, 1)) ** (1.0 / n)
    return v * r


coord = st.floats(-0.7, 0.7)
ball_pt = st.tuples(coord, coord).filter(lambda c: c[0] ** 2 + c[1] ** 2 < 0.9)


# ----------------------------------------------------------------------------
# points and distances


def test_distance_examples():
    o = ModelPoint.origin(3)
    assert hyperbolic_distance(o, o) == 0.0
    assert hyperbolic_distance(o, ModelPoint([0.5, 0, 0])) == pytest.approx(math.log(3), abs=1e-12)
    p, q = ModelPoint.half_space([0, 1]), ModelPoint.half_space([0, math.e])
    assert hyperbolic_distance(p, q) == pytest.approx(1.0, abs=1e-12)


def test_mixed_models_rejected():
    with pytest.raises(ModelMismatchError):
        hyperbolic_distance(ModelPoint.origin(2), ModelPoint.origin(2, Model.HALF_SPACE))


def test_invalid_points():
    with pytest.raises(DomainError):
        ModelPoint([1.0, 0.0])
    with pytest.raises(DomainError):
        ModelPoint.half_space([0.3, -0.1])


def _arc_length(g: Geodesic, s0: float, s1: float) -> float:
    """Metric length of g on [s0, s1] using only the ball conformal factor."""
    def speed(s):
        h = 1e-5
        z = g.point_ball(s)
        dz = (g.point_ball(s + h) - g.point_ball(s - h)) / (2 * h)
        return 2.0 * float(np.linalg.norm(dz)) / (1.0 - float(z @ z))
    return quad(speed, s0, s1, epsabs=1e-10, epsrel=1e-10, limit=100)[0]


@pytest.mark.parametrize("seed", range(4))
def test_distance_matches_line_integral(seed):
    a, b = np.random.default_rng(seed).uniform(-0.6, 0.6, size=(2, 2))
    p, q = ModelPoint(a), ModelPoint(b)
    g = geodesic_through(p, q)
    s0, s1 = float(g.foot_parameter(a)), float(g.foot_parameter(b))
    assert _arc_length(g, s0, s1) == pytest.approx(hyperbolic_distance(p, q), abs=1e-8)


def test_origin_convention():
    h = convert_model(ModelPoint.origin(3), Model.HALF_SPACE)
    np.testing.assert_allclose(h.coords, [0, 0, 1], atol=1e-15)


def test_convert_involution_and_isometry():
    pts = random_ball(3, 200)
    for a, b in zip(pts[::2], pts[1::2]):
        p, q = ModelPoint(a), ModelPoint(b)
        back = convert_model(convert_model(p, "half-space"), "ball")
        np.testing.assert_allclose(back.coords, a, atol=1e-12)
        d_ball = hyperbolic_distance(p, q)
        d_half = hyperbolic_distance(p.to("half-space"), q.to("half-space"))
        assert abs(d_ball - d_half) < 1e-10 * max(1.0, d_ball)


# ----------------------------------------------------------------------------
# reflections and isometries


def test_unit_hemisphere_reflection():
    P = TotallyGeodesicHyperplane.hemisphere(np.zeros(2), 1.0)
    np.testing.assert_allclose(reflect(P, ModelPoint.half_space([0, 0, 1])).coords, [0, 0, 1])
    np.testing.assert_allclose(reflect(P, ModelPoint.half_space([0, 0, 0.5])).coords, [0, 0, 2])


def _random_planes():
    yield TotallyGeodesicHyperplane.hemisphere(np.array([0.3]), 0.7)
    yield TotallyGeodesicHyperplane.vertical_plane(np.array([1.0]), -0.4)
    yield TotallyGeodesicHyperplane.ball_sphere(np.array([1.1, 0.9]))
    yield TotallyGeodesicHyperplane.ball_plane(np.array([0.6, -0.8]))


@pytest.mark.parametrize("P", list(_random_planes()), ids=["hemi", "vert", "sphere", "plane"])
def test_reflection_is_involutive_isometry(P):
    pts = random_ball(2, 2000)
    R = Reflection(P)
    img = R.apply_ball(pts)
    np.testing.assert_allclose(R.apply_ball(img), pts, atol=1e-12)
    a, b = pts[::2], pts[1::2]
    d0 = ball_distance(a, b)
    d1 = ball_distance(img[::2], img[1::2])
    assert np.max(np.abs(d1 - d0)) < 1e-10


def test_reflection_swaps_sides_and_fixes_plane():
    P = TotallyGeodesicHyperplane.hemisphere(np.array([0.2]), 1.3)
    on = np.array([0.2 + 1.3 * math.cos(0.7), 1.3 * math.sin(0.7)])
    np.testing.assert_allclose(P.reflect_coords(on), on, atol=1e-14)
    x = np.array([0.4, 0.3])
    assert np.sign(P.side(x)) == -np.sign(P.side(P.reflect_coords(x)))


def test_parabolic_examples():
    p = ModelPoint.half_space([0.3, -1.2, 0.8])
    inf = IdealPoint.half_space_infinity(3)
    np.testing.assert_allclose(parabolic_translate(inf, [0, 0], p).coords, p.coords, atol=1e-12)
    np.testing.assert_allclose(parabolic_translate(inf, [1.0, 2.0], p).coords, [1.3, 0.8, 0.8],
                               atol=1e-12)
    with pytest.raises(DomainError):
        parabolic_translate(inf, [1.0], p)


@settings(max_examples=60, deadline=None)
@given(st.floats(0, 2 * math.pi), st.floats(-2, 2), st.floats(-2, 2), ball_pt)
def test_parabolic_factorisation(theta, v1, v2, c):
    x = IdealPoint([math.cos(theta), 0.0, math.sin(theta)])
    v = np.array([v1, v2])
    if np.linalg.norm(v) < 1e-3:
        return
    p = ModelPoint([c[0], 0.2, c[1]])
    R1, R2 = parabolic_factors(x, v)
    direct = parabolic_translate(x, v, p).coords
    composed = R1(R2(p)).coords
    assert np.max(np.abs(direct - composed)) < 1e-10


def test_parabolic_preserves_horospheres():
    x = IdealPoint([0.0, 0.6, 0.8])
    T = ParabolicTranslation(x, np.array([0.7, -1.1]))
    pts = random_ball(3, 300, 0.8)
    np.testing.assert_allclose(busemann_ball(x, T.apply_ball(pts)), busemann_ball(x, pts),
                               atol=1e-9)


def test_rotation_factorisation():
    beta = Geodesic(np.array([0.0, 0.6, 0.8]), np.array([1.0, 0.0, 0.0]))
    R1, R2 = rotation_factors(beta, 0.9)
    rot = Rotation(beta, 0.9)
    pts = random_ball(3, 100, 0.8)
    np.testing.assert_allclose(R1.apply_ball(R2.apply_ball(pts)), rot.apply_ball(pts), atol=1e-10)
    # points of beta are fixed
    on = beta.point_ball(np.linspace(-2, 2, 5))
    np.testing.assert_allclose(rot.apply_ball(on), on, atol=1e-12)


def test_planar_rotation_angle_restricted():
    beta = Geodesic.through_origin([1.0, 0.0])
    with pytest.raises(DomainError):
        Rotation(beta, 0.5)
    flip = Rotation(beta, math.pi)
    np.testing.assert_allclose(flip.apply_ball(np.array([0.2, 0.3])), [0.2, -0.3], atol=1e-12)


def test_isometries_preserve_distance_and_invert():
    beta = Geodesic(np.array([0.6, 0.8]), np.array([-1.0, 0.0]))
    maps = [
        HyperbolicTranslation(beta, 0.8),
        ParabolicTranslation(IdealPoint([0.0, 1.0]), np.array([0.7])),
        Reflection(TotallyGeodesicHyperplane.ball_sphere(np.array([1.2, 0.5]))),
    ]
    maps.append(Composition(tuple(maps)))
    a, b = random_ball(2, 400, 0.9), random_ball(2, 400, 0.9)
    for m in maps:
        d = ball_distance(m.apply_ball(a), m.apply_ball(b))
        assert np.max(np.abs(d - ball_distance(a, b))) < 1e-10
        np.testing.assert_allclose(m.inverse().apply_ball(m.apply_ball(a)), a, atol=1e-10)


def test_hyperbolic_translation_moves_along_axis():
    beta = Geodesic(np.array([0.0, 1.0]), np.array([1.0, 0.0]))
    T = HyperbolicTranslation(beta, 0.6)
    np.testing.assert_allclose(T.apply_ball(beta.point_ball(0.3)), beta.point_ball(0.9), atol=1e-12)


# ----------------------------------------------------------------------------
# geodesics


def test_geodesic_unit_speed_and_orientation():
    g = Geodesic(np.array([0.6, 0.8]), np.array([0.0, -1.0]))
    s = np.linspace(-3, 3, 13)
    pts = g.point_ball(s)
    np.testing.assert_allclose(ball_distance(pts[:-1], pts[1:]), np.diff(s), atol=1e-10)
    np.testing.assert_allclose(g.point_ball(30.0), g.x, atol=1e-10)
    np.testing.assert_allclose(g.tau(pts), s, atol=1e-10)
    assert np.max(g.distance_to(pts)) < 1e-10


def test_foot_parameter_and_distance():
    g = Geodesic.through_origin([1.0, 0.0])
    z = np.array([0.0, math.tanh(0.35)])
    assert float(g.distance_to(z)) == pytest.approx(0.7, abs=1e-12)
    assert float(g.foot_parameter(z)) == pytest.approx(0.0, abs=1e-12)


# ----------------------------------------------------------------------------
# conformal calculus


def test_gradient_norm_example():
    p = ModelPoint.half_space([0.0, 1.0])
    w = conformal_gradient([0.0, 1.0], p)
    assert metric(p, w, w) == pytest.approx(1.0, abs=1e-15)
    np.testing.assert_array_equal(conformal_gradient([0.0, 0.0], p), [0.0, 0.0])


def test_gradient_directional_derivative_order():
    def f(z):
        return math.sin(3 * z[0]) + z[1] ** 2 * z[0]

    z0 = np.array([0.2, 0.3])
    g0 = np.array([3 * math.cos(0.6) + 0.09, 2 * 0.3 * 0.2])
    p = ModelPoint(z0)
    w = conformal_gradient(g0, p)
    X = np.array([0.4, -0.7])

    def residual(h):
        fd = (f(z0 + h * X) - f(z0 - h * X)) / (2 * h)
        return abs(fd - metric(p, w, X))

    r1, r2 = residual(1e-2), residual(5e-3)
    assert 3.5 < r1 / r2 < 4.5


def test_hessian_along_geodesic():
    # f = log y_2 along the unit-speed semicircle gamma(s) = (tanh s, sech s)
    def fg(s):
        return math.log(1.0 / math.cosh(s))

    h = 1e-4
    second = (fg(h) - 2 * fg(0.0) + fg(-h)) / h**2
    p = ModelPoint.half_space([0.0, 1.0])
    H0 = np.array([[0.0, 0.0], [0.0, -1.0]])
    g0 = np.array([0.0, 1.0])
    X = np.array([1.0, 0.0])
    assert conformal_hessian(H0, g0, p, X, X) == pytest.approx(second, abs=1e-6)
    Y = np.array([0.3, 0.8])
    assert abs(conformal_hessian(H0, g0, p, X, Y) - conformal_hessian(H0, g0, p, Y, X)) < 1e-12


@pytest.mark.parametrize("t", [0.3, 0.8, 1.5])
def test_laplacian_of_radial_function(t):
    # F = d^2 / 2 with d = 2 atanh |z|, so F' = t and F'' = 1
    def F(z):
        return 2 * math.atanh(math.hypot(z[0], z[1])) ** 2

    z0 = np.array([math.tanh(t / 2) * 0.6, math.tanh(t / 2) * 0.8])
    h = 1e-4
    e = np.eye(2)
    grad = np.array([(F(z0 + h * e[i]) - F(z0 - h * e[i])) / (2 * h) for i in range(2)])
    hess = np.array([[(F(z0 + h * e[i] + h * e[j]) - F(z0 + h * e[i] - h * e[j])
                       - F(z0 - h * e[i] + h * e[j]) + F(z0 - h * e[i] - h * e[j])) / (4 * h * h)
                      for j in range(2)] for i in range(2)])
    expected = 1.0 + t / math.tanh(t)
    assert hyperbolic_laplacian(hess, grad, ModelPoint(z0)) == pytest.approx(expected, abs=1e-5)


# ----------------------------------------------------------------------------
# reflection invariance of the operator


def _one(u, s):
    return 1.0


def _reaction(u, s):
    return u + s * s


def test_invariance_trivial_case():
    p = ModelPoint.half_space([0.3, 0.7])
    assert invariance_check(lambda y: 2.0, _one, lambda u, s: 0.0, p) == pytest.approx(0, abs=1e-9)


def test_invariance_order_two():
    p = ModelPoint.half_space([0.3, 0.7])

    def u(y):
        return math.sin(y[0]) * math.exp(-y[1])

    ratio = invariance_check(u, _one, _reaction, p, h=1e-3) / invariance_check(
        u, _one, _reaction, p, h=5e-4)
    assert 3.5 <= ratio <= 4.5


def test_invariance_variable_coefficients():
    p = ModelPoint.half_space([0.4, 0.5])
    a = [lambda u, s: 1 + 0.5 * math.tanh(u), lambda u, s: 2 + math.sin(s)]
    r = invariance_check(lambda y: y[1] + y[0] ** 2, a, _reaction, p, h=1e-3)
    assert r < 1e-4


def test_invariance_errors():
    p = ModelPoint.half_space([0.3, 0.7])
    with pytest.raises(ModelMismatchError):
        invariance_check(lambda y: 1.0, _one, _reaction, ModelPoint([0.1, 0.1]))
    with pytest.raises(CoverageError):
        invariance_check(lambda y: 1.0, _one, _reaction, p, patch=([0, 0.6], [1, 1]))
    with pytest.raises(DomainError):
        invariance_check(lambda y: 1.0, _one, _reaction, ModelPoint.half_space([0.0, 1.0]))


def test_gradient_norm_identity_example():
    def grad(y):
        return np.array([2 * y[0], 1.0])

    lhs, rhs = gradient_norm_identity(grad, ModelPoint.half_space([0.4, 0.3]))
    assert abs(lhs - rhs) < 1e-8
