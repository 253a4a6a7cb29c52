import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from quasiflow.errors import OutsideContainer, SelfIntersection
from quasiflow.geometry import (
    CircleSpec,
    Container,
    EllipseSpec,
    FourierSpec,
    build_reference_curve,
    bundle_distance,
    curve_from_nodes,
    level_function,
    level_function_eval,
    signed_distance_project,
    tube_and_ball,
    tube_point,
)


def test_circle_curvature_is_reciprocal_radius(circle04):
    assert np.allclose(circle04.curvature, 2.5, atol=1e-12)


def test_normals_are_unit_and_outward(ellipse):
    assert np.max(np.abs(np.hypot(*ellipse.normal.T) - 1.0)) < 1e-12
    # outward: points slightly along +normal leave the ellipse
    out = ellipse.xy + 1e-3 * ellipse.normal
    assert np.all((out[:, 0] / 0.5) ** 2 + (out[:, 1] / 0.4) ** 2 > 1.0)


def test_ellipse_max_curvature_matches_dense_formula(ellipse):
    t = np.linspace(0, 2 * np.pi, 200001)
    a, b = 0.5, 0.4
    dense = a * b / (a * a * np.sin(t) ** 2 + b * b * np.cos(t) ** 2) ** 1.5
    assert ellipse.tube.kappa_max == pytest.approx(dense.max(), rel=1e-10)
    assert ellipse.tube.kappa_max == pytest.approx(3.125, rel=1e-10)


def test_mode_zero_fourier_spec_is_the_circle(circle04):
    c = build_reference_curve(FourierSpec([0.4]), Container(1.0), n=128)
    assert np.allclose(c.xy, circle04.xy, atol=1e-15)
    assert np.allclose(c.curvature, circle04.curvature, atol=1e-12)


def test_length_and_area_of_circle(circle04):
    assert circle04.length == pytest.approx(2 * np.pi * 0.4, rel=1e-14)
    assert circle04.area == pytest.approx(np.pi * 0.16, rel=1e-14)


def test_orientation_is_normalized():
    th = np.linspace(0, 2 * np.pi, 64, endpoint=False)
    cw = np.stack([0.3 * np.cos(-th), 0.3 * np.sin(-th)], axis=1)
    c = curve_from_nodes(cw)
    assert c.area > 0
    assert np.allclose(c.curvature, 1 / 0.3)


def test_outside_container_rejected():
    with pytest.raises(OutsideContainer):
        build_reference_curve(CircleSpec(0.5, (0.6, 0.0)), Container(1.0), n=64)


def test_self_intersection_rejected():
    th = np.linspace(0, 2 * np.pi, 128, endpoint=False)
    fig8 = np.stack([0.4 * np.sin(th), 0.2 * np.sin(2 * th)], axis=1)
    with pytest.raises(SelfIntersection):
        curve_from_nodes(fig8)


# --- projection ---

def test_projection_circle_example(circle05):
    pr = signed_distance_project(circle05, [0.8, 0.0])
    assert pr.d == pytest.approx(0.3, abs=1e-14)
    assert np.allclose(pr.p, [0.5, 0.0], atol=1e-14)


def test_projection_on_curve_is_identity(ellipse):
    pr = signed_distance_project(ellipse, ellipse.xy)
    assert np.max(np.abs(pr.d)) < 1e-14
    assert np.max(np.abs(pr.p - ellipse.xy)) < 1e-14


def test_projection_sign_inside_negative(circle05):
    assert signed_distance_project(circle05, [0.2, 0.1]).d < 0


def test_projection_ellipse_matches_dense_search(ellipse):
    x = np.array([0.6, 0.1])
    t = np.linspace(0, 2 * np.pi, 2_000_001)
    pts = np.stack([0.5 * np.cos(t), 0.4 * np.sin(t)], axis=1)
    dist = np.hypot(*(pts - x).T)
    i = np.argmin(dist)
    # refine the dense minimizer with a local golden search
    from scipy.optimize import minimize_scalar
    res = minimize_scalar(lambda s: np.hypot(0.5 * np.cos(s) - x[0], 0.4 * np.sin(s) - x[1]),
                          bracket=(t[i - 1], t[i], t[i + 1]), tol=1e-14)
    pr = signed_distance_project(ellipse, x)
    assert abs(pr.d) == pytest.approx(res.fun, abs=1e-10)
    assert pr.d > 0
    assert np.allclose(pr.p, [0.5 * np.cos(res.x), 0.4 * np.sin(res.x)], atol=1e-8)


def test_round_trip_random_in_tube_points(ellipse, rng):
    a = ellipse.tube.a
    theta = rng.uniform(0, 2 * np.pi, 10_000)
    d = rng.uniform(-0.99 * a, 0.99 * a, 10_000)
    x = tube_point(ellipse, theta, d)
    pr = signed_distance_project(ellipse, x)
    assert np.all(pr.in_tube)
    back = pr.p + pr.d[:, None] * ellipse.normal_at(pr.theta)
    assert np.max(np.abs(back - x)) < 1e-9
    assert np.max(np.abs(pr.d - d)) < 1e-9


# --- tube and ball ---

def test_tube_of_circle(circle04):
    t = tube_and_ball(circle04, Container(1.0))
    assert t.r_ball == pytest.approx(0.4, rel=1e-12)
    assert t.a == pytest.approx(0.36, rel=1e-12)


def test_tube_of_ellipse(ellipse):
    t = ellipse.tube
    assert t.r_ball == pytest.approx(0.32, rel=1e-6)
    assert t.a == pytest.approx(0.288, rel=1e-6)


def test_ball_limited_by_wall():
    c = build_reference_curve(CircleSpec(0.4), Container(0.45), n=128)
    t = tube_and_ball(c)
    assert t.r_ball == pytest.approx(0.05, rel=1e-12)
    assert 0 < t.a < min(1 / t.kappa_max, t.r_ball)


@settings(max_examples=25, deadline=None)
@given(R=st.floats(0.05, 0.8), wall=st.floats(1.0, 2.0), shift=st.floats(0.0, 0.15))
def test_tube_of_circle_is_min_of_radius_and_clearance(R, wall, shift):
    container = Container(wall)
    if R + shift >= 0.99 * wall:
        return
    c = build_reference_curve(CircleSpec(R, (shift, 0.0)), container, n=64)
    t = tube_and_ball(c, container)
    assert t.r_ball == pytest.approx(min(R, wall - R - shift), rel=1e-9)


# --- level function ---

def test_level_function_examples(circle05):
    lf = level_function(circle05)
    a = lf.tube.a
    assert level_function_eval(lf, [0.5, 0.0]) == pytest.approx(0.0, abs=1e-15)
    assert level_function_eval(lf, [0.5 + 0.1 * a, 0.0]) == pytest.approx(0.1 * a, rel=1e-12)
    assert level_function_eval(lf, [0.5 + 1.1 * a, 0.0]) == 1.0
    assert level_function_eval(lf, [0.0, 0.0]) == -1.0


def test_level_function_bounded(ellipse, rng):
    lf = level_function(ellipse)
    x = rng.uniform(-1, 1, (500, 2))
    v = level_function_eval(lf, x)
    assert np.all(np.abs(v) <= 1.0)


def test_level_function_gradient_is_normal(ellipse):
    lf = level_function(ellipse)
    h = 1e-6
    idx = np.arange(0, ellipse.n, 8)
    p = ellipse.xy[idx]
    gx = (lf(p + [h, 0]) - lf(p - [h, 0])) / (2 * h)
    gy = (lf(p + [0, h]) - lf(p - [0, h])) / (2 * h)
    grad = np.stack([gx, gy], axis=1)
    assert np.max(np.abs(np.hypot(gx, gy) - 1.0)) < 1e-6
    assert np.max(np.abs(grad - ellipse.normal[idx])) < 1e-6


# --- bundle distance ---

def test_bundle_distance_concentric_circles():
    c4 = build_reference_curve(CircleSpec(0.4), n=128)
    c5 = build_reference_curve(CircleSpec(0.5), n=128)
    assert bundle_distance(c4, c4, 0) == 0.0
    assert bundle_distance(c4, c4, 2) == 0.0
    assert bundle_distance(c4, c5, 0) == pytest.approx(0.1, abs=1e-12)
    assert bundle_distance(c4, c5, 2) == pytest.approx(0.5, abs=1e-10)


def test_bundle_distance_is_a_metric(rng):
    curves = []
    for _ in range(3):
        coefs = [rng.uniform(0.3, 0.45), *rng.uniform(-0.03, 0.03, 3)]
        sins = [0.0, *rng.uniform(-0.03, 0.03, 3)]
        curves.append(build_reference_curve(FourierSpec(coefs, sins, tuple(rng.uniform(-0.1, 0.1, 2))), n=64))
    for order in (0, 2):
        d = {(i, j): bundle_distance(curves[i], curves[j], order) for i in range(3) for j in range(3)}
        for i in range(3):
            for j in range(3):
                assert d[i, j] == d[j, i]
                for k in range(3):
                    assert d[i, k] <= d[i, j] + d[j, k] + 1e-12


def test_bundle_distance_rejects_order():
    c = build_reference_curve(CircleSpec(0.4), n=64)
    with pytest.raises(ValueError):
        bundle_distance(c, c, 1)
