import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import minimize_scalar

from ctlab import hyp2
from ctlab.hyp2 import Frame, Geodesic, a_t, dist_h2, mobius, rotation, transvection

VERTICAL = Geodesic(0.0, math.inf)


def numeric_distance_to_vertical(p: complex) -> float:
    # oracle: minimise the point-to-point distance along the vertical axis
    r = minimize_scalar(lambda s: dist_h2(p, 1j * math.exp(s)), bracket=(math.log(abs(p)) - 1, math.log(abs(p)) + 1),
                        tol=1e-12)
    return r.fun


frames = st.builds(lambda s: hyp2.random_frames(1, np.random.default_rng(s))[0], st.integers(0, 2**32 - 1))


def test_dist_examples():
    assert dist_h2(1j, 1j) == 0.0
    assert dist_h2(1j, math.e * 1j) == pytest.approx(1.0, abs=1e-15)
    assert dist_h2(1j, 1 + 1j) == pytest.approx(0.962424, abs=1e-6)
    assert dist_h2(1j, 1 + 1j) == pytest.approx(math.acosh(1.5), abs=1e-15)


def test_lambert_examples():
    assert hyp2.lambert_distance(0.0, 0.3) == pytest.approx(0.3, abs=1e-15)
    assert hyp2.lambert_distance(5.0, 1e-300) < 1e-290
    d = hyp2.lambert_distance(1.0, 0.1)
    assert d == pytest.approx(0.15395, abs=1e-5)  # the quoted value is truncated, not rounded
    # constructed geometry: a geodesic at distance 0.1 perpendicular to the unit circle
    p = (transvection(0.1) @ a_t(1.0)).basepoint
    assert numeric_distance_to_vertical(p) == pytest.approx(d, abs=1e-9)
    with pytest.raises(hyp2.GeometryError):
        hyp2.lambert_distance(1.0, 0.0)


def test_intersect_examples():
    assert hyp2.intersect_distance(0.0, 0.7) == 0.0
    d = hyp2.intersect_distance(math.asinh(1.0), math.pi / 6)
    assert d == pytest.approx(0.481212, abs=1e-6)
    p = (rotation(math.pi / 6) @ a_t(math.asinh(1.0))).basepoint
    assert numeric_distance_to_vertical(p) == pytest.approx(d, abs=1e-9)


@given(st.floats(1e-4, 1.0), st.floats(0.0, 1.0))
def test_intersect_bounds(theta, u):
    t = u * math.log(1 / theta)
    d = hyp2.intersect_distance(t, theta)
    assert theta * (math.exp(t) - 1) / 8 - 1e-15 <= d <= 0.5 * theta * math.exp(t) + 1e-15


@given(st.floats(1e-4, 1.0), st.floats(-1.0, 1.0))
def test_lambert_divergence_bounds(theta, u):
    t = u * math.log(1 / theta)
    d = hyp2.lambert_distance(t, theta)
    assert theta * math.exp(abs(t)) / 3 <= d <= 1.5 * theta * math.exp(abs(t))
    assert hyp2.lambert_distance(abs(t) + 0.1, theta) > d


@given(st.floats(0.0, 10.0), st.floats(1e-6, 1.0))
def test_lambert_identity(t, theta):
    d = hyp2.lambert_distance(t, theta)
    assert abs(math.sinh(d) - math.cosh(t) * math.sinh(theta)) <= 1e-9 * max(1.0, math.sinh(d))


def test_projection_examples():
    assert hyp2.nearest_point_projection(VERTICAL, 1 + 1j) == pytest.approx(1j * math.sqrt(2), abs=1e-15)
    assert hyp2.nearest_point_projection(VERTICAL, 3j) == pytest.approx(3j)
    # perpendicular crossing has a degenerate interval
    assert hyp2.projection_interval(VERTICAL, Geodesic(-1.0, 1.0)).length == pytest.approx(0.0, abs=1e-12)
    other = rotation(math.pi / 3).geodesic
    assert hyp2.projection_interval(VERTICAL, other).hi == pytest.approx(0.549306, abs=1e-6)
    T = hyp2.projection_interval(VERTICAL, rotation(0.01).geodesic).hi
    assert 4.6052 <= T <= 5.6449


def test_projection_sweep_oracle():
    # the projection radius of a crossing geodesic, swept numerically
    th = math.pi / 3
    G = rotation(th)
    ts = np.linspace(-40, 40, 4001)
    feet = [math.log(abs(mobius(G @ a_t(t), 1j))) for t in ts]
    assert max(feet) == pytest.approx(math.atanh(math.cos(th)), abs=1e-9)


@given(st.integers(0, 2**32 - 1))
def test_projection_contracts(seed):
    rng = np.random.default_rng(seed)
    g = hyp2.random_frames(1, rng)[0]
    geo = g.geodesic
    p, q = (f.basepoint for f in hyp2.random_frames(2, rng))
    pp, qq = hyp2.nearest_point_projection(geo, p), hyp2.nearest_point_projection(geo, q)
    assert dist_h2(pp, qq) <= dist_h2(p, q) + 1e-9


def test_projection_errors():
    with pytest.raises(hyp2.GeometryError):
        hyp2.projection_interval(VERTICAL, Geodesic(0.0, 5.0))
    with pytest.raises(hyp2.GeometryError):
        hyp2.projection_half_width(1e-13)


def test_frame_distance_examples():
    I = hyp2.IDENTITY
    assert hyp2.frame_distance(I, I) == 0.0
    for t in (-3.0, -0.2, 0.5, 4.0):
        assert hyp2.frame_distance(I, a_t(t)) == pytest.approx(abs(t), abs=1e-12)
    for a in (1e-3, 1e-2, 0.1):
        assert hyp2.frame_distance(I, Frame(1.0, a, 0.0, 1.0)) <= math.sqrt(2) * a + 1e-12


@given(frames, frames, frames)
def test_frame_distance_left_invariant(g, a, b):
    assert hyp2.frame_distance(g @ a, g @ b) == pytest.approx(hyp2.frame_distance(a, b), abs=1e-9)


@given(frames, frames)
def test_frame_sandwich(a, b):
    dh = dist_h2(a.basepoint, b.basepoint)
    d = hyp2.frame_distance(a, b)
    assert dh - 1e-9 <= d <= dh + math.pi + 1e-9


@given(frames, st.floats(-5, 5), st.floats(-5, 5))
def test_flow_property(f, s, t):
    lhs = hyp2.geodesic_flow(hyp2.geodesic_flow(f, s), t)
    assert lhs.same(hyp2.geodesic_flow(f, s + t), 1e-9 * max(1.0, math.exp(abs(s) + abs(t))))


def test_flow_examples():
    f = hyp2.random_frames(1, np.random.default_rng(1))[0]
    assert hyp2.geodesic_flow(f, 0.0) == f
    assert hyp2.geodesic_flow(hyp2.IDENTITY, 2.0).basepoint == pytest.approx(math.exp(2.0) * 1j)


@given(frames, st.floats(-2, 2), st.floats(0.0, 1.0), st.floats(0, 2 * math.pi))
def test_flow_expansion(x, t, size, ang):
    y = x @ hyp2.exp_lie(1e-3 * size * math.cos(ang), 1e-3 * size * math.sin(ang), 1e-3 * size)
    d0 = hyp2.frame_distance(x, y)
    d1 = hyp2.frame_distance(hyp2.geodesic_flow(x, t), hyp2.geodesic_flow(y, t))
    assert d1 <= math.exp(abs(t)) * d0 + 1e-12


def test_tangent_distance_examples():
    assert hyp2.tangent_to_geodesic_distance(a_t(3.0), VERTICAL) == pytest.approx(0.0, abs=1e-9)
    for th in (1e-3, 0.05, 0.4):
        g = transvection(th).geodesic
        assert hyp2.tangent_to_geodesic_distance(hyp2.IDENTITY, g) == pytest.approx(th, rel=1e-8)


@given(st.floats(1e-6, 0.01), st.floats(-1.0, 1.0))
def test_fellow_travel_band(theta, u):
    t = u * math.log(1 / theta)
    r = hyp2.fellow_travel_ratio(theta, t)
    assert 1e-5 <= r <= 1e5


@given(frames, st.sampled_from([0.3, 1.0, 2.0]), st.floats(0, 2 * math.pi))
def test_lie_roundtrip(g, scale, ang):
    x = (scale * math.cos(ang), scale * math.sin(ang), 0.5 * scale)
    back = hyp2.lie_coordinates(hyp2.exp_lie(*x))
    assert np.allclose(back, x, atol=1e-9)


def test_estimated_constants_are_small():
    c = hyp2.estimate_constants(samples=30, seed=3)
    # ideal triangles are log(1+sqrt 2)-thin; sampled ones can only be thinner
    assert 0 < c.thin_triangle_delta <= math.log(1 + math.sqrt(2)) + 1e-6
    assert 0 <= c.gromov_delta <= math.log(2) + 1e-6
