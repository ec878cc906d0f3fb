import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import minimize_scalar

from ctlab import flatmodel as fm


@pytest.fixture(scope="module")
def canon():
    return fm.build_canonical_surface()


def test_canonical_surface(canon):
    S, pa = canon
    (cp,) = S.singular_points
    assert cp.angle == pytest.approx(6 * math.pi)
    assert S.euler_characteristic == -2 and S.genus == 2
    assert pa.k == pytest.approx(3 + 2 * math.sqrt(2), abs=1e-12)
    assert pa.k == pytest.approx(5.828427, abs=1e-6)
    a, b, c, d = pa.derivative
    assert a * d - b * c == 1 and a + d > 2
    # the affine map respects every glued edge; the check probes 1e-9 inside
    # each edge, and the derivative stretches that offset by at most ~6
    assert pa.check() < 1e-7


def test_pseudo_anosov_roundtrip(canon):
    S, pa = canon
    rng = np.random.default_rng(3)
    for _ in range(50):
        s = int(rng.integers(S.n))
        x, y = rng.random(2)
        s2, x2, y2 = pa.apply_inverse(*pa.apply(s, x, y))
        assert s2 == s and abs(x2 - x) < 1e-9 and abs(y2 - y) < 1e-9


def test_bad_gluing_rejected():
    with pytest.raises(fm.SurfaceError):
        fm.TranslationSurface(3, (0, 0, 1), (0, 1, 2))
    with pytest.raises(fm.SurfaceError):
        # two disjoint tori
        fm.TranslationSurface(2, (0, 1), (0, 1))


def test_flat_geodesic_examples(canon):
    S, _ = canon
    (seg,) = fm.flat_geodesic(S, (0, 0.0, 0.5), (1, 0), 1.0)
    assert seg.dx == pytest.approx(1.0) and seg.dy == 0.0
    (seg,) = fm.flat_geodesic(S, (0, 0.0, 0.0), (1, 1), math.sqrt(2), cone_tol=0.0)
    assert seg.dx == pytest.approx(1.0) and seg.dy == pytest.approx(1.0)
    with pytest.raises(ValueError):
        fm.flat_geodesic(S, (0, 0.5, 0.5), (0, 0), 1.0)


def test_flat_geodesic_equidistributes(canon):
    S, _ = canon
    segs = fm.flat_geodesic(S, (0, 0.1, 0.2), (1.0, (1 + math.sqrt(5)) / 2), 1000.0)
    freq = fm.visit_frequencies(S, segs)
    assert np.all(np.abs(freq - 1 / 3) < 0.05 / 3 * 3)
    # holonomy conservation
    assert sum(s.ddx for s in segs) == pytest.approx(1000 / math.hypot(1, (1 + math.sqrt(5)) / 2), abs=1e-9)


@given(st.floats(0.05, 0.95), st.floats(0.05, 0.95), st.floats(-3, 3), st.floats(-3, 3), st.floats(1, 40))
def test_holonomy_conservation(x, y, ux, uy, L):
    S, _ = fm.build_canonical_surface()
    if math.hypot(ux, uy) < 1e-3:
        return
    segs = fm.flat_geodesic(S, (1, x, y), (ux, uy), L)
    n = math.hypot(ux, uy)
    # a cone-point retry turns the direction by a few nanoradians
    tol = 1e-9 + 1e-8 * L
    assert sum(s.ddx for s in segs) == pytest.approx(L * ux / n, abs=tol)
    assert sum(s.ddy for s in segs) == pytest.approx(L * uy / n, abs=tol)
    assert sum(math.hypot(s.dx, s.dy) for s in segs) == pytest.approx(L, abs=1e-9)


def test_ct_length_examples(canon):
    _, pa = canon
    k = pa.k
    assert fm.ct_length(fm.SolvPath.of([(0, 0, 0), (0, 0, 1)]), k) == pytest.approx(math.log(k), abs=1e-12)
    z = 0.37
    assert fm.ct_length(fm.SolvPath.of([(0, 0, z), (1, 0, z)]), k) == pytest.approx(k ** z, abs=1e-12)
    assert fm.ct_length(fm.SolvPath.of([(0, 0, 0), (1, 1, 0)]), k) == pytest.approx(math.sqrt(2), abs=1e-12)


def _direct_length(dX, dY, z0, z1, lk):
    from scipy.integrate import quad

    f = lambda t: math.sqrt((math.exp(lk * (z0 + t * (z1 - z0))) * dX) ** 2
                            + (math.exp(-lk * (z0 + t * (z1 - z0))) * dY) ** 2 + (lk * (z1 - z0)) ** 2)
    return quad(f, 0, 1, epsabs=1e-13, epsrel=1e-13, limit=200)[0]


@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-1.5, 1.5), st.floats(-1.5, 1.5))
def test_piece_length_matches_quadrature(dX, dY, z0, z1):
    lk = math.log(3 + 2 * math.sqrt(2))
    got = fm.piece_length(dX, dY, z0, z1, lk)
    assert got == pytest.approx(_direct_length(dX, dY, z0, z1, lk), rel=1e-9, abs=1e-12)
    vec = fm.piece_lengths([dX], [dY], [z0], [z1], lk)[0]
    assert vec == pytest.approx(got, rel=1e-9, abs=1e-12)


@given(st.lists(st.tuples(st.floats(-2, 2), st.floats(-2, 2), st.floats(-1, 1)), min_size=2, max_size=8),
       st.floats(0.05, 0.95))
def test_ct_length_additive_and_reparametrised(pts, t):
    k = 3 + 2 * math.sqrt(2)
    P = fm.SolvPath.of(pts)
    L = fm.ct_length(P, k)
    # split the first piece at parameter t
    a, b = np.array(pts[0]), np.array(pts[1])
    m = tuple(a + t * (b - a))
    Q = fm.SolvPath.of([pts[0], m] + pts[1:])
    assert fm.ct_length(Q, k) == pytest.approx(L, rel=1e-9, abs=1e-12)
    head, tail = fm.SolvPath.of(pts[:2]), fm.SolvPath.of(pts[1:])
    assert fm.ct_length(head, k) + fm.ct_length(tail, k) == pytest.approx(L, rel=1e-9, abs=1e-12)
    assert fm.ct_cumulative(P, k)[-1] == pytest.approx(L, rel=1e-12)


@given(st.lists(st.tuples(st.floats(-2, 2), st.floats(-2, 2), st.floats(-1, 1)), min_size=2, max_size=6))
def test_f_action_is_isometry(pts):
    k = 3 + 2 * math.sqrt(2)
    P = fm.SolvPath.of(pts)
    assert fm.ct_length(fm.f_action_path(P, k), k) == pytest.approx(fm.ct_length(P, k), rel=1e-9, abs=1e-12)


def test_flow_conjugation(canon):
    _, pa = canon
    k = pa.k
    P = fm.SolvPath.of([(0, 0, 0.2), (1, 2, 0.5), (1, 2, -0.3)])
    assert fm.flow_conjugation(P, 0.0) == P
    assert fm.measures_at(1.0, 0.0, 1.0, k)[0] == pytest.approx(k)
    R = fm.Rectangle(0.7, 1.9)
    for z in (-1.3, 0.0, 0.4, 2.0):
        assert R.flowed(z, k).measure == pytest.approx(R.measure, rel=1e-12)
        assert R.flowed(z, k).a == pytest.approx(R.a * k ** z)


def test_optimal_height_examples():
    k = 3 + 2 * math.sqrt(2)
    assert fm.optimal_height(fm.Rectangle(2.0, 2.0), k) == 0.0
    assert fm.optimal_height(fm.Rectangle(1.0, k * k), k) == pytest.approx(1.0)
    assert fm.optimal_height(fm.Rectangle(2.0, 8.0), math.e) == pytest.approx(0.6931, abs=1e-4)
    R = fm.Rectangle(0.3, 5.0)
    z = fm.optimal_height(R, k)
    side = R.flowed(z, k)
    assert side.a == pytest.approx(math.sqrt(R.measure)) and side.b == pytest.approx(math.sqrt(R.measure))
    with pytest.raises(ValueError):
        fm.optimal_height(fm.Rectangle(0.0, 1.0), k)


@given(st.floats(1e-3, 50), st.floats(1e-3, 50))
def test_ladder_gap_is_minimum(a, b):
    k = 3 + 2 * math.sqrt(2)
    res = minimize_scalar(lambda z: k ** z * a + k ** (-z) * b, bracket=(-5, 5), tol=1e-12)
    assert fm.ladder_gap(a, b) == pytest.approx(res.fun, rel=1e-9)


def test_ladder_gap_examples():
    assert fm.ladder_gap(3.0, 0.0) == 0.0
    assert fm.ladder_gap(1.0, 1.0) == 2.0
    assert fm.ladder_gap(1.0, 4.0) == 4.0


def test_bottleneck_examples():
    assert fm.bottleneck_bound(fm.Rectangle(1, 1), math.e) == pytest.approx(2 * math.exp(-1 / math.sqrt(2)))
    # 2 exp(-1/sqrt 2) evaluates to 0.986137
    assert fm.bottleneck_bound(fm.Rectangle(1, 1), math.e) == pytest.approx(0.986137, abs=1e-6)
    k = 3 + 2 * math.sqrt(2)
    vals = [fm.bottleneck_bound(fm.Rectangle(t, t), k) for t in (1e-2, 1e-4, 1e-8)]
    assert vals[0] > vals[1] > vals[2] and vals[2] < 1e-7
    with pytest.raises(ValueError):
        fm.bottleneck_bound(fm.Rectangle(0.0, 2.0), k)


def test_saddle_connections(canon):
    S, _ = canon
    short = fm.saddle_connections(S, 1.5)
    assert min(c.length for c in short) == pytest.approx(1.0)
    hols = {c.holonomy for c in fm.saddle_connections(S, 6.0)}
    assert hols == {(-p, -q) for p, q in hols}
    n1, n2 = len(fm.saddle_connections(S, 10.0)), len(fm.saddle_connections(S, 20.0))
    assert abs(n1 / n2 - 0.25) <= 0.3 * 0.25
    with pytest.raises(ValueError):
        fm.saddle_connections(S, 51.0)


def test_random_chain_is_geodesic(canon):
    S, _ = canon
    chain = fm.random_geodesic_chain(S, 25, np.random.default_rng(11))
    assert fm.chain_is_geodesic(chain)
    for c in chain:
        assert math.gcd(*c.holonomy) == 1 and c.length <= 3.0
        assert 0 <= c.sheet < 3


def test_mcmullen_examples():
    P = fm.mcmullen_path([(1.0, 4.0)], 2.0)
    assert P.vertices[0][2] == pytest.approx(1.0)
    assert fm.ct_length(P, 2.0) == pytest.approx(2 * math.sqrt(2))
    assert fm.mcmullen_path([(3.0, 3.0)], 2.0).vertices[0][2] == 0.0
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        fm.mcmullen_path([(1.0, 0.0)], 2.0)
    assert any(issubclass(x.category, RuntimeWarning) for x in w)
    with pytest.raises(ValueError):
        fm.mcmullen_path([(0.0, 0.0)], 2.0)


def test_mcmullen_joints_are_vertical():
    k = 3 + 2 * math.sqrt(2)
    m = [(1.0, 2.0), (3.0, 0.5), (0.2, 0.2)]
    P = fm.mcmullen_path(m, k)
    zs = [0.5 * math.log(b / a) / math.log(k) for a, b in m]
    expect = sum(2 * math.sqrt(a * b) / math.sqrt(2) for a, b in m) + math.log(k) * sum(
        abs(zs[i + 1] - zs[i]) for i in range(2))
    assert fm.ct_length(P, k) == pytest.approx(expect, rel=1e-12)


def test_oracle_examples():
    k = 3 + 2 * math.sqrt(2)
    p = (0.0, 0.0, 0.0)
    assert fm.solv_distance_oracle(p, p, k) == 0.0
    res = 0.1
    d = fm.solv_distance_oracle(p, (0.0, 0.0, 1.0), k, res)
    assert abs(d - math.log(k)) <= 2 * res * math.log(k)
    with pytest.raises(ValueError):
        fm.solv_distance_oracle(p, (1.0, 0.0, 0.0), k, resolution=0.2)
    with pytest.raises(fm.OracleError):
        fm.solv_distance_oracle(p, (3.0, 0.0, 0.0), k, box=((-1, 1), (-1, 1), (-1, 1)))


def test_oracle_dominates_lower_bounds():
    k = 3 + 2 * math.sqrt(2)
    rng = np.random.default_rng(5)
    for _ in range(12):
        p = (0.0, 0.0, float(rng.uniform(-0.5, 0.5)))
        q = (float(rng.uniform(-2, 2)), float(rng.uniform(-2, 2)), float(rng.uniform(-0.5, 0.5)))
        d = fm.solv_distance_oracle(p, q, k)
        assert d >= fm.sol_lower_bound(p, q, k) - 1e-9
        # straight segment at constant height is an upper bound only at equal heights
        if p[2] == q[2]:
            assert d <= fm.ct_length(fm.SolvPath.of([p, q]), k) + 1e-9


def test_oracle_refinement_monotone():
    from ctlab.oracle import PlaneDomain

    k = 3 + 2 * math.sqrt(2)
    p, q = (0.0, 0.0, 0.0), (1.0, 0.7, 0.3)
    dom = PlaneDomain.around(p, q, k, 0.1)
    fine = dom.refined()
    assert fine.distance(p, q) <= dom.distance(p, q) + 1e-12


def test_axis_embedding_rejects_identity():
    with pytest.raises(ValueError):
        fm.axis_embedding_fit((0, 0))
