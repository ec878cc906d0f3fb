import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats
from scipy.special import comb

from ctlab import hyp2
from ctlab import randwalk as rw
from ctlab import surface as sf


def test_gromov_product_examples():
    a = 1j
    assert rw.gromov_product(a, a, 3j) == 0.0
    # a on the geodesic from b to c
    assert rw.gromov_product(1j, 0.2j, 7j) == pytest.approx(0.0, abs=1e-12)
    table = {(0, 1): 2.0, (0, 2): 3.0, (1, 2): 4.0}
    d = lambda p, q: 0.0 if p == q else table[tuple(sorted((p, q)))]
    assert rw.gromov_product(0, 1, 2, d) == 0.5


def test_shadow_examples():
    real = lambda p, q: abs(p - q)
    assert rw.shadow_contains(0.0, 10.0, 3.0, 5.0, real)
    assert not rw.shadow_contains(0.0, 10.0, 3.0, 2.0, real)
    b = 4j
    assert rw.shadow_contains(1j, b, hyp2.dist_h2(1j, b), b)
    assert rw.shadow_contains(1j, b, 0.0, -7.0 + 0.1j)
    with pytest.raises(ValueError):
        rw.shadow_contains(1j, b, -1.0, b)


def test_boundary_gromov_product_is_ray_limit():
    x0, b, xi = 1j, 0.3 + 2j, 0.7
    lim = rw.boundary_gromov_product(x0, b, xi)
    # points converging to xi along a vertical line
    far = [rw.gromov_product(x0, b, complex(xi, 10.0 ** -e)) for e in (4, 6, 8)]
    assert far[-1] == pytest.approx(lim, abs=1e-6)
    assert rw.boundary_gromov_product(x0, b, math.inf) == pytest.approx(
        rw.gromov_product(x0, b, 1e9j), abs=1e-6)


@given(st.floats(0, 3), st.floats(0, 3), st.floats(0, 6.28))
def test_shadow_nesting(r, dr, x):
    x0, b = 1j, 0.5 + 3j
    c = sf.BoundaryPoint(x)
    if rw.shadow_contains(x0, b, r + dr, c):
        assert rw.shadow_contains(x0, b, r, c)


@given(st.integers(0, 10**6))
def test_gromov_equivariance(seed):
    G = sf.octagon_group("origami")
    rng = np.random.default_rng(seed)
    word = "".join(rng.choice(list(G.side_letters), size=3))
    g = G.element(word)
    pts = [complex(rng.uniform(-1, 1), rng.uniform(0.3, 2)) for _ in range(3)]
    moved = [hyp2.mobius(g, p) for p in pts]
    assert rw.gromov_product(*moved) == pytest.approx(rw.gromov_product(*pts), abs=1e-9)


def test_step_distribution_validation():
    with pytest.raises(ValueError):
        rw.StepDistribution(("a",), (0.5,))
    with pytest.raises(ValueError):
        rw.StepDistribution(("a", "q"), (0.5, 0.5))
    G = sf.octagon_group("origami")
    ch = G.side_letters[0]
    with pytest.raises(ValueError):
        # a single letter does not generate
        rw.StepDistribution((ch,), (1.0,))
    assert rw.StepDistribution.uniform().generates()
    assert rw.StepDistribution.mapping_torus().generates()


def test_sample_walk_basics():
    mu = rw.StepDistribution.uniform()
    p0 = rw.sample_walk(mu, 0, 1)
    assert len(p0.distances) == 1 and p0.distances[0] == 0.0
    assert p0.location(0).same(hyp2.IDENTITY, 1e-12)
    a, b = rw.sample_walk(mu, 300, 42), rw.sample_walk(mu, 300, 42)
    assert np.array_equal(a.fwd, b.fwd) and np.array_equal(a.bwd, b.bwd)
    assert np.array_equal(a.distances, b.distances)
    # a longer walk extends the shorter one
    c = rw.sample_walk(mu, 600, 42)
    assert np.array_equal(c.fwd[:300], a.fwd)


def test_generator_frequencies():
    mu = rw.StepDistribution.uniform()
    p = rw.sample_walk(mu, 1000, 7)
    n = len(mu.support)
    freq = np.bincount(p.fwd, minlength=n)
    sigma = math.sqrt(1000 * (1 / n) * (1 - 1 / n))
    assert np.all(np.abs(freq - 1000 / n) <= 3 * sigma)


def test_locations_match_words():
    mu = rw.StepDistribution.uniform()
    p = rw.sample_walk(mu, 10, 3)
    G = mu.group
    word = "".join(mu.support[j] for j in p.fwd[:6])
    assert p.location(6).same(G.element(word), 1e-9)
    assert p.distances[6] == pytest.approx(hyp2.dist_h2(1j, G.element(word).basepoint), abs=1e-9)


def test_single_generator_tracks_axis():
    G = sf.octagon_group("commutator")
    ch = G.side_letters[0]
    mu = rw.StepDistribution((ch,), (1.0,), "commutator", check=False)
    p = rw.sample_walk(mu, 200, 0)
    p.bwd[:] = 0  # backward steps are the same letter
    tr = rw.track_geodesic(p)
    ell = G.translation_length(ch)
    n = np.arange(tr.n_eval + 1)
    assert np.max(np.abs((tr.times - tr.times[0]) - n * ell)) < 1e-6
    # orbit points sit at a fixed distance from the axis
    assert np.ptp(tr.deviation) < 1e-6


def test_tracking_statistics():
    mu = rw.StepDistribution.uniform()
    devs, gaps = [], []
    for s in range(20):
        p = rw.sample_walk(mu, 1000, s)
        tr = rw.track_geodesic(p)
        devs.append(tr.deviation_fraction(2.0))
        gaps.append(tr.max_gap / math.log(1000))
        assert np.mean(np.diff(tr.times)) > 0
    assert np.mean(devs) < 0.05
    assert max(gaps) < 2.0


def test_drift_positive():
    mu = rw.StepDistribution.uniform()
    paths = [rw.sample_walk(mu, 1000, s) for s in range(100)]
    est = rw.drift(paths)
    assert est.ci[0] > 0 and est.spread < 0.1


def test_decay_tables():
    mu = rw.StepDistribution.uniform()
    paths = [rw.sample_walk(mu, 200, s) for s in range(120)]
    grid = np.arange(0, 8, 0.5)
    tab = rw.tail_statistics(paths, grid)
    assert tab.freq[0] == 1.0
    assert np.all(np.diff(tab.freq) <= 0)
    diag = rw.diagonal_measure(paths, grid)
    assert diag.freq[0] == 1.0 and np.all(np.diff(diag.freq) <= 0)
    rows = tab.rows()
    assert all(r["lo"] <= r["freq"] <= r["hi"] for r in rows)
    with pytest.raises(ValueError):
        rw.tail_statistics(paths[:50], grid)


def test_decay_table_fit_exact_exponential():
    rng = np.random.default_rng(0)
    tab = rw.decay_table(rng.exponential(1.0, 200_000), np.arange(0, 6, 0.25))
    assert tab.slope == pytest.approx(-1.0, abs=0.05) and tab.r2 > 0.99


def test_z_only_binomial():
    mu = rw.StepDistribution.z_only()
    pmf = rw.exact_z_pmf(mu, 100)
    assert pmf[0] == pytest.approx(comb(100, 50, exact=True) / 2 ** 100, rel=1e-12)
    assert pmf[0] == pytest.approx(0.0796, abs=1e-4)
    assert rw.exact_z_pmf(mu, 0) == {0: 1.0}
    with pytest.raises(rw.PeriodicWalkError):
        rw.check_aperiodic(mu)
    rw.check_aperiodic(rw.StepDistribution.z_only(lazy=0.1))
    with pytest.raises(rw.PeriodicWalkError):
        rw.check_aperiodic(rw.StepDistribution.uniform())


def test_z_projection_stats():
    mu = rw.StepDistribution.mapping_torus()
    st_ = rw.z_projection_stats(mu, [0, 100, 400], range(4000))
    assert st_.sup_p[0] == 1.0
    # local CLT scale: sqrt(n) sup P roughly constant
    assert st_.scaled[2] / st_.scaled[1] == pytest.approx(1.0, abs=0.2)
    exact = rw.exact_z_pmf(mu, 100)
    assert st_.sup_p[1] == pytest.approx(max(exact.values()), abs=4 * math.sqrt(0.25 / 4000))


def test_z_walk_matches_sample_walk():
    mu = rw.StepDistribution.mapping_torus()
    (Z,) = list(rw.z_walks(mu, 50, [9]))
    assert np.array_equal(Z[0], rw.sample_walk(mu, 50, 9).z_path)


def test_near_fiber_decay_simple_walk():
    frac, fit = rw.near_fiber_decay(rw.StepDistribution.z_only(lazy=0.5), [100, 300, 1000, 3000], range(400))
    # a recurrent one-dimensional walk spends ~T^{-1/2} of its time near 0
    assert 0.3 <= fit.beta <= 0.7
    assert np.all(np.diff(frac) < 0)


def test_wilson_interval():
    lo, hi = rw.wilson_interval(50, 100)
    assert lo < 0.5 < hi
    assert rw.wilson_interval(0, 0) == (0.0, 1.0)
    ref = stats.binomtest(3, 40).proportion_ci(method="wilson")
    assert rw.wilson_interval(3, 40) == pytest.approx((ref.low, ref.high))
