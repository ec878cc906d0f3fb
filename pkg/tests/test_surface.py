import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from ctlab import hyp2
from ctlab import surface as sf


@pytest.fixture(scope="module", params=["commutator", "origami"])
def G(request):
    return sf.octagon_group(request.param)


def test_group_basics(G):
    assert G.relator_residual <= 1e-9
    assert G.area() == pytest.approx(4 * math.pi, abs=1e-9)
    lengths = [G.translation_length(ch) for ch in G.side_letters]
    assert min(lengths) > 0
    if G.pattern == "commutator":
        # opposite-side pairings are all conjugate under the rotation by pi/4
        assert max(lengths) - min(lengths) < 1e-9
    assert sorted(G.side_letters) == sorted(G.letters)


def test_relator_word(G):
    g = G.element(G.relator)
    assert g.same(hyp2.IDENTITY, 1e-9)


def test_reduce_examples(G):
    q, w = sf.reduce_to_domain(1j, G)
    assert q == 1j and w == ""
    for ch in G.side_letters:
        q, w = sf.reduce_to_domain(G.gen(ch).basepoint, G)
        assert abs(q - 1j) < 1e-9 and w == ch


@given(st.integers(0, 2**32 - 1))
def test_reduction_equivariant(seed):
    G = sf.octagon_group()
    rng = np.random.default_rng(seed)
    p = hyp2.random_frames(1, rng, radius=8.0)[0].basepoint
    q, w = sf.reduce_to_domain(p, G)
    assert sf.in_domain(q, G, 1e-9)
    assert abs(hyp2.mobius(G.element(w), q) - p) <= 1e-7 * abs(p)


@pytest.mark.parametrize("seed", range(5))
def test_deep_point_word_length(seed):
    G = sf.octagon_group()
    rng = np.random.default_rng(seed)
    f = hyp2.rotation(rng.uniform(0, 2 * math.pi)) @ hyp2.a_t(20.0)
    _, w = sf.reduce_to_domain(f.basepoint, G)
    bfs = sf.bfs_word_length(G.element(w), G)
    assert abs(len(w) - bfs) <= 2


def test_boundary_maps():
    for phi in (0.3, 1.0, math.pi, 5.0):
        assert sf.real_to_disk_angle(sf.disk_angle_to_real(phi)) == pytest.approx(phi, abs=1e-12)
    assert math.isinf(sf.disk_angle_to_real(0.0))
    assert sf.BoundaryPoint(7.0).angle == pytest.approx(7.0 - 2 * math.pi)
    assert sf.free_reduce("abBAc") == "c"
    assert sf.invert_word("abC") == "cBA"


def test_lebesgue_sampling():
    assert sf.sample_lebesgue_geodesic(11) == sf.sample_lebesgue_geodesic(11)
    ang = np.array([sf.geodesic_disk_angles(sf.sample_lebesgue_geodesic(s)) for s in range(10_000)])
    for col in ang.T:
        assert stats.kstest(col / (2 * math.pi), "uniform").pvalue > 0.01


def test_flow_examples():
    G = sf.octagon_group()
    v = hyp2.random_frames(1, np.random.default_rng(0))[0]
    assert len(sf.flow_on_surface(v, 0.0, 0.1, G)) == 1
    # the axis of a closes up after one translation length
    a = G.gen("a")
    axis = hyp2.geodesic_frame(_axis(a), 1j)
    L = G.translation_length("a")
    out = sf.flow_on_surface(axis, L, L / 50, G)
    start, end = out[0], out[-1]
    assert end[0].same(start[0], 1e-6)
    lifted = sf.lifted_frame(end, G)
    assert lifted.same(hyp2.geodesic_flow(axis, L), 1e-6)
    assert sf.free_reduce(sf.invert_word(start[1]) + end[1]) in ("a", "A")


def _axis(g):
    # fixed points of a hyperbolic element, repelling first
    a, b, c, d = g.a, g.b, g.c, g.d
    disc = math.sqrt((a + d) ** 2 - 4)
    x1, x2 = ((a - d) - disc) / (2 * c), ((a - d) + disc) / (2 * c)
    # the attracting fixed point is where the derivative |cx + d|^-2 is below 1
    rep, att = (x1, x2) if abs(c * x1 + d) < 1 else (x2, x1)
    return hyp2.Geodesic(rep, att)


def test_flow_matches_unreduced():
    G = sf.octagon_group()
    v = hyp2.random_frames(1, np.random.default_rng(5))[0]
    out = sf.flow_on_surface(v, 100.0, 0.5, G)
    direct = hyp2.geodesic_flow(v, 100.0)
    lifted = sf.lifted_frame(out[-1], G)
    # entries grow like e^50, so compare matrices relative to their size;
    # the left-invariant distance would amplify round-off by e^100
    A, B = direct.matrix, lifted.matrix
    if np.sign(A[0, 0]) != np.sign(B[0, 0]):
        B = -B
    assert np.abs(A - B).max() / np.abs(A).max() < 1e-6


def test_ergodic_average():
    from ctlab import heightfn as hf

    g = sf.sample_lebesgue_geodesic(3)
    smp = hf.sample_geodesic(g, 1e4, 0.05)
    a, b, c, d = smp.frames.T
    z = (a * 1j + b) / (c * 1j + d)
    r = 1.0
    d = 2 * np.arcsinh(np.abs(z - 1j) / (2 * np.sqrt(z.imag)))
    frac = float(np.mean(d <= r))
    expected = 2 * math.pi * (math.cosh(r) - 1) / (4 * math.pi)
    assert abs(frac - expected) / expected < 0.05
