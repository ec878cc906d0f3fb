"""The compiled kernels agree with the pure-Python reference."""
import math
from fractions import Fraction

import numpy as np
import pytest

from ctlab import _kernels, _pykernels
from ctlab import flatmodel as fm
from ctlab import heightfn as hf
from ctlab import hyp2
from ctlab.oracle import GL_W, GL_X, PlaneDomain

ck = pytest.importorskip("ctlab._ckernels", reason="compiled kernels not built")


def test_backend_reported():
    assert _kernels.BACKEND in ("cython", "python")


@pytest.fixture(scope="module")
def canon():
    return fm.build_canonical_surface()


@pytest.mark.parametrize("hol", [(1, 0), (2, 1), (3, -2), (-1, 4), (5, 3)])
def test_trace_integer_line(canon, hol):
    S, _ = canon
    nxt, let = S.transitions
    x, y = Fraction(1, 7), Fraction(2, 9)
    c = Fraction(hol[1]) * x - Fraction(hol[0]) * y
    args = (0, float(x), float(y), hol[0], hol[1], float(c), nxt, let, -1)
    assert np.array_equal(ck.trace_integer_line(*args), _pykernels.trace_integer_line(*args))
    short = args[:-1] + (3,)
    assert np.array_equal(ck.trace_integer_line(*short), _pykernels.trace_integer_line(*short))


@pytest.mark.parametrize("hol", [(1, 1), (2, 1), (1, -3), (-3, 2)])
def test_trace_corner_line(canon, hol):
    S, _ = canon
    nxt, let = S.transitions
    a = ck.trace_corner_line(0, 0, 0, hol[0], hol[1], nxt, let)
    b = _pykernels.trace_corner_line(0, 0, 0, hol[0], hol[1], nxt, let)
    assert np.array_equal(a[0], b[0]) and tuple(a[1:]) == tuple(b[1:])


def test_dijkstra_layered():
    k = 3 + 2 * math.sqrt(2)
    dom = PlaneDomain.around((0.0, 0.0, 0.0), (0.6, 0.4, 0.2), k, 0.1)
    g = dom.graph
    nz = len(g.zs)
    rng = np.random.default_rng(0)
    n2 = len(g.indptr) - 1
    tg = np.array([int(rng.integers(n2)) * nz + int(rng.integers(nz)) for _ in range(25)], dtype=np.int64)
    args = (g.indptr, g.indices, g.eX, g.eY, np.ascontiguousarray(g.zs, dtype=float), float(g.log_k),
            GL_X, GL_W, 0, nz // 2, tg, g._boundary3(), g.blocked.astype(np.uint8))
    dc, tc = ck.dijkstra_layered(*args)
    dp, tp = _pykernels.dijkstra_layered(*args)
    assert np.allclose(dc, dp, rtol=1e-12, atol=1e-12)
    assert np.array_equal(np.asarray(tc, dtype=bool), np.asarray(tp, dtype=bool))


def test_leaf_distances(shallow_pair):
    plus, _ = shallow_pair
    rng = np.random.default_rng(1)
    frames = []
    for _ in range(40):
        z = complex(rng.uniform(-0.5, 0.5), rng.uniform(0.6, 1.6))
        frames.append(hyp2.geodesic_frame(hyp2.Geodesic(z.real - 1, z.real + 1 + rng.random()), z))
    rows = np.array([(f.a, f.b, f.c, f.d) for f in frames])
    dc, ic = ck.leaf_distances(rows, plus.leaf_inv, hf.CAP)
    dp, ip = _pykernels.leaf_distances(rows, plus.leaf_inv, hf.CAP)
    assert np.allclose(dc, dp, rtol=1e-12, atol=1e-14)
    assert np.array_equal(ic, ip)
