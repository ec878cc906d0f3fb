"""Time the compiled kernels against the pure-Python reference.

    python benchmarks/bench_kernels.py [--repeat N]

Each workload is run with both backends on identical inputs; results are
compared before timings are reported.
"""
import argparse
import math
import timeit
from fractions import Fraction

import numpy as np

from ctlab import _pykernels
from ctlab import flatmodel as fm
from ctlab import heightfn as hf
from ctlab import surface as sf
from ctlab.oracle import GL_W, GL_X, PlaneDomain

try:
    from ctlab import _ckernels
except ImportError:  # pragma: no cover - depends on the build
    _ckernels = None


def _line_args():
    S, _ = fm.build_canonical_surface()
    nxt, let = S.transitions
    x, y = Fraction(1, 7), Fraction(2, 9)
    p, q = 377, 233
    c = Fraction(q) * x - Fraction(p) * y
    return (0, float(x), float(y), p, q, float(c), nxt, let, -1)


def _dijkstra_args():
    k = 3 + 2 * math.sqrt(2)
    dom = PlaneDomain.around((0.0, 0.0, 0.0), (0.8, 0.6, 0.2), k, 0.1)
    g = dom.graph
    nz = len(g.zs)
    tg = np.array([dom.node(0.8, 0.6) * nz + g.layer(0.2)], dtype=np.int64)
    return (g.indptr, g.indices, g.eX, g.eY, np.ascontiguousarray(g.zs, dtype=float), float(g.log_k),
            GL_X, GL_W, dom.node(0.0, 0.0), g.layer(0.0), tg, g._boundary3(), g.blocked.astype(np.uint8))


def _leaf_args():
    plus = hf.lamination_at_depth(hf.PLUS, 6)
    g = sf.sample_lebesgue_geodesic(1)
    smp = hf.sample_geodesic(g, 5.0, 0.01)
    return (smp.frames, plus.leaf_inv, hf.CAP)


WORKLOADS = {
    "trace_integer_line": ("trace_integer_line", _line_args),
    "dijkstra_layered": ("dijkstra_layered", _dijkstra_args),
    "leaf_distances": ("leaf_distances", _leaf_args),
}


def _same(a, b) -> bool:
    if isinstance(a, tuple):
        return all(_same(x, y) for x, y in zip(a, b))
    a, b = np.asarray(a), np.asarray(b)
    if a.dtype.kind == "f":
        return bool(np.allclose(a, b, rtol=1e-12, atol=1e-14))
    return bool(np.array_equal(a, b))


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if _ckernels is None:
        print("compiled kernels are not built; nothing to compare")
        return
    print(f"{'kernel':<20} {'python s':>10} {'cython s':>10} {'speedup':>8}  agree")
    for name, (fn, make) in WORKLOADS.items():
        inputs = make()
        py, cy = getattr(_pykernels, fn), getattr(_ckernels, fn)
        agree = _same(py(*inputs), cy(*inputs))
        t_py = min(timeit.repeat(lambda: py(*inputs), number=1, repeat=args.repeat))
        t_cy = min(timeit.repeat(lambda: cy(*inputs), number=1, repeat=args.repeat))
        print(f"{name:<20} {t_py:>10.4f} {t_cy:>10.4f} {t_py / t_cy:>7.1f}x  {agree}")


if __name__ == "__main__":
    main()
