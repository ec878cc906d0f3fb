"""Quasigeodesic fits in the solv metric: optimal-height paths over flat
geodesics and axes of closed flat geodesics, measured against the cover
oracle."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import flatmodel as fm
from .oracle import (CoverDomain, CoverPoint, CoverWalker, exact_tiles_for, layers_with)


@dataclass(frozen=True)
class QGFit:
    """Least-squares fit of arclength = Q·distance + c and of the ratio
    arclength/distance against distance, over pairs in a distance window."""

    Q: float
    c: float
    slope: float
    mean_ratio: float
    max_ratio: float
    pairs: int

    def as_dict(self) -> dict:
        return {"Q": self.Q, "c": self.c, "slope": self.slope, "mean_ratio": self.mean_ratio,
                "max_ratio": self.max_ratio, "pairs": self.pairs}


def fit_quasigeodesic(dist, arclen, lo: float = 5.0, hi: float = 30.0) -> QGFit:
    d = np.asarray(dist, dtype=float)
    a = np.asarray(arclen, dtype=float)
    m = (d >= lo) & (d <= hi) & np.isfinite(d)
    if m.sum() < 3:
        raise ValueError("fewer than three pairs in the distance window")
    d, a = d[m], a[m]
    Q, c = np.polyfit(d, a, 1)
    r = a / d
    slope, _ = np.polyfit(d, r, 1)
    return QGFit(float(Q), float(c), float(slope), float(r.mean()), float(r.max()), int(m.sum()))


@dataclass
class ChainRun:
    chain: list
    heights: np.ndarray
    piece_lengths: np.ndarray
    joints: np.ndarray
    arclength: np.ndarray  # from the first midpoint to each midpoint
    oracle: np.ndarray  # oracle distance from the first midpoint
    cells: int = 0
    nodes: int = 0
    # (source, target, arclength, oracle) rows for every source midpoint used
    pairs: np.ndarray = field(default_factory=lambda: np.zeros((0, 4)))


def _optimal_heights(E: np.ndarray, k: float) -> np.ndarray:
    zmax = fm.Z_CLAMP_DECADES * math.log(10) / math.log(k)
    X, Y = np.abs(E[:, 0]), np.abs(E[:, 1])
    with np.errstate(divide="ignore"):
        z = 0.5 * np.log(Y / X) / math.log(k)
    return np.clip(z, -zmax, zmax)


def run_chain(S: fm.TranslationSurface, pa: fm.PseudoAnosov, chain: Sequence[fm.SaddleConnection],
              n: int = 10, margin: int = 1, dz: float = 0.2, z_pad: float = 1.0,
              sources: Sequence[int] = (0,)) -> ChainRun:
    """Place the chain at optimal heights and compare arclength between
    connection midpoints with cover-oracle distances.  Each index in
    ``sources`` is a midpoint from which distances to all later midpoints
    are recorded in ``pairs``."""
    if len(chain) == 0:
        raise ValueError("empty chain")
    if n % 2:
        raise ValueError("grid size must be even so midpoints are nodes")
    k = pa.k
    E = pa.eigen(np.array([c.holonomy for c in chain], dtype=float))
    z = _optimal_heights(E, k)
    pieces = np.sqrt((k ** z * E[:, 0]) ** 2 + (k ** (-z) * E[:, 1]) ** 2)
    joints = np.abs(np.diff(z)) * pa.log_k
    arc = np.zeros(len(chain))
    for j in range(1, len(chain)):
        arc[j] = arc[j - 1] + 0.5 * pieces[j - 1] + joints[j - 1] + 0.5 * pieces[j]

    letters = sum(len(fm.trace_saddle_connection(S, c.sheet, c.holonomy).word) + 3 for c in chain)
    tiles = exact_tiles_for(S, letters)
    cp = S.singular_points[0]
    first = chain[0]
    q0 = fm._quadrant(*first.holonomy)
    s0, cx, cy = fm._corner_square(S, cp.corners[first.sheet], q0)
    w = CoverWalker(S, tiles, CoverPoint((0, s0), Fraction(int(cx)), Fraction(int(cy))))
    mids = []
    for c in chain:
        w.rotate_to(c.sheet, fm._quadrant(*c.holonomy))
        w.vertices.append(w.sector_cells())
        mids.extend(w.move(c.holonomy[0], c.holonomy[1], samples=[Fraction(1, 2)]))
    w.vertices.append(w.sector_cells())
    zs = layers_with(z, float(z.min()) - z_pad, float(z.max()) + z_pad, dz)
    dom = CoverDomain(w, pa, zs, n=n, margin=margin)
    targets = [(m, float(zz)) for m, zz in zip(mids, z)]
    rows = []
    d0 = None
    for i in sorted(set(sources) | {0}):
        d = dom.distances(targets[i], targets[i:])
        if i == 0:
            d0 = d
        if i in sources:
            for j in range(i + 1, len(chain)):
                rows.append((i, j, arc[j] - arc[i], d[j - i]))
    return ChainRun(list(chain), z, pieces, joints, arc, d0, len(dom.cells), dom.graph.size,
                    np.array(rows, dtype=float).reshape(-1, 4))


def mcmullen_experiment(n_connections: int, seeds: Sequence[int], max_length: float = 3.0,
                        n: int = 10, margin: int = 1, dz: float = 0.2, n_sources: int = 1,
                        window=(5.0, 30.0)) -> tuple[QGFit, list[ChainRun]]:
    """Fit arclength/oracle over random geodesic chains.  Sources are spread
    evenly along each chain so that longer chains contribute new pairs."""
    S, pa = fm.build_canonical_surface()
    runs = []
    sources = sorted({(n_connections * i) // n_sources for i in range(n_sources)})
    for seed in seeds:
        rng = np.random.default_rng(seed)
        chain = fm.random_geodesic_chain(S, n_connections, rng, max_length)
        runs.append(run_chain(S, pa, chain, n=n, margin=margin, dz=dz, sources=sources))
    rows = np.concatenate([r.pairs for r in runs])
    return fit_quasigeodesic(rows[:, 3], rows[:, 2], *window), runs


@dataclass
class AxisRun:
    holonomy: tuple
    period_length: float
    arclength: np.ndarray
    oracle: np.ndarray
    fit: QGFit | None = None
    fiber_offset: float = 0.0


def axis_embedding_fit(holonomy=(2, 0), start=(0, Fraction(1, 2), Fraction(1, 2)), repeats: int = 20,
                       n: int = 10, margin: int = 1, dz: float = 0.2, z_pad: float = 1.5,
                       window=(5.0, 30.0)) -> AxisRun:
    """Embed the closed flat geodesic with the given holonomy at z = 0 and
    compare arclength between orbit points with oracle distances."""
    p, q = holonomy
    if (p, q) == (0, 0):
        raise ValueError("the identity element has no axis")
    S, pa = fm.build_canonical_surface()
    L = math.hypot(*pa.eigen(np.array([p, q], dtype=float)))
    # each period crosses the polygon boundary at most |p|+|q| times
    tiles = exact_tiles_for(S, repeats * (abs(p) + abs(q)))
    s, x, y = start
    w = CoverWalker(S, tiles, CoverPoint((0, int(s)), Fraction(x), Fraction(y)))
    orbit = [w.pos]
    for _ in range(repeats):
        w.move(p, q)
        orbit.append(w.pos)
    zs = layers_with([0.0], -z_pad, z_pad, dz)
    dom = CoverDomain(w, pa, zs, n=n, margin=margin)
    d = dom.distances((orbit[0], 0.0), [(o, 0.0) for o in orbit])
    arc = L * np.arange(repeats + 1)
    fit = None
    try:
        fit = fit_quasigeodesic(d[1:], arc[1:], *window)
    except ValueError:
        pass
    return AxisRun((p, q), L, arc, d, fit, 0.0)
