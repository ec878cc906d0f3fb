"""Brute-force solv distances: shortest paths on layered grid graphs.

Two domains share one kernel.  :class:`PlaneDomain` is a box in the developed
plane × R, in eigen-coordinates.  :class:`CoverDomain` is a neighbourhood of a
polyline in the universal cover of the flat surface; its cells are squares
labelled by the deck tile they sit in, and tiles are identified through
their centres in the hyperbolic plane computed at high precision.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import mpmath
import numpy as np

from . import _kernels
from .flatmodel import (DOWN, LEFT, RIGHT, UP, ConeHitError, OracleError, PseudoAnosov,
                        TranslationSurface, _corner_square, _quadrant, _sheet_of)

GL_X, GL_W = np.polynomial.legendre.leggauss(6)

_STENCIL8 = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)]
_STENCIL16 = _STENCIL8 + [(2, 1), (1, 2), (-1, 2), (-2, 1), (-2, -1), (-1, -2), (1, -2), (2, -1)]


def _csr(n_nodes: int, src, dst, eX, eY):
    src = np.asarray(src, dtype=np.int64)
    order = np.argsort(src, kind="stable")
    counts = np.bincount(src, minlength=n_nodes)
    indptr = np.zeros(n_nodes + 1, dtype=np.int64)
    np.cumsum(counts, out=indptr[1:])
    return (indptr, np.asarray(dst, dtype=np.int64)[order],
            np.ascontiguousarray(np.asarray(eX, dtype=float)[order]),
            np.ascontiguousarray(np.asarray(eY, dtype=float)[order]))


@dataclass
class LayeredGraph:
    indptr: np.ndarray
    indices: np.ndarray
    eX: np.ndarray
    eY: np.ndarray
    zs: np.ndarray
    log_k: float
    boundary2: np.ndarray  # uint8 per 2-D node
    blocked: np.ndarray  # uint8 per 2-D node

    @property
    def n2(self) -> int:
        return len(self.indptr) - 1

    @property
    def size(self) -> int:
        return self.n2 * len(self.zs)

    def _boundary3(self) -> np.ndarray:
        nz = len(self.zs)
        b = np.repeat(self.boundary2.astype(np.uint8), nz).reshape(self.n2, nz)
        b[:, 0] = 1
        b[:, -1] = 1
        return b.ravel()

    def layer(self, z: float) -> int:
        j = int(np.argmin(np.abs(self.zs - z)))
        if abs(self.zs[j] - z) > 1e-12:
            raise OracleError(f"height {z} is not a grid layer")
        return j

    def distances(self, src_node: int, src_layer: int, targets: Sequence[tuple[int, int]]):
        nz = len(self.zs)
        tg = np.array([n * nz + l for n, l in targets], dtype=np.int64)
        d, touched = _kernels.dijkstra_layered(
            self.indptr, self.indices, self.eX, self.eY, np.ascontiguousarray(self.zs, dtype=float),
            float(self.log_k), GL_X, GL_W, int(src_node), int(src_layer), tg,
            self._boundary3(), self.blocked.astype(np.uint8))
        return d, touched


# --- developed plane -------------------------------------------------------------


def _graded(keys, lo: float, hi: float, res: float, h0: float) -> np.ndarray:
    """1-D nodes on [lo, hi] containing ``keys`` with spacing
    ``res·max(distance to nearest key, h0)``."""
    keys = sorted(set(float(k) for k in keys))
    pts = sorted(set([lo, hi] + [k for k in keys if lo <= k <= hi]))
    karr = np.array(keys)

    def step(x):
        return res * max(float(np.min(np.abs(karr - x))), h0)

    out = [pts[0]]
    for a, b in zip(pts, pts[1:]):
        mid = 0.5 * (a + b)
        left, right = [], []
        x = a
        while True:
            x = x + step(x)
            if x >= mid:
                break
            left.append(x)
        x = b
        while True:
            x = x - step(x)
            if x <= mid:
                break
            right.append(x)
        merged = left + right[::-1]
        # drop a node crowding the middle
        if left and right and right[-1] - left[-1] < 0.3 * step(mid):
            merged.remove(left[-1])
        out.extend(merged)
        out.append(b)
    return np.array(out)


def _layers(keys, lo: float, hi: float, dz: float) -> np.ndarray:
    base = keys[0]
    j0 = math.floor((lo - base) / dz)
    j1 = math.ceil((hi - base) / dz)
    extra = [z for z in keys[1:]]
    # the base layer itself is never thinned out
    grid = [base + j * dz for j in range(j0, j1 + 1)
            if j == 0 or all(abs(j * dz + base - e) > dz / 4 for e in extra)]
    return np.array(sorted(set(grid + extra)))


@dataclass
class PlaneDomain:
    Xs: np.ndarray
    Ys: np.ndarray
    zs: np.ndarray
    k: float
    stencil: int = 16
    graph: LayeredGraph = field(init=False, repr=False)

    def __post_init__(self):
        nx, ny = len(self.Xs), len(self.Ys)
        moves = _STENCIL16 if self.stencil == 16 else _STENCIL8
        ii, jj = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
        ii, jj = ii.ravel(), jj.ravel()
        src, dst, eX, eY = [], [], [], []
        for di, dj in moves:
            a, b = ii + di, jj + dj
            ok = (a >= 0) & (a < nx) & (b >= 0) & (b < ny)
            src.append(ii[ok] * ny + jj[ok])
            dst.append(a[ok] * ny + b[ok])
            eX.append(self.Xs[a[ok]] - self.Xs[ii[ok]])
            eY.append(self.Ys[b[ok]] - self.Ys[jj[ok]])
        n2 = nx * ny
        indptr, indices, ex, ey = _csr(n2, np.concatenate(src), np.concatenate(dst),
                                       np.concatenate(eX), np.concatenate(eY))
        bnd = np.zeros((nx, ny), dtype=np.uint8)
        bnd[0, :] = bnd[-1, :] = bnd[:, 0] = bnd[:, -1] = 1
        self.graph = LayeredGraph(indptr, indices, ex, ey, np.asarray(self.zs, dtype=float),
                                  math.log(self.k), bnd.ravel(), np.zeros(n2, dtype=np.uint8))

    @classmethod
    def around(cls, p, q, k: float, resolution: float = 0.1, box=None, stencil: int = 16) -> "PlaneDomain":
        if not (0 < resolution <= 0.1):
            raise ValueError("resolution must lie in (0, 0.1]")
        lk = math.log(k)
        (Xp, Yp, zp), (Xq, Yq, zq) = p, q
        rX = min(k ** (-zp), k ** (-zq))
        rY = min(k ** zp, k ** zq)
        if box is None:
            aX, aY = abs(Xq - Xp), abs(Yq - Yp)
            mX = 0.5 * aX + 4 * rX
            mY = 0.5 * aY + 4 * rY
            zlo = min(zp, zq, -math.log(aX) / lk if aX > 0 else 0.0) - 1.0
            zhi = max(zp, zq, math.log(aY) / lk if aY > 0 else 0.0) + 1.0
            box = ((min(Xp, Xq) - mX, max(Xp, Xq) + mX), (min(Yp, Yq) - mY, max(Yp, Yq) + mY), (zlo, zhi))
        (x0, x1), (y0, y1), (z0, z1) = box
        for X, Y, z in (p, q):
            if not (x0 <= X <= x1 and y0 <= Y <= y1 and z0 <= z <= z1):
                raise OracleError("endpoint outside the declared box")
        Xs = _graded([Xp, Xq], x0, x1, resolution, rX)
        Ys = _graded([Yp, Yq], y0, y1, resolution, rY)
        zs = _layers([zp, zq], z0, z1, resolution)
        return cls(Xs, Ys, zs, k, stencil)

    def refined(self) -> "PlaneDomain":
        def mid(a):
            out = np.empty(2 * len(a) - 1)
            out[0::2] = a
            out[1::2] = 0.5 * (a[1:] + a[:-1])
            return out
        return PlaneDomain(mid(self.Xs), mid(self.Ys), mid(self.zs), self.k, self.stencil)

    def node(self, X: float, Y: float) -> int:
        i = int(np.argmin(np.abs(self.Xs - X)))
        j = int(np.argmin(np.abs(self.Ys - Y)))
        if abs(self.Xs[i] - X) > 1e-9 or abs(self.Ys[j] - Y) > 1e-9:
            raise OracleError("point is not a grid node")
        return i * len(self.Ys) + j

    def distance(self, p, q) -> float:
        g = self.graph
        d, touched = g.distances(self.node(p[0], p[1]), g.layer(p[2]),
                                 [(self.node(q[0], q[1]), g.layer(q[2]))])
        if touched[0]:
            raise OracleError("shortest grid path reaches the box boundary; enlarge the box")
        return float(d[0])


def solv_distance_oracle(p, q, k: float, resolution: float = 0.1, box=None) -> float:
    """Grid upper bound for the solv distance between two points of the
    developed plane × R given as (X, Y, z) in eigen-coordinates."""
    if tuple(p) == tuple(q):
        return 0.0
    return PlaneDomain.around(p, q, k, resolution, box).distance(p, q)


# --- universal cover ----------------------------------------------------------------


class _ExactTiles:
    """Deck tiles of the octagon tiling, identified by their centres."""

    def __init__(self, side_word: str, dps: int):
        ctx = mpmath.MPContext()
        ctx.dps = dps
        self.ctx = ctx
        n = len(side_word)
        if n != 8:
            raise OracleError("cover domain needs an eight-sided polygon")
        partner = {j: side_word.index(ch.swapcase()) for j, ch in enumerate(side_word)}
        r = ctx.acosh(ctx.cos(ctx.pi / 8) / ctx.sin(ctx.pi / 8))

        def rot(phi):
            c, s = ctx.cos(phi / 2), ctx.sin(phi / 2)
            return (c, s, -s, c)

        def alpha(j):
            return ctx.mpf(5) * ctx.pi / 4 + ctx.pi / 8 + j * ctx.pi / 4

        a = (ctx.exp(r), ctx.mpf(0), ctx.mpf(0), ctx.exp(-r))
        self.gens = {}
        for j, ch in enumerate(side_word):
            g = self.mul(self.mul(rot(alpha(j)), a), rot(ctx.pi - alpha(partner[j])))
            self.gens[ch] = g
        one, zero = ctx.mpf(1), ctx.mpf(0)
        self.mats = [(one, zero, zero, one)]
        self.centres = [self._centre(self.mats[0])]
        self.grid: dict[tuple[int, int], list[int]] = {}
        self._register(0)
        self.steps: dict[tuple[int, str], int] = {}

    @staticmethod
    def mul(A, B):
        a, b, c, d = A
        e, f, g, h = B
        return (a * e + b * g, a * f + b * h, c * e + d * g, c * f + d * h)

    def _centre(self, M):
        a, b, c, d = M
        nrm = c * c + d * d
        y = 1 / nrm
        x = (a * c + b * d) / nrm
        return x, y

    def _key(self, x, y):
        # binary exponent of y and the integer part of x/y; cells are
        # coarse, and lookups also scan the neighbouring cells
        return int(y.exp + y.man.bit_length()), int(x / y)

    def _register(self, t: int):
        self.grid.setdefault(self._key(*self.centres[t]), []).append(t)

    def find(self, M) -> int | None:
        x, y = self._centre(M)
        ku, kv = self._key(x, y)
        for du in (-1, 0, 1):
            for dv in (-1, 0, 1):
                for t in self.grid.get((ku + du, kv + dv), ()):
                    x2, y2 = self.centres[t]
                    ch = 1 + ((x - x2) ** 2 + (y - y2) ** 2) / (2 * y * y2)
                    if ch < 2:
                        return t
        return None

    def step(self, t: int, letter: str) -> int:
        key = (t, letter)
        if key in self.steps:
            return self.steps[key]
        M = self.mul(self.mats[t], self.gens[letter])
        u = self.find(M)
        if u is None:
            u = len(self.mats)
            self.mats.append(M)
            self.centres.append(self._centre(M))
            self._register(u)
        self.steps[key] = u
        self.steps[(u, letter.swapcase())] = t
        return u

    def float_centre(self, t: int) -> complex:
        x, y = self.centres[t]
        return complex(float(x), float(y))


Cell = tuple  # (tile, square)


@dataclass(frozen=True)
class CoverPoint:
    cell: Cell
    x: Fraction
    y: Fraction


class CoverWalker:
    """Exact straight-line motion in the universal cover of the flat surface."""

    def __init__(self, S: TranslationSurface, tiles: _ExactTiles, start: CoverPoint):
        self.S = S
        self.tiles = tiles
        self.pos = start
        self.visited: list[Cell] = [start.cell]
        self.vertices: list[Cell] = []
        self._nxt, self._let = S.transitions
        self._cache: dict = {}

    def neighbour(self, cell: Cell, d: int) -> Cell:
        key = (cell, d)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        t, s = cell
        code = int(self._let[4 * s + d])
        s2 = int(self._nxt[4 * s + d])
        if code >= 0:
            t = self.tiles.step(t, self.S.side_word[code])
        self._cache[key] = (t, s2)
        return (t, s2)

    def corner_index(self) -> int:
        key = (self.pos.x, self.pos.y)
        table = {(0, 0): 0, (1, 0): 1, (1, 1): 2, (0, 1): 3}
        if key not in table:
            raise OracleError("walker is not at a cone point")
        return table[key]

    def sector(self) -> tuple[int, int]:
        j = self.corner_index()
        return _sheet_of(self.S, self.pos.cell[1], j), j

    def rotate_to(self, sheet: int, quad: int) -> None:
        """Turn counter-clockwise around the current cone point until the
        walker sits in the sector (sheet, quad)."""
        m, j = self.sector()
        nsec = 4 * len(self.S.singular_points[0].corners)
        steps = ((4 * sheet + quad) - (4 * m + j)) % nsec
        cell = self.pos.cell
        cross = (LEFT, DOWN, RIGHT, UP)
        corners = [(0, 0), (1, 0), (1, 1), (0, 1)]
        for _ in range(steps):
            cell = self.neighbour(cell, cross[j])
            j = (j + 1) % 4
            self.visited.append(cell)
        cx, cy = corners[j]
        self.pos = CoverPoint(cell, Fraction(cx), Fraction(cy))

    def sector_cells(self) -> list[tuple[Cell, int]]:
        """All cells around the current cone point with the corner index."""
        out = []
        cell = self.pos.cell
        j = self.corner_index()
        cross = (LEFT, DOWN, RIGHT, UP)
        for _ in range(4 * len(self.S.singular_points[0].corners)):
            out.append((cell, j))
            cell = self.neighbour(cell, cross[j])
            j = (j + 1) % 4
        return out

    def move(self, dx, dy, samples: Sequence[Fraction] = ()) -> list[CoverPoint]:
        """Move by (dx, dy); returns the positions at the fractions ``samples``."""
        dx, dy = Fraction(dx), Fraction(dy)
        cell, x, y = self.pos.cell, self.pos.x, self.pos.y
        t = Fraction(0)
        pending = sorted(Fraction(s) for s in samples)
        out = []
        while True:
            tx = ((1 - x) / dx if dx > 0 else (-x / dx if dx < 0 else None))
            ty = ((1 - y) / dy if dy > 0 else (-y / dy if dy < 0 else None))
            cands = [v for v in (tx, ty) if v is not None]
            tnext = t + min(cands) if cands else Fraction(10**9)
            while pending and pending[0] <= min(tnext, Fraction(1)):
                s = pending.pop(0)
                out.append(CoverPoint(cell, x + (s - t) * dx, y + (s - t) * dy))
            if tnext >= 1:
                x, y = x + (1 - t) * dx, y + (1 - t) * dy
                break
            if tx is not None and ty is not None and tx == ty:
                raise ConeHitError("segment passes through a cone point")
            if ty is None or (tx is not None and tx < ty):
                step_t = tx
                x, y = (Fraction(0) if dx > 0 else Fraction(1)), y + step_t * dy
                cell = self.neighbour(cell, RIGHT if dx > 0 else LEFT)
            else:
                step_t = ty
                x, y = x + step_t * dx, (Fraction(0) if dy > 0 else Fraction(1))
                cell = self.neighbour(cell, UP if dy > 0 else DOWN)
            t += step_t
            self.visited.append(cell)
        self.pos = CoverPoint(cell, x, y)
        return out


def _local_move(i: int, j: int, di: int, dj: int, n: int):
    events = []
    if di < 0 and i + di < 0:
        events.append((Fraction(i, -di), LEFT))
    if di > 0 and i + di >= n:
        events.append((Fraction(n - i, di), RIGHT))
    if dj < 0 and j + dj < 0:
        events.append((Fraction(j, -dj), DOWN))
    if dj > 0 and j + dj >= n:
        events.append((Fraction(n - j, dj), UP))
    events.sort()
    if len(events) == 2 and events[0][0] == events[1][0] and events[0][0] < 1:
        return None
    x, y = i + di, j + dj
    dirs = []
    for _, d in events:
        dirs.append(d)
        if d == LEFT:
            x += n
        elif d == RIGHT:
            x -= n
        elif d == DOWN:
            y += n
        else:
            y -= n
    if x == n:
        dirs.append(RIGHT)
        x = 0
    if y == n:
        dirs.append(UP)
        y = 0
    return tuple(dirs), x, y


class CoverDomain:
    """Layered grid graph on a neighbourhood of walked cells in the cover."""

    def __init__(self, walker: CoverWalker, pa: PseudoAnosov, zs, n: int = 10, margin: int = 1):
        self.S = walker.S
        self.pa = pa
        self.n = n
        self.walker = walker
        S = self.S
        self._stars: dict = {}
        cells = set(walker.visited)
        for v in walker.vertices:
            cells.update(c for c, _ in v)
        for _ in range(margin):
            ring = set()
            for c in cells:
                for j in range(4):
                    ring.update(x for x, _ in self._star(c, j))
            cells |= ring
        self.cells = sorted(cells)
        self.cell_index = {c: i for i, c in enumerate(self.cells)}
        nn = n * n
        self._vertex_ids: dict = {}
        self._vertex_sectors: list = []
        n_cells = len(self.cells)
        # moves for ordinary nodes, grouped by crossing sequence
        moves = _STENCIL8
        evec = pa.eigen(np.array(moves, dtype=float) / n)
        table: dict = {}
        for i in range(n):
            for j in range(n):
                if i == 0 and j == 0:
                    continue
                for m, (di, dj) in enumerate(moves):
                    r = _local_move(i, j, di, dj, n)
                    if r is None:
                        continue
                    dirs, x, y = r
                    table.setdefault(dirs, []).append((i * n + j, x * n + y, m))
        table = {k: np.array(v, dtype=np.int64) for k, v in table.items()}
        vtable: dict = {}
        for jc, (cx, cy) in enumerate([(0, 0), (n, 0), (n, n), (0, n)]):
            sx, sy = [(1, 1), (-1, 1), (-1, -1), (1, -1)][jc]
            for m, (di, dj) in enumerate(moves):
                if di * sx < 0 or dj * sy < 0:
                    continue
                r = _local_move(cx, cy, di, dj, n)
                if r is None:
                    continue
                dirs, x, y = r
                vtable.setdefault(jc, []).append((dirs, x * n + y, m))
        src, dst, mv = [], [], []
        boundary = np.zeros(n_cells * nn, dtype=np.uint8)
        follow_cache: dict = {}

        def follow(c, dirs):
            key = (c, dirs)
            if key not in follow_cache:
                for d in dirs:
                    c = walker.neighbour(c, d)
                follow_cache[key] = c if c in self.cell_index else None
            return follow_cache[key]

        extra_src, extra_dst, extra_mv = [], [], []
        for ci, c in enumerate(self.cells):
            base = ci * nn
            for dirs, arr in table.items():
                tgt = follow(c, dirs)
                if tgt is None:
                    boundary[base + arr[:, 0]] = 1
                    continue
                tb = self.cell_index[tgt] * nn
                loc = arr[:, 1]
                d_ids = tb + loc
                vmask = loc == 0
                if vmask.any():
                    d_ids = d_ids.copy()
                    d_ids[vmask] = self._vertex_node(tgt)
                src.append(base + arr[:, 0])
                dst.append(d_ids)
                mv.append(arr[:, 2])
        n_plain = n_cells * nn
        # vertex nodes: moves into every sector cell present in the domain
        vi = 0
        while vi < len(self._vertex_sectors):
            vid = n_plain + vi
            for cell, jc in self._vertex_sectors[vi]:
                if cell not in self.cell_index:
                    continue
                for dirs, loc, m in vtable[jc]:
                    tgt = follow(cell, dirs)
                    if tgt is None:
                        continue
                    d_id = self._vertex_node(tgt) if loc == 0 else self.cell_index[tgt] * nn + loc
                    extra_src.append(vid)
                    extra_dst.append(d_id)
                    extra_mv.append(m)
            vi += 1
        n_vert = len(self._vertex_sectors)
        self.n_plain = n_plain
        n2 = n_plain + n_vert
        src_a = np.concatenate(src + [np.array(extra_src, dtype=np.int64)])
        dst_a = np.concatenate(dst + [np.array(extra_dst, dtype=np.int64)])
        mv_a = np.concatenate(mv + [np.array(extra_mv, dtype=np.int64)])
        indptr, indices, ex, ey = _csr(n2, src_a, dst_a, evec[mv_a, 0], evec[mv_a, 1])
        blocked = np.zeros(n2, dtype=np.uint8)
        blocked[np.arange(n_cells) * nn] = 1
        bnd = np.concatenate([boundary, np.zeros(n_vert, dtype=np.uint8)])
        # vertex nodes whose sectors leave the domain are on the boundary
        for vi, secs in enumerate(self._vertex_sectors):
            if any(c not in self.cell_index for c, _ in secs):
                bnd[n_plain + vi] = 1
        self.graph = LayeredGraph(indptr, indices, ex, ey, np.asarray(zs, dtype=float),
                                  pa.log_k, bnd, blocked)

    def _star(self, cell: Cell, j: int) -> list:
        """Cells around corner ``j`` of ``cell`` with their corner indices."""
        key = (cell, j)
        if key not in self._stars:
            corners = [(0, 0), (1, 0), (1, 1), (0, 1)]
            cx, cy = corners[j]
            w = CoverWalker(self.S, self.walker.tiles, CoverPoint(cell, Fraction(cx), Fraction(cy)))
            w._cache = self.walker._cache
            secs = w.sector_cells()
            for c, jc in secs:
                self._stars[(c, jc)] = secs
        return self._stars[key]

    def _vertex_node(self, cell: Cell) -> int:
        """Node of the cone point at the lower-left corner of ``cell``."""
        secs = self._star(cell, 0)
        canon = min(secs)
        if canon not in self._vertex_ids:
            self._vertex_ids[canon] = len(self._vertex_sectors)
            self._vertex_sectors.append(secs)
        return len(self.cells) * self.n * self.n + self._vertex_ids[canon]

    def node(self, p: CoverPoint) -> int:
        cell, x, y = p.cell, p.x, p.y
        if x == 1:
            cell, x = self.walker.neighbour(cell, RIGHT), Fraction(0)
        if y == 1:
            cell, y = self.walker.neighbour(cell, UP), Fraction(0)
        if cell not in self.cell_index:
            raise OracleError("point outside the cover domain")
        xi, yi = x * self.n, y * self.n
        if xi.denominator != 1 or yi.denominator != 1:
            raise OracleError("point is not a grid node; use an even grid size")
        if xi == 0 and yi == 0:
            return self._vertex_node(cell)
        return self.cell_index[cell] * self.n * self.n + int(xi) * self.n + int(yi)

    def distances(self, src: tuple[CoverPoint, float], targets: Sequence[tuple[CoverPoint, float]]) -> np.ndarray:
        g = self.graph
        d, touched = g.distances(self.node(src[0]), g.layer(src[1]),
                                 [(self.node(p), g.layer(z)) for p, z in targets])
        if touched.any():
            raise OracleError("shortest grid path reaches the domain boundary; enlarge the margin")
        return d


def exact_tiles_for(S: TranslationSurface, letters_hint: int) -> _ExactTiles:
    # centres at hyperbolic distance D need about 0.87·D digits
    D = 2.3 * (letters_hint + 20)
    return _ExactTiles(S.side_word, dps=int(30 + 0.9 * D))


def layers_with(heights, lo: float, hi: float, dz: float) -> np.ndarray:
    hs = sorted(set(float(h) for h in heights))
    grid = np.arange(math.floor(lo / dz), math.ceil(hi / dz) + 1) * dz
    keep = [z for z in grid if all(abs(z - h) > dz / 4 for h in hs)]
    return np.array(sorted(keep + hs))
