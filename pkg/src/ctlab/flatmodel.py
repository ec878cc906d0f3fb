"""Square-tiled translation surface, its affine pseudo-Anosov map, and the
singular solv (Cannon–Thurston) metric on (flat cover) × R.

Square coordinates ``(s, x, y)`` with ``0 <= x, y < 1`` name a point of
square ``s``; the developed plane uses the positions of a spanning tree of
squares.  The metric uses eigen-coordinates ``(X, Y)`` of the derivative:
``f`` acts on displacements by ``(X, Y) -> (X/k, kY)``, so the line element
``k^{2z}dX² + k^{-2z}dY² + (log k)²dz²`` is invariant under ``f`` composed
with a unit upward shift.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property, lru_cache
from typing import Iterable, Sequence

import numpy as np

from . import _kernels

RIGHT, UP, LEFT, DOWN = 0, 1, 2, 3
_DIRS = {RIGHT: (1, 0), UP: (0, 1), LEFT: (-1, 0), DOWN: (0, -1)}


class SurfaceError(ValueError):
    pass


class ConeHitError(RuntimeError):
    pass


class OracleError(RuntimeError):
    pass


def _inverse_perm(p: Sequence[int]) -> tuple[int, ...]:
    inv = [0] * len(p)
    for i, j in enumerate(p):
        inv[j] = i
    return tuple(inv)


def _compose(p, q):
    # p after q
    return tuple(p[q[i]] for i in range(len(q)))


@dataclass(frozen=True)
class ConePoint:
    angle: float  # multiple of 2*pi
    corners: tuple  # lower-left corners (square indices) on this point, in cyclic order


@dataclass(frozen=True)
class PolygonSide:
    index: int
    square: int
    direction: int  # which edge of the square
    start: tuple[int, int]
    end: tuple[int, int]
    letter: str
    partner: int
    holonomy: tuple[int, int]  # translation carrying the partner side onto this one


@dataclass(frozen=True)
class TranslationSurface:
    n: int
    right: tuple[int, ...]
    up: tuple[int, ...]

    def __post_init__(self):
        for name, p in (("right", self.right), ("up", self.up)):
            if sorted(p) != list(range(self.n)):
                raise SurfaceError(f"{name} is not a permutation of {self.n} squares")
        if len(self._bfs_positions()) != self.n:
            raise SurfaceError("gluing is not connected")

    @cached_property
    def left(self) -> tuple[int, ...]:
        return _inverse_perm(self.right)

    @cached_property
    def down(self) -> tuple[int, ...]:
        return _inverse_perm(self.up)

    def neighbour(self, s: int, direction: int) -> int:
        return (self.right, self.up, self.left, self.down)[direction][s]

    @cached_property
    def commutator(self) -> tuple[int, ...]:
        # lower-left corner of s -> lower-left corner of the square reached by
        # turning once around the vertex: u r u^-1 r^-1
        p = _compose(self.up, _compose(self.right, _compose(self.down, self.left)))
        return p

    @cached_property
    def cone_points(self) -> tuple[ConePoint, ...]:
        seen: set[int] = set()
        out = []
        for s in range(self.n):
            if s in seen:
                continue
            cyc = [s]
            seen.add(s)
            t = self.commutator[s]
            while t != s:
                cyc.append(t)
                seen.add(t)
                t = self.commutator[t]
            out.append(ConePoint(2 * math.pi * len(cyc), tuple(cyc)))
        return tuple(out)

    @property
    def singular_points(self) -> tuple[ConePoint, ...]:
        return tuple(c for c in self.cone_points if c.angle > 2 * math.pi + 1e-9)

    @property
    def euler_characteristic(self) -> int:
        # Gauss–Bonnet: sum over cone points of (1 - angle/2pi)
        return int(round(sum(1 - c.angle / (2 * math.pi) for c in self.cone_points)))

    @property
    def genus(self) -> int:
        return (2 - self.euler_characteristic) // 2

    def _bfs_positions(self) -> dict[int, tuple[int, int]]:
        pos = {0: (0, 0)}
        order = [0]
        i = 0
        while i < len(order):
            s = order[i]
            i += 1
            for d in (RIGHT, UP):
                t = self.neighbour(s, d)
                if t not in pos:
                    dx, dy = _DIRS[d]
                    pos[t] = (pos[s][0] + dx, pos[s][1] + dy)
                    order.append(t)
        return pos

    @cached_property
    def positions(self) -> dict[int, tuple[int, int]]:
        pos = self._bfs_positions()
        cells = set(pos.values())
        if len(cells) != self.n:
            raise SurfaceError("spanning-tree development overlaps itself")
        return pos

    def _internal(self, s: int, d: int) -> bool:
        t = self.neighbour(s, d)
        dx, dy = _DIRS[d]
        px, py = self.positions[s]
        return self.positions[t] == (px + dx, py + dy)

    @cached_property
    def sides(self) -> tuple[PolygonSide, ...]:
        """Boundary edges of the developed polygon, counter-clockwise from the
        lower-left corner of square 0, with letters for the side pairing."""
        edges = {}
        for s in range(self.n):
            px, py = self.positions[s]
            corners = {
                DOWN: ((px, py), (px + 1, py)),
                RIGHT: ((px + 1, py), (px + 1, py + 1)),
                UP: ((px + 1, py + 1), (px, py + 1)),
                LEFT: ((px, py + 1), (px, py)),
            }
            for d, (a, b) in corners.items():
                if not self._internal(s, d):
                    edges[a] = (s, d, a, b)
        start = self.positions[0]
        seq = []
        cur = start
        for _ in range(len(edges)):
            e = edges[cur]
            seq.append(e)
            cur = e[3]
            if cur == start:
                break
        if len(seq) != len(edges):
            raise SurfaceError("polygon boundary is not a single loop")
        index = {(e[0], e[1]): j for j, e in enumerate(seq)}
        opp = {RIGHT: LEFT, LEFT: RIGHT, UP: DOWN, DOWN: UP}
        partner = {}
        for j, (s, d, a, b) in enumerate(seq):
            t = self.neighbour(s, d)
            partner[j] = index[(t, opp[d])]
        letters = [""] * len(seq)
        nxt = 0
        for j in range(len(seq)):
            if not letters[j]:
                ch = "abcdefghijklmnopqrstuvwxyz"[nxt]
                nxt += 1
                letters[j] = ch
                letters[partner[j]] = ch.upper()
        out = []
        for j, (s, d, a, b) in enumerate(seq):
            ps, pd, pa, pb = seq[partner[j]]
            hol = (b[0] - pa[0], b[1] - pa[1])
            out.append(PolygonSide(j, s, d, a, b, letters[j], partner[j], hol))
        return tuple(out)

    @cached_property
    def side_word(self) -> str:
        return "".join(sd.letter for sd in self.sides)

    @cached_property
    def letter_holonomy(self) -> dict[str, tuple[int, int]]:
        return {sd.letter: sd.holonomy for sd in self.sides}

    @cached_property
    def transitions(self) -> tuple[np.ndarray, np.ndarray]:
        """``(next_square, letter_code)`` indexed by ``4*s + direction``;
        letter codes index :attr:`side_word`, -1 for internal edges."""
        nxt = np.zeros(4 * self.n, dtype=np.int64)
        let = np.full(4 * self.n, -1, dtype=np.int64)
        lookup = {(sd.square, sd.direction): sd.index for sd in self.sides}
        for s in range(self.n):
            for d in range(4):
                nxt[4 * s + d] = self.neighbour(s, d)
                if (s, d) in lookup:
                    let[4 * s + d] = lookup[(s, d)]
        return nxt, let

    def develop(self, s: int, x: float, y: float) -> tuple[float, float]:
        px, py = self.positions[s]
        return (px + x, py + y)

    def to_text(self, derivative=None) -> str:
        lines = [f"squares: {self.n}",
                 "right: " + " ".join(str(i + 1) for i in self.right),
                 "up: " + " ".join(str(i + 1) for i in self.up)]
        if derivative is not None:
            lines.append("pa: " + " ".join(str(int(v)) for v in np.ravel(derivative)))
        return "\n".join(lines) + "\n"


# --- the pseudo-Anosov ----------------------------------------------------


@dataclass(frozen=True)
class PseudoAnosov:
    surface: TranslationSurface
    derivative: tuple[int, int, int, int]
    h_twist: int
    v_twist: int

    @property
    def matrix(self) -> np.ndarray:
        return np.array(self.derivative, dtype=float).reshape(2, 2)

    @cached_property
    def k(self) -> float:
        a, b, c, d = self.derivative
        tr = a + d
        return 0.5 * (tr + math.sqrt(tr * tr - 4))

    @cached_property
    def log_k(self) -> float:
        return math.log(self.k)

    @cached_property
    def eigenbasis(self) -> np.ndarray:
        """Rows ``e_s`` (contracted) and ``e_u`` (expanded), det +1 when the
        derivative is symmetric."""
        a, b, c, d = self.derivative
        k = self.k
        # (A - k) v = 0 -> v = (b, k - a)
        eu = np.array([b, k - a], dtype=float)
        es = np.array([b, 1.0 / k - a], dtype=float)
        eu /= math.hypot(*eu)
        es /= math.hypot(*es)
        if es[0] * eu[1] - es[1] * eu[0] < 0:
            es = -es
        return np.vstack([es, eu])

    def eigen(self, v) -> np.ndarray:
        """Square-coordinate displacement(s) -> (X, Y)."""
        E = self.eigenbasis
        w = np.asarray(v, dtype=float)
        # coordinates in the (possibly non-orthogonal) basis
        return np.linalg.solve(E.T, w.T).T

    def _shear_h(self, s, x, y):
        t = x + self.h_twist * y
        m = math.floor(t)
        for _ in range(m % self._row_period(s)):
            s = self.surface.right[s]
        return s, t - m, y

    def _shear_v(self, s, x, y):
        t = y + self.v_twist * x
        m = math.floor(t)
        for _ in range(m % self._col_period(s)):
            s = self.surface.up[s]
        return s, x, t - m

    def _row_period(self, s):
        n, t = 1, self.surface.right[s]
        while t != s:
            n, t = n + 1, self.surface.right[t]
        return n

    def _col_period(self, s):
        n, t = 1, self.surface.up[s]
        while t != s:
            n, t = n + 1, self.surface.up[t]
        return n

    def apply(self, s: int, x, y):
        """Image of a point in square coordinates (exact for Fractions)."""
        s, x, y = self._shear_v(s, x, y)
        return self._shear_h(s, x, y)

    def apply_inverse(self, s: int, x, y):
        s, x, y = self._unshear_h(s, x, y)
        return self._unshear_v(s, x, y)

    def _unshear_h(self, s, x, y):
        t = x - self.h_twist * y
        m = math.floor(t)
        for _ in range((-m) % self._row_period(s)):
            s = self.surface.left[s]
        return s, t - m, y

    def _unshear_v(self, s, x, y):
        t = y - self.v_twist * x
        m = math.floor(t)
        for _ in range((-m) % self._col_period(s)):
            s = self.surface.down[s]
        return s, x, t - m

    def check(self, samples: int = 9) -> float:
        """Continuity of the affine map across every glued edge; returns the
        largest mismatch (0 for a consistent realisation)."""
        worst = 0.0
        S = self.surface
        eps = Fraction(1, 10**9)
        for s in range(S.n):
            for j in range(1, samples + 1):
                u = Fraction(j, samples + 1)
                pairs = [((s, 1 - eps, u), (S.right[s], eps, u)),
                         ((s, u, 1 - eps), (S.up[s], u, eps))]
                for p, q in pairs:
                    a = self.apply(*p)
                    b = self.apply(*q)
                    worst = max(worst, _surface_gap(S, a, b))
        return worst


def _surface_gap(S: TranslationSurface, a, b) -> float:
    # distance between two nearby surface points, allowing one edge crossing
    sa, xa, ya = a
    sb, xb, yb = b
    best = math.inf
    for s, x, y in _translates(S, sb, float(xb), float(yb)):
        if s == sa:
            best = min(best, math.hypot(float(xa) - x, float(ya) - y))
    return best


def _translates(S, s, x, y):
    yield s, x, y
    yield S.left[s], x + 1, y
    yield S.right[s], x - 1, y
    yield S.down[s], x, y + 1
    yield S.up[s], x, y - 1
    for a, dx in ((S.left, 1), (S.right, -1)):
        for b, dy in ((S.down, 1), (S.up, -1)):
            yield b[a[s]], x + dx, y + dy
            yield a[b[s]], x + dx, y + dy


def parse_surface_text(text: str):
    """Parse ``squares:``, ``right:``, ``up:``, ``pa:`` lines (permutations
    one-line, 1-indexed)."""
    fields: dict[str, list[int]] = {}
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if ":" not in line:
            raise SurfaceError(f"malformed line: {raw!r}")
        key, val = line.split(":", 1)
        key = key.strip().lower()
        if key not in ("squares", "right", "up", "pa"):
            raise SurfaceError(f"unknown key {key!r}")
        if key in fields:
            raise SurfaceError(f"duplicate key {key!r}")
        try:
            fields[key] = [int(tok) for tok in val.split()]
        except ValueError as exc:
            raise SurfaceError(f"non-integer value in {raw!r}") from exc
    for key in ("squares", "right", "up"):
        if key not in fields:
            raise SurfaceError(f"missing key {key!r}")
    if len(fields["squares"]) != 1:
        raise SurfaceError("squares takes one integer")
    n = fields["squares"][0]
    perms = []
    for key in ("right", "up"):
        p = fields[key]
        if len(p) != n or sorted(p) != list(range(1, n + 1)):
            raise SurfaceError(f"{key} must be a permutation of 1..{n}")
        perms.append(tuple(i - 1 for i in p))
    S = TranslationSurface(n, perms[0], perms[1])
    pa = None
    if "pa" in fields:
        if len(fields["pa"]) != 4:
            raise SurfaceError("pa takes four integers")
        pa = make_pseudo_anosov(S, tuple(fields["pa"]))
    return S, pa


def make_pseudo_anosov(S: TranslationSurface, derivative) -> PseudoAnosov:
    a, b, c, d = derivative
    if a * d - b * c != 1:
        raise SurfaceError("derivative must have determinant 1")
    if abs(a + d) <= 2:
        raise SurfaceError("derivative must be hyperbolic (|trace| > 2)")
    # realised as horizontal twist by b after vertical twist by c
    if d != 1 or a != 1 + b * c:
        raise SurfaceError("derivative must factor as [[1,h],[0,1]]·[[1,0],[v,1]]")
    pa = PseudoAnosov(S, (a, b, c, d), b, c)
    if pa.check() > 1e-6:
        raise SurfaceError("affine map is not compatible with the gluings")
    return pa


@lru_cache(maxsize=None)
def build_canonical_surface() -> tuple[TranslationSurface, PseudoAnosov]:
    """Three-square L with the pseudo-Anosov of derivative [[5,2],[2,1]]."""
    S = TranslationSurface(3, (1, 0, 2), (2, 1, 0))
    if len(S.singular_points) != 1 or abs(S.singular_points[0].angle - 6 * math.pi) > 1e-9:
        raise SurfaceError("canonical surface must have one 6pi cone point")
    if S.genus != 2:
        raise SurfaceError("canonical surface must have genus 2")
    pa = make_pseudo_anosov(S, (5, 2, 2, 1))
    return S, pa


# --- straight-line flow ------------------------------------------------------


@dataclass(frozen=True)
class FlatSegment:
    dx: float
    dy: float
    start: tuple  # (square, x, y)
    end: tuple
    word: str  # polygon sides crossed before this segment
    ddx: float = 0.0  # signed displacement
    ddy: float = 0.0


def _step_square(S: TranslationSurface, s: int, d: int):
    nxt, let = S.transitions
    code = int(let[4 * s + d])
    return int(nxt[4 * s + d]), (S.side_word[code] if code >= 0 else "")


def flat_geodesic(S: TranslationSurface, start, direction, length: float,
                  cone_tol: float = 1e-12, retries: int = 3) -> list[FlatSegment]:
    """Straight-line flow from ``start = (s, x, y)``; returns one segment per
    square visited.  A trajectory through a cone point is perturbed by a
    small rotation and retried."""
    dxy = np.asarray(direction, dtype=float)
    nrm = math.hypot(*dxy)
    if nrm == 0:
        raise ValueError("direction must be nonzero")
    dxy = dxy / nrm
    for attempt in range(retries + 1):
        try:
            return _trace(S, start, dxy, length, cone_tol)
        except ConeHitError:
            if attempt == retries:
                raise
            ang = 1e-9 * (attempt + 1)
            c, s_ = math.cos(ang), math.sin(ang)
            dxy = np.array([c * dxy[0] - s_ * dxy[1], s_ * dxy[0] + c * dxy[1]])
    raise ConeHitError("unreachable")


def _trace(S, start, dxy, length, cone_tol):
    s, x, y = start
    x, y = float(x), float(y)
    ux, uy = float(dxy[0]), float(dxy[1])
    out = []
    remaining = float(length)
    word = ""
    while remaining > 1e-15:
        tx = ((1.0 - x) / ux if ux > 0 else (-x / ux if ux < 0 else math.inf))
        ty = ((1.0 - y) / uy if uy > 0 else (-y / uy if uy < 0 else math.inf))
        t = min(tx, ty, remaining)
        nx, ny = x + t * ux, y + t * uy
        out.append(FlatSegment(abs(t * ux), abs(t * uy), (s, x, y), (s, nx, ny), word, t * ux, t * uy))
        word = ""
        remaining -= t
        if remaining <= 1e-15:
            break
        hit_x = abs(tx - t) <= cone_tol * max(1.0, t)
        hit_y = abs(ty - t) <= cone_tol * max(1.0, t)
        if hit_x and hit_y:
            raise ConeHitError("trajectory passes through a cone point")
        if hit_x:
            d = RIGHT if ux > 0 else LEFT
            s, w = _step_square(S, s, d)
            word += w
            x, y = (0.0 if ux > 0 else 1.0), ny
        else:
            d = UP if uy > 0 else DOWN
            s, w = _step_square(S, s, d)
            word += w
            x, y = nx, (0.0 if uy > 0 else 1.0)
    return out


def visit_frequencies(S: TranslationSurface, segments: Iterable[FlatSegment]) -> np.ndarray:
    tot = np.zeros(S.n)
    for seg in segments:
        tot[seg.start[0]] += math.hypot(seg.dx, seg.dy)
    return tot / tot.sum()


def closed_line_word(S: TranslationSurface, start, hol: tuple[int, int], limit: int = -1) -> np.ndarray:
    """Letter codes crossed by the straight line with integer holonomy
    ``hol`` through ``start = (s, x, y)`` (``x, y`` may be Fractions).
    With ``limit >= 0`` only the first ``limit`` square crossings are traced."""
    s, x, y = start
    p, q = int(hol[0]), int(hol[1])
    c = Fraction(q) * Fraction(x) - Fraction(p) * Fraction(y)
    nxt, let = S.transitions
    return _kernels.trace_integer_line(int(s), float(x), float(y), p, q, float(c), nxt, let, int(limit))


def line_closes(S: TranslationSurface, codes, hol) -> bool:
    """A traced line closes up exactly when its letters develop to ``hol``."""
    H = np.array([S.letter_holonomy[ch] for ch in S.side_word], dtype=np.int64)
    total = np.bincount(np.asarray(codes, dtype=np.int64), minlength=len(H)) @ H
    return bool(total[0] == hol[0] and total[1] == hol[1])


# --- Cannon–Thurston metric ----------------------------------------------------

_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)


def piece_length(dX: float, dY: float, z0: float, z1: float, log_k: float) -> float:
    """CT length of a straight piece with height linear from z0 to z1."""
    dz = z1 - z0
    if dz == 0.0:
        e = math.exp(log_k * z0)
        return math.sqrt((e * dX) ** 2 + (dY / e) ** 2)
    if dX == 0.0 and dY == 0.0:
        return abs(dz) * log_k
    m = max(1, int(math.ceil(abs(dz) * log_k / 0.25)))
    total = 0.0
    for j in range(m):
        a = z0 + dz * j / m
        b = z0 + dz * (j + 1) / m
        zs = 0.5 * (a + b) + 0.5 * (b - a) * _GL_X
        e = np.exp(log_k * zs)
        f = np.sqrt((e * dX) ** 2 + (dY / e) ** 2 + (log_k * dz) ** 2)
        total += float(np.dot(_GL_W, f)) * 0.5 / m
    return total


def piece_lengths(dX, dY, z0, z1, log_k: float) -> np.ndarray:
    """Vectorised :func:`piece_length` for many pieces at once."""
    dX, dY = np.asarray(dX, dtype=float), np.asarray(dY, dtype=float)
    z0, z1 = np.asarray(z0, dtype=float), np.asarray(z1, dtype=float)
    dz = z1 - z0
    m = max(1, int(math.ceil(float(np.abs(dz).max(initial=0.0)) * log_k / 0.25)))
    total = np.zeros(np.broadcast(dX, dY, z0, z1).shape)
    for j in range(m):
        for x, w in zip(_GL_X, _GL_W):
            z = z0 + dz * (j + 0.5 + 0.5 * x) / m
            e = np.exp(log_k * z)
            total += 0.5 * w / m * np.sqrt((e * dX) ** 2 + (dY / e) ** 2 + (log_k * dz) ** 2)
    return total


@dataclass(frozen=True)
class SolvPath:
    """Vertices ``(X, Y, z)`` in developed eigen-coordinates; consecutive
    vertices are joined by straight pieces with linearly interpolated height."""

    vertices: tuple
    cover: tuple = ()  # optional (tile key, square) per vertex

    @classmethod
    def of(cls, pts) -> "SolvPath":
        return cls(tuple((float(a), float(b), float(c)) for a, b, c in pts))

    def __len__(self):
        return len(self.vertices)


def ct_length(path: SolvPath, k: float) -> float:
    lk = math.log(k)
    v = path.vertices
    return sum(piece_length(b[0] - a[0], b[1] - a[1], a[2], b[2], lk) for a, b in zip(v, v[1:]))


def ct_cumulative(path: SolvPath, k: float) -> np.ndarray:
    lk = math.log(k)
    v = path.vertices
    out = [0.0]
    for a, b in zip(v, v[1:]):
        out.append(out[-1] + piece_length(b[0] - a[0], b[1] - a[1], a[2], b[2], lk))
    return np.array(out)


def flow_conjugation(path: SolvPath, z: float) -> SolvPath:
    """Vertical flow F_z: raise every vertex by z."""
    return SolvPath(tuple((a, b, c + z) for a, b, c in path.vertices), path.cover)


def measures_at(dX: float, dY: float, z: float, k: float) -> tuple[float, float]:
    """Side measures of a horizontal displacement seen from height z."""
    return (abs(dX) * k ** z, abs(dY) * k ** (-z))


def f_action(point, k: float):
    """The monodromy composed with the unit upward flow, in eigen-coordinates
    centred at a cone point."""
    X, Y, z = point
    return (X / k, Y * k, z + 1.0)


def f_action_path(path: SolvPath, k: float) -> SolvPath:
    return SolvPath(tuple(f_action(p, k) for p in path.vertices), path.cover)


@dataclass(frozen=True)
class Rectangle:
    a: float  # dx measure
    b: float  # dy measure

    @property
    def measure(self) -> float:
        return self.a * self.b

    def flowed(self, z: float, k: float) -> "Rectangle":
        return Rectangle(self.a * k ** z, self.b * k ** (-z))


def optimal_height(R: Rectangle, k: float) -> float:
    if R.a <= 0 or R.b <= 0:
        raise ValueError("degenerate rectangle: a side has zero measure")
    return 0.5 * math.log(R.b / R.a) / math.log(k)


def ladder_gap(a: float, b: float) -> float:
    """min over z of k^z a + k^{-z} b."""
    if a < 0 or b < 0:
        raise ValueError("measures must be nonnegative")
    return 2.0 * math.sqrt(a * b)


def bottleneck_bound(R: Rectangle, k: float) -> float:
    ab = R.a * R.b
    if ab <= 0:
        raise ValueError("rectangle must have positive measure")
    return k ** (-math.sqrt(ab / 2.0)) * 2.0 * math.sqrt(ab)


def sol_lower_bound(p, q, k: float) -> float:
    """A certified lower bound for the solv distance between two points of
    the developed plane × R.

    A path of length L has its heights in a window of width L/log k that
    contains both endpoint heights, and by Minkowski's inequality its length
    is at least sqrt((k^{z_lo}|ΔX|)² + (k^{-z_hi}|ΔY|)²)."""
    lk = math.log(k)
    aX, aY = abs(q[0] - p[0]), abs(q[1] - p[1])
    zlo0, zhi0 = min(p[2], q[2]), max(p[2], q[2])
    vertical = (zhi0 - zlo0) * lk

    def lb(L):
        w = L / lk
        if w < zhi0 - zlo0:
            return math.inf
        # minimise over z_lo in [zhi0 - w, zlo0] a convex function of z_lo
        def g(zl):
            return math.hypot(aX * k ** zl, aY * k ** (-(zl + w)))
        lo, hi = zhi0 - w, zlo0
        if aX > 0 and aY > 0:
            zs = 0.5 * (math.log(aY / aX) / lk - w)
            zs = min(max(zs, lo), hi)
        else:
            zs = lo if aX > 0 else hi
        return g(zs)

    lo, hi = vertical, max(vertical, 1.0)
    while lb(hi) > hi:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if lb(mid) > mid:
            lo = mid
        else:
            hi = mid
    return max(lo, vertical)


# --- saddle connections -------------------------------------------------------


@dataclass(frozen=True)
class SaddleConnection:
    holonomy: tuple[int, int]
    sheet: int  # outgoing sheet at the cone point (0, 1, 2 for the L)
    arrival_sheet: int = -1
    word: str = ""  # polygon sides crossed, from the start corner's square

    @property
    def length(self) -> float:
        return math.hypot(*self.holonomy)

    @property
    def start_angle(self) -> float:
        """Angular position of the outgoing direction around the cone point."""
        return 2 * math.pi * self.sheet + (math.atan2(self.holonomy[1], self.holonomy[0]) % (2 * math.pi))

    @property
    def arrival_angle(self) -> float:
        """Angular position of the reversed direction at the end point."""
        back = (math.atan2(self.holonomy[1], self.holonomy[0]) + math.pi) % (2 * math.pi)
        return 2 * math.pi * self.arrival_sheet + back


def _quadrant(p: int, q: int) -> int:
    # half-open quadrants: I = [0, pi/2), II = [pi/2, pi), ...
    ang = math.atan2(q, p) % (2 * math.pi)
    return min(int(ang // (math.pi / 2)), 3)


def _corner_square(S: TranslationSurface, base: int, quadrant: int) -> tuple[int, float, float]:
    """Square and corner position of the sector of ``quadrant`` in the sheet
    whose lower-left corner is square ``base``."""
    s = base
    if quadrant >= 1:
        s = S.left[s]
    if quadrant >= 2:
        s = S.down[s]
    if quadrant >= 3:
        s = S.right[s]
    corner = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)][quadrant]
    return s, corner[0], corner[1]


def _sheet_of(S: TranslationSurface, square: int, quadrant: int) -> int:
    cp = S.singular_points[0]
    for m, base in enumerate(cp.corners):
        if _corner_square(S, base, quadrant)[0] == square:
            return m
    raise SurfaceError("corner not on the singular point")


def trace_saddle_connection(S: TranslationSurface, sheet: int, hol: tuple[int, int]) -> SaddleConnection:
    p, q = hol
    if math.gcd(abs(p), abs(q)) != 1:
        raise ValueError("holonomy must be primitive")
    cp = S.singular_points[0]
    quad = _quadrant(p, q)
    s0, x0, y0 = _corner_square(S, cp.corners[sheet], quad)
    nxt, let = S.transitions
    codes, last, cx, cy = _kernels.trace_corner_line(int(s0), int(x0), int(y0), int(p), int(q), nxt, let)
    word = "".join(S.side_word[c] for c in codes)
    j = {(0, 0): 0, (1, 0): 1, (1, 1): 2, (0, 1): 3}[(int(cx), int(cy))]
    arr = _sheet_of(S, int(last), j)
    back = math.atan2(-q, -p) % (2 * math.pi)
    if j == 3 and back < math.pi / 2:
        # reversed direction is the positive x-axis: it opens the next sheet
        arr = (arr + 1) % len(cp.corners)
    return SaddleConnection((int(p), int(q)), sheet, arr, word)


def saddle_connections(S: TranslationSurface, max_length: float, with_words: bool = False) -> list[SaddleConnection]:
    """All saddle connections of length <= max_length on a one-cone-point
    square-tiled surface: every lattice point is the cone point, so they are
    the primitive vectors, once per outgoing sheet."""
    if max_length > 50:
        raise ValueError("max_length above the desk-scale bound of 50")
    if len(S.singular_points) != 1:
        raise SurfaceError("enumeration assumes a single cone point")
    sheets = len(S.singular_points[0].corners)
    m = int(math.floor(max_length))
    out = []
    for p in range(-m, m + 1):
        for q in range(-m, m + 1):
            if (p, q) == (0, 0) or math.gcd(abs(p), abs(q)) != 1:
                continue
            if p * p + q * q > max_length * max_length + 1e-12:
                continue
            for sh in range(sheets):
                if with_words:
                    out.append(trace_saddle_connection(S, sh, (p, q)))
                else:
                    out.append(SaddleConnection((p, q), sh))
    return out


def chain_is_geodesic(chain: Sequence[SaddleConnection], total_angle: float = 6 * math.pi) -> bool:
    for a, b in zip(chain, chain[1:]):
        gap = (b.start_angle - a.arrival_angle) % total_angle
        if gap < math.pi - 1e-12 or gap > total_angle - math.pi + 1e-12:
            return False
    return True


def random_geodesic_chain(S: TranslationSurface, n: int, rng, max_length: float = 3.0,
                          first=None) -> list[SaddleConnection]:
    """Random chain of saddle connections satisfying the angle condition at
    every joint (a geodesic in the flat metric)."""
    pool = [c.holonomy for c in saddle_connections(S, max_length) if c.sheet == 0]
    sheets = len(S.singular_points[0].corners)
    total = 2 * math.pi * sheets
    chain = []
    prev = first
    while len(chain) < n:
        hol = pool[int(rng.integers(len(pool)))]
        if prev is None:
            sh = int(rng.integers(sheets))
        else:
            ok = []
            for sh in range(sheets):
                ang = 2 * math.pi * sh + (math.atan2(hol[1], hol[0]) % (2 * math.pi))
                gap = (ang - prev.arrival_angle) % total
                if math.pi - 1e-12 <= gap <= total - math.pi + 1e-12:
                    ok.append(sh)
            sh = ok[int(rng.integers(len(ok)))]
        c = trace_saddle_connection(S, sh, hol)
        chain.append(c)
        prev = c
    return chain


# --- McMullen optimal-height paths -----------------------------------------------

Z_CLAMP_DECADES = 5.0


def mcmullen_path(measures: Sequence[tuple[float, float]], k: float,
                  displacements: Sequence[tuple[float, float]] | None = None) -> SolvPath:
    """Place each piece at its optimal height ½log_k(|ΔY|/|ΔX|) and join
    consecutive pieces by vertical segments.

    ``measures`` are (|ΔX|, |ΔY|) per piece; signed ``displacements`` default
    to the measures themselves.
    """
    if len(measures) == 0:
        raise ValueError("empty chain")
    zmax = Z_CLAMP_DECADES * math.log(10) / math.log(k)
    disp = displacements if displacements is not None else measures
    heights = []
    for mx, my in measures:
        mx, my = abs(mx), abs(my)
        if mx == 0 and my == 0:
            raise ValueError("zero-length connection")
        if mx == 0 or my == 0:
            warnings.warn("axis-parallel connection: optimal height clamped", RuntimeWarning)
            heights.append(zmax if mx == 0 else -zmax)
        else:
            heights.append(min(max(0.5 * math.log(my / mx) / math.log(k), -zmax), zmax))
    X, Y = 0.0, 0.0
    verts = [(X, Y, heights[0])]
    for i, (dX, dY) in enumerate(disp):
        X, Y = X + dX, Y + dY
        verts.append((X, Y, heights[i]))
        if i + 1 < len(heights):
            verts.append((X, Y, heights[i + 1]))
    return SolvPath(tuple(verts))


def chain_eigen_displacements(pa: PseudoAnosov, chain: Sequence[SaddleConnection]) -> np.ndarray:
    return pa.eigen(np.array([c.holonomy for c in chain], dtype=float))


# --- distance oracles (grid graphs live in ``oracle``; quasigeodesic fits in ``solvqg``) ---


def solv_distance_oracle(p, q, k: float, resolution: float = 0.1, box=None) -> float:
    """Shortest-path upper bound for the solv distance between (X, Y, z) points."""
    from .oracle import solv_distance_oracle as _oracle

    return _oracle(p, q, k, resolution, box)


def axis_embedding_fit(holonomy=(2, 0), **kw):
    """Quasigeodesic fit of the z = 0 embedding of a closed flat geodesic."""
    from .solvqg import axis_embedding_fit as _fit

    return _fit(holonomy, **kw)
