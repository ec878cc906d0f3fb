"""Height functions and test paths for the canonical pseudo-Anosov.

The invariant laminations are approximated by the hyperbolic geodesics
carried by the iterates ``f^n(c)`` and ``f^-n(c)`` of a closed flat curve
``c``.  The octagon group with the ``origami`` side pattern has the same side
pairing as the developed flat polygon, so a flat line's sequence of side
crossings is a word in the group, and its two ends converge to the endpoints
of the corresponding hyperbolic geodesic.  A leaf is fixed by a window of
``window`` letters on each side of a passage through the base polygon;
straight-line codings have linear complexity, so a depth-8 curve already
contains every window of the limit lamination.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property, lru_cache
from typing import Sequence

import numpy as np

from . import _kernels
from . import flatmodel as fm
from . import hyp2
from . import surface as sf
from .hyp2 import Frame, Geodesic

PLUS, MINUS = "plus", "minus"
FILLING_CURVE = ((0, Fraction(1, 3), Fraction(1, 7)), (3, 3))
WINDOW = 32
TRACE_LIMIT = 1 << 24
MAX_DEPTH = 12
CAP = 1.0  # distances are only resolved below this; rho clamps at exp(-1)
EXCEPTIONAL = 1e-12
PROFILE_COLUMNS = ("t", "rho_plus", "rho_minus", "h", "dx_cum", "dy_cum", "arclen")


class LaminationError(RuntimeError):
    pass


class ExceptionalGeodesicError(ValueError):
    pass


# --- group and flat tables ---------------------------------------------------


@lru_cache(maxsize=None)
def _tables():
    S, pa = fm.build_canonical_surface()
    G = sf.octagon_group("origami")
    if G.side_letters != S.side_word:
        raise LaminationError("octagon and flat polygon have different side pairings")
    word = S.side_word
    mats = np.array([[[G.gen(ch).a, G.gen(ch).b], [G.gen(ch).c, G.gen(ch).d]] for ch in word])
    inv = np.array([word.index(ch.swapcase()) for ch in word], dtype=np.int64)
    hol = np.array([S.letter_holonomy[ch] for ch in word], dtype=float)
    return S, pa, G, mats, inv, hol


def circumradius() -> float:
    return math.acosh(1.0 / math.tan(math.pi / 8) ** 2)


def _disk_angle(z: np.ndarray) -> np.ndarray:
    w = (z - 1j) / (z + 1j)
    return np.mod(np.angle(w), 2 * math.pi)


def _real_from_angle(phi: np.ndarray) -> np.ndarray:
    # boundary point e^{i phi} of the disk as a real number (inf at phi = 0)
    phi = np.asarray(phi, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        x = -np.sin(phi) / (1.0 - np.cos(phi))
    return np.where(np.abs(np.remainder(phi + math.pi, 2 * math.pi) - math.pi) < 1e-300, np.inf, x)


def _centre_distance(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Hyperbolic distance from the disk centre to the geodesic with
    endpoint angles a, b: tanh d = |cos((b - a)/2)|."""
    c = np.abs(np.cos(0.5 * (b - a)))
    return np.arctanh(np.minimum(c, 1.0 - 1e-16))


# --- curves and windows -------------------------------------------------------


def curve_at_depth(n: int, curve=FILLING_CURVE):
    """Start point and holonomy of ``f^n(c)`` (negative n for the inverse)."""
    S, pa, *_ = _tables()
    (s, x, y), (p, q) = curve
    a, b, c, d = pa.derivative
    D = ((a, b), (c, d)) if n >= 0 else ((d, -b), (-c, a))
    pt = (s, Fraction(x), Fraction(y))
    for _ in range(abs(n)):
        pt = pa.apply(*pt) if n >= 0 else pa.apply_inverse(*pt)
        p, q = D[0][0] * p + D[0][1] * q, D[1][0] * p + D[1][1] * q
    return pt, (p, q)


def curve_word(n: int, curve=FILLING_CURVE, limit: int = TRACE_LIMIT):
    """Letter codes of ``f^n(c)``; returns ``(codes, cyclic)``.  Curves longer
    than ``limit`` square crossings are truncated and used as a plain word."""
    S = _tables()[0]
    pt, hol = curve_at_depth(n, curve)
    total = abs(hol[0]) + abs(hol[1])
    if total > limit:
        return fm.closed_line_word(S, pt, hol, limit=limit), False
    codes = fm.closed_line_word(S, pt, hol)
    if not fm.line_closes(S, codes, hol):
        raise LaminationError("the seed curve does not close up; pick a closed holonomy")
    return codes, True


def distinct_windows(codes: np.ndarray, W: int, cyclic: bool = True) -> np.ndarray:
    """Distinct windows of ``2W`` letters centred on the passages of the
    word, one row each.  Columns ``W:`` are the letters crossed going
    forward, columns ``W-1::-1`` the letters crossed going backward."""
    codes = np.asarray(codes, dtype=np.int8)
    L = len(codes)
    if cyclic:
        if L == 0:
            raise LaminationError("empty word")
        ext = codes[np.arange(-W, L + W) % L]
    else:
        if L < 2 * W:
            raise LaminationError("word shorter than one window")
        ext = codes
    view = np.lib.stride_tricks.sliding_window_view(ext, 2 * W)
    n = L if cyclic else L - 2 * W + 1
    kind = np.dtype((np.void, 2 * W))
    seen = []
    for lo in range(0, n, 1 << 16):
        block = np.ascontiguousarray(view[lo:min(n, lo + (1 << 16))])
        seen.append(np.unique(block.view(kind).ravel()))
    rows = np.unique(np.concatenate(seen))
    return rows.view(np.int8).reshape(-1, 2 * W)


def _word_endpoints(mats: np.ndarray, words: np.ndarray) -> np.ndarray:
    """Disk angle of lim g_{w_1} ... g_{w_m}·i for each row of ``words``."""
    M = np.broadcast_to(np.eye(2), (len(words), 2, 2)).copy()
    for j in range(words.shape[1]):
        M = M @ mats[words[:, j]]
        M /= np.abs(M).max(axis=(1, 2))[:, None, None]
    a, b, c, d = M[:, 0, 0], M[:, 0, 1], M[:, 1, 0], M[:, 1, 1]
    z = (a * 1j + b) / (c * 1j + d)
    return _disk_angle(z)


@lru_cache(maxsize=None)
def ball_tiles(radius: float) -> np.ndarray:
    """Group elements (as 2x2 matrices) whose tile centre lies within
    ``radius`` of the base point, found by breadth-first search."""
    _, _, G, mats, _, _ = _tables()
    seen = {(0.0, 0.0)}
    out = [np.eye(2)]
    frontier = [np.eye(2)]
    while frontier:
        nxt = []
        for g in frontier:
            for m in mats:
                h = g @ m
                z = (h[0, 0] * 1j + h[0, 1]) / (h[1, 0] * 1j + h[1, 1])
                if hyp2.dist_h2(1j, z) > radius + 1e-9:
                    continue
                key = (round(z.real, 8), round(math.log(z.imag), 8))
                if key in seen:
                    continue
                seen.add(key)
                out.append(h)
                nxt.append(h)
        frontier = nxt
    return np.array(out)


def _mobius_angles(g: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """Act by the upper half-plane matrices ``g`` (t,2,2) on boundary angles."""
    C = np.array([[1, -1j], [1, 1j]])
    Ci = np.linalg.inv(C)
    Gd = C @ g @ Ci  # disk-model matrices
    w = np.exp(1j * phi)
    num = Gd[:, None, 0, 0] * w[None, :] + Gd[:, None, 0, 1]
    den = Gd[:, None, 1, 0] * w[None, :] + Gd[:, None, 1, 1]
    return np.mod(np.angle(num / den), 2 * math.pi)


def _dedupe(a: np.ndarray, b: np.ndarray, tol: float = 1e-10):
    key = np.round(np.c_[a, b] / tol).astype(np.int64)
    _, idx = np.unique(key, axis=0, return_index=True)
    idx.sort()
    return a[idx], b[idx]


def _crossing_pairs(a1, b1, a2, b2, tol: float = 1e-9) -> np.ndarray:
    """Boolean matrix: chord i of the first family crosses chord j of the
    second.  Chords sharing an endpoint up to ``tol`` never count."""
    lo1, hi1 = np.minimum(a1, b1)[:, None], np.maximum(a1, b1)[:, None]
    x, y = a2[None, :], b2[None, :]
    inx = (x > lo1) & (x < hi1)
    iny = (y > lo1) & (y < hi1)
    near = ((np.abs(x - lo1) < tol) | (np.abs(x - hi1) < tol)
            | (np.abs(y - lo1) < tol) | (np.abs(y - hi1) < tol))
    return (inx ^ iny) & ~near


@dataclass(frozen=True, eq=False)
class LaminationApprox:
    """Finite set of leaves meeting a neighbourhood of the base octagon.

    ``back`` and ``fwd`` are disk angles of the endpoints, oriented along
    the flat curve.
    """

    side: str
    back: np.ndarray
    fwd: np.ndarray
    depth: int
    ball_radius: float
    reach: float
    window: int

    def __len__(self) -> int:
        return len(self.fwd)

    @cached_property
    def leaves(self) -> list[Geodesic]:
        s, e = _real_from_angle(self.back), _real_from_angle(self.fwd)
        return [Geodesic(float(x), float(y)) for x, y in zip(s, e)]

    @cached_property
    def leaf_inv(self) -> np.ndarray:
        """Inverse frames of both orientations of every leaf, (2m, 4)."""
        rows = []
        for g in self.leaves:
            for h in (g, g.reversed()):
                F = hyp2.geodesic_frame(h, None).inv()
                rows.append((F.a, F.b, F.c, F.d))
        return np.array(rows, dtype=float).reshape(-1, 4)

    def swapped_side(self) -> "LaminationApprox":
        return LaminationApprox(MINUS if self.side == PLUS else PLUS, self.back, self.fwd,
                                self.depth, self.ball_radius, self.reach, self.window)


def lamination_at_depth(side: str, depth: int, ball_radius: float = 7.0, reach: float | None = None,
                        window: int = WINDOW, curve=FILLING_CURVE, check: bool = True) -> LaminationApprox:
    if side not in (PLUS, MINUS):
        raise ValueError(f"side must be {PLUS!r} or {MINUS!r}")
    if not 0 <= depth <= MAX_DEPTH:
        raise ValueError(f"depth must lie in [0, {MAX_DEPTH}]")
    if reach is None:
        reach = circumradius() + CAP
    _, _, _, mats, inv, _ = _tables()
    n = depth if side == PLUS else -depth
    codes, cyclic = curve_word(n, curve)
    W = window
    rows = distinct_windows(codes, W, cyclic).astype(np.int64)
    f_ang = _word_endpoints(mats, rows[:, W:])
    b_ang = _word_endpoints(mats, inv[rows[:, W - 1::-1]])
    b_ang, f_ang = _dedupe(b_ang, f_ang)
    tiles = ball_tiles(float(ball_radius))
    B = _mobius_angles(tiles, b_ang).ravel()
    Fw = _mobius_angles(tiles, f_ang).ravel()
    keep = _centre_distance(B, Fw) <= reach
    B, Fw = _dedupe(B[keep], Fw[keep])
    lam = LaminationApprox(side, B, Fw, depth, float(ball_radius), float(reach), W)
    if check:
        bad = sum(int(_crossing_pairs(B[i:i + 1024], Fw[i:i + 1024], B, Fw).sum())
                  for i in range(0, len(B), 1024))
        if bad:
            raise LaminationError(f"{bad // 2} crossing pairs within the {side} side")
    return lam


def approximate_laminations(depth: int, ball_radius: float = 7.0, reach: float | None = None,
                            window: int = WINDOW, curve=FILLING_CURVE):
    """``(plus, minus)`` approximations from ``f^depth(c)`` and ``f^-depth(c)``."""
    return (lamination_at_depth(PLUS, depth, ball_radius, reach, window, curve),
            lamination_at_depth(MINUS, depth, ball_radius, reach, window, curve))


def leaf_hausdorff(A: LaminationApprox, B: LaminationApprox) -> float:
    """Hausdorff distance between two leaf sets, leaves compared by the
    larger of their endpoint angle gaps (orientation ignored)."""

    def gap(x, y):
        d = np.abs(x[:, None] - y[None, :])
        return np.minimum(d, 2 * math.pi - d)

    def one_way(P, Q):
        same = np.maximum(gap(P.back, Q.back), gap(P.fwd, Q.fwd))
        flip = np.maximum(gap(P.back, Q.fwd), gap(P.fwd, Q.back))
        return float(np.minimum(same, flip).min(axis=1).max())

    return max(one_way(A, B), one_way(B, A))


def cross_side_separation(plus: LaminationApprox, minus: LaminationApprox, candidates: int = 8) -> float:
    """Smallest unit-tangent-bundle distance between lifts of crossing
    leaves, evaluated at the intersection frames of the sharpest crossings."""
    cr = _crossing_pairs(plus.back, plus.fwd, minus.back, minus.fwd)
    ii, jj = np.nonzero(cr)
    if len(ii) == 0:
        return math.inf
    angles = []
    lp, lm = plus.leaves, minus.leaves
    for i, j in zip(ii, jj):
        pd = hyp2.projection_data(lp[i], lm[j])
        angles.append(pd.theta)
    order = np.argsort(angles)[:candidates]
    best = math.inf
    for o in order:
        i, j = ii[o], jj[o]
        pd = hyp2.projection_data(lp[i], lm[j])
        v = hyp2.geodesic_frame(lp[i]) @ hyp2.a_t(pd.center)
        d = min(hyp2.tangent_to_geodesic_distance(v, lm[j]),
                hyp2.tangent_to_geodesic_distance(v, lm[j].reversed()))
        best = min(best, d)
    return best


# --- radius and height ------------------------------------------------------


def _rows(frames) -> np.ndarray:
    if isinstance(frames, Frame):
        frames = [frames]
    if isinstance(frames, np.ndarray):
        return frames.reshape(-1, 4).astype(float)
    return np.array([(f.a, f.b, f.c, f.d) for f in frames], dtype=float).reshape(-1, 4)


def lamination_distance(frames, lam: LaminationApprox, reduce: bool = True) -> np.ndarray:
    """Distance from each frame to the lifted leaves (capped at ``CAP``).
    Frames are first moved into the base octagon unless ``reduce`` is off."""
    if reduce:
        G = _tables()[2]
        if isinstance(frames, Frame):
            frames = [frames]
        if isinstance(frames, np.ndarray):
            frames = [Frame(*r) for r in frames.reshape(-1, 4)]
        frames = [sf.reduce_frame(f, G)[0] for f in frames]
    d, _ = _kernels.leaf_distances(_rows(frames), lam.leaf_inv, CAP)
    return d


def rho_from_distance(d) -> np.ndarray:
    d = np.asarray(d, dtype=float)
    with np.errstate(divide="ignore"):
        return np.maximum(np.log(1.0 / d), 1.0)


def radius_function(g: Geodesic, lam: LaminationApprox, t) -> np.ndarray:
    """rho along ``g``, unit speed, t = 0 at the point closest to the
    octagon centre."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    v0 = sf.start_frame(g)
    frames = [hyp2.geodesic_flow(v0, float(s)) for s in t]
    return rho_from_distance(lamination_distance(frames, lam))


@dataclass(frozen=True)
class HeightConfig:
    theta: float = 0.01
    k: float = 3.0 + 2.0 * math.sqrt(2.0)
    constants: dict = field(default_factory=dict, hash=False, compare=False)

    def __post_init__(self):
        if not self.theta > 0:
            raise ValueError("theta must be positive")
        if not self.k > 1:
            raise ValueError("k must exceed 1")
        tmin = theta_from_constants(self.constants) if self.constants else None
        if tmin is not None and self.theta > tmin:
            raise ValueError(f"theta={self.theta} exceeds the constant recipe bound {tmin:.3g}")

    @property
    def log_k(self) -> float:
        return math.log(self.k)

    @property
    def offset(self) -> float:
        return math.log(1.0 / self.theta)


CONSTANT_KEYS = ("theta_min", "T0", "L", "rho", "D", "Q", "c")


def theta_from_constants(consts: dict) -> float:
    """theta_min^6 exp(-6 (T0 + L + 3 rho + D + Q c))."""
    missing = [k for k in CONSTANT_KEYS if k not in consts]
    if missing:
        raise ValueError(f"missing constants {missing}")
    c = consts
    return c["theta_min"] ** 6 * math.exp(-6 * (c["T0"] + c["L"] + 3 * c["rho"] + c["D"] + c["Q"] * c["c"]))


def height_from_rho(rho_plus, rho_minus, cfg: HeightConfig) -> np.ndarray:
    off = cfg.offset
    hp = np.log(np.maximum(np.asarray(rho_plus, dtype=float) - off, 1.0)) / cfg.log_k
    hm = np.log(np.maximum(np.asarray(rho_minus, dtype=float) - off, 1.0)) / cfg.log_k
    return hp - hm


def height(v: Frame, pair, cfg: HeightConfig) -> float:
    plus, minus = pair
    dp = float(lamination_distance(v, plus)[0])
    dm = float(lamination_distance(v, minus)[0])
    if min(dp, dm) < EXCEPTIONAL:
        raise ExceptionalGeodesicError("frame lies on a lifted leaf")
    return float(height_from_rho(rho_from_distance(dp), rho_from_distance(dm), cfg))


# --- sampling along a geodesic -------------------------------------------------


@dataclass
class GeodesicSamples:
    t: np.ndarray
    frames: np.ndarray  # (n, 4) reduced into the octagon
    tile: np.ndarray  # (n,) index into ``words``
    words: list
    shift: np.ndarray  # (n, 2) flat translation of the tile


def _neighbour_centres():
    _, _, G, *_ = _tables()
    return np.array([G.gen(ch).basepoint for ch in G.side_letters])


def sample_geodesic(g: Geodesic, T: float, step: float, t0: float = 0.0) -> GeodesicSamples:
    """Frames along ``g`` every ``step`` on [t0, t0 + T], each reduced into
    the octagon together with the deck word and flat translation."""
    if not step > 0 or not T >= 0:
        raise ValueError("need step > 0 and T >= 0")
    _, _, G, _, _, _ = _tables()
    S = _tables()[0]
    n = int(math.floor(T / step + 1e-9)) + 1
    t = t0 + step * np.arange(n)
    cen = _neighbour_centres()
    v0 = hyp2.geodesic_flow(sf.start_frame(g), t0)
    base, word = sf.reduce_frame(v0, G)
    tb = t0
    shift = _word_shift(word, S)
    words = [word]
    frames = np.empty((n, 4))
    tile = np.empty(n, dtype=np.int64)
    shifts = np.empty((n, 2))
    j = 0
    force = False
    while j < n:
        hi = min(n, j + 512)
        e = np.exp(0.5 * (t[j:hi] - tb))
        a, b, c, d = base.a * e, base.b / e, base.c * e, base.d / e
        z = (a * 1j + b) / (c * 1j + d)
        c0 = 1.0 + np.abs(z - 1j) ** 2 / (2 * z.imag)
        cn = 1.0 + np.abs(z[:, None] - cen[None, :]) ** 2 / (2 * z.imag[:, None] * cen.imag[None, :])
        ok = c0 <= cn.min(axis=1) * (1 + 1e-12)
        if force:
            ok[0] = True
            force = False
        bad = np.nonzero(~ok)[0]
        m = hi if len(bad) == 0 else j + int(bad[0])
        frames[j:m] = np.c_[a[:m - j], b[:m - j], c[:m - j], d[:m - j]]
        tile[j:m] = len(words) - 1
        shifts[j:m] = shift
        if m < hi:
            w = Frame(a[m - j], b[m - j], c[m - j], d[m - j])
            base, extra = sf.reduce_frame(w, G)
            tb = t[m]
            word = sf.free_reduce(word + extra)
            shift = shift + _word_shift(extra, S)
            words.append(word)
            force = True
        j = m
    return GeodesicSamples(t, frames, tile, words, shifts)


def _word_shift(word: str, S) -> np.ndarray:
    out = np.zeros(2)
    for ch in word:
        out += S.letter_holonomy[ch]
    return out


# --- the flat image of the octagon -------------------------------------------------

FLAT_CENTRE = (0.75, 0.75)


@lru_cache(maxsize=None)
def _fan():
    S, _, G, *_ = _tables()
    w = np.array([sf.uhp_to_disk(z) for z in G.vertices])
    K = 2 * w / (1 + np.abs(w) ** 2)
    V = np.array([sd.start for sd in S.sides], dtype=float)
    C = np.array(FLAT_CENTRE)
    phis = np.mod(np.angle(w), 2 * math.pi)
    inv = []
    for j in range(8):
        a, b = K[j], K[(j + 1) % 8]
        M = np.array([[a.real, b.real], [a.imag, b.imag]])
        inv.append(np.linalg.inv(M))
    return phis, np.array(inv), V, C


def flat_position(frames_or_points, shift=None) -> np.ndarray:
    """Developed flat coordinates (square units) of base points in the
    octagon, plus the tile translations ``shift``."""
    phis, inv, V, C = _fan()
    z = np.asarray(frames_or_points)
    if z.ndim == 2 and z.shape[1] == 4:
        a, b, c, d = z.T
        z = (a * 1j + b) / (c * 1j + d)
    z = np.atleast_1d(z).astype(complex)
    w = (z - 1j) / (z + 1j)
    k = 2 * w / (1 + np.abs(w) ** 2)
    ang = np.mod(np.angle(k), 2 * math.pi)
    j = np.mod(np.floor((ang - phis[0]) / (math.pi / 4)).astype(int), 8)
    lam = np.einsum("nij,nj->ni", inv[j], np.c_[k.real, k.imag])
    out = C + lam[:, :1] * (V[j] - C) + lam[:, 1:] * (V[(j + 1) % 8] - C)
    if shift is not None:
        out = out + shift
    return out


# --- profiles and test paths --------------------------------------------------


@dataclass
class HeightProfile:
    t: np.ndarray
    rho_plus: np.ndarray
    rho_minus: np.ndarray
    h: np.ndarray
    dx_cum: np.ndarray
    dy_cum: np.ndarray
    arclen: np.ndarray
    XY: np.ndarray  # developed eigen-coordinates of the flat image
    flat: np.ndarray  # developed square coordinates
    shift: np.ndarray | None = None  # flat translation of the tile at each sample

    def columns(self) -> dict:
        return {name: getattr(self, name) for name in PROFILE_COLUMNS}

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(PROFILE_COLUMNS)
            for row in zip(*(getattr(self, c) for c in PROFILE_COLUMNS)):
                w.writerow([repr(float(x)) for x in row])

    def slopes(self) -> tuple[float, float]:
        """Largest finite-difference slopes of rho (either side) and h."""
        dt = np.diff(self.t)
        r = max(float(np.max(np.abs(np.diff(self.rho_plus)) / dt, initial=0.0)),
                float(np.max(np.abs(np.diff(self.rho_minus)) / dt, initial=0.0)))
        return r, float(np.max(np.abs(np.diff(self.h)) / dt, initial=0.0))


def check_non_exceptional(g: Geodesic, pair, tol: float = 1e-6) -> None:
    ends = np.array(sf.geodesic_disk_angles(g))
    for lam in pair:
        for e in (lam.back, lam.fwd):
            d = np.abs(ends[:, None] - e[None, :])
            d = np.minimum(d, 2 * math.pi - d)
            if d.min() < tol:
                raise ExceptionalGeodesicError("geodesic endpoint coincides with a leaf endpoint")


def height_profile(g: Geodesic, pair, cfg: HeightConfig, T: float, step: float = 0.01,
                   t0: float = 0.0) -> HeightProfile:
    check_non_exceptional(g, pair)
    plus, minus = pair
    smp = sample_geodesic(g, T, step, t0)
    dp, _ = _kernels.leaf_distances(smp.frames, plus.leaf_inv, CAP)
    dm, _ = _kernels.leaf_distances(smp.frames, minus.leaf_inv, CAP)
    if min(dp.min(), dm.min()) < EXCEPTIONAL:
        raise ExceptionalGeodesicError("geodesic runs along a lifted leaf")
    rp, rm = rho_from_distance(dp), rho_from_distance(dm)
    h = height_from_rho(rp, rm, cfg)
    flat = flat_position(smp.frames, smp.shift)
    _, pa, *_ = _tables()
    XY = pa.eigen(flat)
    dX, dY = np.diff(XY[:, 0]), np.diff(XY[:, 1])
    pieces = fm.piece_lengths(dX, dY, h[:-1], h[1:], cfg.log_k)
    zero = np.zeros(1)
    return HeightProfile(smp.t, rp, rm, h,
                         np.concatenate([zero, np.cumsum(np.abs(dX))]),
                         np.concatenate([zero, np.cumsum(np.abs(dY))]),
                         np.concatenate([zero, np.cumsum(pieces)]), XY, flat, smp.shift)


@dataclass
class TestPath:
    path: fm.SolvPath
    profile: HeightProfile

    __test__ = False  # not a pytest class

    @property
    def arclength(self) -> float:
        return float(self.profile.arclen[-1])


def test_path(g: Geodesic, pair, cfg: HeightConfig, T: float, step: float = 0.01) -> TestPath:
    prof = height_profile(g, pair, cfg, T, step)
    verts = tuple((float(x), float(y), float(z)) for (x, y), z in zip(prof.XY, prof.h))
    return TestPath(fm.SolvPath(verts), prof)


test_path.__test__ = False


# --- crossings, corners and straight segments ------------------------------------


@dataclass
class Segments:
    crossings: np.ndarray  # times
    labels: np.ndarray  # +1 plus, -1 minus
    corners: list  # (lo, hi)
    straight: list  # (lo, hi)
    T: float

    @property
    def straight_density(self) -> float:
        return _union_length(self.straight, 0.0, self.T) / self.T if self.T > 0 else 0.0

    def intervals(self) -> list[tuple[float, float, str]]:
        """Elementary pieces between consecutive crossings, labelled corner,
        straight (inside a straight segment) or other."""
        out = []
        cuts = np.concatenate([[0.0], self.crossings, [self.T]])
        corner_set = set(self.corners)
        for lo, hi in zip(cuts[:-1], cuts[1:]):
            if (lo, hi) in corner_set:
                kind = "corner"
            elif any(a <= lo and hi <= b for a, b in self.straight):
                kind = "straight"
            else:
                kind = "other"
            out.append((float(lo), float(hi), kind))
        return out


def _union_length(iv, lo: float, hi: float) -> float:
    tot, cur = 0.0, lo
    for a, b in sorted(iv):
        a, b = max(a, cur), min(b, hi)
        if b > a:
            tot += b - a
            cur = b
    return tot


def _mobius_reals(F: Frame, x: np.ndarray) -> np.ndarray:
    a, b, c, d = F.a, F.b, F.c, F.d
    with np.errstate(divide="ignore", invalid="ignore"):
        y = (a * x + b) / (c * x + d)
    y = np.where(np.isinf(x), a / c if c != 0 else np.inf, y)
    return y


def crossings(g: Geodesic, lam: LaminationApprox, T: float, step: float = 0.05) -> np.ndarray:
    """Sorted times in [0, T] at which ``g`` crosses a leaf of ``lam``."""
    smp = sample_geodesic(g, T, step)
    xs, ys = _real_from_angle(lam.back), _real_from_angle(lam.fwd)
    out = []
    runs = np.nonzero(np.diff(np.r_[-1, smp.tile, -2]))[0]
    for lo, hi in zip(runs[:-1], runs[1:]):
        # the run's frames are base @ a_(t - t[lo]); pull the leaves back by base
        Fi = Frame(*smp.frames[lo]).inv()
        x, y = _mobius_reals(Fi, xs), _mobius_reals(Fi, ys)
        cross = (x * y < 0) & np.isfinite(x) & np.isfinite(y)
        s = 0.5 * (np.log(np.abs(x[cross])) + np.log(np.abs(y[cross])))
        t = smp.t[lo] + s
        keep = (t >= smp.t[lo] - step) & (t <= smp.t[hi - 1] + step)
        out.extend(t[keep].tolist())
    ts = np.array(sorted(x for x in out if 0.0 <= x <= T))
    if len(ts) == 0:
        return ts
    return ts[np.r_[True, np.diff(ts) > 1e-7]]


def classify_segments(g: Geodesic, pair, T: float, step: float = 0.05) -> Segments:
    check_non_exceptional(g, pair)
    plus, minus = pair
    cp, cm = crossings(g, plus, T, step), crossings(g, minus, T, step)
    times = np.concatenate([cp, cm])
    labels = np.concatenate([np.ones(len(cp), dtype=int), -np.ones(len(cm), dtype=int)])
    order = np.argsort(times, kind="stable")
    times, labels = times[order], labels[order]
    corners = [(float(times[i]), float(times[i + 1])) for i in range(len(times) - 1)
               if labels[i] != labels[i + 1]]
    straight = [(a[0], b[1]) for a, b in zip(corners, corners[1:])]
    return Segments(times, labels, corners, straight, float(T))


# --- fiber statistics -------------------------------------------------------


@dataclass
class FiberStats:
    R: np.ndarray
    proportion: np.ndarray
    total: float

    @property
    def deficit(self) -> np.ndarray:
        return 1.0 - self.proportion

    def as_rows(self) -> list[dict]:
        return [{"R": float(r), "proportion": float(p), "deficit": float(1 - p)}
                for r, p in zip(self.R, self.proportion)]


def _heights_and_lengths(path):
    if isinstance(path, TestPath):
        path = path.profile
    if isinstance(path, HeightProfile):
        return path.h, np.diff(path.arclen)
    if isinstance(path, fm.SolvPath):
        v = np.array(path.vertices, dtype=float)
        k = 3.0 + 2.0 * math.sqrt(2.0)
        L = fm.piece_lengths(np.diff(v[:, 0]), np.diff(v[:, 1]), v[:-1, 2], v[1:, 2], math.log(k))
        return v[:, 2], L
    z, L = path
    return np.asarray(z, dtype=float), np.asarray(L, dtype=float)


def _inside_fraction(z0: np.ndarray, z1: np.ndarray, R: float) -> np.ndarray:
    """Fraction of each linear piece from z0 to z1 with |z| <= R."""
    lo, hi = np.minimum(z0, z1), np.maximum(z0, z1)
    span = hi - lo
    overlap = np.clip(np.minimum(hi, R) - np.maximum(lo, -R), 0.0, None)
    with np.errstate(divide="ignore", invalid="ignore"):
        frac = np.where(span > 0, overlap / np.where(span > 0, span, 1.0),
                        (np.abs(lo) <= R).astype(float))
    return frac


def fiber_stats(paths, R_grid, log_k: float | None = None) -> FiberStats:
    """Share of CT arclength with |z| <= R, pooled over ``paths``."""
    if not isinstance(paths, (list, tuple)):
        paths = [paths]
    R_grid = np.asarray(R_grid, dtype=float)
    num = np.zeros(len(R_grid))
    total = 0.0
    for p in paths:
        z, L = _heights_and_lengths(p)
        total += float(L.sum())
        for i, R in enumerate(R_grid):
            num[i] += float(np.dot(_inside_fraction(z[:-1], z[1:], R), L))
    if total <= 0:
        raise ValueError("paths have zero length")
    return FiberStats(R_grid, np.minimum(num / total, 1.0), total)


@dataclass(frozen=True)
class DecayFit:
    slope: float
    intercept: float
    points: int
    window: tuple
    strictly_decreasing: bool


def effective_decay_fit(stats: FiberStats, lo: float = 1e-3, hi: float = 0.3) -> DecayFit:
    """Fit log log(1/deficit) against R where deficit lies in [lo, hi]."""
    d = stats.deficit
    m = (d >= lo) & (d <= hi)
    pos = d[d > 0]
    dec = bool(np.all(np.diff(pos) < 0)) if len(pos) > 1 else False
    if m.sum() < 2:
        return DecayFit(math.nan, math.nan, int(m.sum()), (lo, hi), dec)
    R = stats.R[m]
    y = np.log(np.log(1.0 / d[m]))
    slope, icpt = np.polyfit(R, y, 1)
    return DecayFit(float(slope), float(icpt), int(m.sum()), (lo, hi), dec)


# --- Birman–Series and endpoint neighbourhoods ----------------------------------


def _octagon_samples(n: int, rng) -> np.ndarray:
    """Points uniform for hyperbolic area in the base octagon."""
    _, _, G, *_ = _tables()
    R = circumradius()
    out = []
    while sum(len(o) for o in out) < n:
        m = 2 * n
        # area measure in geodesic polar coordinates: density sinh r
        u = rng.random(m)
        r = np.arccosh(1 + u * (math.cosh(R) - 1))
        ang = 2 * math.pi * rng.random(m)
        rho = np.tanh(0.5 * r)
        w = rho * np.exp(1j * ang)
        z = 1j * (1 + w) / (1 - w)
        cen = _neighbour_centres()
        c0 = 1.0 + np.abs(z - 1j) ** 2 / (2 * z.imag)
        cn = 1.0 + np.abs(z[:, None] - cen[None, :]) ** 2 / (2 * z.imag[:, None] * cen.imag[None, :])
        out.append(z[c0 <= cn.min(axis=1)])
    return np.concatenate(out)[:n]


def _point_leaf_distance(z: np.ndarray, lams) -> np.ndarray:
    """Hyperbolic distance from each point to the nearest leaf, using
    sinh d = ||z - c|^2 - r^2| / (2 r Im z) for the semicircle (c, r)."""
    best = np.full(len(z), np.inf)
    zz = z[:, None]
    for lam in lams:
        for lo in range(0, len(lam), 512):
            x = _real_from_angle(lam.back[lo:lo + 512])[None, :]
            y = _real_from_angle(lam.fwd[lo:lo + 512])[None, :]
            with np.errstate(invalid="ignore", divide="ignore"):
                c, r = 0.5 * (x + y), 0.5 * np.abs(x - y)
                sh = np.abs(np.abs(zz - c) ** 2 - r ** 2) / (2 * r * zz.imag)
                vert = np.where(np.isinf(x), y, x)
                sh = np.where(np.isinf(x) | np.isinf(y), np.abs(zz.real - vert) / zz.imag, sh)
            best = np.minimum(best, np.arcsinh(sh).min(axis=1))
    return best


def birman_series_area(lams, r_grid, samples: int = 200_000, seed: int = 0) -> dict:
    """Monte-Carlo area of the r-neighbourhood of the leaves in the octagon."""
    if isinstance(lams, LaminationApprox):
        lams = [lams]
    rng = np.random.default_rng(seed)
    z = _octagon_samples(samples, rng)
    d = _point_leaf_distance(z, lams)
    r = np.asarray(r_grid, dtype=float)
    total = 4 * math.pi
    frac = np.array([(d <= x).mean() for x in r])
    area = total * frac
    L = np.log(1.0 / r)
    with np.errstate(divide="ignore", invalid="ignore"):
        lower = area / r
        upper = area / (r * L ** 6)
    return {"r": r, "area": area, "area_over_r": lower, "area_over_r_log6": upper,
            "samples": samples}


# --- oracle comparison for test paths -----------------------------------------


@dataclass
class TestPathRun:
    """Oracle distances between sampled points of a test path ``tau`` and of
    its base-fiber copy ``iota``; rows are (source, target, arclength,
    oracle tau, oracle iota)."""

    rows: np.ndarray
    cells: int
    nodes: int

    __test__ = False


def _grid_fraction(v: float, n: int) -> Fraction:
    return Fraction(int(round(v * n)), n)


def _move_avoiding_cone(w, dx: Fraction, dy: Fraction, unit: Fraction) -> None:
    try:
        w.move(dx, dy)
        return
    except fm.ConeHitError:
        pass
    # detour through a nearby point off the segment
    for j in range(1, 4):
        for ox, oy in ((1, 0), (0, 1), (-1, 0), (0, -1)):
            hx, hy = j * ox * unit, j * oy * unit
            start = w.pos
            try:
                w.move(dx / 2 + hx, dy / 2 + hy)
                w.move(dx / 2 - hx, dy / 2 - hy)
                return
            except fm.ConeHitError:
                w.pos = start
    raise fm.ConeHitError("no detour around the cone point")


def _off_cone(p, unit: Fraction):
    # integer points of the developed plane are the cone point
    x, y = p
    return (x + unit, y) if x.denominator == 1 and y.denominator == 1 else (x, y)


FINE_GRID = 4096


def test_path_oracle(tp: TestPath, spacing: float = 0.5, n: int = 10, margin: int = 1,
                     dz: float = 0.2, z_pad: float = 1.0, n_sources: int = 2) -> TestPathRun:
    """Walk the flat image of ``tp`` through the cover and compare its CT
    arclength with oracle distances between points about ``spacing`` apart.
    The walker follows every sample on a fine grid so that it passes cone
    points on the correct side; only the compared points are snapped to the
    oracle's 1/n grid.  Heights are rounded to the layer grid."""
    from .oracle import CoverDomain, CoverPoint, CoverWalker, exact_tiles_for, layers_with

    S = _tables()[0]
    prof = tp.profile
    flat = prof.flat
    if prof.shift is None:
        raise ValueError("profile carries no tile translations")
    step = np.linalg.norm(np.diff(flat, axis=0), axis=1)
    cum = np.concatenate([[0.0], np.cumsum(step)])
    idx = np.unique(np.searchsorted(cum, np.arange(0.0, cum[-1], spacing)))
    fine_u, grid_u = Fraction(1, FINE_GRID), Fraction(1, n)
    fine = [_off_cone((Fraction(round(x * FINE_GRID), FINE_GRID), Fraction(round(y * FINE_GRID), FINE_GRID)),
                      fine_u) for x, y in flat]
    ox, oy = (Fraction(int(round(v))) for v in prof.shift[0])
    lx, ly = fine[0][0] - ox, fine[0][1] - oy
    sq = next((s for s, (px, py) in S.positions.items()
               if px <= lx <= px + 1 and py <= ly <= py + 1), None)
    if sq is None:
        raise ValueError("start of the flat image is outside the base polygon")
    px, py = S.positions[sq]
    tiles = exact_tiles_for(S, int(cum[-1] * 2) + 8)
    w = CoverWalker(S, tiles, CoverPoint((0, sq), lx - px, ly - py))
    marks = set(int(i) for i in idx)
    walked = []
    cur = fine[0]
    for i in range(len(fine)):
        if i:
            _move_avoiding_cone(w, fine[i][0] - cur[0], fine[i][1] - cur[1], fine_u)
            cur = fine[i]
        if i in marks:
            q = _off_cone((_grid_fraction(float(cur[0]), n), _grid_fraction(float(cur[1]), n)), grid_u)
            back = w.pos
            _move_avoiding_cone(w, q[0] - cur[0], q[1] - cur[1], fine_u)
            walked.append(w.pos)
            w.pos = back
    z = np.round(prof.h[idx] / dz) * dz
    zs = layers_with(np.r_[z, 0.0], float(z.min()) - z_pad, float(z.max()) + z_pad, dz)
    dom = CoverDomain(w, _tables()[1], zs, n=n, margin=margin)
    arc = prof.arclen[idx]
    rows = []
    m = len(walked)
    for src in sorted({(m * i) // n_sources for i in range(n_sources)}):
        dt = dom.distances((walked[src], float(z[src])), [(p, float(zz)) for p, zz in zip(walked[src:], z[src:])])
        di = dom.distances((walked[src], 0.0), [(p, 0.0) for p in walked[src:]])
        for j in range(1, m - src):
            rows.append((src, src + j, arc[src + j] - arc[src], dt[j], di[j]))
    return TestPathRun(np.array(rows, dtype=float).reshape(-1, 5), len(dom.cells), dom.graph.size)


test_path_oracle.__test__ = False
def projection_fit(rows: np.ndarray, lo: float = 5.0, hi: float = 30.0) -> tuple[float, float]:
    """(K, c) with oracle(tau) <= K·oracle(iota) + c on the window: K from a
    least-squares fit, c the smallest constant making the bound hold."""
    di, dt = rows[:, 4], rows[:, 3]
    m = (di >= lo) & (di <= hi) & np.isfinite(dt)
    if m.sum() < 3:
        raise ValueError("fewer than three pairs in the distance window")
    K = float(np.polyfit(di[m], dt[m], 1)[0])
    return K, float(np.max(dt[m] - K * di[m]))


# --- diagnostics --------------------------------------------------------------


def hausdorff_series(side: str, depths: Sequence[int], step: int = 2, **kw) -> dict:
    """Hausdorff distance between the depth-n and depth-(n+step) leaf sets."""
    out = {}
    cache: dict = {}

    def lam(n):
        if n not in cache:
            cache[n] = lamination_at_depth(side, n, **kw)
        return cache[n]

    for n in depths:
        out[n] = leaf_hausdorff(lam(n), lam(n + step))
    return out


@dataclass
class CrossingRecord:
    t: float
    angle: float
    rho: float
    h: float
    side: str


def _frame_at(smp: GeodesicSamples, t: float) -> Frame:
    """Reduced frame at time ``t``, flowed from the nearest earlier sample
    (flowing the start frame directly loses precision like e^t)."""
    j = int(np.clip(np.searchsorted(smp.t, t, side="right") - 1, 0, len(smp.t) - 1))
    v = hyp2.geodesic_flow(Frame(*smp.frames[j]), float(t - smp.t[j]))
    return sf.reduce_frame(v, _tables()[2])[0]


def crossing_records(g: Geodesic, pair, cfg: HeightConfig, T: float, step: float = 0.05) -> list[CrossingRecord]:
    """Angle, radius and height at every leaf crossing of ``g`` on [0, T]."""
    plus, minus = pair
    smp = sample_geodesic(g, T, step)
    out = []
    for lam, name in ((plus, PLUS), (minus, MINUS)):
        ts = crossings(g, lam, T, step)
        for t in ts:
            w = _frame_at(smp, float(t))
            # the crossing leaf is the one the base point lies on
            z = w.basepoint
            j = int(np.argmin(_point_leaf_all(z, lam)))
            leaf = lam.leaves[j]
            loc = w.geodesic
            try:
                ang = hyp2.projection_data(loc, leaf).theta
            except hyp2.GeometryError:
                continue
            d = float(lamination_distance(w, lam, reduce=False)[0])
            dp = float(lamination_distance(w, plus, reduce=False)[0])
            dm = float(lamination_distance(w, minus, reduce=False)[0])
            h = float(height_from_rho(rho_from_distance(dp), rho_from_distance(dm), cfg))
            out.append(CrossingRecord(float(t), float(ang), float(rho_from_distance(d)), h, name))
    return sorted(out, key=lambda r: r.t)


def _point_leaf_all(z: complex, lam: LaminationApprox) -> np.ndarray:
    x, y = _real_from_angle(lam.back), _real_from_angle(lam.fwd)
    with np.errstate(invalid="ignore", divide="ignore"):
        c, r = 0.5 * (x + y), 0.5 * np.abs(x - y)
        sh = np.abs(np.abs(z - c) ** 2 - r ** 2) / (2 * r * z.imag)
        vert = np.where(np.isinf(x), y, x)
        sh = np.where(np.isinf(x) | np.isinf(y), np.abs(z.real - vert) / z.imag, sh)
    return np.arcsinh(sh)


def radius_crossing_constant(records: Sequence[CrossingRecord]) -> tuple[float, float]:
    """Range of rho - log(1/angle) over crossings; the radius estimate asks
    for it to lie in [0, K]."""
    v = np.array([r.rho - math.log(1.0 / r.angle) for r in records if r.angle < 1 / math.e])
    if len(v) == 0:
        return math.nan, math.nan
    return float(v.min()), float(v.max())


def height_crossing_constant(records: Sequence[CrossingRecord], cfg: HeightConfig) -> float:
    """max |h - sign·log_k log(1/angle)| over crossings at angle <= theta."""
    dev = []
    for r in records:
        if r.angle > cfg.theta:
            continue
        target = math.log(math.log(1.0 / r.angle)) / cfg.log_k
        dev.append(abs(r.h - (target if r.side == PLUS else -target)))
    return float(max(dev)) if dev else 0.0


def corner_heights(g: Geodesic, pair, cfg: HeightConfig, T: float, step: float = 0.05) -> np.ndarray:
    """Heights at the two ends of each corner segment as rows
    (h at the minus-side end, h at the plus-side end)."""
    seg = classify_segments(g, pair, T, step)
    smp = sample_geodesic(g, T, step)
    rows = []
    for (a, b), la in zip(seg.corners, [seg.labels[np.searchsorted(seg.crossings, c[0])] for c in seg.corners]):
        ha = height(_frame_at(smp, a), pair, cfg)
        hb = height(_frame_at(smp, b), pair, cfg)
        rows.append((ha, hb) if la < 0 else (hb, ha))
    return np.array(rows, dtype=float).reshape(-1, 2)


def endpoint_neighborhood_measure(pairs, lam: LaminationApprox, r_grid) -> dict:
    """Share of boundary pairs (xi_plus, xi_minus), as disk angles, within
    r of some leaf endpoint pair in the product angular metric, with a
    power-law fit of share against r."""
    pairs = np.asarray(pairs, dtype=float).reshape(-1, 2)
    if len(pairs) < 1000:
        raise ValueError("need at least 1000 boundary samples")

    def gap(x, y):
        d = np.abs(x[:, None] - y[None, :]) % (2 * math.pi)
        return np.minimum(d, 2 * math.pi - d)

    best = np.full(len(pairs), np.inf)
    for lo in range(0, len(lam), 512):
        b, f = lam.back[lo:lo + 512], lam.fwd[lo:lo + 512]
        same = np.maximum(gap(pairs[:, 0], f), gap(pairs[:, 1], b))
        flip = np.maximum(gap(pairs[:, 0], b), gap(pairs[:, 1], f))
        best = np.minimum(best, np.minimum(same, flip).min(axis=1))
    r = np.asarray(r_grid, dtype=float)
    share = np.array([(best <= x).mean() for x in r])
    ok = share > 0
    alpha, r2 = math.nan, math.nan
    if ok.sum() >= 2:
        X, Y = np.log(r[ok]), np.log(share[ok])
        alpha, icpt = np.polyfit(X, Y, 1)
        res = Y - (alpha * X + icpt)
        tot = Y - Y.mean()
        r2 = 1.0 - float(res @ res) / float(tot @ tot) if float(tot @ tot) > 0 else 1.0
    return {"r": r, "share": share, "alpha": float(alpha), "r2": float(r2), "samples": len(pairs)}
