"""Upper half-plane geometry and the unit tangent bundle seen as PSL(2,R).

Points are complex numbers (or HPoint), boundary points are reals or
``math.inf``.  A Frame is a determinant one matrix up to sign; it stands for
the unit tangent vector at ``A·i`` obtained by pushing the upward vector at
``i`` forward by ``A``.  The geodesic flow is right multiplication by
``a_t = diag(e^{t/2}, e^{-t/2})``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

INF = math.inf
T0 = 0.5 * math.log(8.0)
MIN_THETA = 1e-12


class GeometryError(ValueError):
    pass


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class HPoint:
    x: float
    y: float

    def __post_init__(self):
        if not self.y > 0:
            raise GeometryError(f"point below the boundary: y={self.y}")

    @property
    def z(self) -> complex:
        return complex(self.x, self.y)

    @classmethod
    def of(cls, z) -> "HPoint":
        if isinstance(z, HPoint):
            return z
        z = complex(z)
        return cls(z.real, z.imag)


def _cz(p) -> complex:
    if isinstance(p, HPoint):
        return complex(p.x, p.y)
    return complex(p)


@dataclass(frozen=True)
class Geodesic:
    """Oriented geodesic from ``start`` to ``end`` (boundary points)."""

    start: float
    end: float

    def __post_init__(self):
        if self.start == self.end:
            raise GeometryError("geodesic endpoints coincide")

    @property
    def endpoints(self) -> tuple[float, float]:
        return (self.start, self.end)

    def reversed(self) -> "Geodesic":
        return Geodesic(self.end, self.start)


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float

    def __post_init__(self):
        if self.lo > self.hi:
            raise GeometryError("interval with lo > hi")

    @property
    def length(self) -> float:
        return self.hi - self.lo

    def overlap(self, other: "Interval") -> float:
        return max(0.0, min(self.hi, other.hi) - max(self.lo, other.lo))


@dataclass(frozen=True)
class Frame:
    a: float
    b: float
    c: float
    d: float

    @classmethod
    def from_matrix(cls, m) -> "Frame":
        m = np.asarray(m, dtype=float)
        return cls(float(m[0, 0]), float(m[0, 1]), float(m[1, 0]), float(m[1, 1])).normalized()

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.a, self.b], [self.c, self.d]])

    @property
    def det(self) -> float:
        return self.a * self.d - self.b * self.c

    def normalized(self) -> "Frame":
        det = self.det
        if det <= 0:
            raise GeometryError(f"frame with non-positive determinant {det}")
        s = 1.0 / math.sqrt(det)
        a, b, c, d = self.a * s, self.b * s, self.c * s, self.d * s
        # pick the representative with nonnegative trace (then a > 0 breaks ties)
        if a + d < 0 or (a + d == 0 and (a < 0 or (a == 0 and b < 0))):
            a, b, c, d = -a, -b, -c, -d
        return Frame(a, b, c, d)

    def __matmul__(self, other: "Frame") -> "Frame":
        return Frame(
            self.a * other.a + self.b * other.c,
            self.a * other.b + self.b * other.d,
            self.c * other.a + self.d * other.c,
            self.c * other.b + self.d * other.d,
        )

    def inv(self) -> "Frame":
        return Frame(self.d, -self.b, -self.c, self.a)

    def act(self, z):
        return mobius(self, z)

    @property
    def basepoint(self) -> complex:
        return mobius(self, 1j)

    @property
    def geodesic(self) -> Geodesic:
        """Oriented geodesic tangent to the frame."""
        return Geodesic(mobius(self, 0.0), mobius(self, INF))

    def trace(self) -> float:
        return self.a + self.d

    def same(self, other: "Frame", tol: float = 1e-9) -> bool:
        p = (self.a, self.b, self.c, self.d)
        q = (other.a, other.b, other.c, other.d)
        return max(abs(x - y) for x, y in zip(p, q)) <= tol or max(
            abs(x + y) for x, y in zip(p, q)
        ) <= tol


IDENTITY = Frame(1.0, 0.0, 0.0, 1.0)


def mobius(g: Frame, z):
    """Apply ``g`` to a point of the closed upper half-plane."""
    a, b, c, d = g.a, g.b, g.c, g.d
    if isinstance(z, HPoint):
        z = z.z
    if isinstance(z, complex):
        return (a * z + b) / (c * z + d)
    x = float(z)
    if math.isinf(x):
        return a / c if c != 0 else INF
    den = c * x + d
    if den == 0:
        return INF
    return (a * x + b) / den


def a_t(t: float) -> Frame:
    e = math.exp(0.5 * t)
    return Frame(e, 0.0, 0.0, 1.0 / e)


def rotation(phi: float) -> Frame:
    """Rotation about i turning tangent vectors by ``phi`` counter-clockwise."""
    c, s = math.cos(0.5 * phi), math.sin(0.5 * phi)
    return Frame(c, s, -s, c)


def transvection(u: float) -> Frame:
    """Translation by ``u`` along the geodesic through i perpendicular to the
    vertical axis (the unit circle), i.e. ``exp(u A2)``."""
    ch, sh = math.cosh(0.5 * u), math.sinh(0.5 * u)
    return Frame(ch, sh, sh, ch)


def dist_h2(p, q) -> float:
    p, q = _cz(p), _cz(q)
    return 2.0 * math.asinh(abs(p - q) / (2.0 * math.sqrt(p.imag * q.imag)))


def lambert_distance(t: float, theta: float) -> float:
    """Distance from the point at signed distance ``t`` from the foot of the
    common perpendicular to the other geodesic (perpendicular length theta)."""
    if not theta > 0:
        raise GeometryError("theta must be positive")
    return math.asinh(math.cosh(t) * math.sinh(theta))


def intersect_distance(t: float, theta: float) -> float:
    """Distance from the point at distance ``t`` from the intersection point
    to the other geodesic, which it meets at angle theta."""
    if not (0 < theta <= math.pi / 2 + 1e-15):
        raise GeometryError("theta must lie in (0, pi/2]")
    return math.asinh(math.sin(theta) * math.sinh(abs(t)))


# --- geodesic frames -------------------------------------------------------


def geodesic_frame(g: Geodesic, anchor=1j) -> Frame:
    """Frame tangent to ``g`` whose basepoint is the projection of ``anchor``."""
    al, be = g.start, g.end
    if math.isinf(be):
        G = Frame(1.0, al, 0.0, 1.0)
    elif math.isinf(al):
        G = Frame(be, -1.0, 1.0, 0.0)
    elif be > al:
        s = 1.0 / math.sqrt(be - al)
        G = Frame(be * s, al * s, s, s)
    else:
        s = 1.0 / math.sqrt(al - be)
        G = Frame(be * s, -al * s, s, -s)
    if anchor is None:
        return G
    w = mobius(G.inv(), _cz(anchor))
    return G @ a_t(math.log(abs(w)))


def point_on(g: Geodesic, t: float, anchor=1j) -> complex:
    return (geodesic_frame(g, anchor) @ a_t(t)).basepoint


def nearest_point_projection(g: Geodesic, p) -> complex:
    G = geodesic_frame(g, None)
    w = mobius(G.inv(), _cz(p))
    return mobius(G, complex(0.0, abs(w)))


def _param_of_boundary(x: float) -> float:
    # parameter along the vertical axis of the projection of boundary point x
    if x == 0.0:
        return -INF
    if math.isinf(x):
        return INF
    return math.log(abs(x))


@dataclass(frozen=True)
class ProjectionData:
    center: float
    half_width: float
    kind: str  # "cross" or "disjoint"
    theta: float  # angle of intersection, or distance between the geodesics

    @property
    def interval(self) -> Interval:
        return Interval(self.center - self.half_width, self.center + self.half_width)


def projection_data(base: Geodesic, other: Geodesic, anchor=1j) -> ProjectionData:
    """Nearest point projection of ``other`` to ``base`` in the unit-speed
    parameter of ``base`` anchored at the projection of ``anchor``."""
    G = geodesic_frame(base, anchor)
    Gi = G.inv()
    x, y = mobius(Gi, other.start), mobius(Gi, other.end)
    if x == 0.0 or y == 0.0 or math.isinf(x) or math.isinf(y):
        raise GeometryError("geodesics share an endpoint")
    u, v = _param_of_boundary(x), _param_of_boundary(y)
    center = 0.5 * (u + v)
    T = 0.5 * abs(u - v)
    if x * y < 0:
        theta = math.acos(min(1.0, math.tanh(T)))
        kind = "cross"
    else:
        theta = math.asinh(1.0 / math.sinh(T)) if T > 0 else INF
        kind = "disjoint"
    return ProjectionData(center, T, kind, theta)


def projection_interval(base: Geodesic, other: Geodesic) -> Interval:
    """Projection of ``other`` to ``base`` as ``[-T, T]`` around the point of
    closest approach (or intersection)."""
    pd = projection_data(base, other)
    if pd.theta < MIN_THETA:
        raise GeometryError(f"near-parallel geodesics (theta={pd.theta:.3g})")
    return Interval(-pd.half_width, pd.half_width)


def projection_half_width(theta: float, kind: str = "cross") -> float:
    """Closed form for the half width: cos θ = tanh T, or sinh T sinh θ = 1."""
    if theta < MIN_THETA:
        raise GeometryError("near-parallel geodesics")
    if kind == "cross":
        return math.atanh(math.cos(theta))
    return math.asinh(1.0 / math.sinh(theta))


def geodesic_distance_point(g: Geodesic, p) -> float:
    G = geodesic_frame(g, None)
    w = mobius(G.inv(), _cz(p))
    return math.asinh(abs(w.real) / w.imag)


def geodesics_cross(g: Geodesic, h: Geodesic) -> bool:
    G = geodesic_frame(g, None)
    Gi = G.inv()
    x, y = mobius(Gi, h.start), mobius(Gi, h.end)
    if math.isinf(x) or math.isinf(y) or x == 0 or y == 0:
        return False
    return x * y < 0


# --- the left-invariant metric -------------------------------------------


def _lognorm(a: float, b: float, c: float, d: float) -> float:
    tr = a + d
    if tr < 0:
        a, b, c, d, tr = -a, -b, -c, -d, -tr
    h = 0.5 * tr
    m00 = a - h
    nrm = math.sqrt(4.0 * m00 * m00 + 2.0 * b * b + 2.0 * c * c)
    e = h - 1.0
    if abs(e) < 1e-8:
        coef = 1.0 - e / 3.0
    elif h > 1.0:
        coef = math.acosh(h) / math.sqrt(h * h - 1.0)
    else:
        coef = math.acos(h) / math.sqrt(1.0 - h * h)
    return coef * nrm


def _chart(a: float, b: float, c: float, d: float) -> float:
    # transvection to the basepoint followed by a rotation
    den = c * c + d * d
    wx = (a * c + b * d) / den
    wy = 1.0 / den
    r = 2.0 * math.asinh(math.hypot(wx, wy - 1.0) / (2.0 * math.sqrt(wy)))
    p00 = a * a + b * b + 1.0
    p01 = a * c + b * d
    p11 = c * c + d * d + 1.0
    s = math.sqrt(p00 + p11)
    # P^{-1} g with P = (g g^T + I)/s, det P = 1
    r00 = (p11 * a - p01 * c) / s
    r10 = (-p01 * a + p00 * c) / s
    alpha = math.atan2(r10, r00)
    psi = math.fmod(2.0 * alpha, 2.0 * math.pi)
    if psi > math.pi:
        psi -= 2.0 * math.pi
    elif psi < -math.pi:
        psi += 2.0 * math.pi
    return r + abs(psi)


def frame_norm(g: Frame) -> float:
    """Distance from the identity to ``g``."""
    return min(_lognorm(g.a, g.b, g.c, g.d), _chart(g.a, g.b, g.c, g.d))


def frame_distance(x: Frame, y: Frame) -> float:
    return frame_norm(x.inv() @ y)


def lie_coordinates(g: Frame) -> tuple[float, float, float]:
    """Coordinates of log(g) in the orthonormal basis A1, A2, A3."""
    a, b, c, d = g.a, g.b, g.c, g.d
    if a + d < 0:
        a, b, c, d = -a, -b, -c, -d
    h = 0.5 * (a + d)
    e = h - 1.0
    if abs(e) < 1e-8:
        coef = 1.0 - e / 3.0
    elif h > 1.0:
        coef = math.acosh(h) / math.sqrt(h * h - 1.0)
    else:
        coef = math.acos(h) / math.sqrt(1.0 - h * h)
    m00 = (a - h) * coef
    m01, m10 = b * coef, c * coef
    return (2.0 * m00, m01 + m10, m10 - m01)


def exp_lie(x1: float, x2: float, x3: float) -> Frame:
    """exp(x1 A1 + x2 A2 + x3 A3)."""
    m = np.array([[0.5 * x1, 0.5 * (x2 - x3)], [0.5 * (x2 + x3), -0.5 * x1]])
    q = 0.25 * (x1 * x1 + x2 * x2 - x3 * x3)  # -det, so m^2 = q I
    if q > 1e-300:
        r = math.sqrt(q)
        e = math.cosh(r) * np.eye(2) + (math.sinh(r) / r) * m
    elif q < -1e-300:
        r = math.sqrt(-q)
        e = math.cos(r) * np.eye(2) + (math.sin(r) / r) * m
    else:
        e = np.eye(2) + m
    return Frame.from_matrix(e)


def geodesic_flow(f: Frame, t: float) -> Frame:
    e = math.exp(0.5 * t)
    return Frame(f.a * e, f.b / e, f.c * e, f.d / e)


# --- distance from a frame to the lift of a geodesic -------------------------

GOLDEN = 0.5 * (math.sqrt(5.0) - 1.0)


def _axis_objective(h_inv: Frame, s: float) -> float:
    e = math.exp(0.5 * s)
    a, b, c, d = h_inv.a * e, h_inv.b / e, h_inv.c * e, h_inv.d / e
    return min(_lognorm(a, b, c, d), _chart(a, b, c, d))


def axis_distance(h: Frame, tol: float = 1e-10, scan: int = 16, max_iter: int = 200) -> float:
    """min over s of the distance from ``h`` to ``a_s`` (the lift of the
    vertical axis oriented upward)."""
    return axis_distance_arg(h, tol, scan, max_iter)[0]


def axis_distance_arg(h: Frame, tol: float = 1e-10, scan: int = 16, max_iter: int = 200):
    hi_ = h.inv()
    w = h.basepoint
    s0 = math.log(abs(w))
    f0 = _axis_objective(hi_, s0)
    # the distance bounds |s - s0| from below, so the minimum lies in this bracket
    lo, hi = s0 - f0, s0 + f0
    if hi - lo < tol:
        return f0, s0
    step = (hi - lo) / scan
    best_j, best_v = 0, math.inf
    for j in range(scan + 1):
        v = _axis_objective(hi_, lo + j * step)
        if v < best_v:
            best_j, best_v = j, v
    left = lo + max(best_j - 1, 0) * step
    right = lo + min(best_j + 1, scan) * step
    x1 = right - GOLDEN * (right - left)
    x2 = left + GOLDEN * (right - left)
    f1, f2 = _axis_objective(hi_, x1), _axis_objective(hi_, x2)
    it = 0
    while right - left > tol:
        it += 1
        if it > max_iter:
            raise ConvergenceError("golden-section search did not converge")
        if f1 <= f2:
            right, x2, f2 = x2, x1, f1
            x1 = right - GOLDEN * (right - left)
            f1 = _axis_objective(hi_, x1)
        else:
            left, x1, f1 = x1, x2, f2
            x2 = left + GOLDEN * (right - left)
            f2 = _axis_objective(hi_, x2)
    if f1 <= f2:
        xm, fm = x1, f1
    else:
        xm, fm = x2, f2
    if best_v < fm:
        return best_v, lo + best_j * step
    return fm, xm


def tangent_to_geodesic_distance(v: Frame, g: Geodesic, tol: float = 1e-10) -> float:
    G = geodesic_frame(g, None)
    return axis_distance(G.inv() @ v, tol)


def fellow_travel_ratio(theta: float, t: float, kind: str = "disjoint") -> float:
    """d(γ1¹(t), γ2¹)/(θ e^{|t|}) for two geodesics at closest approach θ,
    with γ1(0) the point of closest approach."""
    if theta < MIN_THETA:
        raise GeometryError("near-parallel geodesics")
    if kind == "disjoint":
        w = transvection(theta)
    else:
        w = rotation(theta)
    g = w.geodesic  # the second geodesic; the first is the vertical axis
    v = a_t(t)
    d = tangent_to_geodesic_distance(v, g)
    return d / (theta * math.exp(abs(t)))


# --- empirical hyperbolicity constants --------------------------------------


@dataclass(frozen=True)
class Constants:
    """Empirical constants of the plane, estimated by sampling."""

    thin_triangle_delta: float
    gromov_delta: float
    samples: int


def _sample_point(rng, radius: float) -> complex:
    r = radius * math.sqrt(rng.random())
    ang = 2 * math.pi * rng.random()
    # disk point at hyperbolic distance r, mapped to the upper half-plane
    rho = math.tanh(0.5 * r)
    w = rho * complex(math.cos(ang), math.sin(ang))
    return 1j * (1 + w) / (1 - w)


def _segment_points(p: complex, q: complex, n: int) -> list[complex]:
    if p == q:
        return [p]
    g = Geodesic(*_geodesic_through(p, q))
    G = geodesic_frame(g, None)
    Gi = G.inv()
    sp, sq = math.log(abs(mobius(Gi, p))), math.log(abs(mobius(Gi, q)))
    return [mobius(G, 1j * math.exp(sp + (sq - sp) * j / (n - 1))) for j in range(n)]


def _geodesic_through(p: complex, q: complex) -> tuple[float, float]:
    if abs(p.real - q.real) < 1e-14 * (1 + abs(p.real)):
        return (p.real, INF) if q.imag > p.imag else (INF, p.real)
    # centre on the real axis equidistant from p and q
    c = (abs(q) ** 2 - abs(p) ** 2) / (2 * (q.real - p.real))
    r = abs(p - c)
    if q.real > p.real:
        return (c - r, c + r)
    return (c + r, c - r)


def estimate_constants(samples: int = 200, radius: float = 6.0, seed: int = 0) -> Constants:
    rng = np.random.default_rng(seed)
    thin = 0.0
    four = 0.0
    for _ in range(samples):
        a, b, c = (_sample_point(rng, radius) for _ in range(3))
        side = _segment_points(a, b, 40)
        others = _segment_points(b, c, 80) + _segment_points(c, a, 80)
        for p in side:
            thin = max(thin, min(dist_h2(p, q) for q in others))
        w = _sample_point(rng, radius)

        def gp(x, y):
            return 0.5 * (dist_h2(w, x) + dist_h2(w, y) - dist_h2(x, y))

        ab, bc, ac = gp(a, b), gp(b, c), gp(a, c)
        four = max(four, min(ab, bc) - ac, min(ab, ac) - bc, min(bc, ac) - ab)
    return Constants(thin, max(four, 0.0), samples)


def random_frames(n: int, rng, radius: float = 3.0) -> list[Frame]:
    out = []
    for _ in range(n):
        z = _sample_point(rng, radius)
        out.append(Frame(math.sqrt(z.imag), z.real / math.sqrt(z.imag), 0.0, 1 / math.sqrt(z.imag)) @ rotation(2 * math.pi * rng.random()))
    return out


def frames_from_points(points: Iterable[complex]) -> list[Frame]:
    return [Frame(math.sqrt(z.imag), z.real / math.sqrt(z.imag), 0.0, 1.0 / math.sqrt(z.imag)) for z in points]
