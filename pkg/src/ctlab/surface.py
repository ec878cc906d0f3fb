"""A closed genus two surface from the regular octagon with angles pi/4.

The octagon is centred at ``i`` (the centre of the disk model).  Side ``j``
runs from vertex ``j`` to vertex ``j+1`` counter-clockwise, and the generator
attached to side ``j`` maps its partner side onto side ``j``, so the tile
adjacent to the octagon across side ``j`` is ``g_j·P``.  Letters are
lowercase for generators and uppercase for their inverses.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from . import hyp2
from .hyp2 import Frame, Geodesic, IDENTITY, mobius

GroupWord = str

# side j -> (letter, partner side)
_PATTERNS = {
    "commutator": "abABcdCD",
    "origami": "abcBdADC",
}


class ReductionError(RuntimeError):
    pass


@dataclass(frozen=True)
class BoundaryPoint:
    angle: float

    def __post_init__(self):
        if not (0.0 <= self.angle < 2 * math.pi):
            object.__setattr__(self, "angle", self.angle % (2 * math.pi))

    @property
    def real(self) -> float:
        return disk_angle_to_real(self.angle)


def disk_to_uhp(w: complex) -> complex:
    return 1j * (1 + w) / (1 - w)


def uhp_to_disk(z: complex) -> complex:
    return (z - 1j) / (z + 1j)


def disk_angle_to_real(phi: float) -> float:
    # boundary point e^{i phi} of the disk, as a point of R ∪ {∞}
    # half-angle form -cot(phi/2) stays accurate for tiny phi
    s = math.sin(0.5 * phi)
    if s == 0.0:
        return hyp2.INF
    return -math.cos(0.5 * phi) / s


def real_to_disk_angle(x: float) -> float:
    if math.isinf(x):
        return 0.0
    w = (x - 1j) / (x + 1j)
    return math.atan2(w.imag, w.real) % (2 * math.pi)


def invert_word(w: str) -> str:
    return "".join(ch.swapcase() for ch in reversed(w))


def free_reduce(w: str) -> str:
    out: list[str] = []
    for ch in w:
        if out and out[-1] == ch.swapcase():
            out.pop()
        else:
            out.append(ch)
    return "".join(out)


@dataclass(frozen=True)
class FuchsianGroup:
    pattern: str
    side_letters: str
    vertices: tuple  # UHP points, counter-clockwise
    generators: dict = field(hash=False, compare=False)
    relator: str = ""
    relator_residual: float = 0.0

    def gen(self, letter: str) -> Frame:
        return self.generators[letter]

    def element(self, word: str) -> Frame:
        g = IDENTITY
        for ch in word:
            g = g @ self.generators[ch]
        return g

    @property
    def letters(self) -> str:
        return "".join(sorted(self.generators))

    @property
    def side_matrices(self) -> np.ndarray:
        return np.array([[self.generators[ch].a, self.generators[ch].b,
                          self.generators[ch].c, self.generators[ch].d]
                         for ch in self.side_letters])

    def translation_length(self, letter_or_word: str) -> float:
        g = self.element(letter_or_word)
        tr = abs(g.trace())
        return 2 * math.acosh(tr / 2) if tr > 2 else 0.0

    def area(self) -> float:
        n = len(self.vertices)
        angles = [self._vertex_angle(j) for j in range(n)]
        return (n - 2) * math.pi - sum(angles)

    def _vertex_angle(self, j: int) -> float:
        n = len(self.vertices)
        v = self.vertices[j]
        prev_, next_ = self.vertices[j - 1], self.vertices[(j + 1) % n]

        def direction(p, q):
            # tangent direction at p of the geodesic segment towards q
            G = hyp2.geodesic_frame(Geodesic(*hyp2._geodesic_through(p, q)), p)
            return G

        a = direction(v, prev_)
        b = direction(v, next_)
        rel = a.inv() @ b
        # rel fixes i; it is a rotation by the angle between the directions
        ang = 2 * math.atan2(-rel.c, rel.a)
        return abs(math.remainder(ang, 2 * math.pi))


def _frame_from_to(p: complex, q: complex) -> Frame:
    g = Geodesic(*hyp2._geodesic_through(p, q))
    return hyp2.geodesic_frame(g, p)


@lru_cache(maxsize=None)
def octagon_group(pattern: str = "commutator") -> FuchsianGroup:
    """Side-pairing group of the regular octagon with angles pi/4."""
    if pattern not in _PATTERNS:
        raise ValueError(f"unknown side pattern {pattern!r}")
    n = 8
    letters = list(_PATTERNS[pattern])
    # circumradius: cosh R = cot(pi/n) cot(alpha/2) with alpha = pi/4
    R = math.acosh(1.0 / math.tan(math.pi / n) ** 2)
    rho = math.tanh(R / 2)
    phi0 = 1.25 * math.pi
    verts = [disk_to_uhp(rho * complex(math.cos(phi0 + 2 * math.pi * j / n),
                                       math.sin(phi0 + 2 * math.pi * j / n))) for j in range(n)]
    partner = {}
    for j, ch in enumerate(letters):
        partner[j] = letters.index(ch.swapcase())
    gens: dict[str, Frame] = {}
    for j, ch in enumerate(letters):
        jp = partner[j]
        src = _frame_from_to(verts[jp], verts[(jp + 1) % n])
        dst = _frame_from_to(verts[(j + 1) % n], verts[j])
        gens[ch] = (dst @ src.inv()).normalized()
    if pattern == "commutator":
        # choose orientation of each pair so that [a,b][c,d] = 1
        best = None
        for flip in range(16):
            trial = dict(gens)
            for bit, ch in enumerate("abcd"):
                if flip >> bit & 1:
                    trial[ch], trial[ch.upper()] = gens[ch.upper()], gens[ch]
            res = _residual(trial, "abABcdCD")
            if best is None or res < best[0]:
                best = (res, flip, trial)
        res, flip, gens = best
        for bit, ch in enumerate("abcd"):
            if flip >> bit & 1:
                letters = [c.swapcase() if c.lower() == ch else c for c in letters]
        relator = "abABcdCD"
    else:
        relator = _vertex_cycle(letters, partner)
        res = _residual(gens, relator)
    return FuchsianGroup(pattern, "".join(letters), tuple(verts), gens, relator, res)


def _residual(gens, word) -> float:
    g = IDENTITY
    for ch in word:
        g = g @ gens[ch]
    m = g.matrix
    return float(min(np.abs(m - np.eye(2)).max(), np.abs(m + np.eye(2)).max()))


def _vertex_cycle(letters, partner) -> str:
    n = len(letters)
    m = 0
    word = []
    for _ in range(n):
        word.append(letters[m])
        m = (partner[m] + 1) % n
        if m == 0:
            break
    if m != 0:
        raise ReductionError("side pairing has more than one vertex cycle")
    return "".join(word)


# --- fundamental domain reduction ------------------------------------------


@lru_cache(maxsize=None)
def _reduction_tables(pattern: str):
    G = octagon_group(pattern)
    letters = G.side_letters
    inv = [G.gen(ch).inv() for ch in letters]
    # centres of the adjacent tiles g_j·i
    centres = [G.gen(ch).basepoint for ch in letters]
    return letters, inv, centres


def _cosh_dist(p: complex, q: complex) -> float:
    return 1.0 + abs(p - q) ** 2 / (2 * p.imag * q.imag)


def in_domain(p: complex, G: FuchsianGroup, slack: float = 1e-12) -> bool:
    _, _, centres = _reduction_tables(G.pattern)
    c0 = _cosh_dist(p, 1j)
    return all(c0 <= _cosh_dist(p, c) * (1 + slack) for c in centres)


def reduce_to_domain(p, G: FuchsianGroup | None = None, max_steps: int = 10_000):
    """Return ``(q, word)`` with ``q`` in the octagon and ``word·q = p``."""
    G = G or octagon_group()
    letters, inv, centres = _reduction_tables(G.pattern)
    z = hyp2._cz(p)
    word: list[str] = []
    for _ in range(max_steps):
        c0 = _cosh_dist(z, 1j)
        best, best_c = -1, c0
        for j, c in enumerate(centres):
            cj = _cosh_dist(z, c)
            if cj < best_c * (1 - 1e-13):
                best, best_c = j, cj
        if best < 0:
            return z, free_reduce("".join(word))
        z = mobius(inv[best], z)
        word.append(letters[best])
    raise ReductionError("reduction did not terminate")


def reduce_frame(v: Frame, G: FuchsianGroup):
    letters, inv, centres = _reduction_tables(G.pattern)
    word: list[str] = []
    for _ in range(10_000):
        z = v.basepoint
        c0 = _cosh_dist(z, 1j)
        best, best_c = -1, c0
        for j, c in enumerate(centres):
            cj = _cosh_dist(z, c)
            if cj < best_c * (1 - 1e-13):
                best, best_c = j, cj
        if best < 0:
            return v.normalized(), "".join(word)
        v = inv[best] @ v
        word.append(letters[best])
    raise ReductionError("reduction did not terminate")


def bfs_word_length(target: Frame, G: FuchsianGroup, max_len: int = 14, tube: float = 6.0) -> int:
    """Word length of ``target`` by breadth-first search restricted to group
    elements whose tile centre stays within ``tube`` of the segment from the
    base point to the target's tile centre."""
    end = target.basepoint
    seg = Geodesic(*hyp2._geodesic_through(1j, end)) if abs(end - 1j) > 1e-12 else None
    if seg is None:
        return 0
    D = hyp2.dist_h2(1j, end)
    Gf = hyp2.geodesic_frame(seg, 1j)
    Gi = Gf.inv()

    def near(z):
        w = mobius(Gi, z)
        s = math.log(abs(w))
        if s < -tube or s > D + tube:
            return False
        return math.asinh(abs(w.real) / w.imag) <= tube

    def key(g: Frame):
        z = g.basepoint
        return (round(z.real, 7), round(math.log(z.imag), 7))

    tkey = key(target)
    frontier = [IDENTITY]
    seen = {key(IDENTITY)}
    if tkey in seen:
        return 0
    for length in range(1, max_len + 1):
        nxt = []
        for g in frontier:
            for ch in G.letters:
                h = g @ G.gen(ch)
                k = key(h)
                if k in seen:
                    continue
                if k == tkey:
                    return length
                seen.add(k)
                if near(h.basepoint):
                    nxt.append(h)
        frontier = nxt
    raise ReductionError("target not reached by breadth-first search")


# --- sampling and flow -----------------------------------------------------


def sample_lebesgue_geodesic(seed) -> Geodesic:
    rng = np.random.default_rng(seed)
    while True:
        a, b = rng.uniform(0.0, 2 * math.pi, size=2)
        if abs(math.remainder(a - b, 2 * math.pi)) > 1e-12:
            return Geodesic(disk_angle_to_real(a), disk_angle_to_real(b))


def geodesic_disk_angles(g: Geodesic) -> tuple[float, float]:
    return real_to_disk_angle(g.start), real_to_disk_angle(g.end)


def start_frame(g: Geodesic) -> Frame:
    """Frame on ``g`` at the point closest to the octagon centre."""
    return hyp2.geodesic_frame(g, 1j)


def flow_on_surface(v: Frame, T: float, step: float, G: FuchsianGroup | None = None):
    """Sample the geodesic flow on the surface every ``step`` up to ``T``.

    Returns a list of ``(reduced frame, word)`` where ``word`` is the
    accumulated deck word, so that ``element(word) @ frame`` is the lifted
    frame ``v·a_t``.
    """
    if not step > 0:
        raise ValueError("step must be positive")
    G = G or octagon_group()
    n = int(math.floor(T / step + 1e-9))
    base, word = reduce_frame(v, G)
    t_base = 0.0
    out = []
    for j in range(n + 1):
        t = j * step
        w = hyp2.geodesic_flow(base, t - t_base)
        if not in_domain(w.basepoint, G):
            w, extra = reduce_frame(w, G)
            base, t_base = w, t
            word = free_reduce(word + extra)
        out.append((w, word))
    return out


def lifted_frame(sample, G: FuchsianGroup) -> Frame:
    frame, word = sample
    return G.element(word) @ frame
