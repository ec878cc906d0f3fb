"""Random walks on the octagon group and on its mapping-torus extension.

Locations are products of 2x2 matrices kept as ``(M_hat, lam)`` with
``M = e^lam · M_hat`` and ``max |M_hat| = 1``, so orbit distances stay exact
far beyond the range where ``w_n·i`` itself is representable.  Statistics
along the tracked geodesic are evaluated in the frame re-centred at each
``w_n``; the endpoints seen from there come from contracting boundary
recursions, never from points near the boundary.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from . import hyp2
from . import surface as sf
from .hyp2 import Frame, Geodesic

Z_LETTERS = {"f": 1, "F": -1}
SEP_TOL = 1e-3


class TrackingError(RuntimeError):
    pass


class PeriodicWalkError(ValueError):
    pass


# --- step distributions -------------------------------------------------------


@dataclass(frozen=True)
class StepDistribution:
    """Finite step law over words in the octagon letters; ``f``/``F`` are
    the monodromy and its inverse, ``""`` the identity."""

    support: tuple
    weights: tuple
    pattern: str = "origami"
    check: bool = True

    def __post_init__(self):
        if len(self.support) != len(self.weights) or not self.support:
            raise ValueError("support and weights must be non-empty and of equal length")
        w = np.asarray(self.weights, dtype=float)
        if (w < 0).any() or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("weights must be non-negative and sum to 1")
        letters = set(self.group.side_letters) | set(Z_LETTERS)
        for word in self.support:
            bad = set(word) - letters
            if bad:
                raise ValueError(f"unknown letters {sorted(bad)} in step {word!r}")
        if self.check and not self.generates():
            raise ValueError("support does not generate the group as a semigroup")

    @classmethod
    def uniform(cls, pattern: str = "origami") -> "StepDistribution":
        G = sf.octagon_group(pattern)
        n = len(G.side_letters)
        return cls(tuple(G.side_letters), (1.0 / n,) * n, pattern)

    @classmethod
    def mapping_torus(cls, p_f: float = 0.025, lazy: float = 0.05, pattern: str = "origami") -> "StepDistribution":
        """Octagon letters plus f, F with probability ``p_f`` each and the
        identity with probability ``lazy``."""
        G = sf.octagon_group(pattern)
        rest = 1.0 - 2 * p_f - lazy
        if rest < 0 or p_f < 0 or lazy < 0:
            raise ValueError("probabilities out of range")
        n = len(G.side_letters)
        support = tuple(G.side_letters) + ("f", "F")
        weights = (rest / n,) * n + (p_f, p_f)
        if lazy > 0:
            support, weights = support + ("",), weights + (lazy,)
        return cls(support, weights, pattern)

    @classmethod
    def z_only(cls, lazy: float = 0.0, pattern: str = "origami") -> "StepDistribution":
        """Simple random walk on the Z factor alone (``f``/``F`` with equal
        weight), lazy with probability ``lazy``."""
        if not 0 <= lazy < 1:
            raise ValueError("lazy must lie in [0, 1)")
        p = 0.5 * (1.0 - lazy)
        if lazy > 0:
            return cls(("f", "F", ""), (p, p, lazy), pattern, check=False)
        return cls(("f", "F"), (p, p), pattern, check=False)

    @cached_property
    def group(self) -> sf.FuchsianGroup:
        return sf.octagon_group(self.pattern)

    @cached_property
    def cdf(self) -> np.ndarray:
        c = np.cumsum(np.asarray(self.weights, dtype=float))
        c[-1] = 1.0
        return c

    @cached_property
    def matrices(self) -> np.ndarray:
        """Surface part of each step (the monodromy letters are dropped)."""
        out = []
        for word in self.support:
            g = self.group.element("".join(ch for ch in word if ch not in Z_LETTERS))
            out.append(((g.a, g.b), (g.c, g.d)))
        return np.array(out, dtype=float)

    @cached_property
    def inverse_matrices(self) -> np.ndarray:
        M = self.matrices
        inv = np.empty_like(M)
        inv[:, 0, 0], inv[:, 0, 1] = M[:, 1, 1], -M[:, 0, 1]
        inv[:, 1, 0], inv[:, 1, 1] = -M[:, 1, 0], M[:, 0, 0]
        return inv

    @cached_property
    def z_values(self) -> np.ndarray:
        return np.array([sum(Z_LETTERS.get(ch, 0) for ch in w) for w in self.support], dtype=np.int64)

    @property
    def has_monodromy(self) -> bool:
        return bool(np.any(self.z_values != 0))

    def generates(self, max_len: int = 4) -> bool:
        """Products of at most ``max_len`` steps reach every generator and its
        inverse (surface part up to 1e-9, monodromy count exactly).  The
        check ignores how f twists the surface letters."""
        G = self.group
        M, z = self.matrices, self.z_values
        keys = set()

        def key(m, zz):
            m = m if m[0, 0] + m[1, 1] >= 0 else -m
            return tuple(np.round(m.ravel(), 9)) + (int(zz),)

        frontier = [(np.eye(2), 0)]
        for _ in range(max_len):
            nxt = []
            for m, zz in frontier:
                for j in range(len(M)):
                    e = (m @ M[j], zz + int(z[j]))
                    k = key(*e)
                    if k not in keys:
                        keys.add(k)
                        nxt.append(e)
            frontier = nxt
        need = [key(G.gen(ch).matrix, 0) for ch in G.side_letters]
        if self.has_monodromy:
            need += [key(np.eye(2), 1), key(np.eye(2), -1)]
        return all(k in keys for k in need)

    def draw(self, rng, n: int) -> np.ndarray:
        # prefix-stable: the first n draws do not depend on the total length
        return np.searchsorted(self.cdf, rng.random(n), side="right").astype(np.int64)


# --- scaled products and distances ------------------------------------------------


def _acosh_from_log(L):
    """acosh(e^L) without overflow."""
    L = np.asarray(L, dtype=float)
    with np.errstate(over="ignore", invalid="ignore"):
        small = np.arccosh(np.exp(np.minimum(L, 30.0)))
    big = L + np.log1p(np.sqrt(-np.expm1(-2 * np.maximum(L, 30.0))))
    return np.where(L < 30.0, small, big)


def scaled_products(mats: np.ndarray, codes: np.ndarray):
    """Prefix products of ``mats[codes]`` as (M_hat, lam), index 0 the identity."""
    n = len(codes)
    Mh = np.empty((n + 1, 2, 2))
    lam = np.zeros(n + 1)
    a, b, c, d = 1.0, 0.0, 0.0, 1.0
    s = 0.0
    Mh[0] = np.eye(2)
    for j, k in enumerate(codes, start=1):
        (e, f), (g, h) = mats[k]
        a, b, c, d = a * e + b * g, a * f + b * h, c * e + d * g, c * f + d * h
        m = max(abs(a), abs(b), abs(c), abs(d))
        a, b, c, d = a / m, b / m, c / m, d / m
        s += math.log(m)
        Mh[j] = ((a, b), (c, d))
        lam[j] = s
    return Mh, lam


def orbit_distance(Mh: np.ndarray, lam: np.ndarray) -> np.ndarray:
    """d(i, M·i) for det-one ``M = e^lam·Mh``: cosh d = |M|_F^2 / 2."""
    nrm = np.einsum("...ij,...ij->...", Mh, Mh)
    return _acosh_from_log(2 * np.asarray(lam) + np.log(nrm / 2))


_CAYLEY = np.array([[1, -1j], [1, 1j]])
_CAYLEY_INV = np.linalg.inv(_CAYLEY)


def _disk(m: np.ndarray) -> np.ndarray:
    return _CAYLEY @ m @ _CAYLEY_INV


def _disk_act(D: np.ndarray, w: complex) -> complex:
    return (D[0, 0] * w + D[0, 1]) / (D[1, 0] * w + D[1, 1])


# --- sample paths -------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SamplePath:
    """Steps g_1..g_N (``fwd``) and g_0, g_-1, .., g_-N+1 (``bwd``), so that
    w_n = g_1..g_n and w_-m = g_0^-1 g_-1^-1 .. g_-m+1^-1."""

    mu: StepDistribution
    N: int
    seed: int
    fwd: np.ndarray
    bwd: np.ndarray

    @cached_property
    def prefix(self):
        return scaled_products(self.mu.matrices, self.fwd)

    @cached_property
    def backward_prefix(self):
        return scaled_products(self.mu.inverse_matrices, self.bwd)

    @cached_property
    def suffix_distance(self) -> np.ndarray:
        """d(w_i·x0, w_N·x0) for i = 0..N."""
        # (g_i+1 .. g_N)^T = g_N^T .. g_i+1^T has the same Frobenius norm
        Mh, lam = scaled_products(np.transpose(self.mu.matrices, (0, 2, 1)), self.fwd[::-1])
        return orbit_distance(Mh, lam)[::-1].copy()

    @cached_property
    def distances(self) -> np.ndarray:
        """d(x0, w_n·x0) for n = 0..N."""
        return orbit_distance(*self.prefix)

    def location(self, n: int) -> Frame:
        if not -self.N <= n <= self.N:
            raise IndexError("time outside the sampled window")
        Mh, lam = self.prefix if n >= 0 else self.backward_prefix
        m = Mh[abs(n)] * math.exp(lam[abs(n)])
        return Frame(*m.ravel()).normalized()

    def orbit(self, n_max: int | None = None) -> list[complex]:
        """Basepoint orbit w_n·i for |n| <= n_max (kept small: far points
        are not representable)."""
        n_max = min(self.N, 12) if n_max is None else n_max
        return [self.location(n).basepoint for n in range(-n_max, n_max + 1)]

    @cached_property
    def z_path(self) -> np.ndarray:
        """Z-coordinate phi(w_n), n = 0..N."""
        return np.concatenate([[0], np.cumsum(self.mu.z_values[self.fwd])])

    def _limit_points(self, mats: np.ndarray, codes: np.ndarray) -> np.ndarray:
        """p_n = g_n+1 .. g_N · 0 in the disk, n = 0..N (contracting recursion)."""
        D = np.array([_disk(m) for m in mats])
        p = np.zeros(len(codes) + 1, dtype=complex)
        w = 0j
        for j in range(len(codes) - 1, -1, -1):
            w = _disk_act(D[codes[j]], w)
            if abs(w) > 1.0:
                w /= abs(w)
            p[j] = w
        return p

    @cached_property
    def forward_points(self) -> np.ndarray:
        return self._limit_points(self.mu.matrices, self.fwd)

    @cached_property
    def backward_points(self) -> np.ndarray:
        return self._limit_points(self.mu.inverse_matrices, self.bwd)

    @property
    def xi_plus(self) -> float:
        """Empirical forward limit: disk angle of w_N·x0."""
        return float(np.angle(self.forward_points[0]) % (2 * math.pi))

    @property
    def xi_minus(self) -> float:
        return float(np.angle(self.backward_points[0]) % (2 * math.pi))


def sample_walk(mu: StepDistribution, N: int, seed) -> SamplePath:
    if N < 0:
        raise ValueError("N must be non-negative")
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(int(seed))
    f_ss, b_ss = ss.spawn(2)
    fwd = mu.draw(np.random.default_rng(f_ss), N)
    bwd = mu.draw(np.random.default_rng(b_ss), N)
    return SamplePath(mu, N, int(ss.entropy), fwd, bwd)


# --- Gromov products and shadows ----------------------------------------------


def gromov_product(a, b, c, dist: Callable | None = None) -> float:
    """<b, c>_a = (d(a,b) + d(a,c) - d(b,c)) / 2."""
    d = dist or hyp2.dist_h2
    return 0.5 * (d(a, b) + d(a, c) - d(b, c))


def _horofunction(xi, p: complex) -> float:
    # log(|p - xi|^2 / Im p), or -log Im p for xi = infinity
    if math.isinf(xi):
        return -math.log(p.imag)
    return 2.0 * math.log(abs(p - xi)) - math.log(p.imag)


def boundary_gromov_product(x0, b, xi) -> float:
    """<b, xi>_x0 for a boundary point ``xi`` (real or inf), as the limit
    along the ray towards ``xi``."""
    x0, b = hyp2._cz(x0), hyp2._cz(b)
    return 0.5 * (hyp2.dist_h2(x0, b) - (_horofunction(xi, b) - _horofunction(xi, x0)))


def shadow_contains(basepoint, b, r: float, c, dist: Callable | None = None) -> bool:
    """Whether ``c`` lies in the shadow {<b, c>_x0 >= r}.  ``c`` may be a
    point or a :class:`surface.BoundaryPoint`."""
    if r < 0:
        raise ValueError("r must be non-negative")
    if r == 0:
        return True
    if isinstance(c, sf.BoundaryPoint):
        return boundary_gromov_product(basepoint, b, c.real) >= r
    return gromov_product(basepoint, b, c, dist) >= r


def boundary_pair_product(phi1, phi2):
    """<xi1, xi2> at the disk centre: -log sin(angle / 2)."""
    d = np.abs(np.asarray(phi1) - np.asarray(phi2)) % (2 * math.pi)
    with np.errstate(divide="ignore"):
        return -np.log(np.sin(0.5 * np.minimum(d, 2 * math.pi - d)))


# --- tracked geodesics -----------------------------------------------------------


@dataclass
class TrackedGeodesic:
    geodesic: Geodesic
    xi_minus: float
    xi_plus: float
    times: np.ndarray  # t_n, n = 0..n_eval, with t_0 the projection of x0
    deviation: np.ndarray  # d(w_n·x0, geodesic)
    n_eval: int

    def deviation_fraction(self, D: float) -> float:
        n = np.arange(2, self.n_eval + 1)
        return float(np.mean(self.deviation[2:] > D * np.log(n))) if len(n) else 0.0

    @property
    def max_gap(self) -> float:
        return float(np.max(np.abs(np.diff(self.times)), initial=0.0))


def _chord_frame(eta: complex, xi: complex):
    """UHP frame of the geodesic eta -> xi after a rotation of the disk that
    keeps both endpoints away from infinity; returns (frame, rotation)."""
    c = eta + xi
    u = -np.conj(c) / abs(c) if abs(c) > 1e-12 else 1j * np.conj(xi)
    x = [float((1j * (1 + w * u) / (1 - w * u)).real) for w in (eta, xi)]
    return hyp2.geodesic_frame(Geodesic(x[0], x[1]), 1j), u


def _chord_param(F: Frame, u: complex, w: complex) -> float:
    w = w * u
    z = 1j * (1 + w) / (1 - w)
    return math.log(abs(hyp2.mobius(F.inv(), z)))


def track_geodesic(path: SamplePath, n_eval: int | None = None) -> TrackedGeodesic:
    """Geodesic between the empirical limits and the projection times of
    w_n·x0 for n <= n_eval (default: leave the last tenth of the path to
    let the forward limits seen from w_n settle)."""
    N = path.N
    if N < 1:
        raise ValueError("need N >= 1")
    if n_eval is None:
        n_eval = max(0, N - max(16, N // 10))
    xp, xm = path.forward_points[0], path.backward_points[0]
    xp, xm = xp / abs(xp), xm / abs(xm)
    if abs(np.angle(xp / xm)) < SEP_TOL:
        raise TrackingError("forward and backward limits are not separated; resample")
    Dinv = np.array([_disk(m) for m in path.mu.inverse_matrices])
    fp = path.forward_points
    eta = xm
    times = np.zeros(n_eval + 1)
    dev = np.zeros(n_eval + 1)
    dev[0] = math.atanh(min(abs(math.cos(0.5 * np.angle(fp[0] / abs(fp[0]) / eta))), 1 - 1e-16))
    for n in range(1, n_eval + 1):
        D = Dinv[path.fwd[n - 1]]
        eta = _disk_act(D, eta)
        eta /= abs(eta)
        xi = fp[n] / abs(fp[n])
        F, u = _chord_frame(eta, xi)
        prev = _disk_act(D, 0j)  # w_n^-1 w_n-1 x0
        times[n] = times[n - 1] + _chord_param(F, u, 0j) - _chord_param(F, u, prev)
        dev[n] = math.atanh(min(abs(math.cos(0.5 * np.angle(xi / eta))), 1 - 1e-16))
    g = Geodesic(sf.disk_angle_to_real(float(np.angle(xm) % (2 * math.pi))),
                 sf.disk_angle_to_real(float(np.angle(xp) % (2 * math.pi))))
    return TrackedGeodesic(g, float(np.angle(xm) % (2 * math.pi)), float(np.angle(xp) % (2 * math.pi)),
                           times, dev, n_eval)


# --- statistics ---------------------------------------------------------------


def wilson_interval(k: int, n: int, level: float = 0.95) -> tuple[float, float]:
    from scipy.stats import binomtest

    if n == 0:
        return 0.0, 1.0
    ci = binomtest(int(k), int(n)).proportion_ci(confidence_level=level, method="wilson")
    return float(ci.low), float(ci.high)


@dataclass
class DecayTable:
    R: np.ndarray
    freq: np.ndarray
    count: np.ndarray
    total: int
    slope: float
    r2: float

    def rows(self) -> list[dict]:
        out = []
        for R, f, k in zip(self.R, self.freq, self.count):
            lo, hi = wilson_interval(int(k), self.total)
            out.append({"R": float(R), "freq": float(f), "lo": lo, "hi": hi})
        return out


def decay_table(values: np.ndarray, R_grid, lo: float = 1e-3, hi: float = 0.5) -> DecayTable:
    R = np.asarray(R_grid, dtype=float)
    v = np.sort(np.asarray(values, dtype=float))
    count = len(v) - np.searchsorted(v, R, side="left")
    freq = count / max(len(v), 1)
    m = (freq >= lo) & (freq <= hi)
    slope, r2 = math.nan, math.nan
    if m.sum() >= 3:
        X, Y = R[m], np.log(freq[m])
        slope, icpt = np.polyfit(X, Y, 1)
        res = Y - (slope * X + icpt)
        tot = Y - Y.mean()
        r2 = 1.0 - float(res @ res) / float(tot @ tot)
    return DecayTable(R, freq, count, len(v), float(slope), float(r2))


def tail_values(path: SamplePath) -> np.ndarray:
    """<x0, w_N x0>_{w_i x0} for 0 < i < N."""
    d = path.distances
    s = path.suffix_distance
    val = 0.5 * (d + s - d[-1])
    return np.maximum(val[1:-1], 0.0)


def tail_statistics(paths: Sequence[SamplePath], R_grid) -> DecayTable:
    if len(paths) < 100:
        raise ValueError("need at least 100 paths")
    return decay_table(np.concatenate([tail_values(p) for p in paths]), R_grid)


def diagonal_measure(paths: Sequence[SamplePath], r_grid) -> DecayTable:
    """Frequency of <xi+, xi->_x0 >= r, i.e. both limits in a common shadow
    of depth r."""
    if len(paths) < 100:
        raise ValueError("need at least 100 paths")
    vals = boundary_pair_product([p.xi_plus for p in paths], [p.xi_minus for p in paths])
    return decay_table(vals, r_grid)


@dataclass
class DriftEstimate:
    mean: float
    spread: float  # std / mean across seeds
    ci: tuple  # bootstrap interval for the mean
    values: np.ndarray


def drift(paths: Sequence[SamplePath], level: float = 0.99, n_boot: int = 2000, boot_seed: int = 0) -> DriftEstimate:
    return drift_from_values([p.distances[-1] / p.N for p in paths], level, n_boot, boot_seed)


def drift_from_values(values, level: float = 0.99, n_boot: int = 2000, boot_seed: int = 0) -> DriftEstimate:
    """Bootstrap summary of per-seed drift values d(x0, w_N x0)/N."""
    v = np.asarray(values, dtype=float)
    rng = np.random.default_rng(boot_seed)
    means = v[rng.integers(0, len(v), size=(n_boot, len(v)))].mean(axis=1)
    a = (1 - level) / 2
    ci = (float(np.quantile(means, a)), float(np.quantile(means, 1 - a)))
    return DriftEstimate(float(v.mean()), float(v.std() / v.mean()), ci, v)


# --- the Z-projection -------------------------------------------------------


def z_period(mu: StepDistribution) -> int:
    z = mu.z_values
    if not mu.has_monodromy:
        raise PeriodicWalkError("the step law never moves in the Z direction")
    return int(np.gcd.reduce(np.abs(z - z[0])))


def check_aperiodic(mu: StepDistribution) -> None:
    p = z_period(mu)
    if p != 1:
        raise PeriodicWalkError(f"Z-projection has period {p}; add a lazy step (identity or a "
                                "surface letter) to the step distribution")


def z_walks(mu: StepDistribution, n_max: int, seeds: Sequence[int], chunk: int = 256):
    """Yield blocks of phi(w_n), n = 0..n_max, one row per seed (only Z is
    tracked).  Seed s uses the forward stream of ``sample_walk(mu, N, s)``."""
    zv = mu.z_values
    for lo in range(0, len(seeds), chunk):
        block = seeds[lo:lo + chunk]
        out = np.zeros((len(block), n_max + 1), dtype=np.int32)
        for r, s in enumerate(block):
            rng = np.random.default_rng(np.random.SeedSequence(int(s)).spawn(2)[0])
            out[r, 1:] = np.cumsum(zv[mu.draw(rng, n_max)])
        yield out


def exact_z_pmf(mu: StepDistribution, n: int) -> dict[int, float]:
    """Distribution of phi(w_n) by repeated convolution."""
    zv = mu.z_values
    lo, hi = int(zv.min()), int(zv.max())
    step = np.zeros(hi - lo + 1)
    for z, w in zip(zv, mu.weights):
        step[z - lo] += w
    pmf = np.array([1.0])
    for _ in range(n):
        pmf = np.convolve(pmf, step)
    return {lo * n + j: float(p) for j, p in enumerate(pmf) if p > 0}


@dataclass
class ZStats:
    n: np.ndarray
    sup_p: np.ndarray
    scaled: np.ndarray  # sqrt(n) * sup_p
    near_fiber: np.ndarray  # fraction of k <= n with |phi(w_k)| <= A log k
    seeds: int

    @property
    def variation(self) -> float:
        return float(self.scaled.max() / self.scaled.min() - 1.0)


def z_projection_stats(mu: StepDistribution, n_grid, seeds: Sequence[int], A: float = 1.0) -> ZStats:
    check_aperiodic(mu)
    n_grid = np.asarray(n_grid, dtype=np.int64)
    n_max = int(n_grid.max())
    counts = [dict() for _ in n_grid]
    near = np.zeros(n_max)
    logk = A * np.log(np.maximum(np.arange(1, n_max + 1), 2))
    for Z in z_walks(mu, n_max, seeds):
        for j, n in enumerate(n_grid):
            vals, c = np.unique(Z[:, n], return_counts=True)
            for v, cc in zip(vals.tolist(), c.tolist()):
                counts[j][v] = counts[j].get(v, 0) + cc
        near += (np.abs(Z[:, 1:]) <= logk).sum(axis=0)
    sup = np.array([max(c.values()) / len(seeds) for c in counts])
    cum = np.cumsum(near / len(seeds))
    frac = np.where(n_grid > 0, cum[np.maximum(n_grid - 1, 0)] / np.maximum(n_grid, 1), 1.0)
    return ZStats(n_grid, sup, np.sqrt(n_grid) * sup, frac, len(seeds))


@dataclass(frozen=True)
class PowerFit:
    beta: float
    intercept: float
    r2: float


def near_fiber_decay(mu: StepDistribution, T_grid, seeds: Sequence[int], R: float = 2.0) -> tuple[np.ndarray, PowerFit]:
    """Fraction of k <= T with |phi(w_k)| <= R, and the fit frac ~ T^-beta."""
    check_aperiodic(mu)
    T_grid = np.asarray(T_grid, dtype=np.int64)
    near = np.zeros(int(T_grid.max()))
    for Z in z_walks(mu, int(T_grid.max()), seeds):
        near += (np.abs(Z[:, 1:]) <= R).sum(axis=0)
    cum = np.cumsum(near / len(seeds))
    frac = cum[T_grid - 1] / T_grid
    X, Y = np.log(T_grid), np.log(frac)
    slope, icpt = np.polyfit(X, Y, 1)
    res = Y - (slope * X + icpt)
    tot = Y - Y.mean()
    r2 = 1.0 - float(res @ res) / float(tot @ tot) if float(tot @ tot) > 0 else 1.0
    return frac, PowerFit(float(-slope), float(icpt), r2)


def boundary_pairs(paths: Sequence[SamplePath]) -> np.ndarray:
    """(xi_plus, xi_minus) disk angles, one row per path."""
    return np.array([(p.xi_plus, p.xi_minus) for p in paths], dtype=float).reshape(-1, 2)
