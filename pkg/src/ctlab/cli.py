"""Deterministic experiment runner.

Four subcommands (``verify-hyp2``, ``walk-stats``, ``solv-qg``,
``height-fiber``) each take a strict JSON config, run a batch of pure tasks
keyed by ``(seed, family, index)`` and fold the results in key order, so the
worker count never changes a table.  Every run yields a :class:`RunReport`
with per-criterion pass/fail and the tables behind it.

Exit codes: 0 when every criterion passes, 1 when one fails, 2 for usage or
configuration errors.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
import tempfile
import time
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from multiprocessing import get_context
from typing import Any, Callable, Sequence

import numpy as np

REPORT_SCHEMA_VERSION = 1
CONFIG_SCHEMA_VERSION = 1
U64 = 1 << 64
LOG_K = math.log(3.0 + 2.0 * math.sqrt(2.0))


class ConfigError(ValueError):
    """Invalid or unknown configuration; maps to exit code 2."""


# --- configuration ---------------------------------------------------------------


@dataclass(frozen=True)
class Param:
    default: Any
    kind: str  # int, float, bool, str, floats, ints, pairs
    lo: float | None = None
    hi: float | None = None
    choices: tuple = ()
    max_len: int = 64


def _check_number(name: str, v, kind: str, p: Param):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{name}: expected a number, got {v!r}")
    if kind == "int" and not isinstance(v, int):
        raise ConfigError(f"{name}: expected an integer, got {v!r}")
    if kind == "float":
        v = float(v)
        if not math.isfinite(v):
            raise ConfigError(f"{name}: must be finite")
    if p.lo is not None and v < p.lo:
        raise ConfigError(f"{name}: {v!r} is below the minimum {p.lo!r}")
    if p.hi is not None and v > p.hi:
        raise ConfigError(f"{name}: {v!r} is above the maximum {p.hi!r}")
    return v


def _coerce(name: str, v, p: Param):
    if p.kind in ("int", "float"):
        return _check_number(name, v, p.kind, p)
    if p.kind == "bool":
        if not isinstance(v, bool):
            raise ConfigError(f"{name}: expected true or false")
        return v
    if p.kind == "str":
        if v not in p.choices:
            raise ConfigError(f"{name}: expected one of {list(p.choices)}, got {v!r}")
        return v
    if not isinstance(v, list) or not v or len(v) > p.max_len:
        raise ConfigError(f"{name}: expected a non-empty list of at most {p.max_len} entries")
    if p.kind == "floats":
        return [float(_check_number(f"{name}[{i}]", x, "float", p)) for i, x in enumerate(v)]
    if p.kind == "ints":
        return [_check_number(f"{name}[{i}]", x, "int", p) for i, x in enumerate(v)]
    if p.kind == "pairs":
        out = []
        for i, x in enumerate(v):
            if not isinstance(x, list) or len(x) != 2:
                raise ConfigError(f"{name}[{i}]: expected a pair")
            out.append([_check_number(f"{name}[{i}]", y, "int", p) for y in x])
        return out
    raise AssertionError(p.kind)


_R_DEFAULT = [round(3 * LOG_K * i / 15, 12) for i in range(16)]

SCHEMAS: dict[str, dict[str, Param]] = {
    "verify-hyp2": {
        "n_configs": Param(1000, "int", 1, 100_000),
        "tolerance": Param(1e-9, "float", 0.0, 1.0),
        "t_max": Param(10.0, "float", 0.5, 12.0),
        "theta_min": Param(1e-6, "float", 1e-10, 0.5),
        "theta_max": Param(0.5, "float", 1e-6, 1.0),
        "T0": Param(0.5 * math.log(8.0), "float", 0.0, 10.0),
        "slack": Param(1e-6, "float", 0.0, 1.0),
        "fellow_pairs": Param(500, "int", 1, 100_000),
        "fellow_theta_min": Param(1e-6, "float", 1e-10, 0.01),
        "theta0": Param(0.01, "float", 1e-8, 0.5),
        "fellow_bounds": Param([1e-5, 1e5], "floats", 0.0, None, max_len=2),
        "sandwich_pairs": Param(1000, "int", 1, 100_000),
        "chunk": Param(100, "int", 1, 10_000),
    },
    "walk-stats": {
        "N": Param(1000, "int", 50, 20_000),
        "paths": Param(200, "int", 100, 5_000),
        "bootstrap": Param(2000, "int", 100, 100_000),
        "level": Param(0.99, "float", 0.5, 0.9999),
        "tail_R": Param([0.5 * i for i in range(16)], "floats", 0.0, 50.0),
        "diagonal_r": Param([0.25 * i for i in range(20)], "floats", 0.0, 50.0),
        "deviation_D": Param(2.0, "float", 0.0, 100.0),
        "deviation_max": Param(0.05, "float", 0.0, 1.0),
        "gap_D": Param(1.5, "float", 0.0, 100.0),
        "stability_tol": Param(1e-2, "float", 0.0, math.pi),
        "z_law": Param("mapping_torus", "str", choices=("mapping_torus", "z_only")),
        "p_f": Param(0.025, "float", 0.0, 0.5),
        "lazy": Param(0.05, "float", 0.0, 0.99),
        "z_seeds": Param(10_000, "int", 100, 200_000),
        "z_n": Param([100, 316, 1000, 3162, 10000], "ints", 1, 100_000),
        "binomial_n": Param(100, "int", 2, 10_000),
    },
    "solv-qg": {
        "connections": Param(20, "int", 2, 200),
        "chains": Param(3, "int", 1, 50),
        "max_length": Param(3.0, "float", 1.0, 6.0),
        "grid": Param(10, "int", 2, 40),
        "margin": Param(1, "int", 0, 4),
        "dz": Param(0.2, "float", 0.01, 1.0),
        "sources": Param(2, "int", 1, 20),
        "window": Param([5.0, 30.0], "floats", 0.0, None, max_len=2),
        "slope_max": Param(0.05, "float", 0.0, 1.0),
        "stability": Param(0.1, "float", 0.0, 1.0),
        "axes": Param([[2, 0], [1, 1], [1, 2]], "pairs", -20, 20, max_len=16),
        "axis_repeats": Param(12, "int", 2, 60),
        "paths": Param(1000, "int", 1, 100_000),
        "rectangles": Param(50, "int", 1, 1000),
        "resolutions": Param(3, "int", 2, 4),
    },
    "height-fiber": {
        "depth": Param(8, "int", 0, 12),
        "ball_radius": Param(7.0, "float", 1.0, 12.0),
        "theta": Param(0.01, "float", 1e-8, 0.5),
        "geodesics": Param(50, "int", 2, 1000),
        "T": Param(80.0, "float", 5.0, 2000.0),
        "step": Param(0.01, "float", 1e-3, 0.5),
        "oracle": Param(True, "bool"),
        "spacing": Param(0.5, "float", 0.1, 5.0),
        "grid": Param(10, "int", 2, 40),
        "dz": Param(0.2, "float", 0.01, 1.0),
        "sources": Param(2, "int", 1, 20),
        "window": Param([5.0, 30.0], "floats", 0.0, None, max_len=2),
        "fiber_geodesics": Param(50, "int", 1, 1000),
        "fiber_T": Param(350.0, "float", 5.0, 5000.0),
        "fiber_step": Param(0.05, "float", 1e-3, 0.5),
        "R": Param(_R_DEFAULT, "floats", 0.0, 100.0),
        "deficit_window": Param([1e-3, 0.3], "floats", 0.0, 1.0, max_len=2),
        "segments_T": Param(60.0, "float", 5.0, 1000.0),
        "segment_geodesics": Param(5, "int", 0, 100),
        "walk_p_f": Param(0.25, "float", 0.0, 0.5),
        "walk_lazy": Param(0.1, "float", 0.0, 0.99),
        "walk_seeds": Param(2000, "int", 10, 100_000),
        "walk_R": Param(2.0, "float", 0.0, 100.0),
        "walk_T": Param([100, 316, 1000, 3162, 10000], "ints", 1, 100_000),
        "beta_band": Param([0.3, 0.7], "floats", 0.0, 2.0, max_len=2),
        "bs_samples": Param(100_000, "int", 1000, 10_000_000),
        "bs_r": Param([float(x) for x in np.geomspace(1e-3, 1e-1, 7)], "floats", 1e-6, 10.0),
        "endpoint_walks": Param(2000, "int", 1000, 100_000),
        "endpoint_N": Param(60, "int", 10, 2000),
        "endpoint_r": Param([float(x) for x in np.geomspace(1e-3, 1.0, 10)], "floats", 1e-6, 10.0),
    },
}

COMMANDS = tuple(SCHEMAS)


@dataclass(frozen=True)
class ExperimentConfig:
    command: str
    seed: int
    workers: int
    params: dict

    def __getitem__(self, key: str):
        return self.params[key]

    def echo(self) -> dict:
        """Everything that determines the results (the worker count does not)."""
        return {"schema_version": CONFIG_SCHEMA_VERSION, "seed": self.seed, **self.params}


def _no_duplicates(pairs):
    out = {}
    for k, v in pairs:
        if k in out:
            raise ConfigError(f"duplicate key {k!r}")
        out[k] = v
    return out


def _no_constants(name):
    raise ConfigError(f"non-standard JSON constant {name}")


def parse_config_text(text: str) -> dict:
    try:
        data = json.loads(text, object_pairs_hook=_no_duplicates, parse_constant=_no_constants)
    except json.JSONDecodeError as e:
        raise ConfigError(f"config is not valid JSON: {e}") from None
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    return data


def make_config(command: str, data: dict | None = None, seed: int | None = None,
                workers: int | None = None) -> ExperimentConfig:
    """Validate ``data`` against the command's schema; ``seed``/``workers``
    override the file."""
    if command not in SCHEMAS:
        raise ConfigError(f"unknown command {command!r}")
    data = dict(data or {})
    schema = SCHEMAS[command]
    if data:
        v = data.pop("schema_version", None)
        if v != CONFIG_SCHEMA_VERSION:
            raise ConfigError(f"schema_version must be {CONFIG_SCHEMA_VERSION}, got {v!r}")
    unknown = sorted(set(data) - set(schema) - {"seed", "workers"})
    if unknown:
        raise ConfigError(f"unknown config keys for {command}: {unknown}")
    s = data.pop("seed", 0) if seed is None else seed
    if isinstance(s, bool) or not isinstance(s, int) or not 0 <= s < U64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    w = data.pop("workers", 1) if workers is None else workers
    data.pop("workers", None)
    if isinstance(w, bool) or not isinstance(w, int) or not 1 <= w <= 256:
        raise ConfigError("workers must be an integer in [1, 256]")
    params = {}
    for name, p in schema.items():
        params[name] = _coerce(name, data[name], p) if name in data else p.default
    _cross_checks(command, params)
    return ExperimentConfig(command, s, w, params)


def _cross_checks(command: str, p: dict) -> None:
    for key in ("window", "deficit_window", "beta_band", "fellow_bounds"):
        if key in p:
            if len(p[key]) != 2 or not p[key][0] < p[key][1]:
                raise ConfigError(f"{key}: expected [lo, hi] with lo < hi")
    if command == "verify-hyp2" and p["theta_min"] >= p["theta_max"]:
        raise ConfigError("theta_min must be below theta_max")
    if command == "height-fiber":
        if p["grid"] % 2:
            raise ConfigError("grid must be even")
        if p["step"] > 0.05:
            raise ConfigError("step above 0.05 makes the Lipschitz checks meaningless")
    if command == "solv-qg":
        if p["grid"] % 2:
            raise ConfigError("grid must be even")
        if any(a == 0 and b == 0 for a, b in p["axes"]):
            raise ConfigError("axes: (0, 0) has no axis")


def load_config(command: str, path: str | None, seed: int | None = None,
                workers: int | None = None) -> ExperimentConfig:
    data = None
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                data = parse_config_text(fh.read())
        except OSError as e:
            raise ConfigError(f"cannot read config: {e}") from None
        if "schema_version" not in data:
            raise ConfigError("config file lacks schema_version")
    return make_config(command, data, seed, workers)


# --- reports -------------------------------------------------------------------


def _plain(x):
    """JSON-safe copy with floats kept exact and non-finite values named."""
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return _plain(x.tolist())
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return x


def canonical_json(obj) -> bytes:
    return json.dumps(_plain(obj), sort_keys=True, separators=(",", ":"), allow_nan=False).encode()


def content_hash(obj) -> str:
    """Git blob hash of the canonical JSON encoding."""
    data = canonical_json(obj)
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


@dataclass
class Criterion:
    name: str
    passed: bool
    value: Any
    bound: str
    detail: str = ""

    def line(self) -> str:
        v = self.value
        if isinstance(v, float):
            v = f"{v:.6g}"
        s = f"{'PASS' if self.passed else 'FAIL'}  {self.name}: {v} (want {self.bound})"
        return s + (f"  [{self.detail}]" if self.detail else "")


@dataclass
class Table:
    columns: list
    rows: list

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for r in self.rows:
            w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in r])
        return buf.getvalue()

    def render(self, max_rows: int = 20) -> str:
        def fmt(x):
            if isinstance(x, (float, np.floating)):
                return f"{x:.6g}"
            return str(x)
        cells = [[fmt(x) for x in r] for r in self.rows[:max_rows]]
        width = [max([len(c)] + [len(r[i]) for r in cells]) for i, c in enumerate(self.columns)]
        out = ["  ".join(c.rjust(w) for c, w in zip(self.columns, width))]
        out += ["  ".join(x.rjust(w) for x, w in zip(r, width)) for r in cells]
        if len(self.rows) > max_rows:
            out.append(f"... {len(self.rows) - max_rows} more rows in the artifact")
        return "\n".join(out)


@dataclass
class RunReport:
    command: str
    config: dict
    input_hash: str
    criteria: list
    tables: dict
    runtime: dict = field(default_factory=dict)  # workers and timings; not part of the results
    schema_version: int = REPORT_SCHEMA_VERSION

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.criteria)

    def criterion(self, name: str) -> Criterion:
        for c in self.criteria:
            if c.name == name:
                return c
        raise KeyError(name)

    def results(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "command": self.command,
            "config": self.config,
            "input_hash": self.input_hash,
            "criteria": [{"name": c.name, "passed": c.passed, "value": c.value, "bound": c.bound,
                          "detail": c.detail} for c in self.criteria],
            "tables": {k: {"columns": t.columns, "rows": t.rows} for k, t in self.tables.items()},
        }

    def to_dict(self) -> dict:
        return {**self.results(), "runtime": self.runtime}

    def digest(self) -> str:
        """Hash of everything except runtime information."""
        return hashlib.sha256(canonical_json(self.results())).hexdigest()

    def render(self) -> str:
        head = f"{self.command}  seed={self.config['seed']}  inputs={self.input_hash[:12]}"
        parts = [head, ""] + [c.line() for c in self.criteria]
        for name, t in self.tables.items():
            parts += ["", f"[{name}]", t.render()]
        parts += ["", f"digest {self.digest()[:16]}  {'PASS' if self.passed else 'FAIL'}"]
        return "\n".join(parts)

    def write(self, out_dir: str, fmt: str = "json") -> list[str]:
        """Write the artifact(s); each file lands atomically."""
        os.makedirs(out_dir, exist_ok=True)
        files = {}
        if fmt == "json":
            files[f"{self.command}.json"] = json.dumps(_plain(self.to_dict()), indent=1, sort_keys=True)
        elif fmt == "csv":
            crit = Table(["name", "passed", "value", "bound", "detail"],
                         [[c.name, c.passed, c.value, c.bound, c.detail] for c in self.criteria])
            head = (f"# ctlab report schema_version={self.schema_version} command={self.command} "
                    f"input_hash={self.input_hash}\n")
            files[f"{self.command}.criteria.csv"] = head + crit.to_csv()
            for name, t in self.tables.items():
                files[f"{self.command}.{name}.csv"] = head + t.to_csv()
            files[f"{self.command}.config.json"] = json.dumps(_plain(self.config), indent=1, sort_keys=True)
        else:
            raise ConfigError(f"unknown format {fmt!r}")
        written = []
        for name, text in files.items():
            path = os.path.join(out_dir, name)
            fd, tmp = tempfile.mkstemp(dir=out_dir, prefix=".tmp-")
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                fh.write(text if text.endswith("\n") else text + "\n")
            os.replace(tmp, path)
            written.append(path)
        return written


# --- task plumbing ------------------------------------------------------------------


def task_seed(seed: int, *key: int) -> int:
    """Independent 64-bit seed for the task with the given key."""
    ss = np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, np.uint64)[0])


def ordered_map(fn: Callable, tasks: Sequence, workers: int = 1) -> list:
    """``[fn(t) for t in tasks]`` on a process pool; the result order follows
    ``tasks`` whatever the worker count.  An exception anywhere discards
    every partial result."""
    tasks = list(tasks)
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with get_context("fork").Pool(min(workers, len(tasks))) as pool:
        return pool.map(fn, tasks, chunksize=1)


def _chunks(n: int, size: int) -> list[tuple[int, int]]:
    return [(i, min(size, n - lo)) for i, lo in enumerate(range(0, n, size))]


def _finish(cfg: ExperimentConfig, criteria, tables, timings) -> RunReport:
    echo = cfg.echo()
    from . import __version__
    return RunReport(cfg.command, echo, content_hash({"command": cfg.command, "config": echo,
                                                     "version": __version__}),
                     criteria, tables, {"workers": cfg.workers, "seconds": timings})


# --- verify-hyp2 ----------------------------------------------------------------------

F_LAMBERT, F_SINE, F_PROJ, F_INTERVAL, F_FELLOW, F_SANDWICH = range(6)
FAMILY_NAMES = ("lambert", "sine_rule", "projection_formula", "projection_interval", "fellow_travel",
                "frame_sandwich")


def _rel(a: float, b: float) -> float:
    return abs(a - b) / max(1.0, abs(b))


def _hyp2_task(task):
    """One chunk of one family; returns (family, stats, worst case)."""
    from . import hyp2
    from .hyp2 import Geodesic, a_t, dist_h2, mobius, rotation, transvection

    family, seed, index, n, p = task
    rng = np.random.default_rng(task_seed(seed, family, index))
    inf = math.inf
    top, worst = -inf, None

    def note(value, case):
        # every family reports an excess: <= its bound means pass
        nonlocal top, worst
        if value > top:
            top, worst = value, case

    for _ in range(n):
        g = hyp2.random_frames(1, rng)[0]
        base = Geodesic(mobius(g, 0.0), mobius(g, inf))
        if family in (F_LAMBERT, F_SINE, F_PROJ):
            t = rng.uniform(0.0, p["t_max"])
            if family == F_LAMBERT:
                th = 1.0 - rng.random()  # (0, 1]
                pt = mobius(g, (transvection(th) @ a_t(t)).basepoint)
                d = dist_h2(pt, hyp2.nearest_point_projection(base, pt))
                note(_rel(math.sinh(d), math.cosh(t) * math.sinh(th)), (t, th))
            else:
                th = (1.0 - rng.random()) * 0.5 * math.pi
                if family == F_PROJ:
                    t = max(t, 0.1)
                pt = mobius(g, (rotation(th) @ a_t(t)).basepoint)
                foot = hyp2.nearest_point_projection(base, pt)
                if family == F_SINE:
                    d = dist_h2(pt, foot)
                    note(_rel(math.sinh(d), math.sin(th) * math.sinh(t)), (t, th))
                else:
                    s = dist_h2(mobius(g, 1j), foot)
                    note(abs(math.tanh(s) / math.tanh(t) - math.cos(th)), (t, th))
        elif family == F_INTERVAL:
            th = math.exp(rng.uniform(math.log(p["theta_min"]), math.log(p["theta_max"])))
            kind = "cross" if rng.random() < 0.5 else "disjoint"
            w = rotation(th) if kind == "cross" else transvection(th)
            other = (g @ w).geodesic
            T = hyp2.projection_data(base, other).half_width
            L = math.log(1.0 / th)
            # signed excess over the allowed band; <= slack means pass
            note(max(L - T, T - (L + p["T0"])), (th, kind, T))
        elif family == F_FELLOW:
            th = math.exp(rng.uniform(math.log(p["fellow_theta_min"]), math.log(p["theta0"])))
            L = math.log(1.0 / th)
            t = rng.uniform(-L, L)
            other = (g @ transvection(th)).geodesic
            d = hyp2.tangent_to_geodesic_distance(g @ a_t(t), other)
            r = d / (th * math.exp(abs(t)))
            # fold both ends into one number: the larger of the two log-excesses
            lo, hi = p["fellow_bounds"]
            note(max(math.log(lo) - math.log(r) if r > 0 else inf, math.log(r) - math.log(hi)), (th, t, r))
        elif family == F_SANDWICH:
            A, B = hyp2.random_frames(2, rng)
            dh = dist_h2(A.basepoint, B.basepoint)
            fd = hyp2.frame_distance(A, B)
            note(max(dh - fd, fd - dh - math.pi), (dh, fd))
    return family, top, worst


def verify_hyp2(cfg: ExperimentConfig) -> RunReport:
    p = cfg.params
    sizes = {F_LAMBERT: p["n_configs"], F_SINE: p["n_configs"], F_PROJ: p["n_configs"],
             F_INTERVAL: p["n_configs"], F_FELLOW: p["fellow_pairs"], F_SANDWICH: p["sandwich_pairs"]}
    tasks = [(f, cfg.seed, i, m, p) for f, n in sizes.items() for i, m in _chunks(n, p["chunk"])]
    t0 = time.perf_counter()
    out = ordered_map(_hyp2_task, tasks, cfg.workers)
    timings = {"total": time.perf_counter() - t0}
    stats = {}
    for fam, top, worst in out:  # in task order, so ties resolve the same way for any worker count
        if fam not in stats or top > stats[fam][0]:
            stats[fam] = (top, worst)
    tol, slack = p["tolerance"], p["slack"]
    bounds = {
        F_LAMBERT: (tol, "relative error of sinh d = cosh t sinh theta"),
        F_SINE: (tol, "relative error of sinh d = sin theta sinh t"),
        F_PROJ: (tol, "error of cos theta = tanh s / tanh t"),
        F_INTERVAL: (slack, "excess outside [log 1/theta, log 1/theta + T0]"),
        F_FELLOW: (0.0, "log-excess outside the ratio band"),
        F_SANDWICH: (1e-9, "excess outside [d_H, d_H + pi]"),
    }
    criteria, rows = [], []
    for fam in range(6):
        hi, worst = stats[fam]
        b, what = bounds[fam]
        ok = hi <= b
        detail = "" if ok else f"worst case {tuple(_plain(list(worst)))}"
        criteria.append(Criterion(FAMILY_NAMES[fam], ok, hi, f"<= {b:g}", detail))
        rows.append([FAMILY_NAMES[fam], sizes[fam], what, hi, b, ok])
    tables = {"checks": Table(["family", "cases", "statistic", "max", "bound", "passed"], rows)}
    return _finish(cfg, criteria, tables, timings)


# --- walk-stats -------------------------------------------------------------------------


def _walk_task(task):
    from . import randwalk as rw

    seed, index, p = task
    mu = rw.StepDistribution.uniform()
    s = task_seed(seed, 1, index)
    a = rw.sample_walk(mu, p["N"], s)
    b = rw.sample_walk(mu, 2 * p["N"], s)
    tg = rw.track_geodesic(a)
    return {
        "drift": a.distances[-1] / a.N,
        "drift2": b.distances[-1] / b.N,
        "tail": rw.tail_values(a),
        "xi": (a.xi_plus, a.xi_minus),
        "moved": abs(math.remainder(a.xi_plus - b.xi_plus, 2 * math.pi)),
        "deviation": tg.deviation_fraction(p["deviation_D"]),
        "gap": tg.max_gap,
    }


def z_law(p: dict):
    from . import randwalk as rw

    if p["z_law"] == "z_only":
        return rw.StepDistribution.z_only(p["lazy"])
    return rw.StepDistribution.mapping_torus(p["p_f"], p["lazy"])


def walk_stats(cfg: ExperimentConfig) -> RunReport:
    """Drift, tracking, tail and diagonal tables for the uniform octagon walk,
    then local-limit statistics of the Z-projection.  An aperiodic Z-law is a
    precondition: a periodic one raises PeriodicWalkError."""
    from . import randwalk as rw

    p = cfg.params
    mu_z = z_law(p)
    rw.check_aperiodic(mu_z)
    timings = {}
    t0 = time.perf_counter()
    res = ordered_map(_walk_task, [(cfg.seed, i, p) for i in range(p["paths"])], cfg.workers)
    timings["walks"] = time.perf_counter() - t0
    d1 = rw.drift_from_values([r["drift"] for r in res], p["level"], p["bootstrap"], task_seed(cfg.seed, 2))
    d2 = rw.drift_from_values([r["drift2"] for r in res], p["level"], p["bootstrap"], task_seed(cfg.seed, 3))
    move = abs(d2.mean - d1.mean) / d1.mean
    tail = rw.decay_table(np.concatenate([r["tail"] for r in res]), p["tail_R"])
    xi = np.array([r["xi"] for r in res])
    diag = rw.decay_table(rw.boundary_pair_product(xi[:, 0], xi[:, 1]), p["diagonal_r"])
    dev = float(np.mean([r["deviation"] for r in res]))
    gap = float(max(r["gap"] for r in res)) / math.log(p["N"])
    stable = float(np.mean([r["moved"] <= p["stability_tol"] for r in res]))

    t0 = time.perf_counter()
    zs = rw.z_projection_stats(mu_z, p["z_n"], [task_seed(cfg.seed, 4, i) for i in range(p["z_seeds"])])
    timings["z_projection"] = time.perf_counter() - t0
    from math import comb
    nb = p["binomial_n"]
    exact = rw.exact_z_pmf(rw.StepDistribution.z_only(0.0), nb).get(0, 0.0)
    binom = comb(nb, nb // 2) / 2 ** nb if nb % 2 == 0 else 0.0

    def monotone(tab):
        return bool(np.all(np.diff(tab.freq) <= 0)) and (tab.R[0] > 0 or tab.freq[0] == 1.0)

    criteria = [
        Criterion("drift_ci_excludes_zero", d1.ci[0] > 0, d1.ci[0], "> 0",
                  f"{p['level']:.0%} CI ({d1.ci[0]:.4g}, {d1.ci[1]:.4g})"),
        Criterion("drift_spread", d1.spread < 0.1, d1.spread, "< 0.1"),
        Criterion("drift_doubling", move < 0.1, move, "< 0.1", f"drift {d1.mean:.4g} -> {d2.mean:.4g}"),
        Criterion("tracking_deviation", dev <= p["deviation_max"], dev, f"<= {p['deviation_max']:g}",
                  f"share of n with d(w_n x0, geodesic) > {p['deviation_D']:g} log n"),
        Criterion("tracking_gap", gap <= p["gap_D"], gap, f"<= {p['gap_D']:g}", "max gap / log N"),
        Criterion("endpoint_stability", stable >= 0.95, stable, ">= 0.95"),
        Criterion("tail_table", monotone(tail) and tail.r2 >= 0.9, tail.r2, "monotone and R^2 >= 0.9",
                  f"slope {tail.slope:.4g}"),
        Criterion("diagonal_table", monotone(diag) and diag.r2 >= 0.9, diag.r2, "monotone and R^2 >= 0.9",
                  f"slope {diag.slope:.4g}"),
        Criterion("local_clt", zs.variation < 0.2, zs.variation, "< 0.2", "max/min - 1 of sqrt(n) sup P"),
        Criterion("binomial", abs(exact - binom) <= 5e-4 * binom and f"{exact:.3g}" == "0.0796",
                  exact, f"= C({nb},{nb // 2})/2^{nb}", f"binomial {binom:.6g}"),
    ]
    tables = {
        "drift": Table(["N", "mean", "spread", "ci_lo", "ci_hi"],
                       [[p["N"], d1.mean, d1.spread, *d1.ci], [2 * p["N"], d2.mean, d2.spread, *d2.ci]]),
        "tail": Table(["R", "freq", "lo", "hi"], [list(r.values()) for r in tail.rows()]),
        "diagonal": Table(["r", "freq", "lo", "hi"], [list(r.values()) for r in diag.rows()]),
        "z_projection": Table(["n", "sup_p", "scaled", "near_fiber"],
                              [[int(n), s, c, f] for n, s, c, f in zip(zs.n, zs.sup_p, zs.scaled, zs.near_fiber)]),
    }
    return _finish(cfg, criteria, tables, timings)


# --- solv-qg ----------------------------------------------------------------------------


def _chain_task(task):
    from . import flatmodel as fm
    from . import solvqg as sq

    seed, index, n_conn, p = task
    S, pa = fm.build_canonical_surface()
    rng = np.random.default_rng(task_seed(seed, 5, index))
    chain = fm.random_geodesic_chain(S, n_conn, rng, p["max_length"])
    sources = sorted({(n_conn * i) // p["sources"] for i in range(p["sources"])})
    run = sq.run_chain(S, pa, chain, n=p["grid"], margin=p["margin"], dz=p["dz"], sources=sources)
    return run.pairs


def _axis_task(task):
    from . import solvqg as sq

    hol, p = task
    # a start off the diagonals keeps every holonomy direction clear of cone points
    run = sq.axis_embedding_fit(tuple(hol), start=(0, Fraction(1, 2), Fraction(3, 10)),
                                repeats=p["axis_repeats"], n=p["grid"], margin=p["margin"], dz=p["dz"],
                                window=tuple(p["window"]))
    return run.period_length, None if run.fit is None else run.fit.as_dict()


def _flat_identities(seed: int, p: dict) -> dict:
    from scipy.optimize import minimize_scalar

    from . import flatmodel as fm

    S, pa = fm.build_canonical_surface()
    k = pa.k
    rng = np.random.default_rng(task_seed(seed, 6))
    gap_err = flow_err = 0.0
    for _ in range(p["paths"]):
        a, b = np.exp(rng.uniform(-4, 4, size=2))
        z = fm.optimal_height(fm.Rectangle(a, b), k)
        at_opt = k ** z * a + k ** (-z) * b
        num = minimize_scalar(lambda s: k ** s * a + k ** (-s) * b, bracket=(z - 1, z + 1)).fun
        lg = fm.ladder_gap(a, b)
        gap_err = max(gap_err, _rel(at_opt, lg), max(0.0, lg - num) / lg)
        zz = rng.uniform(-5, 5)
        flow_err = max(flow_err, _rel(fm.Rectangle(a, b).flowed(zz, k).measure, a * b))
    len_err = 0.0
    for _ in range(p["paths"]):
        m = int(rng.integers(2, 12))
        pts = np.column_stack([np.cumsum(rng.normal(size=m)), np.cumsum(rng.normal(size=m)),
                               rng.uniform(-2, 2, size=m)])
        path = fm.SolvPath.of(pts)
        L0 = fm.ct_length(path, k)
        len_err = max(len_err, _rel(fm.ct_length(fm.f_action_path(path, k), k), L0))
    rect_rows = []
    for _ in range(p["rectangles"]):
        a, b = rng.uniform(0.3, 2.0, size=2)
        R = fm.Rectangle(float(a), float(b))
        d = fm.solv_distance_oracle((0.0, 0.0, 0.0), (float(a), float(b), 0.0), k, 0.1)
        rect_rows.append([float(a), float(b), d, fm.bottleneck_bound(R, k),
                          fm.sol_lower_bound((0.0, 0.0, 0.0), (float(a), float(b), 0.0), k)])
    # refinement: halve the resolution repeatedly on a fixed domain.  The
    # 8-move stencil nests exactly (every coarse edge splits into two fine
    # edges through inserted midpoints); the 16-move stencil's knight edges
    # do not on a graded grid, so it is reported but not asserted.
    from .oracle import PlaneDomain
    ref_rows = []
    for j in range(5):
        q = (float(rng.uniform(0.5, 3)), float(rng.uniform(0.5, 3)), float(rng.uniform(-0.5, 0.5)))
        for stencil in (8, 16):
            dom = PlaneDomain.around((0.0, 0.0, 0.0), q, k, 0.1, stencil=stencil)
            ds = []
            for _ in range(p["resolutions"]):
                ds.append(dom.distance((0.0, 0.0, 0.0), q))
                dom = dom.refined()
            ref_rows.append([j, stencil, *q, *ds])
    zero_ok = False
    try:
        fm.mcmullen_path([(0.0, 0.0)], k)
    except ValueError:
        zero_ok = True
    return {"gap": gap_err, "flow": flow_err, "length": len_err, "rects": rect_rows,
            "refine": ref_rows, "zero": zero_ok}


def solv_qg(cfg: ExperimentConfig) -> RunReport:
    from . import solvqg as sq

    p = cfg.params
    lo, hi = p["window"]
    timings = {}
    fits = {}
    for n_conn in (p["connections"], 2 * p["connections"]):
        t0 = time.perf_counter()
        rows = ordered_map(_chain_task, [(cfg.seed, i, n_conn, p) for i in range(p["chains"])], cfg.workers)
        rows = np.concatenate(rows)
        fits[n_conn] = sq.fit_quasigeodesic(rows[:, 3], rows[:, 2], lo, hi)
        timings[f"chains_{n_conn}"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    axes = ordered_map(_axis_task, [(h, p) for h in p["axes"]], cfg.workers)
    timings["axes"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    ident = _flat_identities(cfg.seed, p)
    timings["identities"] = time.perf_counter() - t0

    f1, f2 = fits[p["connections"]], fits[2 * p["connections"]]
    change = abs(f2.mean_ratio - f1.mean_ratio) / f1.mean_ratio
    rects = np.array(ident["rects"])
    margin = float(np.min(rects[:, 2] - rects[:, 3]))
    refine = np.array([r[5:] for r in ident["refine"] if r[1] == 8])
    rise = float(np.max(np.diff(refine, axis=1)))
    mono = rise <= 1e-9
    axis_ok = all(f is not None and all(math.isfinite(f[key]) for key in ("Q", "c")) for _, f in axes)
    criteria = [
        Criterion("ladder_gap", ident["gap"] <= 1e-12, ident["gap"], "<= 1e-12"),
        Criterion("flow_measure", ident["flow"] <= 1e-12, ident["flow"], "<= 1e-12"),
        Criterion("f_length_invariance", ident["length"] <= 1e-9, ident["length"], "<= 1e-9"),
        Criterion("oracle_vs_bottleneck", margin >= 0, margin, ">= 0", "min oracle - bound"),
        Criterion("mcmullen_slope", max(abs(f1.slope), abs(f2.slope)) <= p["slope_max"],
                  max(abs(f1.slope), abs(f2.slope)), f"<= {p['slope_max']:g}"),
        Criterion("mcmullen_doubling", change < p["stability"], change, f"< {p['stability']:g}",
                  f"mean ratio {f1.mean_ratio:.4g} -> {f2.mean_ratio:.4g}"),
        Criterion("axis_fits_finite", axis_ok, axis_ok, "finite (Q, c)"),
        Criterion("zero_length_rejected", ident["zero"], ident["zero"], "error raised"),
        Criterion("refinement_monotone", mono, rise, "<= 1e-9", "largest increase under refinement"),
    ]
    fit_cols = ["Q", "c", "slope", "mean_ratio", "max_ratio", "pairs"]
    tables = {
        "mcmullen": Table(["connections"] + fit_cols,
                          [[n] + [f.as_dict()[c] for c in fit_cols] for n, f in fits.items()]),
        "axes": Table(["p", "q", "period"] + fit_cols,
                      [[h[0], h[1], L] + ([f[c] for c in fit_cols] if f else ["nan"] * 6)
                       for h, (L, f) in zip(p["axes"], axes)]),
        "rectangles": Table(["a", "b", "oracle", "bottleneck", "lower_bound"], ident["rects"]),
        "refinement": Table(["case", "stencil", "X", "Y", "z"] + [f"res/{2 ** j}" for j in range(p["resolutions"])],
                            ident["refine"]),
    }
    return _finish(cfg, criteria, tables, timings)


# --- height-fiber ---------------------------------------------------------------------


@lru_cache(maxsize=2)
def _laminations(depth: int, ball_radius: float):
    from . import heightfn as hf

    return hf.approximate_laminations(depth, ball_radius=ball_radius)


def lebesgue_geodesic(seed: int, index: int, pair):
    """Lebesgue-random geodesic for task ``index``; exceptional draws
    (endpoint within 1e-6 of a leaf endpoint) are redrawn."""
    from . import heightfn as hf
    from . import surface as sf

    for attempt in range(1000):
        g = sf.sample_lebesgue_geodesic(task_seed(seed, 7, index, attempt))
        try:
            hf.check_non_exceptional(g, pair)
            return g
        except hf.ExceptionalGeodesicError:
            continue
    raise RuntimeError("no non-exceptional geodesic found")


def _profile_task(task):
    from . import heightfn as hf

    seed, index, p = task
    pair = _laminations(p["depth"], p["ball_radius"])
    cfg = hf.HeightConfig(theta=p["theta"])
    g = lebesgue_geodesic(seed, index, pair)
    tp = hf.test_path(g, pair, cfg, p["T"], p["step"])
    prof = tp.profile
    rs, hs = prof.slopes()
    ident = bool(np.array_equal(prof.h, hf.height_from_rho(prof.rho_plus, prof.rho_minus, cfg)))
    rows = np.zeros((0, 5))
    if p["oracle"]:
        rows = hf.test_path_oracle(tp, spacing=p["spacing"], n=p["grid"], dz=p["dz"],
                                   n_sources=p["sources"]).rows
    return {"radius_slope": rs, "height_slope": hs, "identity": ident, "rows": rows,
            "arclen": tp.arclength, "nonzero": float(np.mean(prof.h != 0))}


def _fiber_task(task):
    from . import heightfn as hf

    seed, index, p = task
    pair = _laminations(p["depth"], p["ball_radius"])
    cfg = hf.HeightConfig(theta=p["theta"])
    g = lebesgue_geodesic(seed, 1_000_000 + index, pair)
    prof = hf.height_profile(g, pair, cfg, p["fiber_T"], p["fiber_step"])
    return prof.h, np.diff(prof.arclen)


def _segment_task(task):
    from . import heightfn as hf

    seed, index, p = task
    pair = _laminations(p["depth"], p["ball_radius"])
    g = lebesgue_geodesic(seed, 2_000_000 + index, pair)
    return hf.classify_segments(g, pair, p["segments_T"]).straight_density


def _endpoint_task(task):
    from . import randwalk as rw

    seed, lo, count, N = task
    mu = rw.StepDistribution.uniform()
    return rw.boundary_pairs([rw.sample_walk(mu, N, task_seed(seed, 8, i)) for i in range(lo, lo + count)])


def _fit_rows(rows: np.ndarray, lo: float, hi: float):
    from . import heightfn as hf
    from . import solvqg as sq

    fit = sq.fit_quasigeodesic(rows[:, 3], rows[:, 2], lo, hi)
    K, c = hf.projection_fit(rows, lo, hi)
    return fit, K, c


def height_fiber(cfg: ExperimentConfig) -> RunReport:
    from . import heightfn as hf
    from . import randwalk as rw

    p = cfg.params
    hc = hf.HeightConfig(theta=p["theta"])
    timings = {}
    t0 = time.perf_counter()
    plus, minus = _laminations(p["depth"], p["ball_radius"])
    timings["laminations"] = time.perf_counter() - t0
    criteria = []
    tables = {"laminations": Table(["side", "leaves", "depth", "ball_radius"],
                                   [["plus", len(plus), p["depth"], p["ball_radius"]],
                                    ["minus", len(minus), p["depth"], p["ball_radius"]]])}

    # profiles, Lipschitz bounds and test-path fits
    t0 = time.perf_counter()
    prof = ordered_map(_profile_task, [(cfg.seed, i, p) for i in range(p["geodesics"])], cfg.workers)
    timings["profiles"] = time.perf_counter() - t0
    rs = max(r["radius_slope"] for r in prof)
    hs = max(r["height_slope"] for r in prof)
    criteria += [
        Criterion("radius_lipschitz", rs <= 1 + 1e-6, rs, "<= 1 + 1e-6"),
        Criterion("height_lipschitz", hs <= 1 / hc.log_k + 1e-4, hs, f"<= {1 / hc.log_k + 1e-4:.6g}"),
        Criterion("height_identity", all(r["identity"] for r in prof), all(r["identity"] for r in prof),
                  "exact at every sample"),
    ]
    tables["profiles"] = Table(["geodesic", "radius_slope", "height_slope", "arclength", "nonzero_h"],
                               [[i, r["radius_slope"], r["height_slope"], r["arclen"], r["nonzero"]]
                                for i, r in enumerate(prof)])
    if p["oracle"]:
        lo, hi = p["window"]
        half = max(1, len(prof) // 2)
        fit_rows, ok_fits = [], True
        fits = {}
        for label, part in (("half", prof[:half]), ("all", prof)):
            rows = np.concatenate([r["rows"] for r in part])
            try:
                fits[label] = _fit_rows(rows, lo, hi)
            except ValueError:
                ok_fits = False
                continue
            f, K, c = fits[label]
            fit_rows.append([label, len(part), f.Q, f.c, f.slope, f.mean_ratio, f.max_ratio, f.pairs, K, c])
        tables["test_path_fit"] = Table(["geodesics", "count", "Q", "c", "slope", "mean_ratio", "max_ratio",
                                         "pairs", "K", "K_c"], fit_rows)
        if ok_fits:
            (fa, Ka, ca), (fb, Kb, cb) = fits["half"], fits["all"]
            finite = all(math.isfinite(x) for x in (fa.Q, fa.c, fb.Q, fb.c, Ka, ca, Kb, cb))
            slope = max(abs(fa.slope), abs(fb.slope))
            dq = abs(fb.mean_ratio - fa.mean_ratio) / fa.mean_ratio
            dk = abs(Kb - Ka) / abs(Ka) if Ka else math.inf
            criteria += [
                Criterion("test_path_qg", finite and slope <= 0.05 and dq < 0.1, slope,
                          "|slope| <= 0.05, finite, < 10% change", f"mean ratio change {dq:.3g}"),
                Criterion("projection_bound", finite and dk < 0.1, dk, "finite (K, c), K change < 0.1",
                          f"K {Ka:.4g} -> {Kb:.4g}, c {ca:.3g} -> {cb:.3g}"),
            ]
        else:
            criteria.append(Criterion("test_path_qg", False, "nan", "fit available", "window empty"))

    # fiber proportions and the effective decay
    t0 = time.perf_counter()
    fib = ordered_map(_fiber_task, [(cfg.seed, i, p) for i in range(p["fiber_geodesics"])], cfg.workers)
    st = hf.fiber_stats([(h, L) for h, L in fib], p["R"])
    per_path = min(float(L.sum()) for _, L in fib)
    dec = hf.effective_decay_fit(st, *p["deficit_window"])
    timings["fiber"] = time.perf_counter() - t0
    R3 = 3 * hc.log_k
    at3 = float(hf.fiber_stats([(h, L) for h, L in fib], [R3]).proportion[0])
    slope_ok = math.isfinite(dec.slope) and abs(dec.slope - hc.log_k) <= 0.5 * hc.log_k
    criteria += [
        Criterion("fiber_arclength", per_path >= 100 * hc.log_k, per_path, f">= {100 * hc.log_k:.4g}",
                  "shortest test path"),
        Criterion("fiber_proportion", at3 >= 0.5, at3, ">= 0.5 at R = 3 log k"),
        Criterion("deficit_decreasing", dec.strictly_decreasing, dec.strictly_decreasing,
                  "strictly decreasing", f"max deficit {float(st.deficit.max()):.3g}"),
        Criterion("effective_decay", slope_ok, dec.slope, f"log k +- 50% ({hc.log_k:.4g})",
                  f"{dec.points} R values in the deficit window"),
    ]
    tables["fiber"] = Table(["R", "proportion", "deficit"], [list(r.values()) for r in st.as_rows()])

    # the Z-walk near-fiber decay
    t0 = time.perf_counter()
    mu = rw.StepDistribution.mapping_torus(p["walk_p_f"], p["walk_lazy"])
    frac, pf = rw.near_fiber_decay(mu, p["walk_T"], [task_seed(cfg.seed, 9, i) for i in range(p["walk_seeds"])],
                                   p["walk_R"])
    timings["near_fiber"] = time.perf_counter() - t0
    blo, bhi = p["beta_band"]
    criteria.append(Criterion("near_fiber_beta", blo <= pf.beta <= bhi, pf.beta, f"in [{blo:g}, {bhi:g}]",
                              f"R^2 {pf.r2:.4f}"))
    tables["near_fiber"] = Table(["T", "fraction"], [[int(T), f] for T, f in zip(p["walk_T"], frac)])

    # Birman-Series window
    t0 = time.perf_counter()
    bs = hf.birman_series_area((plus, minus), p["bs_r"], samples=p["bs_samples"], seed=task_seed(cfg.seed, 10))
    timings["birman_series"] = time.perf_counter() - t0
    lower, upper = bs["area_over_r"], bs["area_over_r_log6"]
    var_lo = float(lower.max() / lower.min()) if lower.min() > 0 else math.inf
    var_up = float(upper.max() / upper.min()) if upper.min() > 0 else math.inf
    criteria += [
        Criterion("bs_lower", float(lower.min()) > 0, float(lower.min()), "> 0", "min area/r"),
        Criterion("bs_upper", math.isfinite(float(upper.max())), float(upper.max()), "finite",
                  "max area/(r log^6(1/r))"),
        Criterion("bs_joint_variation", max(var_lo, var_up) < 10, max(var_lo, var_up), "< 10",
                  f"max/min of area/r {var_lo:.3g}, of area/(r log^6) {var_up:.3g}"),
    ]
    tables["birman_series"] = Table(["r", "area", "area_over_r", "area_over_r_log6"],
                                    [list(x) for x in zip(bs["r"], bs["area"], lower, upper)])

    # endpoint neighbourhoods
    t0 = time.perf_counter()
    chunks = [(cfg.seed, lo, min(250, p["endpoint_walks"] - lo), p["endpoint_N"])
              for lo in range(0, p["endpoint_walks"], 250)]
    pairs = np.concatenate(ordered_map(_endpoint_task, chunks, cfg.workers))
    em = hf.endpoint_neighborhood_measure(pairs, plus, p["endpoint_r"])
    timings["endpoint"] = time.perf_counter() - t0
    em_ok = em["alpha"] > 0 and em["r2"] >= 0.85 and bool(np.all(np.diff(em["share"]) >= 0))
    criteria.append(Criterion("endpoint_measure", em_ok, em["alpha"], "alpha > 0, R^2 >= 0.85, monotone",
                              f"R^2 {em['r2']:.4f}"))
    tables["endpoint"] = Table(["r", "share"], [list(x) for x in zip(em["r"], em["share"])])

    # straight-segment density
    if p["segment_geodesics"]:
        t0 = time.perf_counter()
        dens = ordered_map(_segment_task, [(cfg.seed, i, p) for i in range(p["segment_geodesics"])],
                           cfg.workers)
        timings["segments"] = time.perf_counter() - t0
        criteria.append(Criterion("straight_density", min(dens) >= 0.9, min(dens), ">= 0.9"))
        tables["segments"] = Table(["geodesic", "straight_density"], [[i, d] for i, d in enumerate(dens)])
    return _finish(cfg, criteria, tables, timings)


RUNNERS = {"verify-hyp2": verify_hyp2, "walk-stats": walk_stats, "solv-qg": solv_qg,
           "height-fiber": height_fiber}


def run(cfg: ExperimentConfig) -> RunReport:
    return RUNNERS[cfg.command](cfg)


# --- command line -----------------------------------------------------------------------


def _u64(text: str) -> int:
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= v < U64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _positive(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError("workers must be at least 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ctlab", description="Seeded experiments with pass/fail reports.")
    sub = ap.add_subparsers(dest="command", required=True)
    helps = {"verify-hyp2": "closed-form and bound checks in the hyperbolic plane",
             "walk-stats": "random-walk drift, tracking, shadows and Z-projection",
             "solv-qg": "flat-model identities and quasigeodesic fits",
             "height-fiber": "laminations, test paths, fiber statistics"}
    for name in COMMANDS:
        sp = sub.add_parser(name, help=helps[name])
        sp.add_argument("--config", metavar="PATH", help="strict JSON config with schema_version")
        sp.add_argument("--seed", type=_u64, help="master seed (overrides the config)")
        sp.add_argument("--out", metavar="DIR", default="ctlab-out", help="artifact directory")
        sp.add_argument("--workers", type=_positive, help="worker processes (results do not depend on it)")
        sp.add_argument("--format", choices=("csv", "json"), default="json", help="artifact format")
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    from .randwalk import PeriodicWalkError

    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        cfg = load_config(args.command, args.config, args.seed, args.workers)
        report = run(cfg)
    except (ConfigError, PeriodicWalkError) as e:
        print(f"ctlab: error: {e}", file=sys.stderr)
        return 2
    print(report.render())
    for path in report.write(os.path.join(args.out, ""), args.format):
        print(f"wrote {path}")
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
