"""Relative-cost benchmark of robust value iteration against the non-robust sweep."""

from __future__ import annotations

import csv
import math
import re
import statistics
import sys
import time
from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np

from .bellman import bellman_opt, make_context
from .errors import InvalidConfig
from .mdp import NormIndex, Rect, UncertaintySpec, q_from_value, random_instance

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

CSV_HEADER = ["setting", "S", "A", "ms_per_iter", "relative_cost", "residual_ratio"]
RATIO_WINDOW = 20

DEFAULT_SETTINGS = [
    (Rect.NONE, NormIndex(math.inf)),
    *[(Rect.SA, NormIndex(p)) for p in (1, 2, math.inf, 5, 10)],
    *[(Rect.S, NormIndex(p)) for p in (1, 2, math.inf, 5, 10)],
]


def setting_id(rect: Rect, p: NormIndex) -> str:
    """Short label such as ``nr``, ``sa-p2`` or ``s-pinf``."""
    rect = Rect(rect)
    if rect is Rect.NONE:
        return "nr"
    return f"{rect.value}-p{p}"


_ID_RE = re.compile(r"^(sa|s)-p(.+)$")


def parse_setting(item) -> Tuple[Rect, NormIndex]:
    """Accept ``"nr"``, ``"sa-p2"``, ``"s-pinf"`` or a ``{rect=..., p=...}`` table."""
    if isinstance(item, str):
        if item in ("nr", "none"):
            return Rect.NONE, NormIndex(math.inf)
        m = _ID_RE.match(item)
        if not m:
            raise InvalidConfig(f"unrecognized setting {item!r}")
        return Rect(m.group(1)), NormIndex.parse(m.group(2))
    if isinstance(item, dict):
        unknown = set(item) - {"rect", "p"}
        if unknown or "rect" not in item:
            raise InvalidConfig(f"setting table needs 'rect' (and 'p'), got {item!r}")
        rect = Rect(item["rect"])
        return rect, NormIndex.parse(item.get("p", "inf"))
    raise InvalidConfig(f"unrecognized setting {item!r}")


@dataclass
class BenchSpec:
    sizes: List[Tuple[int, int]] = field(default_factory=lambda: [(10, 10), (100, 20)])
    settings: List[Tuple[Rect, NormIndex]] = field(default_factory=lambda: list(DEFAULT_SETTINGS))
    repeats: int = 5
    gamma: float = 0.9
    radii: float = 0.1
    iters: int = 100
    seed: int = 0
    inner_tol: float = 1e-10
    threads: int = 1

    def __post_init__(self):
        self.sizes = [(int(S), int(A)) for S, A in self.sizes]
        self.settings = [parse_setting(x) if not isinstance(x, tuple) else x
                         for x in self.settings]
        if self.repeats < 3:
            raise InvalidConfig("repeats must be >= 3 for timing rows")
        if self.iters < 10:
            raise InvalidConfig("iters must be >= 10")
        if not (0.0 <= self.gamma < 1.0):
            raise InvalidConfig("gamma must lie in [0, 1)")
        if self.radii < 0 or self.inner_tol <= 0:
            raise InvalidConfig("radii must be >= 0 and inner_tol > 0")
        if any(S < 1 or A < 1 for S, A in self.sizes):
            raise InvalidConfig("sizes must be positive")


_SPEC_KEYS = {"sizes", "settings", "repeats", "gamma", "radii", "iters", "seed",
              "inner_tol", "threads"}


def load_bench_spec(path) -> BenchSpec:
    with open(path, "rb") as fh:
        try:
            data = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise InvalidConfig(f"{path}: malformed TOML ({exc})") from exc
    unknown = set(data) - _SPEC_KEYS
    if unknown:
        raise InvalidConfig(f"unknown bench keys: {sorted(unknown)}")
    if "settings" in data:
        data["settings"] = [parse_setting(x) for x in data["settings"]]
    try:
        return BenchSpec(**data)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, InvalidConfig):
            raise
        raise InvalidConfig(f"{path}: {exc}") from exc


@dataclass(frozen=True)
class BenchRow:
    setting: str
    S: int
    A: int
    ms_per_iter: float
    relative_cost: float
    residual_ratio: float


def residual_ratio(residuals: Sequence[float], window: int = RATIO_WINDOW) -> float:
    """Geometric decay rate fitted to the last ``window`` residuals."""
    r = np.asarray(residuals[-window:], dtype=float)
    r = r[r > 0]
    if r.size < 2:
        return float("nan")
    slope = np.polyfit(np.arange(r.size), np.log(r), 1)[0]
    return float(math.exp(slope))


def _sweeper(inst, unc, tol, workers):
    if unc.rect is Rect.NONE:
        return lambda v: q_from_value(inst, v).max(axis=1)

    def sweep(v):
        ctx = make_context(inst, unc, v, tol)
        return bellman_opt(ctx, q_from_value(inst, v), workers)[0]

    return sweep


def _run(sweep, S, iters):
    v = np.zeros(S)
    residuals = []
    t0 = time.perf_counter()
    for _ in range(iters):
        v_new = sweep(v)
        residuals.append(float(np.max(np.abs(v_new - v))))
        v = v_new
    return time.perf_counter() - t0, residuals


def run_bench(spec: BenchSpec, progress=None) -> List[BenchRow]:
    """Time ``spec.iters`` sweeps per (size, setting), median over repeats.

    The non-robust row is always measured so relative costs have a baseline.
    """
    settings = list(spec.settings)
    nr = (Rect.NONE, NormIndex(math.inf))
    if not any(r is Rect.NONE for r, _ in settings):
        settings.insert(0, nr)
    rows = []
    for S, A in spec.sizes:
        inst = random_instance(S, A, seed=spec.seed, gamma=spec.gamma)
        measured = {}
        for rect, p in settings:
            unc = UncertaintySpec.uniform(inst, rect, p, spec.radii, spec.radii)
            sweep = _sweeper(inst, unc, spec.inner_tol, spec.threads)
            _run(sweep, S, min(spec.iters, 5))  # warm-up
            times, residuals = [], None
            for _ in range(spec.repeats):
                t, residuals = _run(sweep, S, spec.iters)
                times.append(t)
            ms = 1e3 * statistics.median(times) / spec.iters
            measured[setting_id(rect, p)] = (ms, residual_ratio(residuals))
            if progress is not None:
                progress(f"{setting_id(rect, p)} S={S} A={A}: {ms:.4f} ms/iter")
        base = measured["nr"][0]
        for rect, p in settings:
            sid = setting_id(rect, p)
            ms, ratio = measured[sid]
            rel = 1.0 if rect is Rect.NONE else ms / base
            rows.append(BenchRow(sid, S, A, ms, rel, ratio))
    return rows


def write_csv(rows: Sequence[BenchRow], fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in rows:
        w.writerow([r.setting, r.S, r.A, f"{r.ms_per_iter:.6f}", f"{r.relative_cost:.6f}",
                    f"{r.residual_ratio:.6f}"])
