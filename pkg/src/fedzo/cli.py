"""Experiment orchestration: config parsing, sweeps, rate fits, reports.

Config files are flat ``key = value`` documents with dotted sections::

    mode = run
    seed = 0
    n = 512
    m = 4
    d = 5
    problem.family = shifted-norm
    problem.theta = e1:2.0
    set.kind = euclidean-ball
    set.center = zeros
    set.radius = 1

Unknown keys are hard errors (sweeps are expensive; typos must not silently
run defaults). Vector values are comma lists or the shorthands ``zeros``,
``const:V`` and ``e1:V``. Integer lists accept commas and ``a..b`` ranges.

Subcommands: ``run``, ``sweep``, ``tails``, ``martingale``, ``report``; the
``--seed`` flag overrides the config seed and ``FEDZO_OUT`` sets the default
output root. Exit codes: 0 success, 2 validation error, 1 runtime error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .boundary import (
    INCREMENT_LAWS,
    MartingaleSpec,
    SubGammaBoundary,
    boundary_coverage_experiment,
)
from .engine import (
    RunConfig,
    RunTrace,
    default_hyperparams,
    read_trace_csv,
    run_federated,
    theoretical_regret_bound,
    write_trace_csv,
)
from .geometry import FeasibleSet
from .objectives import FAMILIES, Problem, make_problem
from .streams import RngStream
from .svgplot import write_line_svg
from .tails import TAIL_KINDS, TEST_FUNCTIONS, TailReport, tail_experiment

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "RateFit",
    "SweepResult",
    "parse_config",
    "config_hash",
    "run_sweep",
    "fit_rate_slope",
    "emit_report",
    "main",
]

OUT_ENV = "FEDZO_OUT"

MODES = ("run", "sweep", "tails", "martingale")


class ConfigError(ValueError):
    """Invalid experiment configuration (missing/unknown key, bad value)."""


_COMMON_KEYS = {"mode", "seed", "out", "plot"}
_PROBLEM_KEYS = {"problem.family", "problem.sigma", "problem.a", "problem.theta",
                 "problem.b"} | {f"problem.a{k}" for k in range(1, 10)}
_SET_KEYS = {"set.kind", "set.lo", "set.hi", "set.center", "set.radius"}
_RUN_KEYS = {"n", "m", "d", "delta", "h", "eta", "x1"} | _PROBLEM_KEYS | _SET_KEYS
_SWEEP_KEYS = {"sweep.n", "sweep.m", "sweep.d", "sweep.seeds", "sweep.workers"}
_TAILS_KEYS = {"tails.kinds", "tails.d", "tails.samples", "tails.functions"}
_MART_KEYS = {"mart.laws", "mart.variance", "mart.scale", "mart.steps",
              "mart.reps", "mart.rho", "mart.delta"}

_KEYS_BY_MODE = {
    "run": _COMMON_KEYS | _RUN_KEYS,
    "sweep": _COMMON_KEYS | _RUN_KEYS | _SWEEP_KEYS,
    "tails": _COMMON_KEYS | _TAILS_KEYS,
    "martingale": _COMMON_KEYS | _MART_KEYS,
}


def _parse_scalar(key: str, raw: str, kind: type):
    try:
        if kind is bool:
            low = raw.lower()
            if low in {"true", "yes", "on", "1"}:
                return True
            if low in {"false", "no", "off", "0"}:
                return False
            raise ValueError(raw)
        return kind(raw)
    except ValueError:
        raise ConfigError(f"key {key!r}: cannot parse {raw!r} as {kind.__name__}")


def _parse_int_list(key: str, raw: str) -> list[int]:
    out: list[int] = []
    for part in raw.split(","):
        part = part.strip()
        if ".." in part:
            lo_s, hi_s = part.split("..", 1)
            lo = _parse_scalar(key, lo_s.strip(), int)
            hi = _parse_scalar(key, hi_s.strip(), int)
            if hi < lo:
                raise ConfigError(f"key {key!r}: empty range {part!r}")
            out.extend(range(lo, hi + 1))
        elif part:
            out.append(_parse_scalar(key, part, int))
    if not out:
        raise ConfigError(f"key {key!r}: empty list")
    return out


def _parse_float_list(key: str, raw: str) -> list[float]:
    vals = [_parse_scalar(key, p.strip(), float) for p in raw.split(",") if p.strip()]
    if not vals:
        raise ConfigError(f"key {key!r}: empty list")
    return vals


def _parse_str_list(key: str, raw: str) -> list[str]:
    vals = [p.strip() for p in raw.split(",") if p.strip()]
    if not vals:
        raise ConfigError(f"key {key!r}: empty list")
    return vals


def _parse_vector(key: str, raw: str, d: int) -> np.ndarray:
    raw = raw.strip()
    if raw == "zeros":
        return np.zeros(d)
    if raw.startswith("const:"):
        return np.full(d, _parse_scalar(key, raw[len("const:"):], float))
    if raw.startswith("e1:"):
        v = np.zeros(d)
        v[0] = _parse_scalar(key, raw[len("e1:"):], float)
        return v
    vals = _parse_float_list(key, raw)
    if len(vals) != d:
        raise ConfigError(f"key {key!r}: expected {d} components, got {len(vals)}")
    return np.array(vals)


@dataclass
class RateFit:
    """OLS fit of log(average regret) against a log scale variable."""

    points: list[tuple[float, float]]
    slope: float
    intercept: float
    residual_rms: float


@dataclass
class ExperimentConfig:
    mode: str
    seed: int = 0
    out: Path = field(default_factory=lambda: Path(os.environ.get(OUT_ENV, "fedzo-out")))
    plot: bool = False
    raw: dict = field(default_factory=dict)
    # run / sweep
    n: int | None = None
    m: int | None = None
    d: int | None = None
    delta: float = 0.1
    h: float | None = None      # None = derive defaults per cell
    eta: float | None = None
    x1_spec: str | None = None
    problem_family: str | None = None
    problem_sigma: float = 0.0
    problem_params: dict = field(default_factory=dict)
    set_kind: str | None = None
    set_params: dict = field(default_factory=dict)
    sweep_n: list[int] | None = None
    sweep_m: list[int] | None = None
    sweep_d: list[int] | None = None
    sweep_seeds: list[int] | None = None
    sweep_workers: int = 1
    # tails
    tails_kinds: list[str] = field(default_factory=list)
    tails_d: list[int] = field(default_factory=list)
    tails_samples: int = 100_000
    tails_functions: list[str] = field(default_factory=lambda: ["l2-norm"])
    # martingale
    mart_laws: list[str] = field(default_factory=list)
    mart_variance: float = 1.0
    mart_scale: float = 1.0
    mart_steps: int = 1000
    mart_reps: int = 2000
    mart_rho: float = 1.0
    mart_delta: list[float] = field(default_factory=lambda: [0.05])

    # ---- cell construction -------------------------------------------------
    def build_problem(self, d: int) -> Problem:
        fam = self.problem_family
        sigma = self.problem_sigma
        if fam == "linear-noise":
            a = _parse_vector("problem.a", self.problem_params["a"], d)
            return make_problem(fam, d, a=a, noise_scale=sigma)
        if fam == "shifted-norm":
            theta = _parse_vector("problem.theta", self.problem_params["theta"], d)
            return make_problem(fam, d, theta=theta, noise_scale=sigma)
        pieces = sorted(k for k in self.problem_params if k.startswith("a") and k != "a")
        slopes = np.stack([_parse_vector(f"problem.{k}", self.problem_params[k], d)
                           for k in pieces])
        offsets = np.array(_parse_float_list("problem.b", self.problem_params["b"]))
        return make_problem(fam, d, slopes=slopes, offsets=offsets, noise_scale=sigma)

    def build_set(self, d: int) -> FeasibleSet:
        kind = self.set_kind
        if kind == "box":
            lo = _parse_vector("set.lo", self.set_params["lo"], d)
            hi = _parse_vector("set.hi", self.set_params["hi"], d)
            return FeasibleSet.box(lo, hi)
        center = _parse_vector("set.center", self.set_params.get("center", "zeros"), d)
        radius = float(self.set_params["radius"])
        if kind == "euclidean-ball":
            return FeasibleSet.euclidean_ball(center, radius)
        return FeasibleSet.l1_ball(center, radius)

    def build_run_config(self, n: int, m: int, d: int, seed: int) -> RunConfig:
        problem = self.build_problem(d)
        fset = self.build_set(d)
        if self.h is None or self.eta is None:
            h_def, eta_def = default_hyperparams(problem.L, fset.diameter, d, n, m)
        h = self.h if self.h is not None else h_def
        eta = self.eta if self.eta is not None else eta_def
        if self.x1_spec is None:
            if fset.kind == "box":
                x1 = (fset.lower + fset.upper) / 2.0
            else:
                x1 = fset.center.copy()
        else:
            x1 = _parse_vector("x1", self.x1_spec, d)
        return RunConfig(n=n, m=m, problem=problem, feasible=fset, h=h, eta=eta,
                         x1=x1, delta=self.delta, seed=seed)


def parse_config(text: str, mode: str | None = None) -> ExperimentConfig:
    """Parse and validate a config document; unknown keys are errors."""
    entries: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, _, value = stripped.partition("=")
        key, value = key.strip(), value.strip()
        if key in entries:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        entries[key] = value

    cfg_mode = entries.pop("mode", None) or mode
    if cfg_mode is None:
        raise ConfigError("missing required key 'mode'")
    if cfg_mode not in MODES:
        raise ConfigError(f"key 'mode': expected one of {MODES}, got {cfg_mode!r}")
    if mode is not None and cfg_mode != mode:
        raise ConfigError(f"config mode {cfg_mode!r} does not match subcommand {mode!r}")

    allowed = _KEYS_BY_MODE[cfg_mode]
    for key in entries:
        if key not in allowed:
            raise ConfigError(f"unknown key {key!r} for mode {cfg_mode!r}")

    cfg = ExperimentConfig(mode=cfg_mode, raw=dict(entries))
    if "seed" in entries:
        cfg.seed = _parse_scalar("seed", entries["seed"], int)
    if "out" in entries:
        cfg.out = Path(entries["out"])
    if "plot" in entries:
        cfg.plot = _parse_scalar("plot", entries["plot"], bool)

    if cfg_mode in ("run", "sweep"):
        _parse_run_keys(cfg, entries, cfg_mode)
    elif cfg_mode == "tails":
        _parse_tails_keys(cfg, entries)
    else:
        _parse_mart_keys(cfg, entries)
    return cfg


def _require(entries: dict, key: str):
    if key not in entries:
        raise ConfigError(f"missing required key {key!r}")
    return entries[key]


def _parse_run_keys(cfg: ExperimentConfig, entries: dict, mode: str) -> None:
    if mode == "run":
        cfg.n = _parse_scalar("n", _require(entries, "n"), int)
        cfg.m = _parse_scalar("m", _require(entries, "m"), int)
        cfg.d = _parse_scalar("d", _require(entries, "d"), int)
        for key, val in (("n", cfg.n), ("m", cfg.m), ("d", cfg.d)):
            if val < 1:
                raise ConfigError(f"key {key!r}: must be >= 1, got {val}")
    else:
        cfg.sweep_n = _parse_int_list("sweep.n", _require(entries, "sweep.n"))
        cfg.sweep_m = _parse_int_list("sweep.m", _require(entries, "sweep.m"))
        cfg.sweep_d = _parse_int_list("sweep.d", _require(entries, "sweep.d"))
        cfg.sweep_seeds = _parse_int_list("sweep.seeds", _require(entries, "sweep.seeds"))
        for key, vals in (("sweep.n", cfg.sweep_n), ("sweep.m", cfg.sweep_m),
                          ("sweep.d", cfg.sweep_d)):
            if any(v < 1 for v in vals):
                raise ConfigError(f"key {key!r}: values must be >= 1")
        if "sweep.workers" in entries:
            cfg.sweep_workers = _parse_scalar("sweep.workers", entries["sweep.workers"], int)
            if cfg.sweep_workers < 1:
                raise ConfigError("key 'sweep.workers': must be >= 1")

    if "delta" in entries:
        cfg.delta = _parse_scalar("delta", entries["delta"], float)
        if not (0.0 < cfg.delta < 1.0):
            raise ConfigError(f"key 'delta': must be in (0, 1), got {cfg.delta}")
    if "h" in entries and entries["h"] != "auto":
        cfg.h = _parse_scalar("h", entries["h"], float)
        if cfg.h <= 0:
            raise ConfigError(f"key 'h': must be > 0, got {cfg.h}")
    if "eta" in entries and entries["eta"] != "auto":
        cfg.eta = _parse_scalar("eta", entries["eta"], float)
        if cfg.eta < 0:
            raise ConfigError(f"key 'eta': must be >= 0, got {cfg.eta}")
    if "x1" in entries:
        cfg.x1_spec = entries["x1"]

    cfg.problem_family = _require(entries, "problem.family")
    if cfg.problem_family not in FAMILIES:
        raise ConfigError(f"key 'problem.family': expected one of {FAMILIES}, "
                          f"got {cfg.problem_family!r}")
    if "problem.sigma" in entries:
        cfg.problem_sigma = _parse_scalar("problem.sigma", entries["problem.sigma"], float)
        if cfg.problem_sigma < 0:
            raise ConfigError("key 'problem.sigma': must be >= 0")
    for key, val in entries.items():
        if key.startswith("problem.") and key not in ("problem.family", "problem.sigma"):
            cfg.problem_params[key.split(".", 1)[1]] = val
    if cfg.problem_family == "linear-noise" and "a" not in cfg.problem_params:
        raise ConfigError("missing required key 'problem.a'")
    if cfg.problem_family == "shifted-norm" and "theta" not in cfg.problem_params:
        raise ConfigError("missing required key 'problem.theta'")
    if cfg.problem_family == "max-affine-noise":
        if "b" not in cfg.problem_params:
            raise ConfigError("missing required key 'problem.b'")
        if not any(k.startswith("a") and k != "a" for k in cfg.problem_params):
            raise ConfigError("max-affine-noise requires slope rows problem.a1, problem.a2, ...")

    cfg.set_kind = _require(entries, "set.kind")
    if cfg.set_kind not in ("box", "euclidean-ball", "l1-ball"):
        raise ConfigError(f"key 'set.kind': unknown kind {cfg.set_kind!r}")
    for key, val in entries.items():
        if key.startswith("set.") and key != "set.kind":
            cfg.set_params[key.split(".", 1)[1]] = val
    if cfg.set_kind == "box":
        for need in ("lo", "hi"):
            if need not in cfg.set_params:
                raise ConfigError(f"missing required key 'set.{need}'")
    else:
        if "radius" not in cfg.set_params:
            raise ConfigError("missing required key 'set.radius'")
        cfg.set_params["radius"] = _parse_scalar("set.radius", cfg.set_params["radius"], float)
        if cfg.set_params["radius"] <= 0:
            raise ConfigError("key 'set.radius': must be > 0")


def _parse_tails_keys(cfg: ExperimentConfig, entries: dict) -> None:
    cfg.tails_kinds = _parse_str_list("tails.kinds", _require(entries, "tails.kinds"))
    for kind in cfg.tails_kinds:
        if kind not in TAIL_KINDS:
            raise ConfigError(f"key 'tails.kinds': unknown kind {kind!r}")
    cfg.tails_d = _parse_int_list("tails.d", _require(entries, "tails.d"))
    if "tails.samples" in entries:
        cfg.tails_samples = _parse_scalar("tails.samples", entries["tails.samples"], int)
    if "tails.functions" in entries:
        cfg.tails_functions = _parse_str_list("tails.functions", entries["tails.functions"])
        for name in cfg.tails_functions:
            if name not in TEST_FUNCTIONS:
                raise ConfigError(f"key 'tails.functions': unknown function {name!r}; "
                                  f"expected one of {tuple(TEST_FUNCTIONS)}")


def _parse_mart_keys(cfg: ExperimentConfig, entries: dict) -> None:
    cfg.mart_laws = _parse_str_list("mart.laws", _require(entries, "mart.laws"))
    for law in cfg.mart_laws:
        if law not in INCREMENT_LAWS:
            raise ConfigError(f"key 'mart.laws': unknown law {law!r}")
    for key, attr, kind in (("mart.variance", "mart_variance", float),
                            ("mart.scale", "mart_scale", float),
                            ("mart.steps", "mart_steps", int),
                            ("mart.reps", "mart_reps", int),
                            ("mart.rho", "mart_rho", float)):
        if key in entries:
            setattr(cfg, attr, _parse_scalar(key, entries[key], kind))
    if "mart.delta" in entries:
        cfg.mart_delta = _parse_float_list("mart.delta", entries["mart.delta"])
    for dl in cfg.mart_delta:
        if not (0.0 < dl < 1.0):
            raise ConfigError(f"key 'mart.delta': values must be in (0, 1), got {dl}")


# --- hashing and atomic writes ----------------------------------------------

def config_hash(mapping: dict) -> str:
    """Stable short hash of a flat config mapping (sorted keys, floats at 17
    significant digits); identical configs hash identically across runs and
    platforms."""
    parts = []
    for key in sorted(mapping):
        val = mapping[key]
        if isinstance(val, float):
            rendered = f"{val:.17g}"
        elif isinstance(val, (list, tuple)):
            rendered = ",".join(f"{v:.17g}" if isinstance(v, float) else str(v)
                                for v in val)
        else:
            rendered = str(val)
        parts.append(f"{key}={rendered}")
    blob = "\n".join(parts).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()[:12]


def _atomic_write(path: Path, writer) -> None:
    tmp = path.with_name(path.name + f".tmp{os.getpid()}")
    try:
        writer(tmp)
        os.replace(tmp, path)
    finally:
        if tmp.exists():
            tmp.unlink()


# --- sweep driver -------------------------------------------------------------

@dataclass
class SweepResult:
    rows: list[dict]
    n_computed: int
    n_skipped: int
    errors: list[str] = field(default_factory=list)
    out_dir: Path | None = None


def _cell_mapping(cfg: ExperimentConfig, n: int, m: int, d: int, seed: int) -> dict:
    mapping = {k: v for k, v in cfg.raw.items()
               if not k.startswith("sweep.") and k not in ("out", "plot", "seed")}
    mapping.update({"n": n, "m": m, "d": d, "seed": seed, "delta": cfg.delta})
    return mapping


def _run_cell(cfg: ExperimentConfig, n: int, m: int, d: int, seed: int,
              out_dir: Path):
    mapping = _cell_mapping(cfg, n, m, d, seed)
    cell_hash = config_hash(mapping)
    trace_path = out_dir / f"trace_{cell_hash}.csv"
    run_cfg = cfg.build_run_config(n, m, d, seed)
    bound = theoretical_regret_bound(run_cfg, run_cfg.problem.L,
                                     run_cfg.feasible.diameter)
    if trace_path.exists():
        trace = None
        computed = False
        cols = read_trace_csv(trace_path)
        cum = float(cols["regret_t"].sum())
        avg = cum / n
        total_bytes = int(cols["bytes"].sum())
        f_last = float(cols["f_x_t"][-1])
    else:
        trace = run_federated(run_cfg)
        computed = True
        _atomic_write(trace_path, lambda p: write_trace_csv(trace, p))
        cum = trace.cumulative_regret
        avg = trace.average_regret
        total_bytes = trace.total_bytes
        f_last = float(trace.f_values[-1])
    row = {
        "n": n, "m": m, "d": d, "seed": seed,
        "avg_regret": avg, "cum_regret": cum, "bound": bound,
        "bytes": total_bytes, "f_last": f_last,
        "trace_file": trace_path.name,
    }
    return row, computed, trace


def run_sweep(cfg: ExperimentConfig) -> SweepResult:
    """Cartesian product over (n, m, d, seeds); resumable (cells whose trace
    file already exists are skipped) and order-independent (the aggregate
    table is sorted by cell key). Per-cell failures are recorded without
    aborting the rest of the sweep."""
    if cfg.mode == "run":
        axes = [(cfg.n, cfg.m, cfg.d, cfg.seed)]
    else:
        axes = [(n, m, d, s)
                for n in cfg.sweep_n for m in cfg.sweep_m
                for d in cfg.sweep_d for s in cfg.sweep_seeds]
    out_dir = cfg.out
    out_dir.mkdir(parents=True, exist_ok=True)
    result = SweepResult(rows=[], n_computed=0, n_skipped=0, out_dir=out_dir)

    def work(cell):
        n, m, d, seed = cell
        try:
            row, computed, _trace = _run_cell(cfg, n, m, d, seed, out_dir)
            return row, computed, None
        except Exception as exc:  # surfaced per cell, sweep continues
            return None, False, f"cell n={n} m={m} d={d} seed={seed}: {exc}"

    if cfg.sweep_workers > 1 and len(axes) > 1:
        with ThreadPoolExecutor(max_workers=cfg.sweep_workers) as pool:
            outcomes = list(pool.map(work, axes))
    else:
        outcomes = [work(cell) for cell in axes]

    for row, computed, err in outcomes:
        if err is not None:
            result.errors.append(err)
            continue
        result.rows.append(row)
        if computed:
            result.n_computed += 1
        else:
            result.n_skipped += 1
    result.rows.sort(key=lambda r: (r["n"], r["m"], r["d"], r["seed"]))

    def write_agg(path):
        cols = ["n", "m", "d", "seed", "avg_regret", "cum_regret", "bound",
                "bytes", "f_last", "trace_file"]
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(",".join(cols) + "\n")
            for row in result.rows:
                cells = [f"{row[c]:.17g}" if isinstance(row[c], float) else str(row[c])
                         for c in cols]
                fh.write(",".join(cells) + "\n")

    _atomic_write(out_dir / "results.csv", write_agg)
    return result


def fit_rate_slope(rows: list[dict], scale: str = "nm") -> RateFit:
    """OLS fit of log(average regret) vs log(n*m) or log(n); seeds are
    averaged in linear space within each (n, m, d) cell before the log."""
    if scale not in ("nm", "n"):
        raise ValueError(f"scale must be 'nm' or 'n', got {scale!r}")
    groups: dict[tuple, list[float]] = {}
    for row in rows:
        groups.setdefault((row["n"], row["m"], row["d"]), []).append(row["avg_regret"])
    points = []
    for (n, m, _d), regrets in sorted(groups.items()):
        mean_regret = float(np.mean(regrets))
        if mean_regret <= 0:
            warnings.warn(f"cell n={n} m={m}: non-positive mean regret "
                          f"{mean_regret:.3g} excluded from rate fit")
            continue
        x = math.log(n * m) if scale == "nm" else math.log(n)
        points.append((x, math.log(mean_regret)))
    if len({x for x, _ in points}) < 3:
        raise ValueError("rate fit needs at least 3 distinct scale values")
    xs = np.array([p[0] for p in points])
    ys = np.array([p[1] for p in points])
    design = np.vstack([xs, np.ones_like(xs)]).T
    (slope, intercept), *_ = np.linalg.lstsq(design, ys, rcond=None)
    resid = ys - (slope * xs + intercept)
    return RateFit(points=points, slope=float(slope), intercept=float(intercept),
                   residual_rms=float(np.sqrt(np.mean(resid ** 2))))


# --- tails / martingale drivers ------------------------------------------------

def run_tails(cfg: ExperimentConfig) -> list[TailReport]:
    reports = []
    for kind in cfg.tails_kinds:
        fns = cfg.tails_functions if kind in ("lipschitz", "norm-to-avg") else ["l2-norm"]
        for d in cfg.tails_d:
            for fn_name in fns:
                stream = RngStream(cfg.seed, worker=len(reports))
                reports.append(tail_experiment(kind, d, cfg.tails_samples, stream,
                                               fn_name=fn_name))
    return reports


@dataclass
class MartRow:
    law: str
    delta: float
    crossing_fraction: float
    se: float
    replications: int
    bound_2delta: float


def run_martingale(cfg: ExperimentConfig) -> list[MartRow]:
    rows = []
    for law_idx, law in enumerate(cfg.mart_laws):
        spec = MartingaleSpec(law=law, variance=cfg.mart_variance,
                              scale=cfg.mart_scale, steps=cfg.mart_steps,
                              replications=cfg.mart_reps)
        for delta in cfg.mart_delta:
            b = SubGammaBoundary(c=cfg.mart_scale, rho=cfg.mart_rho, delta=delta)
            # Same stream across delta values: identical paths make the
            # crossing fraction exactly monotone in delta.
            stream = RngStream(cfg.seed, worker=0, round=law_idx)
            res = boundary_coverage_experiment(spec, b, stream)
            rows.append(MartRow(law=law, delta=delta,
                                crossing_fraction=res.crossing_fraction,
                                se=res.se, replications=res.replications,
                                bound_2delta=2 * delta))
    return rows


# --- report emission -----------------------------------------------------------

def _write_tail_csv(path: Path, reports: list[TailReport]) -> None:
    def writer(p):
        with open(p, "w", encoding="utf-8") as fh:
            fh.write("kind,d,N,r,empirical,se,envelope,violated,fn\n")
            for rep in reports:
                for pt in rep.grid:
                    fh.write(f"{rep.kind},{rep.d},{rep.n_samples},"
                             f"{pt.r:.17g},{pt.empirical:.17g},{pt.se:.17g},"
                             f"{pt.envelope:.17g},{int(pt.violated)},{rep.fn_name}\n")
    _atomic_write(path, writer)


def emit_report(results, destination, figures: list[Path] | None = None) -> list[Path]:
    """Write CSV/JSON for a result object; returns the list of files written.

    ``figures`` (from the plotting helpers) are listed in the summary JSON.
    """
    dest = Path(destination)
    dest.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    figure_names = [Path(f).name for f in figures] if figures else []

    if isinstance(results, SweepResult):
        summary = {
            "cells": len(results.rows),
            "computed": results.n_computed,
            "skipped": results.n_skipped,
            "errors": results.errors,
            "figures": figure_names,
            "rows": results.rows,
        }
        try:
            summary["rate_fit_nm"] = fit_rate_slope(results.rows, "nm").__dict__
        except ValueError:
            pass
        single = [r for r in results.rows if r["m"] == 1]
        try:
            summary["rate_fit_n_single_worker"] = fit_rate_slope(single, "n").__dict__
        except ValueError:
            pass
        path = dest / "summary.json"
        _atomic_write(path, lambda p: Path(p).write_text(
            json.dumps(summary, indent=2, default=str), encoding="utf-8"))
        written.append(path)
        return written

    if isinstance(results, RunTrace):
        mapping = {"n": results.config.n, "m": results.config.m,
                   "d": results.config.d, "seed": results.config.seed,
                   "h": results.config.h, "eta": results.config.eta,
                   "delta": results.config.delta}
        run_hash = config_hash(mapping)
        trace_path = dest / f"trace_{run_hash}.csv"
        _atomic_write(trace_path, lambda p: write_trace_csv(results, p))
        written.append(trace_path)
        summary = {
            "config": mapping,
            "f_star": results.f_star,
            "cumulative_regret": results.cumulative_regret,
            "average_regret": results.average_regret,
            "regret_bound": theoretical_regret_bound(
                results.config, results.config.problem.L,
                results.config.feasible.diameter),
            "total_bytes": results.total_bytes,
            "per_worker_message_bytes": results.per_worker_message_bytes,
            "f_last_iterate": results.f_x_last,
            "f_mean_iterate": results.f_x_mean,
            "trace_file": trace_path.name,
            "figures": figure_names,
        }
        path = dest / f"summary_{run_hash}.json"
        _atomic_write(path, lambda p: Path(p).write_text(
            json.dumps(summary, indent=2), encoding="utf-8"))
        written.append(path)
        return written

    if results and isinstance(results[0], TailReport):
        by_key: dict[tuple, TailReport] = {}
        for rep in results:
            by_key[(rep.kind, rep.d, rep.fn_name)] = rep
        for (kind, d, fn_name), rep in by_key.items():
            path = dest / f"tails_{kind}_d{d}_{fn_name}.csv"
            _write_tail_csv(path, [rep])
            written.append(path)
        summary = {
            "total_violations": sum(r.violations for r in results),
            "figures": figure_names,
            "reports": [{"kind": r.kind, "d": r.d, "fn": r.fn_name,
                         "n_samples": r.n_samples, "violations": r.violations}
                        for r in results],
        }
        path = dest / "tails_summary.json"
        _atomic_write(path, lambda p: Path(p).write_text(
            json.dumps(summary, indent=2), encoding="utf-8"))
        written.append(path)
        return written

    if results and isinstance(results[0], MartRow):
        path = dest / "martingale.csv"

        def writer(p):
            with open(p, "w", encoding="utf-8") as fh:
                fh.write("law,delta,crossing_fraction,se,replications,bound_2delta\n")
                for row in results:
                    fh.write(f"{row.law},{row.delta:.17g},{row.crossing_fraction:.17g},"
                             f"{row.se:.17g},{row.replications},{row.bound_2delta:.17g}\n")
        _atomic_write(path, writer)
        written.append(path)
        summary = {"rows": [row.__dict__ for row in results]}
        spath = dest / "martingale_summary.json"
        _atomic_write(spath, lambda p: Path(p).write_text(
            json.dumps(summary, indent=2), encoding="utf-8"))
        written.append(spath)
        return written

    raise ValueError("emit_report: results must be non-empty")


def _plot_sweep(result: SweepResult, dest: Path) -> list[Path]:
    series = {}
    for row in result.rows:
        series.setdefault(row["m"], {}).setdefault(row["n"], []).append(row["avg_regret"])
    lines = []
    for m, by_n in sorted(series.items()):
        ns = sorted(by_n)
        lines.append((f"m={m}", ns, [float(np.mean(by_n[n])) for n in ns]))
    path = dest / "regret_vs_n.svg"
    write_line_svg(path, lines, title="average regret vs rounds",
                   xlabel="n", ylabel="average regret", logx=True, logy=True)
    return [path]


def _plot_trace(trace: RunTrace, dest: Path, run_hash: str) -> list[Path]:
    t = np.arange(1, trace.config.n + 1)
    running_avg = np.cumsum(trace.regrets) / t
    path = dest / f"regret_{run_hash}.svg"
    write_line_svg(path, [("running avg regret", t, running_avg)],
                   title="running average regret", xlabel="round",
                   ylabel="avg regret", logx=True, logy=True)
    return [path]


def _plot_tails(reports: list[TailReport], dest: Path) -> list[Path]:
    written = []
    for rep in reports:
        informative = [(p.r, max(p.empirical, 1e-7), max(p.envelope, 1e-7))
                       for p in rep.grid]
        rs = [p[0] for p in informative]
        path = dest / f"tails_{rep.kind}_d{rep.d}_{rep.fn_name}.svg"
        write_line_svg(path, [("empirical", rs, [p[1] for p in informative]),
                              ("envelope", rs, [p[2] for p in informative])],
                       title=f"{rep.kind} tails, d={rep.d}",
                       xlabel="radius", ylabel="tail probability",
                       logx=True, logy=True)
        written.append(path)
    return written


# --- entry point ----------------------------------------------------------------

def _cmd_run(cfg: ExperimentConfig) -> int:
    run_cfg = cfg.build_run_config(cfg.n, cfg.m, cfg.d, cfg.seed)
    trace = run_federated(run_cfg)
    cfg.out.mkdir(parents=True, exist_ok=True)
    figures = []
    if cfg.plot:
        mapping = {"n": cfg.n, "m": cfg.m, "d": cfg.d, "seed": cfg.seed,
                   "h": run_cfg.h, "eta": run_cfg.eta, "delta": cfg.delta}
        figures = _plot_trace(trace, cfg.out, config_hash(mapping))
    files = emit_report(trace, cfg.out, figures=figures) + figures
    print(f"run complete: avg regret {trace.average_regret:.6g}, "
          f"{trace.total_bytes} bytes; wrote {len(files)} file(s) to {cfg.out}")
    return 0


def _cmd_sweep(cfg: ExperimentConfig) -> int:
    result = run_sweep(cfg)
    figures = _plot_sweep(result, cfg.out) if (cfg.plot and result.rows) else []
    files = emit_report(result, cfg.out, figures=figures) + figures
    print(f"sweep complete: {result.n_computed} computed, {result.n_skipped} skipped, "
          f"{len(result.errors)} failed; wrote {len(files) + len(result.rows)} file(s) "
          f"to {cfg.out}")
    for err in result.errors:
        print(f"  error: {err}", file=sys.stderr)
    return 1 if result.errors else 0


def _cmd_tails(cfg: ExperimentConfig) -> int:
    reports = run_tails(cfg)
    cfg.out.mkdir(parents=True, exist_ok=True)
    figures = _plot_tails(reports, cfg.out) if cfg.plot else []
    files = emit_report(reports, cfg.out, figures=figures) + figures
    total = sum(r.violations for r in reports)
    print(f"tails complete: {len(reports)} report(s), {total} violation(s); "
          f"wrote {len(files)} file(s) to {cfg.out}")
    return 0


def _cmd_martingale(cfg: ExperimentConfig) -> int:
    rows = run_martingale(cfg)
    files = emit_report(rows, cfg.out)
    worst = max((r.crossing_fraction - r.bound_2delta for r in rows), default=0.0)
    print(f"martingale complete: {len(rows)} setting(s), worst excess "
          f"{worst:.4g}; wrote {len(files)} file(s) to {cfg.out}")
    return 0


def _cmd_report(directory: str, plot: bool) -> int:
    src = Path(directory)
    results_csv = src / "results.csv"
    if not results_csv.exists():
        raise ConfigError(f"no results.csv found in {src}")
    from .engine import read_trace_csv  # reuse float parsing rules
    with open(results_csv, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        rows = []
        for line in fh:
            parts = line.strip().split(",")
            if not parts or parts == [""]:
                continue
            row = dict(zip(header, parts))
            for key in ("n", "m", "d", "seed", "bytes"):
                row[key] = int(row[key])
            for key in ("avg_regret", "cum_regret", "bound", "f_last"):
                row[key] = float(row[key])
            rows.append(row)
    result = SweepResult(rows=rows, n_computed=0, n_skipped=len(rows), out_dir=src)
    figures = _plot_sweep(result, src) if (plot and rows) else []
    files = emit_report(result, src, figures=figures) + figures
    print(f"report complete: {len(rows)} row(s); wrote {len(files)} file(s) to {src}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="fedzo",
        description="federated zero-order optimization experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in MODES:
        p = sub.add_parser(name, help=f"{name} experiment from a config file")
        p.add_argument("config", help="path to the config document")
        p.add_argument("--seed", type=int, default=None, help="override config seed")
        p.add_argument("--out", default=None, help="override output directory")
    p = sub.add_parser("report", help="re-emit reports from a results directory")
    p.add_argument("directory", help="directory containing results.csv")
    p.add_argument("--plot", action="store_true", help="also write SVG plots")

    args = parser.parse_args(argv)
    try:
        if args.command == "report":
            return _cmd_report(args.directory, args.plot)
        text = Path(args.config).read_text(encoding="utf-8")
        cfg = parse_config(text, mode=args.command)
        if args.seed is not None:
            cfg.seed = args.seed
        if args.out is not None:
            cfg.out = Path(args.out)
        dispatch = {"run": _cmd_run, "sweep": _cmd_sweep,
                    "tails": _cmd_tails, "martingale": _cmd_martingale}
        return dispatch[args.command](cfg)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
