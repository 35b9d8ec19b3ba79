"""Federated round engine: broadcast, parallel workers, aggregation,
projected step, and trace collection; plus the closed-form regret bound and
variance/deviation budgets used to judge runs.

Per round t the server broadcasts x_t; worker j draws its direction and
context from the stream keyed (seed, j, t), evaluates the objective at
x_t +- h*zeta, and ships the sign-compressed message; the server decodes,
averages in worker order, steps by eta and projects. Traces are a
deterministic function of the config: the same config produces bit-identical
traces in sequential, thread-parallel, compiled, and fallback execution.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .estimator import (
    SmoothedOracle,
    WorkerMessage,
    decode_message,
    encode_message,
    message_num_bytes,
)
from .geometry import FeasibleSet, project, sample_l1_sphere
from .objectives import (
    Problem,
    eval_context,
    eval_context_batch,
    minimizer,
    population_value_batch,
    sample_context,
)
from .streams import RngStream, StreamPool

__all__ = [
    "RunConfig",
    "RoundRecord",
    "RunTrace",
    "run_federated",
    "run_direct",
    "default_hyperparams",
    "regret_bound_formula",
    "theoretical_regret_bound",
    "variance_budget",
    "deviation_budget",
    "deviation_and_variance_budgets",
    "measure_deviation",
    "write_trace_csv",
    "read_trace_csv",
]

# Explicit constants of the high-probability guarantees.
VARIANCE_C1 = (2.0 / 0.003) ** 2
VARIANCE_C2 = 1448.0
SECOND_MOMENT_COEF = 211.0
DEVIATION_SCALE_COEF = 19811.0

# Worker index offset for diagnostic streams so they never collide with the
# per-(worker, round) streams of an actual run.
_DIAG_WORKER_BASE = 1 << 48

_FEASIBILITY_TOL = 1e-9


@dataclass(frozen=True)
class RunConfig:
    """Full specification of one federated run."""

    n: int
    m: int
    problem: Problem
    feasible: FeasibleSet
    h: float
    eta: float
    x1: np.ndarray
    delta: float = 0.1
    seed: int = 0

    @property
    def d(self) -> int:
        return self.problem.d

    def validate(self) -> None:
        if self.n < 1 or self.m < 1:
            raise ValueError(f"n and m must be >= 1, got n={self.n}, m={self.m}")
        if self.h <= 0:
            raise ValueError(f"h must be > 0, got {self.h}")
        if self.eta < 0:
            raise ValueError(f"eta must be >= 0, got {self.eta}")
        if not (0.0 < self.delta < 1.0):
            raise ValueError(f"delta must be in (0, 1), got {self.delta}")
        if self.feasible.dim != self.problem.d:
            raise ValueError("feasible set and problem dimensions differ")
        x1 = np.asarray(self.x1, dtype=np.float64)
        if x1.shape != (self.problem.d,):
            raise ValueError(f"x1 must have shape ({self.problem.d},)")
        if not self.feasible.contains(x1, tol=_FEASIBILITY_TOL):
            raise ValueError("x1 is not inside the feasible set")


@dataclass(frozen=True)
class RoundRecord:
    t: int
    x: np.ndarray
    g: np.ndarray
    f_value: float
    regret: float
    g_norm_sq: float
    per_worker_bytes: int


@dataclass
class RunTrace:
    """Everything recorded over a run, plus summary statistics."""

    config: RunConfig
    xs: np.ndarray        # (n, d) iterates x_1..x_n
    gs: np.ndarray        # (n, d) aggregated gradient estimates
    deltas: np.ndarray    # (n, m) per-worker evaluation differences
    f_values: np.ndarray  # (n,) population objective at each iterate
    x_star: np.ndarray
    f_star: float
    regrets: np.ndarray = field(init=False)

    def __post_init__(self):
        self.regrets = self.f_values - self.f_star

    @property
    def cumulative_regret(self) -> float:
        return float(self.regrets.sum())

    @property
    def average_regret(self) -> float:
        return self.cumulative_regret / self.config.n

    @property
    def per_worker_message_bytes(self) -> int:
        return message_num_bytes(self.config.d)

    @property
    def total_bytes(self) -> int:
        return self.config.n * self.config.m * self.per_worker_message_bytes

    @property
    def x_last(self) -> np.ndarray:
        return self.xs[-1]

    @property
    def x_mean(self) -> np.ndarray:
        return self.xs.mean(axis=0)

    @property
    def f_x_last(self) -> float:
        return float(self.f_values[-1])

    @property
    def f_x_mean(self) -> float:
        from .objectives import population_value
        return population_value(self.config.problem, self.x_mean)

    def round(self, t: int) -> RoundRecord:
        return RoundRecord(
            t=t + 1,
            x=self.xs[t],
            g=self.gs[t],
            f_value=float(self.f_values[t]),
            regret=float(self.regrets[t]),
            g_norm_sq=float((self.gs[t] ** 2).sum()),
            per_worker_bytes=self.per_worker_message_bytes,
        )

    def records(self):
        return [self.round(t) for t in range(self.config.n)]


def _fill_draws(cfg: RunConfig, zetas: np.ndarray, ctxs: np.ndarray,
                rounds: range, pool: StreamPool) -> None:
    """Populate direction/context draws for the given rounds.

    Per (worker, round) cell the stream yields the sphere direction first and
    the context second; with sigma = 0 no context draws are consumed.
    """
    p = cfg.problem
    for t in rounds:
        for j in range(cfg.m):
            gen = pool.generator_for(j, t)
            zetas[t, j] = sample_l1_sphere(p.d, gen)
            ctxs[t, j] = sample_context(p, gen)


def _precompute_draws(cfg: RunConfig, parallel: bool):
    zetas = np.empty((cfg.n, cfg.m, cfg.d))
    ctxs = np.zeros((cfg.n, cfg.m, cfg.d))
    if parallel and cfg.n >= 8:
        n_chunks = min(8, cfg.n)
        bounds = np.linspace(0, cfg.n, n_chunks + 1).astype(int)
        with ThreadPoolExecutor(max_workers=n_chunks) as pool_exec:
            futures = [
                pool_exec.submit(_fill_draws, cfg, zetas, ctxs,
                                 range(bounds[k], bounds[k + 1]),
                                 StreamPool(cfg.seed))
                for k in range(n_chunks)
            ]
            for fut in futures:
                fut.result()
    else:
        _fill_draws(cfg, zetas, ctxs, range(cfg.n), StreamPool(cfg.seed))
    return zetas, ctxs


def run_federated(cfg: RunConfig, parallel: bool = False) -> RunTrace:
    """Execute the federated loop; the trace is a deterministic function of
    the config (``parallel`` only affects scheduling, never results)."""
    cfg.validate()
    x1 = np.asarray(cfg.x1, dtype=np.float64)
    x_star, f_star = minimizer(cfg.problem, cfg.feasible)
    zetas, ctxs = _precompute_draws(cfg, parallel)
    set_kind, sp1, sp2, radius = cfg.feasible.kernel_args()
    xs, gs, deltas, status, bad_t, bad_j = _kernels.simulate_rounds(
        zetas, ctxs, x1, cfg.h, cfg.eta,
        cfg.problem.family_code, cfg.problem.mat, cfg.problem.vec,
        set_kind, sp1, sp2, radius,
    )
    if status != _kernels.STATUS_OK:
        raise RuntimeError(
            f"non-finite function value at round {bad_t + 1}, worker {bad_j + 1}; "
            f"h={cfg.h}, eta={cfg.eta}")
    f_values = population_value_batch(cfg.problem, xs)
    if not np.isfinite(f_values).all():
        bad = int(np.flatnonzero(~np.isfinite(f_values))[0])
        raise RuntimeError(f"non-finite population value at round {bad + 1}")
    return RunTrace(config=cfg, xs=xs, gs=gs, deltas=deltas,
                    f_values=f_values, x_star=x_star, f_star=f_star)


def run_direct(cfg: RunConfig) -> RunTrace:
    """Single-machine reference loop (m = 1) routed through the actual wire
    codec; byte-identical to :func:`run_federated` at the same config."""
    cfg.validate()
    if cfg.m != 1:
        raise ValueError("the direct loop is the single-worker (m = 1) reference")
    p = cfg.problem
    d = p.d
    x = np.asarray(cfg.x1, dtype=np.float64).copy()
    x_star, f_star = minimizer(p, cfg.feasible)
    pool = StreamPool(cfg.seed)
    xs = np.empty((cfg.n, d))
    gs = np.empty((cfg.n, d))
    deltas = np.empty((cfg.n, 1))
    for t in range(cfg.n):
        xs[t] = x
        gen = pool.generator_for(0, t)
        zeta = sample_l1_sphere(d, gen)
        c = sample_context(p, gen)
        y = eval_context(p, c, x + cfg.h * zeta)
        y_prime = eval_context(p, c, x - cfg.h * zeta)
        wire = encode_message(y, y_prime, zeta).to_bytes()
        msg = WorkerMessage.from_bytes(wire, d)
        g = decode_message(msg, d, cfg.h) / 1  # single-worker aggregate
        deltas[t, 0] = msg.delta
        gs[t] = g
        x = project(cfg.feasible, x - cfg.eta * g)
    f_values = population_value_batch(p, xs)
    return RunTrace(config=cfg, xs=xs, gs=gs, deltas=deltas,
                    f_values=f_values, x_star=x_star, f_star=f_star)


def default_hyperparams(L: float, D: float, d: int, n: int, m: int):
    """Perturbation and step size achieving the sqrt(d/(n m)) regret rate:
    h = (1/L) sqrt((d+1)/n), eta = (1/L) sqrt(m/(n d))."""
    if min(L, D) <= 0 or min(d, n, m) <= 0:
        raise ValueError("all hyperparameter inputs must be positive")
    h = (1.0 / L) * math.sqrt((d + 1) / n)
    eta = (1.0 / L) * math.sqrt(m / (n * d))
    return h, eta


def regret_bound_formula(n: int, m: int, d: int, h: float, eta: float,
                         delta: float, L: float, D: float) -> float:
    """High-probability bound on the cumulative regret sum_t(f(x_t) - f(x*)),
    holding with probability at least 1 - delta.

    Evaluated literally as stated, including the explicit constants
    C1 = (2/0.003)^2, C2 = 1448 and L1 = 2 log(1 + 211 n m); h = 0 is allowed
    here (the smoothing term vanishes)."""
    if eta <= 0:
        return math.inf
    log4n = math.log(4.0 * n / delta)
    l1_const = 2.0 * math.log(1.0 + SECOND_MOMENT_COEF * n * m)
    log_dev = math.log(2.0 * l1_const / delta)
    stability = D * D / (2.0 * eta)
    smoothing = (2.0 * L * h / math.sqrt(d + 1.0) + L * L * eta) * n
    variance = (eta * n * VARIANCE_C1 * L * L * d
                * ((log4n / m) ** 2 + (VARIANCE_C2 / m) * log4n))
    deviation = (4.0 * D * L * math.sqrt(d)
                 * (math.sqrt(SECOND_MOMENT_COEF / (n * m) * log_dev)
                    + (DEVIATION_SCALE_COEF / m) * log_dev))
    return stability + smoothing + variance + deviation


def theoretical_regret_bound(cfg: RunConfig, L: float, D: float) -> float:
    return regret_bound_formula(cfg.n, cfg.m, cfg.d, cfg.h, cfg.eta,
                                cfg.delta, L, D)


def variance_budget(n: int, m: int, d: int, delta: float, L: float) -> float:
    """Budget dominating sum_t ||g_t - grad S_h(x_t)||^2 with probability
    at least 1 - delta."""
    lg = math.log(2.0 * n / delta)
    return n * VARIANCE_C1 * L * L * d * (lg * lg / (m * m) + (VARIANCE_C2 / m) * lg)


def deviation_budget(n: int, m: int, d: int, delta: float, L: float, D: float) -> float:
    """Budget dominating the per-round average deviation
    |(1/n) sum_t <g_t - grad S_h(x_t), x_t - x>| with probability >= 1 - delta."""
    l1_const = 2.0 * math.log(1.0 + SECOND_MOMENT_COEF * n * m)
    lg = math.log(l1_const / delta)
    return (4.0 * D * L * math.sqrt(d)
            * (math.sqrt(SECOND_MOMENT_COEF / (n * m) * lg)
               + (DEVIATION_SCALE_COEF / (n * m)) * lg))


def deviation_and_variance_budgets(cfg: RunConfig, L: float, D: float):
    """(variance budget, deviation budget) at the config's n, m, d, delta."""
    return (variance_budget(cfg.n, cfg.m, cfg.d, cfg.delta, L),
            deviation_budget(cfg.n, cfg.m, cfg.d, cfg.delta, L, D))


def measure_deviation(trace: RunTrace, oracle: SmoothedOracle, x_ref):
    """|sum_t <g_t - grad S_h(x_t), x_t - x_ref>| with Monte Carlo uncertainty.

    grad S_h(x_t) is not available in closed form, so each round's term
    projects fresh two-point estimates onto x_t - x_ref and uses their sample
    mean; the returned uncertainty combines the per-round standard errors in
    quadrature (rounds use disjoint streams).
    """
    cfg = trace.config
    x_ref = np.asarray(x_ref, dtype=np.float64)
    p = oracle.problem
    total = 0.0
    var_total = 0.0
    for t in range(cfg.n):
        w = trace.xs[t] - x_ref
        realized = float(trace.gs[t] @ w)
        gen = RngStream(cfg.seed, worker=_DIAG_WORKER_BASE, round=t).generator()
        n_mc = oracle.n_samples
        zeta = sample_l1_sphere(p.d, gen, size=n_mc)
        cs = sample_context(p, gen, size=n_mc)
        x_plus = trace.xs[t] + oracle.h * zeta
        x_minus = trace.xs[t] - oracle.h * zeta
        diff = eval_context_batch(p, cs, x_plus) - eval_context_batch(p, cs, x_minus)
        proj = (p.d / (2.0 * oracle.h)) * diff * (np.where(zeta >= 0.0, 1.0, -1.0) @ w)
        mu = proj.mean()
        se = proj.std(ddof=1) / math.sqrt(n_mc) if n_mc > 1 else math.inf
        total += realized - mu
        var_total += se * se
    return abs(total), math.sqrt(var_total)


def write_trace_csv(trace: RunTrace, path) -> None:
    """Columns: t, x0..x{d-1}, f_x_t, regret_t, g_norm_sq, bytes; floats are
    written with 17 significant digits so parsing them back is exact."""
    d = trace.config.d
    per_round_bytes = trace.config.m * trace.per_worker_message_bytes
    header = ["t"] + [f"x{i}" for i in range(d)] + ["f_x_t", "regret_t", "g_norm_sq", "bytes"]
    g_norm_sq = (trace.gs ** 2).sum(axis=1)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for t in range(trace.config.n):
            cells = [str(t + 1)]
            cells += [f"{v:.17g}" for v in trace.xs[t]]
            cells.append(f"{trace.f_values[t]:.17g}")
            cells.append(f"{trace.regrets[t]:.17g}")
            cells.append(f"{g_norm_sq[t]:.17g}")
            cells.append(str(per_round_bytes))
            fh.write(",".join(cells) + "\n")


def read_trace_csv(path) -> dict:
    """Parse a trace CSV back into column arrays (exact float round trip)."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    cols = {name: np.array([float(r[i]) for r in rows]) for i, name in enumerate(header)}
    cols["t"] = cols["t"].astype(int)
    cols["bytes"] = cols["bytes"].astype(int)
    return cols
