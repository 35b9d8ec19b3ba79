"""Empirical verification of the explicit-constant tail envelopes.

Five statistics of a standard Laplace vector x with S = sum |x_j| are
compared against their printed exponential envelopes on a log radius grid:

=============  ====================================  =============================
kind           statistic                             envelope (clamped at 1)
=============  ====================================  =============================
ratio          ||x||_2 / S                           17.1 exp(-0.011 r d)
avg            |S/d - 1|                             2 exp(-d min(r, r^2) / 16)
avg-sqrt       |S/d - 1|                             2 exp(-sqrt(d) r / 16)
lipschitz      |f(x/S) - mean f(x/S)|                361 exp(-0.003 r d)
norm-to-avg    |f(x/S) - f(x/d)|                     88 exp(-0.018 r d)
=============  ====================================  =============================

Validity: the ratio envelope needs integer d >= 2 and r >= 16/sqrt(d) (the
statistic never exceeds 1, so d = 1 leaves no admissible radius at all); the
norm-to-avg envelope holds for 0 < r <= 2; the rest hold for every r > 0. A
grid point counts as a violation only when the envelope is informative
(< 1) and the empirical tail exceeds it by more than three binomial standard
errors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .estimator import SmoothedOracle, smoothed_grad_mc
from .geometry import laplace_from_uniform, sample_l1_sphere
from .objectives import Problem, eval_context_batch, sample_context
from .streams import resolve_generator

__all__ = [
    "TAIL_KINDS",
    "TEST_FUNCTIONS",
    "TailReport",
    "MomentReport",
    "envelope",
    "empirical_tail",
    "tail_experiment",
    "moment_check",
]

TAIL_KINDS = ("ratio", "avg", "avg-sqrt", "lipschitz", "norm-to-avg")

# amplitude, rate for the pure-exponential envelopes
_EXP_ENVELOPES = {
    "ratio": (17.1, 0.011),
    "lipschitz": (361.0, 0.003),
    "norm-to-avg": (88.0, 0.018),
}

_RATIO_MIN_R_COEF = 16.0     # ratio validity: r >= 16 / sqrt(d)
_NORM_TO_AVG_MAX_R = 2.0
_AVG_RATE = 1.0 / 16.0

_GRID_SIZE = 50
_GRID_FLOOR_EPS = 1e-8       # grid upper end: envelope has decayed to this
_MIN_SAMPLES = 10_000

# 1-Lipschitz test functions on the l1 sphere (w.r.t. the euclidean norm).
TEST_FUNCTIONS = {
    "l2-norm": lambda z: np.linalg.norm(z, axis=-1),
    "first-coord": lambda z: z[..., 0],
    "max-coord": lambda z: z.max(axis=-1),
}


def _check_validity(kind: str, r: float, d: int) -> None:
    if kind not in TAIL_KINDS:
        raise ValueError(f"unknown envelope kind {kind!r}; expected one of {TAIL_KINDS}")
    if d < 1:
        raise ValueError(f"d must be >= 1, got {d}")
    if r <= 0:
        raise ValueError(f"r must be > 0, got {r}")
    if kind == "ratio":
        if d < 2:
            raise ValueError(
                "ratio envelope requires integer d >= 2: the statistic "
                "||x||_2/S never exceeds 1 while validity needs r >= 16, so "
                "d = 1 has an empty admissible radius range")
        if r < _RATIO_MIN_R_COEF / math.sqrt(d):
            raise ValueError(
                f"ratio envelope requires r >= 16/sqrt(d) = "
                f"{_RATIO_MIN_R_COEF / math.sqrt(d):.6g}, got {r:.6g}")
    if kind == "norm-to-avg" and r > _NORM_TO_AVG_MAX_R:
        raise ValueError(f"norm-to-avg envelope requires r <= 2, got {r:.6g}")


def envelope(kind: str, r: float, d: int) -> float:
    """The printed tail envelope at radius r, clamped at 1 for reporting."""
    _check_validity(kind, r, d)
    if kind in _EXP_ENVELOPES:
        amp, rate = _EXP_ENVELOPES[kind]
        val = amp * math.exp(-rate * r * d)
    elif kind == "avg":
        val = 2.0 * math.exp(-_AVG_RATE * d * min(r, r * r))
    else:  # avg-sqrt
        val = 2.0 * math.exp(-_AVG_RATE * math.sqrt(d) * r)
    return min(val, 1.0)


def _envelope_crossing(kind: str, d: int, eps: float) -> float:
    """Radius at which the (unclamped) envelope equals eps."""
    if kind in _EXP_ENVELOPES:
        amp, rate = _EXP_ENVELOPES[kind]
        return math.log(amp / eps) / (rate * d)
    target = math.log(2.0 / eps) / _AVG_RATE  # d*min(r,r^2) or sqrt(d)*r = target
    if kind == "avg":
        frac = target / d
        return math.sqrt(frac) if frac <= 1.0 else frac
    return target / math.sqrt(d)


def _grid_range(kind: str, d: int):
    if kind == "ratio":
        lo = _RATIO_MIN_R_COEF / math.sqrt(d)
    else:
        # Include a shoulder of vacuous (envelope >= 1) points for reporting.
        lo = max(min(_envelope_crossing(kind, d, 1.0) / 4.0, 0.05), 1e-6)
    hi = _envelope_crossing(kind, d, _GRID_FLOOR_EPS)
    if kind == "norm-to-avg":
        hi = min(hi, _NORM_TO_AVG_MAX_R)
    if hi <= lo:
        raise ValueError(f"empty admissible radius grid for kind={kind!r}, d={d}")
    return lo, hi


def empirical_tail(samples, r_grid):
    """Fraction of samples strictly above each radius, with binomial SE.

    Returns a list of (r, fraction, se); the grid must be sorted ascending.
    """
    samples = np.asarray(samples, dtype=np.float64)
    if samples.size == 0:
        raise ValueError("samples must be non-empty")
    r_grid = np.asarray(r_grid, dtype=np.float64)
    if (np.diff(r_grid) < 0).any():
        raise ValueError("radius grid must be sorted ascending")
    n = samples.size
    out = []
    for r in r_grid:
        frac = float((samples > r).mean())
        se = math.sqrt(frac * (1.0 - frac) / n)
        out.append((float(r), frac, se))
    return out


@dataclass
class TailGridPoint:
    r: float
    empirical: float
    se: float
    envelope: float
    vacuous: bool      # envelope clamped at 1: excluded from violation counting
    violated: bool


@dataclass
class TailReport:
    kind: str
    d: int
    n_samples: int
    seed_info: str
    fn_name: str
    grid: list[TailGridPoint] = field(default_factory=list)

    @property
    def violations(self) -> int:
        return sum(p.violated for p in self.grid)


def _draw_laplace_matrix(gen, n: int, d: int) -> np.ndarray:
    x = laplace_from_uniform(gen.uniform(size=(n, d)))
    s = np.abs(x).sum(axis=1)
    while (bad := s == 0.0).any():
        x[bad] = laplace_from_uniform(gen.uniform(size=(int(bad.sum()), d)))
        s = np.abs(x).sum(axis=1)
    return x


def tail_experiment(kind: str, d: int, n_samples: int, stream, fn=None,
                    fn_name: str = "l2-norm") -> TailReport:
    """Draw Laplace vectors, compute the kind's statistic, and compare its
    empirical tail against the envelope on a 50-point log grid.

    For the lipschitz kind the centering mean is estimated from an
    independent batch of the same size; its standard error is folded into
    the slack by shifting each radius down by four of those standard errors
    before looking up the envelope.
    """
    if n_samples < _MIN_SAMPLES:
        raise ValueError(f"need at least {_MIN_SAMPLES} samples, got {n_samples}")
    _check_validity(kind, 1e-9 if kind != "ratio" else _RATIO_MIN_R_COEF / math.sqrt(max(d, 1)), d)
    if fn is None:
        fn = TEST_FUNCTIONS[fn_name]
    gen = resolve_generator(stream)
    lo, hi = _grid_range(kind, d)
    r_grid = np.exp(np.linspace(math.log(lo), math.log(hi), _GRID_SIZE))

    x = _draw_laplace_matrix(gen, n_samples, d)
    s = np.abs(x).sum(axis=1)
    center_se = 0.0
    if kind == "ratio":
        stat = np.linalg.norm(x, axis=1) / s
    elif kind in ("avg", "avg-sqrt"):
        stat = np.abs(s / d - 1.0)
    elif kind == "lipschitz":
        vals = fn(x / s[:, None])
        x2 = _draw_laplace_matrix(gen, n_samples, d)
        ref = fn(x2 / np.abs(x2).sum(axis=1)[:, None])
        center = ref.mean()
        center_se = float(ref.std(ddof=1) / math.sqrt(n_samples))
        stat = np.abs(vals - center)
    else:  # norm-to-avg
        stat = np.abs(fn(x / s[:, None]) - fn(x / d))

    report = TailReport(kind=kind, d=d, n_samples=n_samples,
                        seed_info=repr(stream), fn_name=fn_name)
    for r, frac, se in empirical_tail(stat, r_grid):
        r_eff = max(r - 4.0 * center_se, lo)
        env = envelope(kind, r_eff, d)
        vacuous = env >= 1.0
        violated = (not vacuous) and (frac - 3.0 * se > env)
        report.grid.append(TailGridPoint(r=r, empirical=frac, se=se,
                                         envelope=env, vacuous=vacuous,
                                         violated=violated))
    return report


# --- moment bounds for the two-point estimator ------------------------------

_MAX_MOMENT_P = 8
_LEMMA4_COEF = 18.0 * (1.0 + math.sqrt(2.0)) ** 2  # ~104.9


def moment_bound(p: int, d: int, L: float) -> float:
    """Bound on E||g - grad S_h(x)||^p:
    ((2L)^p / 2) * (361 * p! * (sqrt(d)/0.003)^p + 1)."""
    return ((2.0 * L) ** p / 2.0) * (361.0 * math.factorial(p)
                                     * (math.sqrt(d) / 0.003) ** p + 1.0)


@dataclass
class MomentPointResult:
    x: np.ndarray
    moment_p: float            # empirical E||g - grad_hat||^p
    bound_p: float
    second_moment_raw: float   # empirical E||g||^2 (p = 2 only, else nan)
    lemma_bound_raw: float     # 18(1+sqrt 2)^2 L^2 d
    second_moment_centered: float
    centered_bound: float      # 211 L^2 d

    @property
    def ok(self) -> bool:
        fine = self.moment_p <= self.bound_p
        if not math.isnan(self.second_moment_raw):
            fine = fine and self.second_moment_raw <= self.lemma_bound_raw
            fine = fine and self.second_moment_centered <= self.centered_bound
        return fine


@dataclass
class MomentReport:
    p: int
    d: int
    h: float
    L: float
    n_samples: int
    points: list[MomentPointResult] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(pt.ok for pt in self.points)


def moment_check(p: int, d: int, h: float, L: float, n_samples: int,
                 problem: Problem, stream, n_points: int = 3) -> MomentReport:
    """Empirical p-th moments of the centered estimate at random points in
    the unit ball, against the factorial bound (and for p = 2 also against
    the raw second-moment bound 18(1+sqrt 2)^2 L^2 d and the centered bound
    211 L^2 d)."""
    if p < 2 or p > _MAX_MOMENT_P:
        raise ValueError(f"p must be in [2, {_MAX_MOMENT_P}], got {p}")
    if n_samples < 100_000:
        raise ValueError(f"need at least 100000 samples, got {n_samples}")
    if problem.d != d:
        raise ValueError(f"problem dimension {problem.d} != d = {d}")
    gen = resolve_generator(stream)
    report = MomentReport(p=p, d=d, h=h, L=L, n_samples=n_samples)
    oracle = SmoothedOracle(problem=problem, h=h, n_samples=200_000)
    for _ in range(n_points):
        v = gen.normal(size=d)
        x = v / np.linalg.norm(v) * gen.uniform()  # random point in the unit ball
        grad_hat, _se = smoothed_grad_mc(oracle, x, gen, use_contexts=True)
        zeta = sample_l1_sphere(d, gen, size=n_samples)
        cs = sample_context(problem, gen, size=n_samples)
        diff = (eval_context_batch(problem, cs, x + h * zeta)
                - eval_context_batch(problem, cs, x - h * zeta))
        g = (d / (2.0 * h)) * diff[:, None] * np.where(zeta >= 0.0, 1.0, -1.0)
        norms_raw_sq = (g * g).sum(axis=1)
        centered = g - grad_hat
        norms_c = np.sqrt((centered * centered).sum(axis=1))
        if p == 2:
            raw2 = float(norms_raw_sq.mean())
        else:
            raw2 = math.nan
        report.points.append(MomentPointResult(
            x=x,
            moment_p=float((norms_c ** p).mean()),
            bound_p=moment_bound(p, d, L),
            second_moment_raw=raw2,
            lemma_bound_raw=_LEMMA4_COEF * L * L * d,
            second_moment_centered=float((norms_c ** 2).mean()),
            centered_bound=211.0 * L * L * d,
        ))
    return report
