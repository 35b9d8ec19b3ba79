"""Contextual convex Lipschitz objective families.

Three families with exactly known Lipschitz constants and closed-form (or
registered high-accuracy numeric) population objectives:

* ``linear-noise``      f_c(x) = <a + c, x>,              L = ||a|| + sigma*sqrt(d)
* ``shifted-norm``      f_c(x) = ||x - theta - c||,        L = 1
* ``max-affine-noise``  f_c(x) = max_k(<a_k,x> + b_k) + <c,x>,
                                                           L = max_k ||a_k|| + sigma*sqrt(d)

Contexts c are uniform on [-sigma, sigma]^d (mean zero, bounded support), so
each f_c is convex and L-Lipschitz for every realizable context.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from . import _kernels
from .geometry import FeasibleSet, project
from .streams import resolve_generator

__all__ = [
    "Problem",
    "make_problem",
    "sample_context",
    "eval_context",
    "population_value",
    "minimizer",
    "SHIFTED_NORM_QUAD_TOL",
]

FAMILIES = ("linear-noise", "shifted-norm", "max-affine-noise")

# Accuracy of the numeric expectation used for the shifted-norm population
# objective when sigma > 0.
SHIFTED_NORM_QUAD_TOL = 1e-6

_FAMILY_CODES = {
    "linear-noise": _kernels.FAMILY_LINEAR,
    "shifted-norm": _kernels.FAMILY_SHIFTED_NORM,
    "max-affine-noise": _kernels.FAMILY_MAX_AFFINE,
}


@dataclass(frozen=True)
class Problem:
    """One objective family instance with its exact Lipschitz constant."""

    family: str
    d: int
    mat: np.ndarray    # (K, d): linear row a / shifted-norm row theta / max-affine slopes
    vec: np.ndarray    # (K,): max-affine offsets, zeros otherwise
    sigma: float       # context scale, contexts uniform on [-sigma, sigma]^d
    L: float

    @property
    def family_code(self) -> int:
        return _FAMILY_CODES[self.family]


def make_problem(family: str, d: int, *, a=None, theta=None, slopes=None,
                 offsets=None, noise_scale: float = 0.0) -> Problem:
    """Build a :class:`Problem` and compute its Lipschitz constant exactly."""
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}; expected one of {FAMILIES}")
    if d < 1:
        raise ValueError(f"d must be >= 1, got {d}")
    sigma = float(noise_scale)
    if sigma < 0:
        raise ValueError(f"noise_scale must be >= 0, got {sigma}")

    if family == "linear-noise":
        if a is None:
            raise ValueError("linear-noise requires coefficient vector a")
        a = np.asarray(a, dtype=np.float64)
        if a.shape != (d,):
            raise ValueError(f"a must have shape ({d},), got {a.shape}")
        mat = a.reshape(1, d)
        vec = np.zeros(1)
        lip = float(np.linalg.norm(a)) + sigma * np.sqrt(d)
    elif family == "shifted-norm":
        if theta is None:
            raise ValueError("shifted-norm requires center vector theta")
        theta = np.asarray(theta, dtype=np.float64)
        if theta.shape != (d,):
            raise ValueError(f"theta must have shape ({d},), got {theta.shape}")
        mat = theta.reshape(1, d)
        vec = np.zeros(1)
        lip = 1.0
    else:
        if slopes is None or offsets is None:
            raise ValueError("max-affine-noise requires slopes (K, d) and offsets (K,)")
        slopes = np.asarray(slopes, dtype=np.float64)
        offsets = np.asarray(offsets, dtype=np.float64)
        if slopes.ndim != 2 or slopes.shape[1] != d or slopes.shape[0] < 1:
            raise ValueError(f"slopes must have shape (K>=1, {d}), got {slopes.shape}")
        if offsets.shape != (slopes.shape[0],):
            raise ValueError("offsets must have one entry per affine piece")
        mat = slopes
        vec = offsets
        lip = float(np.linalg.norm(slopes, axis=1).max()) + sigma * np.sqrt(d)

    return Problem(family=family, d=d, mat=mat, vec=vec, sigma=sigma, L=lip)


def sample_context(problem: Problem, stream, size=None) -> np.ndarray:
    """Draw context vector(s) uniform on [-sigma, sigma]^d."""
    gen = resolve_generator(stream)
    shape = (problem.d,) if size is None else (int(size), problem.d)
    if problem.sigma == 0.0:
        return np.zeros(shape)
    return gen.uniform(-problem.sigma, problem.sigma, size=shape)


def eval_context(problem: Problem, c, x) -> float:
    """Evaluate f_c(x) exactly per the family formula."""
    c = np.asarray(c, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (problem.d,) or c.shape != (problem.d,):
        raise ValueError(
            f"x and c must have shape ({problem.d},), got {x.shape} and {c.shape}")
    return float(_kernels.eval_family(problem.family_code, problem.mat,
                                      problem.vec, c, x))


def eval_context_batch(problem: Problem, cs: np.ndarray, xs: np.ndarray) -> np.ndarray:
    """Vectorized f_c(x) over matching (N, d) context and point batches."""
    if problem.family == "linear-noise":
        return ((problem.mat[0] + cs) * xs).sum(axis=1)
    if problem.family == "shifted-norm":
        return np.linalg.norm(xs - problem.mat[0] - cs, axis=1)
    return (xs @ problem.mat.T + problem.vec).max(axis=1) + (cs * xs).sum(axis=1)


def _shifted_norm_expectation(v: np.ndarray, sigma: float) -> float:
    """E||v - c|| for c uniform on [-sigma, sigma]^d, to SHIFTED_NORM_QUAD_TOL.

    Uses sqrt(a) = (1 / 2 sqrt(pi)) * int_0^inf s^(-3/2) (1 - exp(-s a)) ds
    together with the product form of E exp(-s ||v - c||^2) over coordinates,
    which reduces the d-dimensional expectation to one absolutely convergent
    1-d integral regardless of d. Scalar math inside the integrand: the
    quadrature calls it hundreds of times per point.
    """
    vals = [float(t) for t in v]
    half_sqrt_pi = 0.5 * math.sqrt(math.pi)

    def integrand(u: float) -> float:
        s = u / (1.0 - u)  # maps (0,1) -> (0,inf)
        rs = math.sqrt(s)
        coef = half_sqrt_pi / (2.0 * sigma * rs)
        prod = 1.0
        for t in vals:
            prod *= coef * (math.erf(rs * (sigma - t)) + math.erf(rs * (sigma + t)))
        return s ** -1.5 * (1.0 - prod) / (1.0 - u) ** 2

    val, _err = quad(integrand, 0.0, 1.0, limit=400,
                     epsabs=SHIFTED_NORM_QUAD_TOL * 1e-2,
                     epsrel=SHIFTED_NORM_QUAD_TOL * 1e-2)
    return val / (2.0 * math.sqrt(math.pi))


def population_value(problem: Problem, x) -> float:
    """E_c[f_c(x)]: closed form for the linear and max-affine families (the
    zero-mean context term vanishes), numeric expectation for shifted-norm
    with sigma > 0 (accurate to SHIFTED_NORM_QUAD_TOL)."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (problem.d,):
        raise ValueError(f"x must have shape ({problem.d},), got {x.shape}")
    if problem.family == "linear-noise":
        return float(problem.mat[0] @ x)
    if problem.family == "max-affine-noise":
        return float((problem.mat @ x + problem.vec).max())
    if problem.sigma == 0.0:
        return float(np.linalg.norm(x - problem.mat[0]))
    return _shifted_norm_expectation(x - problem.mat[0], problem.sigma)


def population_value_batch(problem: Problem, xs: np.ndarray) -> np.ndarray:
    """Vectorized population objective over an (N, d) batch of points."""
    xs = np.asarray(xs, dtype=np.float64)
    if problem.family == "linear-noise":
        return xs @ problem.mat[0]
    if problem.family == "max-affine-noise":
        return (xs @ problem.mat.T + problem.vec).max(axis=1)
    if problem.sigma == 0.0:
        return np.linalg.norm(xs - problem.mat[0], axis=1)
    return np.array([_shifted_norm_expectation(x - problem.mat[0], problem.sigma)
                     for x in xs])


_GRID_POINTS = 11
_GRID_LEVELS = 14
_BRUTE_FORCE_MAX_D = 4


def _bounding_box(fset: FeasibleSet):
    if fset.kind == "box":
        return fset.lower.copy(), fset.upper.copy()
    r = fset.radius
    return fset.center - r, fset.center + r


def _grid_refine_minimizer(problem: Problem, fset: FeasibleSet):
    """Brute-force minimizer by projected-grid refinement, d <= 4 only.

    Each level lays an 11-point-per-axis grid over the current window and
    keeps every grid point whose value is within L * cell_diagonal of the
    level best; for a convex objective that value threshold always retains
    the grid point nearest the true minimizer, so the next window (their
    bounding box plus one cell) never loses the optimum.
    """
    if problem.d > _BRUTE_FORCE_MAX_D:
        raise ValueError(
            f"brute-force minimizer supports d <= {_BRUTE_FORCE_MAX_D}, got {problem.d}")
    lo0, hi0 = _bounding_box(fset)
    lo, hi = lo0.copy(), hi0.copy()
    best_x, best_f = None, np.inf
    for _ in range(_GRID_LEVELS):
        axes = [np.linspace(lo[i], hi[i], _GRID_POINTS) for i in range(problem.d)]
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, problem.d)
        pts = np.array([project(fset, p) for p in mesh])
        vals = population_value_batch(problem, pts)
        k = int(vals.argmin())
        if vals[k] < best_f:
            best_f = float(vals[k])
            best_x = pts[k]
        cell = (hi - lo) / (_GRID_POINTS - 1)
        diag = float(np.linalg.norm(cell))
        if problem.L * diag <= 1e-7:
            break
        keep = mesh[vals <= vals[k] + problem.L * diag]
        lo = np.maximum(keep.min(axis=0) - cell, lo0)
        hi = np.minimum(keep.max(axis=0) + cell, hi0)
    return best_x, best_f


def _polish_max_affine(problem: Problem, fset: FeasibleSet, x0: np.ndarray):
    """Exact epigraph solve of min max_k(<a_k, x> + b_k) over the set.

    Pure LP for polyhedral sets (box, l1 ball); smooth NLP with the single
    quadratic constraint for the euclidean ball, started at the grid point.
    Returns None when the solver fails, in which case the caller keeps the
    grid-refined answer.
    """
    from scipy.optimize import linprog, minimize

    A, b = problem.mat, problem.vec
    K, d = A.shape
    if fset.kind in ("box", "l1-ball"):
        if fset.kind == "box":
            # variables (x, t)
            a_ub = np.hstack([A, -np.ones((K, 1))])
            b_ub = -b
            bounds = [(fset.lower[i], fset.upper[i]) for i in range(d)] + [(None, None)]
            c = np.zeros(d + 1)
            c[-1] = 1.0
            res = linprog(c, A_ub=a_ub, b_ub=b_ub, bounds=bounds, method="highs")
        else:
            # variables (x, u, t) with u >= |x - center|, sum(u) <= radius
            n = 2 * d + 1
            c = np.zeros(n)
            c[-1] = 1.0
            rows, rhs = [], []
            for k in range(K):
                row = np.zeros(n)
                row[:d] = A[k]
                row[-1] = -1.0
                rows.append(row)
                rhs.append(-b[k])
            for i in range(d):
                row = np.zeros(n)
                row[i] = 1.0
                row[d + i] = -1.0
                rows.append(row)
                rhs.append(fset.center[i])
                row = np.zeros(n)
                row[i] = -1.0
                row[d + i] = -1.0
                rows.append(row)
                rhs.append(-fset.center[i])
            row = np.zeros(n)
            row[d:2 * d] = 1.0
            rows.append(row)
            rhs.append(fset.radius)
            res = linprog(c, A_ub=np.array(rows), b_ub=np.array(rhs),
                          bounds=[(None, None)] * n, method="highs")
        if not res.success:
            return None
        return project(fset, res.x[:d])

    t0 = float((A @ x0 + b).max())
    z0 = np.concatenate([x0, [t0 + 1e-6]])

    def objective(z):
        return z[-1]

    constraints = [
        {"type": "ineq", "fun": lambda z, k=k: z[-1] - (A[k] @ z[:d] + b[k]),
         "jac": lambda z, k=k: np.concatenate([-A[k], [1.0]])}
        for k in range(K)
    ]
    constraints.append({
        "type": "ineq",
        "fun": lambda z: fset.radius ** 2 - ((z[:d] - fset.center) ** 2).sum(),
        "jac": lambda z: np.concatenate([-2.0 * (z[:d] - fset.center), [0.0]]),
    })
    res = minimize(objective, z0, jac=lambda z: np.eye(d + 1)[-1],
                   constraints=constraints, method="SLSQP",
                   options={"ftol": 1e-12, "maxiter": 300})
    if not res.success:
        return None
    return project(fset, res.x[:d])


def minimizer(problem: Problem, fset: FeasibleSet):
    """Minimize the population objective over ``fset``.

    Analytic for the linear family (boundary point or corner) and the
    shifted-norm family (projection of the center); projected-grid
    refinement otherwise, accurate to 1e-5 in the optimal value and
    restricted to d <= 4.
    """
    if fset.dim != problem.d:
        raise ValueError(f"set dimension {fset.dim} != problem dimension {problem.d}")
    if problem.family == "linear-noise":
        a = problem.mat[0]
        norm_a = np.linalg.norm(a)
        if norm_a == 0.0:
            x_star = project(fset, np.zeros(problem.d))
        elif fset.kind == "box":
            x_star = np.where(a > 0, fset.lower, fset.upper)
        elif fset.kind == "euclidean-ball":
            x_star = fset.center - fset.radius * a / norm_a
        else:  # l1 ball: optimum at the cross-polytope vertex of the largest |a_i|
            i = int(np.abs(a).argmax())
            x_star = fset.center.copy()
            x_star[i] -= fset.radius * np.sign(a[i])
        return x_star, population_value(problem, x_star)
    if problem.family == "shifted-norm":
        x_star = project(fset, problem.mat[0])
        return x_star, population_value(problem, x_star)
    x_grid, f_grid = _grid_refine_minimizer(problem, fset)
    x_polish = _polish_max_affine(problem, fset, x_grid)
    if x_polish is not None:
        f_polish = population_value(problem, x_polish)
        if f_polish < f_grid:
            return x_polish, f_polish
    return x_grid, f_grid
