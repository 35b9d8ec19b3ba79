"""Sampling on the l1 sphere and ball, sign extraction, and projections.

A standard Laplace vector normalized by its l1 norm is uniform on the unit
l1 sphere, and the normalized vector is independent of the norm; scaling a
sphere sample by W^(1/d) with W uniform gives a uniform point in the l1
ball. All samplers draw from counter-based streams (see :mod:`.streams`),
so results are reproducible independent of execution order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .streams import resolve_generator

__all__ = [
    "FeasibleSet",
    "laplace_from_uniform",
    "sample_laplace",
    "sample_l1_sphere",
    "sample_l1_ball",
    "sign_vec",
    "project",
]

# Floor on the log argument in the inverse CDF; keeps a u drawn exactly at a
# cell edge from producing an infinite coordinate.
_LOG_FLOOR = 1e-300

_SET_CODES = {"box": _kernels.SET_BOX,
              "euclidean-ball": _kernels.SET_BALL,
              "l1-ball": _kernels.SET_L1_BALL}


def laplace_from_uniform(u):
    """Map uniform(0,1) draws to standard Laplace via the inverse CDF.

    x = -sign(u - 1/2) * ln(1 - 2|u - 1/2|), with sign(0) = +1 so that
    u = 1/2 maps to exactly 0. Elementwise on arrays.
    """
    u = np.asarray(u, dtype=np.float64)
    t = u - 0.5
    s = np.where(t >= 0.0, 1.0, -1.0)
    return -s * np.log(np.maximum(1.0 - 2.0 * np.abs(t), _LOG_FLOOR))


def sample_laplace(stream, size=None):
    """Draw from the density exp(-|x|)/2; scalar when ``size`` is None."""
    gen = resolve_generator(stream)
    if size is None:
        return float(laplace_from_uniform(gen.uniform()))
    return laplace_from_uniform(gen.uniform(size=size))


def sample_l1_sphere(d: int, stream, size=None):
    """Uniform draw(s) on {z : sum |z_i| = 1} in R^d.

    Returns shape (d,) when ``size`` is None, else (size, d). Coordinate
    absolute values sum to 1 up to a relative 1e-12.
    """
    if d < 1:
        raise ValueError(f"d must be >= 1, got {d}")
    gen = resolve_generator(stream)
    squeeze = size is None
    n = 1 if squeeze else int(size)
    x = laplace_from_uniform(gen.uniform(size=(n, d)))
    s = np.abs(x).sum(axis=1)
    # A zero norm needs every uniform to hit 0.5 exactly; resample those rows.
    while (bad := s == 0.0).any():
        x[bad] = laplace_from_uniform(gen.uniform(size=(int(bad.sum()), d)))
        s = np.abs(x).sum(axis=1)
    z = x / s[:, None]
    return z[0] if squeeze else z


def sample_l1_ball(d: int, stream, size=None):
    """Uniform draw(s) in {z : sum |z_i| <= 1}: radial scaling W^(1/d) of a
    sphere sample. Draw order per sample is the d sphere uniforms then W."""
    if d < 1:
        raise ValueError(f"d must be >= 1, got {d}")
    gen = resolve_generator(stream)
    squeeze = size is None
    n = 1 if squeeze else int(size)
    z = sample_l1_sphere(d, gen, size=n)
    w = gen.uniform(size=n) ** (1.0 / d)
    u = z * w[:, None]
    return u[0] if squeeze else u


def sign_vec(x) -> np.ndarray:
    """Component-wise sign with sign(0) = +1 (also for negative zero)."""
    x = np.asarray(x, dtype=np.float64)
    return np.where(x >= 0.0, 1.0, -1.0)


@dataclass(frozen=True)
class FeasibleSet:
    """A convex compact constraint set: box, euclidean ball, or l1 ball."""

    kind: str
    lower: np.ndarray = field(default=None)   # box only
    upper: np.ndarray = field(default=None)   # box only
    center: np.ndarray = field(default=None)  # ball kinds
    radius: float = 0.0                       # ball kinds

    @staticmethod
    def box(lower, upper) -> "FeasibleSet":
        lower = np.asarray(lower, dtype=np.float64)
        upper = np.asarray(upper, dtype=np.float64)
        if lower.shape != upper.shape or lower.ndim != 1:
            raise ValueError("box bounds must be 1-d arrays of equal length")
        if not (lower <= upper).all():
            raise ValueError("box requires lower <= upper componentwise")
        return FeasibleSet("box", lower=lower, upper=upper)

    @staticmethod
    def euclidean_ball(center, radius: float) -> "FeasibleSet":
        center = np.asarray(center, dtype=np.float64)
        if radius <= 0:
            raise ValueError("radius must be positive")
        return FeasibleSet("euclidean-ball", center=center, radius=float(radius))

    @staticmethod
    def l1_ball(center, radius: float) -> "FeasibleSet":
        center = np.asarray(center, dtype=np.float64)
        if radius <= 0:
            raise ValueError("radius must be positive")
        return FeasibleSet("l1-ball", center=center, radius=float(radius))

    @property
    def dim(self) -> int:
        return len(self.lower) if self.kind == "box" else len(self.center)

    @property
    def diameter(self) -> float:
        """Exact Euclidean diameter of the set."""
        if self.kind == "box":
            return float(np.linalg.norm(self.upper - self.lower))
        # Both ball kinds: farthest pair lies on one axis through the center.
        return 2.0 * self.radius

    def contains(self, x, tol: float = 1e-9) -> bool:
        x = np.asarray(x, dtype=np.float64)
        if self.kind == "box":
            return bool((x >= self.lower - tol).all() and (x <= self.upper + tol).all())
        if self.kind == "euclidean-ball":
            return bool(np.linalg.norm(x - self.center) <= self.radius + tol)
        return bool(np.abs(x - self.center).sum() <= self.radius + tol)

    def kernel_args(self):
        """(set code, p1, p2, radius) as consumed by the jitted kernels."""
        code = _SET_CODES[self.kind]
        if self.kind == "box":
            return code, self.lower, self.upper, 0.0
        return code, self.center, np.zeros(0), self.radius


def project(fset: FeasibleSet, x) -> np.ndarray:
    """Euclidean projection onto ``fset``; idempotent and non-expansive."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != fset.dim:
        raise ValueError(f"point has dimension {x.shape}, set has dimension {fset.dim}")
    code, p1, p2, radius = fset.kernel_args()
    return _kernels.project_onto(code, p1, p2, radius, x)
