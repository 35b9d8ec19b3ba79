"""Two-point gradient estimation with l1-sphere directions.

The estimator queries a contextual objective at x + h*zeta and x - h*zeta
for a uniform l1-sphere direction zeta and forms

    g = (d / 2h) * (y - y') * sign(zeta),

which is an unbiased estimate of the gradient of the l1-ball-smoothed
surrogate of the population objective. A worker only needs to communicate
the scalar difference y - y' plus the d direction sign bits, so one round
costs 8 + ceil(d/8) bytes instead of 8d for a raw vector.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .geometry import sign_vec, sample_l1_sphere, sample_l1_ball
from .objectives import (
    Problem,
    eval_context_batch,
    population_value_batch,
    sample_context,
)
from .streams import resolve_generator

__all__ = [
    "WorkerMessage",
    "SmoothedOracle",
    "two_point_queries",
    "grad_estimate",
    "encode_message",
    "decode_message",
    "message_num_bytes",
    "smoothed_value_mc",
    "smoothed_grad_mc",
]

_MC_CHUNK = 1 << 18  # rows per Monte Carlo batch; bounds peak memory


def two_point_queries(x, h: float, zeta):
    """The pair of query points (x + h*zeta, x - h*zeta); requires h > 0."""
    if h <= 0:
        raise ValueError(f"perturbation h must be > 0, got {h}")
    x = np.asarray(x, dtype=np.float64)
    zeta = np.asarray(zeta, dtype=np.float64)
    if x.shape != zeta.shape:
        raise ValueError(f"x and zeta shapes differ: {x.shape} vs {zeta.shape}")
    return x + h * zeta, x - h * zeta


def grad_estimate(d: int, h: float, y: float, y_prime: float, zeta) -> np.ndarray:
    """(d / 2h) * (y - y') * sign(zeta); every draw satisfies
    ||g|| <= L * d^(3/2) for an L-Lipschitz objective."""
    if h <= 0:
        raise ValueError(f"perturbation h must be > 0, got {h}")
    zeta = np.asarray(zeta, dtype=np.float64)
    if zeta.shape != (d,):
        raise ValueError(f"zeta must have shape ({d},), got {zeta.shape}")
    return (d / (2.0 * h)) * (y - y_prime) * sign_vec(zeta)


@dataclass(frozen=True)
class WorkerMessage:
    """Wire message: the evaluation difference and the direction sign bits."""

    delta: float
    signs: np.ndarray  # bool (d,), True where the direction coordinate is >= 0

    @property
    def dim(self) -> int:
        return len(self.signs)

    @property
    def num_bytes(self) -> int:
        return message_num_bytes(self.dim)

    def to_bytes(self) -> bytes:
        """Little-endian IEEE-754 delta, then sign bytes LSB-first
        (coordinate 0 = bit 0 of byte 0)."""
        packed = np.packbits(self.signs.astype(np.uint8), bitorder="little")
        return struct.pack("<d", self.delta) + packed.tobytes()

    @staticmethod
    def from_bytes(data: bytes, d: int) -> "WorkerMessage":
        expected = message_num_bytes(d)
        if len(data) != expected:
            raise ValueError(f"message for d={d} must be {expected} bytes, got {len(data)}")
        (delta,) = struct.unpack_from("<d", data, 0)
        bits = np.unpackbits(np.frombuffer(data[8:], dtype=np.uint8),
                             bitorder="little")[:d]
        return WorkerMessage(delta=delta, signs=bits.astype(bool))


def message_num_bytes(d: int) -> int:
    return 8 + (d + 7) // 8


def encode_message(y: float, y_prime: float, zeta) -> WorkerMessage:
    """delta = y - y'; bit i set iff zeta_i >= 0 (sign(0) = +1 convention)."""
    zeta = np.asarray(zeta, dtype=np.float64)
    return WorkerMessage(delta=float(y) - float(y_prime), signs=zeta >= 0.0)


def decode_message(msg: WorkerMessage, d: int, h: float) -> np.ndarray:
    """Reconstruct the gradient estimate; exact inverse of encoding, so
    decode(encode(y, y', zeta)) == grad_estimate(d, h, y, y', zeta) bitwise."""
    if h <= 0:
        raise ValueError(f"perturbation h must be > 0, got {h}")
    if msg.dim != d:
        raise ValueError(f"message carries {msg.dim} sign bits, expected {d}")
    s = np.where(msg.signs, 1.0, -1.0)
    return (d / (2.0 * h)) * msg.delta * s


@dataclass(frozen=True)
class SmoothedOracle:
    """Monte Carlo access to the l1-ball-smoothed population surrogate
    S_h(x) = E[f(x + h U)], U uniform on the unit l1 ball."""

    problem: Problem
    h: float
    n_samples: int

    def __post_init__(self):
        if self.h <= 0:
            raise ValueError(f"h must be > 0, got {self.h}")
        if self.n_samples < 1:
            raise ValueError(f"n_samples must be >= 1, got {self.n_samples}")


def smoothed_value_mc(oracle: SmoothedOracle, x, stream):
    """Estimate S_h(x) by averaging f(x + h U) over n_samples ball draws.

    Returns (estimate, standard error).
    """
    x = np.asarray(x, dtype=np.float64)
    gen = resolve_generator(stream)
    p = oracle.problem
    total = 0.0
    total_sq = 0.0
    remaining = oracle.n_samples
    while remaining > 0:
        k = min(remaining, _MC_CHUNK)
        u = sample_l1_ball(p.d, gen, size=k)
        vals = population_value_batch(p, x + oracle.h * u)
        total += vals.sum()
        total_sq += (vals * vals).sum()
        remaining -= k
    n = oracle.n_samples
    mean = total / n
    var = max(total_sq / n - mean * mean, 0.0)
    se = np.sqrt(var / n) if n > 1 else np.inf
    return float(mean), float(se)


def smoothed_grad_mc(oracle: SmoothedOracle, x, stream, use_contexts: bool = False):
    """Estimate grad S_h(x) by averaging two-point estimates over fresh
    sphere directions (and fresh contexts when ``use_contexts``).

    Returns (gradient estimate (d,), per-coordinate standard errors (d,)).
    """
    x = np.asarray(x, dtype=np.float64)
    gen = resolve_generator(stream)
    p = oracle.problem
    d, h = p.d, oracle.h
    total = np.zeros(d)
    total_sq = np.zeros(d)
    remaining = oracle.n_samples
    while remaining > 0:
        k = min(remaining, _MC_CHUNK)
        zeta = sample_l1_sphere(d, gen, size=k)
        x_plus = x + h * zeta
        x_minus = x - h * zeta
        if use_contexts:
            cs = sample_context(p, gen, size=k)
            diff = eval_context_batch(p, cs, x_plus) - eval_context_batch(p, cs, x_minus)
        else:
            diff = population_value_batch(p, x_plus) - population_value_batch(p, x_minus)
        g = (d / (2.0 * h)) * diff[:, None] * np.where(zeta >= 0.0, 1.0, -1.0)
        total += g.sum(axis=0)
        total_sq += (g * g).sum(axis=0)
        remaining -= k
    n = oracle.n_samples
    mean = total / n
    var = np.maximum(total_sq / n - mean * mean, 0.0)
    se = np.sqrt(var / n) if n > 1 else np.full(d, np.inf)
    return mean, se
