"""Hot numeric kernels for the federated round engine.

Everything here is written loop-style so numba can compile it; with
``FEDZO_NO_NUMBA=1`` the same source runs uncompiled and produces
bit-identical output (no reductions are reordered, no fastmath).

Integer codes used across the engine:

* objective family: 0 = linear-noise, 1 = shifted-norm, 2 = max-affine-noise
* feasible set:     0 = box, 1 = euclidean-ball, 2 = l1-ball
"""

from __future__ import annotations

import math

import numpy as np

from ._accel import maybe_jit

FAMILY_LINEAR = 0
FAMILY_SHIFTED_NORM = 1
FAMILY_MAX_AFFINE = 2

SET_BOX = 0
SET_BALL = 1
SET_L1_BALL = 2

STATUS_OK = 0
STATUS_NONFINITE = 1

# One-ulp shrink factor used to make projections exactly idempotent: after
# scaling onto a ball boundary the recomputed radius can exceed the target by
# a rounding error, in which case the point is nudged until it verifies.
_SHRINK = 1.0 - 2.3e-16


@maybe_jit
def eval_family(family, mat, vec, ctx, z):
    """Evaluate one contextual objective f_c(z).

    ``mat``/``vec`` hold the family parameters: the coefficient vector of the
    linear family (row 0), the center of the shifted-norm family (row 0), or
    the (K, d) slopes plus K offsets of the max-affine family. ``ctx`` is the
    realized context vector.
    """
    d = z.shape[0]
    if family == 0:  # <a + c, z>
        acc = 0.0
        for i in range(d):
            acc += (mat[0, i] + ctx[i]) * z[i]
        return acc
    elif family == 1:  # ||z - theta - c||
        acc = 0.0
        for i in range(d):
            diff = z[i] - mat[0, i] - ctx[i]
            acc += diff * diff
        return math.sqrt(acc)
    else:  # max_k(<a_k, z> + b_k) + <c, z>
        best = -np.inf
        for k in range(mat.shape[0]):
            s = vec[k]
            for i in range(d):
                s += mat[k, i] * z[i]
            if s > best:
                best = s
        noise = 0.0
        for i in range(d):
            noise += ctx[i] * z[i]
        return best + noise


@maybe_jit
def project_box(x, lo, hi):
    d = x.shape[0]
    y = np.empty(d)
    for i in range(d):
        v = x[i]
        if v < lo[i]:
            v = lo[i]
        elif v > hi[i]:
            v = hi[i]
        y[i] = v
    return y


@maybe_jit
def project_ball(x, center, radius):
    d = x.shape[0]
    v = np.empty(d)
    sq = 0.0
    for i in range(d):
        v[i] = x[i] - center[i]
        sq += v[i] * v[i]
    if math.sqrt(sq) <= radius:
        return x.copy()
    scale = radius / math.sqrt(sq)
    y = np.empty(d)
    while True:
        sq = 0.0
        for i in range(d):
            y[i] = center[i] + v[i] * scale
            diff = y[i] - center[i]
            sq += diff * diff
        if math.sqrt(sq) <= radius:
            return y
        scale *= _SHRINK


@maybe_jit
def project_l1_ball(x, center, radius):
    """Euclidean projection onto {y : ||y - center||_1 <= radius}.

    Sort-and-threshold soft shrinkage on the recentred absolute values.
    """
    d = x.shape[0]
    v = np.empty(d)
    a = np.empty(d)
    l1 = 0.0
    for i in range(d):
        v[i] = x[i] - center[i]
        a[i] = abs(v[i])
        l1 += a[i]
    if l1 <= radius:
        return x.copy()
    srt = np.sort(a)[::-1]
    cum = 0.0
    theta = 0.0
    for i in range(d):
        cum += srt[i]
        cand = (cum - radius) / (i + 1.0)
        if srt[i] - cand > 0.0:
            theta = cand
        else:
            break
    y = np.empty(d)
    while True:
        l1 = 0.0
        for i in range(d):
            mag = a[i] - theta
            if mag < 0.0:
                mag = 0.0
            if v[i] >= 0.0:
                y[i] = center[i] + mag
            else:
                y[i] = center[i] - mag
            l1 += abs(y[i] - center[i])
        if l1 <= radius:
            return y
        theta /= _SHRINK


@maybe_jit
def project_onto(set_kind, p1, p2, radius, x):
    """Dispatch projection by set code; p1/p2 are (lo, hi) or (center, unused)."""
    if set_kind == 0:
        return project_box(x, p1, p2)
    elif set_kind == 1:
        return project_ball(x, p1, radius)
    else:
        return project_l1_ball(x, p1, radius)


@maybe_jit
def simulate_rounds(zetas, ctxs, x1, h, eta, family, fmat, fvec,
                    set_kind, sp1, sp2, radius):
    """Run the full federated loop over precomputed direction/context draws.

    Per round t each worker j evaluates its contextual objective at
    ``x_t +- h * zeta[t, j]``, ships the scalar difference together with the
    direction signs, and the server averages the decoded per-worker gradient
    estimates ``(d / 2h) * delta * sign(zeta)``, steps by ``eta`` and projects.

    Returns (iterates, aggregated gradients, per-worker deltas, status,
    bad_round, bad_worker); a nonzero status flags the first non-finite
    function evaluation.
    """
    n = zetas.shape[0]
    m = zetas.shape[1]
    d = zetas.shape[2]
    xs = np.empty((n, d))
    gs = np.empty((n, d))
    deltas = np.empty((n, m))
    x = x1.copy()
    xp = np.empty(d)
    xm = np.empty(d)
    acc = np.empty(d)
    step = np.empty(d)
    c1 = d / (2.0 * h)
    for t in range(n):
        for i in range(d):
            xs[t, i] = x[i]
            acc[i] = 0.0
        for j in range(m):
            for i in range(d):
                hz = h * zetas[t, j, i]
                xp[i] = x[i] + hz
                xm[i] = x[i] - hz
            y_plus = eval_family(family, fmat, fvec, ctxs[t, j], xp)
            y_minus = eval_family(family, fmat, fvec, ctxs[t, j], xm)
            delta = y_plus - y_minus
            if not np.isfinite(delta):
                return xs, gs, deltas, STATUS_NONFINITE, t, j
            deltas[t, j] = delta
            coef = c1 * delta
            for i in range(d):
                if zetas[t, j, i] >= 0.0:
                    acc[i] += coef
                else:
                    acc[i] += -coef
        for i in range(d):
            g = acc[i] / m
            gs[t, i] = g
            step[i] = x[i] - eta * g
        x = project_onto(set_kind, sp1, sp2, radius, step)
    return xs, gs, deltas, STATUS_OK, -1, -1
