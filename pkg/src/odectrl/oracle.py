"""Independent checks for the gradient, projection and integrator code.

Nothing here imports the propagation, adjoint or optimizer modules; the
objective and the reference integrator are written out from scratch.
"""

import functools
import itertools
import math

import mpmath
import numpy as np

from .errors import OracleError, UnsupportedError

FD_STEP = 1e-5


def fd_gradient(loss_fn, params, h=FD_STEP):
    """Central-difference gradient of ``loss_fn`` at the flat vector ``params``."""
    if not h > 0:
        raise OracleError("step must be positive")
    x = np.array(params, dtype=float)
    g = np.empty_like(x)
    for k in range(x.size):
        orig = x[k]
        x[k] = hi = orig + h
        up = loss_fn(x)
        x[k] = lo = orig - h
        down = loss_fn(x)
        x[k] = orig
        if not (math.isfinite(up) and math.isfinite(down)):
            raise OracleError(f"non-finite loss while perturbing coordinate {k}")
        # divide by the step actually taken in floating point
        g[k] = float((up - down) / (hi - lo))
    return g


def _layer_field(K, beta, alpha, y, tanh):
    out = [tanh(sum(K[r][q] * y[q] for q in range(len(y))) + beta[r]) for r in range(len(y))]
    return out if alpha is None else [alpha * v for v in out]


def _unpack(vec, n, N, has_alpha, num):
    vec = [num(float(v)) for v in vec]
    layers, pos = [], 0
    for _ in range(N):
        K = [vec[pos + r * n:pos + (r + 1) * n] for r in range(n)]
        pos += n * n
        beta = vec[pos:pos + n]
        pos += n
        alpha = None
        if has_alpha:
            alpha = vec[pos]
            pos += 1
        layers.append((K, beta, alpha))
    return layers, vec[pos:pos + n], vec[pos + n]


def objective(vec, X, c, kind, A, b, dt, N, has_alpha, dps=None):
    """Batch loss of a flat parameter vector, computed sample by sample in pure Python.

    ``kind`` is ``"Net"`` for the plain composition of layers and anything else
    for a Runge--Kutta step with coefficients ``A``, ``b``. With ``dps`` set the
    arithmetic runs in mpmath at that many digits, which removes the roundoff
    floor of central differences on small gradient coordinates.
    """
    if dps is None:
        num, tanh, exp = float, math.tanh, math.exp
    else:
        ctx = mpmath.mp.clone()
        ctx.dps = dps
        num, tanh, exp = ctx.mpf, ctx.tanh, ctx.exp
    n = len(X[0])
    layers, W, mu = _unpack(vec, n, N, has_alpha, num)
    A = [[num(float(a)) for a in row] for row in A]
    b = [num(float(v)) for v in b]
    dt = num(float(dt))
    s = len(b)
    total = num(0)
    for x, label in zip(X, c):
        y = [num(float(v)) for v in x]
        for K, beta, alpha in layers:
            if kind == "Net":
                y = _layer_field(K, beta, alpha, y, tanh)
                continue
            fields = []
            for i in range(s):
                yi = [y[q] + dt * sum(A[i][l] * fields[l][q] for l in range(i)) for q in range(n)]
                fields.append(_layer_field(K, beta, alpha, yi, tanh))
            y = [y[q] + dt * sum(b[i] * fields[i][q] for i in range(s)) for q in range(n)]
        z = sum(W[q] * y[q] for q in range(n)) + mu
        total += (1 / (1 + exp(-z)) - label) ** 2 / 2
    return total


def brute_simplex(a, grid_step=1e-3):
    """Nearest point to ``a`` on a regular grid over the probability simplex (dim <= 3)."""
    a = np.asarray(a, dtype=float)
    d = a.size
    if d > 3:
        raise UnsupportedError("grid search limited to dimension 3")
    if d == 1:
        return np.ones(1)
    pts = _simplex_grid(d, int(round(1.0 / grid_step)))
    return pts[np.argmin(((pts - a) ** 2).sum(axis=1))]


@functools.lru_cache(maxsize=8)
def _simplex_grid(d, steps):
    t = np.arange(steps + 1) / steps
    if d == 2:
        return np.stack([t, 1.0 - t], axis=1)
    x, y = np.meshgrid(t, t, indexing="ij")
    keep = x + y <= 1.0 + 1e-12
    return np.stack([x[keep], y[keep], np.clip(1.0 - x[keep] - y[keep], 0.0, None)], axis=1)


_RK4_A = ((), (0.5,), (0.0, 0.5), (0.0, 0.0, 1.0))
_RK4_B = (1 / 6, 1 / 3, 1 / 3, 1 / 6)


def reference_solve(config, controls, x, refinement):
    """Classical RK4 with step ``dt / 2**refinement`` over every layer interval.

    Each layer's controls act on its own time interval, so for a piecewise
    constant control this integrates the same ODE the network discretises.
    """
    if refinement < 2:
        raise OracleError("refinement must be at least 2")
    sub = 2**refinement
    h = config.dt / sub
    y = np.array(x, dtype=float)
    for u in controls:
        K, beta = np.asarray(u.K), np.asarray(u.beta)
        scale = 1.0 if u.alpha is None else u.alpha

        def f(v):
            return scale * np.tanh(K @ v + beta)

        for _ in range(sub):
            ks = []
            for i in range(4):
                yi = y + h * sum(a * k for a, k in zip(_RK4_A[i], ks))
                ks.append(f(yi))
            y = y + h * sum(bi * k for bi, k in zip(_RK4_B, ks))
    return y


def fit_order(dts, errors):
    """Least-squares slope of ``log(error)`` against ``log(dt)``."""
    slope, _ = np.polyfit(np.log(dts), np.log(errors), 1)
    return float(slope)


def max_relative_error(approx, exact, floor=0.0):
    """Largest coordinatewise ``|a - e| / max(|a|, |e|, floor)`` and its index."""
    approx, exact = np.asarray(approx, dtype=float), np.asarray(exact, dtype=float)
    denom = np.maximum(np.maximum(np.abs(approx), np.abs(exact)), floor)
    err = np.where(denom > 0, np.abs(approx - exact) / np.where(denom > 0, denom, 1.0), 0.0)
    k = int(np.argmax(err))
    return float(err[k]), k


def grid_points(d, grid_step):
    """All grid points of the simplex in dimension ``d`` (for small ``d``)."""
    steps = int(round(1.0 / grid_step))
    for combo in itertools.product(range(steps + 1), repeat=d - 1):
        if sum(combo) <= steps:
            yield np.array(list(combo) + [steps - sum(combo)]) / steps
