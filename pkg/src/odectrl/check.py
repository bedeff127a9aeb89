"""Gradient and invariant audits shared by the ``check`` subcommand and the tests."""

from dataclasses import dataclass, field
from typing import List

import numpy as np

from . import oracle
from .adjoint import backward, full_gradient, terminal_costate
from .dynamics import LayerControls
from .params import random_parameters
from .propagation import evolve_variational, forward, make_config

GRADIENT_TOL = 1e-6
INVARIANT_TOL = 1e-12
FD_DIGITS = 30


@dataclass
class CheckReport:
    arch: str
    tableau: str
    gradient_error: float
    invariant_drift: float
    offending: List[str] = field(default_factory=list)

    @property
    def passed(self):
        return self.gradient_error <= GRADIENT_TOL and self.invariant_drift <= INVARIANT_TOL


def random_instance(arch, tableau, n=2, N=3, m=5, seed=0, dt=0.5, scale=0.1):
    rng = np.random.default_rng(seed)
    config = make_config(arch, tableau, n, N, dt=dt)
    params = random_parameters(arch, n, N, rng, scale)
    X = rng.standard_normal((m, n))
    c = (rng.random(m) < 0.5).astype(int)
    return config, params, X, c


def gradient_audit(config, params, X, c, gradient_fn=full_gradient, h=oracle.FD_STEP):
    """Adjoint gradient next to the finite-difference gradient of the oracle objective."""
    grad, _ = gradient_fn(config, params.controls, params.W, params.mu, (X, c))
    tab = config.tableau

    def loss(vec):
        return oracle.objective(
            vec, X.tolist(), c.tolist(), config.kind.value, tab.A.tolist(), tab.b.tolist(),
            config.dt, config.N, params.has_alpha, dps=FD_DIGITS,
        )

    return grad.vector(), oracle.fd_gradient(loss, params.vector(), h)


def invariant_drift(config, params, x, seed=0):
    """Largest relative change of ``<p[j], v[j]>`` along the layers (no control variation)."""
    rng = np.random.default_rng(seed)
    cache = forward(config, params.controls, x)
    v = evolve_variational(config, params.controls, cache, rng.standard_normal(x.shape))
    pN = terminal_costate(cache.final, params.W, params.mu, 1.0) + rng.standard_normal(x.shape)
    p = backward(config, params.controls, cache, pN).p
    pairing = (p * v).reshape(p.shape[0], -1).sum(axis=1)
    return float(np.max(np.abs(pairing - pairing[-1])) / abs(pairing[-1])), pairing


def run_check(arch, tableau, seed=0, invariant_layers=50, gradient_fn=full_gradient):
    config, params, X, c = random_instance(arch, tableau, seed=seed)
    adj, fd = gradient_audit(config, params, X, c, gradient_fn)
    denom = np.maximum(np.abs(adj), np.abs(fd))
    errs = np.abs(adj - fd) / np.where(denom > 0, denom, 1.0)
    offending = [
        f"{params.coordinate_name(k)}: adjoint={adj[k]:.12g} fd={fd[k]:.12g}"
        for k in np.nonzero(errs > GRADIENT_TOL)[0]
    ]
    inv_config, inv_params, _, _ = random_instance(
        arch, tableau, N=invariant_layers, seed=seed, dt=0.1, scale=1.0
    )
    drift, _ = invariant_drift(inv_config, inv_params, X[0], seed)
    return CheckReport(config.kind.value, tableau, float(errs.max()), drift, offending)


def smooth_controls(n, N, rng, scale=1.0):
    """The same random layer repeated ``N`` times: a time-independent control."""
    u = LayerControls(rng.standard_normal((n, n)) * scale, rng.standard_normal(n) * 0.5 * scale)
    return [u] * N
