"""Gradient descent with backtracking and the simplex projection for learned time steps."""

import logging
import time
from dataclasses import dataclass, field, replace
from typing import List, Optional

import numpy as np

from .adjoint import full_gradient
from .dynamics import ArchitectureKind
from .errors import ContractError, LineSearchError
from .loss import accuracy, batch_loss
from .params import Parameters, initialize
from .propagation import forward

log = logging.getLogger(__name__)


def project_simplex(a):
    """Euclidean projection onto ``{x : x >= 0, sum(x) = 1}`` by sorting."""
    a = np.asarray(a, dtype=float)
    u = np.sort(a)[::-1]
    css = np.cumsum(u)
    k = np.arange(1, a.size + 1)
    rho = np.nonzero(u - (css - 1.0) / k > 0)[0][-1]
    theta = (css[rho] - 1.0) / (rho + 1)
    return np.maximum(a - theta, 0.0)


def _as_vector(x):
    return x.vector() if hasattr(x, "vector") else np.asarray(x, dtype=float)


def gd_step(params, grad, tau):
    """``params - tau * grad`` over every parameter."""
    if not tau > 0:
        raise ContractError(f"step size must be positive, got {tau}")
    u, g = _as_vector(params), _as_vector(grad)
    if u.shape != g.shape:
        raise ContractError(f"parameter layout {u.shape} does not match gradient {g.shape}")
    new = u - tau * g
    return params.with_vector(new) if isinstance(params, Parameters) else new


@dataclass
class BacktrackState:
    L: float = 1.0
    rho_up: float = 2.0
    rho_down: float = 0.9
    accepted: int = 0
    rejected: int = 0

    def __post_init__(self):
        if not (self.L > 0 and self.rho_up > 1 and 0 < self.rho_down < 1):
            raise ContractError("need L > 0, rho_up > 1 and 0 < rho_down < 1")


def backtracking_step(params, loss_fn, grad, state, loss=None, project=None, max_inner=60):
    """One outer iteration of gradient descent with backtracking.

    Tries ``u - g / L`` (passed through ``project`` when given) and accepts it once
    ``loss(new) <= loss(u) + <g, new - u> + L/2 |new - u|^2``; every rejection
    multiplies ``L`` by ``rho_up`` and an acceptance by ``rho_down``.

    ``params`` and ``grad`` are flat vectors or :class:`Parameters` /
    gradient bundles. Returns ``(new_params, new_loss, new_state, step_L)`` where
    ``step_L`` is the value of ``L`` the accepted step was taken with.
    """
    u, g = _as_vector(params), _as_vector(grad)
    if u.shape != g.shape:
        raise ContractError(f"parameter layout {u.shape} does not match gradient {g.shape}")
    rebuild = params.with_vector if isinstance(params, Parameters) else (lambda v: v)
    phi = loss_fn(params) if loss is None else loss
    state = replace(state)
    for _ in range(max_inner):
        cand = u - g / state.L
        if project is not None:
            cand = project(cand)
        d = cand - u
        new_params = rebuild(cand)
        phi_new = loss_fn(new_params)
        if phi_new <= phi + g @ d + 0.5 * state.L * (d @ d):
            step_L = state.L
            state.L *= state.rho_down
            state.accepted += 1
            return new_params, phi_new, state, step_L
        state.L *= state.rho_up
        state.rejected += 1
    raise LineSearchError(f"no acceptable step after {max_inner} trials (L={state.L:.3g})")


@dataclass
class TrainOptions:
    max_iters: int = 10000
    seed: int = 1
    fixed_classifier: bool = False
    L0: float = 1.0
    rho_up: float = 2.0
    rho_down: float = 0.9
    max_inner: int = 60


@dataclass
class TrainRecord:
    """Per-iteration history; index 0 is the initial evaluation."""

    train_loss: List[float] = field(default_factory=list)
    test_loss: List[float] = field(default_factory=list)
    train_acc: List[float] = field(default_factory=list)
    test_acc: List[float] = field(default_factory=list)
    L: List[float] = field(default_factory=list)
    wall_clock: List[float] = field(default_factory=list)
    alphas: List[np.ndarray] = field(default_factory=list)
    params: Optional[Parameters] = None

    def __len__(self):
        return len(self.train_loss)


def _alpha_slices(params):
    """Positions of the alpha entries inside the flat parameter vector."""
    n = params.n
    per_layer = n * n + n + 1
    return np.arange(params.N) * per_layer + n * n + n


def _classifier_slice(params):
    return slice(params.size - params.n - 1, params.size)


def train(config, train_data, test_data=None, options=None, params=None, callback=None):
    """Fit network and classifier head with backtracking gradient descent.

    For ``ODENetSimplex`` every trial point has its alpha block projected onto the
    simplex before the sufficient-decrease test, so the accepted losses decrease
    monotonically and all iterates stay feasible.
    """
    options = options or TrainOptions()
    if train_data.X.shape[1] != config.n or (test_data is not None and test_data.X.shape[1] != config.n):
        raise ContractError(f"data width does not match network width n={config.n}")
    rng = np.random.default_rng(options.seed)
    if params is None:
        params = initialize(config.kind, config.n, config.N, rng)
    kind = config.kind
    idx_alpha = _alpha_slices(params) if kind.has_alpha else None
    head_slice = _classifier_slice(params)

    project = None
    if kind is ArchitectureKind.ODENET_SIMPLEX:
        params = params.with_alphas(project_simplex(params.alphas()))

        def project(vec):
            vec = vec.copy()
            vec[idx_alpha] = project_simplex(vec[idx_alpha])
            return vec

    Xtr, ctr = train_data.X, train_data.c
    last = {}

    def loss_fn(p):
        cache = forward(config, p.controls, Xtr)
        last["params"], last["cache"] = p, cache
        return batch_loss(cache.final, ctr, p.head)

    record = TrainRecord()
    state = BacktrackState(options.L0, options.rho_up, options.rho_down)
    start = time.perf_counter()

    def log_iteration(p, phi, cache):
        record.train_loss.append(phi)
        record.train_acc.append(accuracy(cache.final, ctr, p.head))
        if test_data is not None:
            yt = forward(config, p.controls, test_data.X).final
            record.test_loss.append(batch_loss(yt, test_data.c, p.head))
            record.test_acc.append(accuracy(yt, test_data.c, p.head))
        else:
            record.test_loss.append(float("nan"))
            record.test_acc.append(float("nan"))
        record.L.append(state.L)
        record.wall_clock.append(time.perf_counter() - start)
        if kind.has_alpha:
            record.alphas.append(p.alphas())

    phi = loss_fn(params)
    log_iteration(params, phi, last["cache"])
    for it in range(1, options.max_iters + 1):
        cache = last["cache"] if last.get("params") is params else None
        grad, _ = full_gradient(config, params.controls, params.W, params.mu, train_data, cache=cache)
        g = grad.vector()
        if options.fixed_classifier:
            g[head_slice] = 0.0
        try:
            params, phi, state, _ = backtracking_step(
                params, loss_fn, g, state, loss=phi, project=project, max_inner=options.max_inner
            )
        except LineSearchError as exc:
            raise LineSearchError(f"iteration {it}: {exc}") from exc
        log_iteration(params, phi, last["cache"])
        if callback is not None:
            callback(it, params, record)
        if it % 1000 == 0:
            log.info("iter %d loss %.6g acc %.4f L %.3g", it, phi, record.train_acc[-1], state.L)
    record.params = params
    return record
