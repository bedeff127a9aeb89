"""Backpropagation as the symplectic partitioned Runge--Kutta adjoint recursion.

For an explicit tableau with one control set per layer the stage costates are

    l_i = -(d_y f(y_i, u))^T P_i,   P_i = p[j+1] - dt * sum_k (a_ki b_k / b_i) l_k,

solved for ``i = s, ..., 1``, followed by ``p[j] = p[j+1] - dt * sum_i b_i l_i``
and the control gradient ``dt * sum_i b_i (d_u f(y_i, u))^T P_i``. ``P_i`` is the
stage costate of the companion method returned by :func:`tableau.adjoint_of`.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .dynamics import ArchitectureKind, LayerControls, jac_u_transpose_apply, jac_y_transpose_apply
from .errors import ContractError, UnsupportedError
from .loss import ClassifierHead, batch_loss, check_labels, hypothesis, hypothesis_prime, scores
from .propagation import forward
from .tableau import adjoint_of


@dataclass
class GradientBundle:
    """Gradients laid out like :class:`params.Parameters`."""

    dK: np.ndarray
    dbeta: np.ndarray
    dalpha: Optional[np.ndarray]
    dW: np.ndarray
    dmu: float

    def vector(self):
        N = self.dK.shape[0]
        parts = []
        for j in range(N):
            parts += [self.dK[j].ravel(), self.dbeta[j]]
            if self.dalpha is not None:
                parts.append(self.dalpha[j:j + 1])
        parts += [self.dW, [self.dmu]]
        return np.concatenate(parts).astype(float)

    def __add__(self, other):
        return GradientBundle(
            self.dK + other.dK,
            self.dbeta + other.dbeta,
            None if self.dalpha is None else self.dalpha + other.dalpha,
            self.dW + other.dW,
            self.dmu + other.dmu,
        )


@dataclass
class AdjointState:
    """Layer costates ``(N+1, ..., n)`` and stage quantities ``l`` ``(N, s, ..., n)``."""

    p: np.ndarray
    stage_l: np.ndarray


def terminal_costate(yN, W, mu, label):
    """Derivative of ``1/2 (C(W y + mu) - c)^2`` with respect to ``y``.

    Accepts one state with a scalar label or a batch with a label vector.
    """
    yN = np.asarray(yN, dtype=float)
    z = scores(yN, ClassifierHead(W, mu))
    gamma = (hypothesis(z) - np.asarray(label, dtype=float)) * hypothesis_prime(z)
    return np.multiply.outer(gamma, W)


def _check_cache(config, cache, p):
    if cache.states.shape[0] != config.N + 1 or cache.stage_states.shape[1] != config.stages:
        raise ContractError("trajectory cache does not match the network configuration")
    if p.shape != cache.states.shape[1:]:
        raise ContractError(f"costate shape {p.shape} does not match states {cache.states.shape[1:]}")


def _stage_costate(coef, pnext, stage_l, i, dt):
    P = pnext
    for k in range(i + 1, coef.shape[0]):
        if coef[k, i] != 0.0:
            P = P - dt * coef[k, i] * stage_l[k]
    return P


def _coefficients(tableau):
    # coef[k, i] = a_ki b_k / b_i
    A, b = tableau.A, tableau.b
    return A * b[:, None] / b[None, :]


def backward(config, controls, cache, pN):
    """Run the costate recursion from ``p[N] = pN`` down to ``p[0]``."""
    pN = np.asarray(pN, dtype=float)
    _check_cache(config, cache, pN)
    kind, N, s, dt = config.kind, config.N, config.stages, config.dt
    p = np.empty((N + 1,) + pN.shape)
    stage_l = np.zeros((N, s) + pN.shape)
    p[N] = pN
    if kind is ArchitectureKind.NET:
        for j in range(N - 1, -1, -1):
            stage_l[j, 0] = -jac_y_transpose_apply(controls[j], cache.states[j], p[j + 1], kind)
            p[j] = -stage_l[j, 0]
        return AdjointState(p, stage_l)

    if not config.tableau.explicit:
        raise UnsupportedError(f"tableau {config.tableau.name!r} is not explicit")
    coef = _coefficients(config.tableau)
    b = config.tableau.b
    for j in range(N - 1, -1, -1):
        u = controls[j]
        for i in range(s - 1, -1, -1):
            P = _stage_costate(coef, p[j + 1], stage_l[j], i, dt)
            stage_l[j, i] = -jac_y_transpose_apply(u, cache.stage_states[j, i], P, kind)
        acc = b[0] * stage_l[j, 0]
        for i in range(1, s):
            acc = acc + b[i] * stage_l[j, i]
        p[j] = p[j + 1] - dt * acc
    return AdjointState(p, stage_l)


def backward_symplectic_euler(config, controls, cache, pN):
    """Specialised recursion ``p[j] = p[j+1] + dt (d_y f(y[j]))^T p[j+1]`` for one-stage Euler."""
    if config.stages != 1 or config.tableau.A[0, 0] != 0.0 or config.tableau.b[0] != 1.0:
        raise ContractError("backward_symplectic_euler needs the explicit Euler tableau")
    pN = np.asarray(pN, dtype=float)
    _check_cache(config, cache, pN)
    N, dt = config.N, config.dt
    p = np.empty((N + 1,) + pN.shape)
    p[N] = pN
    for j in range(N - 1, -1, -1):
        p[j] = p[j + 1] + dt * jac_y_transpose_apply(controls[j], cache.states[j], p[j + 1], config.kind)
    return p


def control_gradients(config, controls, cache, adj):
    """Network part of the gradient; ``dW`` and ``dmu`` are returned as zeros."""
    kind, N, s, dt = config.kind, config.N, config.stages, config.dt
    if adj.p.shape[0] != N + 1 or adj.stage_l.shape[:2] != (N, s):
        raise ContractError("adjoint state does not match the network configuration")
    n = config.n
    dK = np.zeros((N, n, n))
    dbeta = np.zeros((N, n))
    dalpha = np.zeros(N) if kind.has_alpha else None

    def add(j, frag, scale):
        dK[j] += scale * frag.K
        dbeta[j] += scale * frag.beta
        if dalpha is not None:
            dalpha[j] += scale * frag.alpha

    if kind is ArchitectureKind.NET:
        for j in range(N):
            add(j, jac_u_transpose_apply(controls[j], cache.states[j], adj.p[j + 1], kind), 1.0)
        return GradientBundle(dK, dbeta, dalpha, np.zeros(n), 0.0)

    coef = _coefficients(config.tableau)
    b = config.tableau.b
    for j in range(N):
        for i in range(s):
            P = _stage_costate(coef, adj.p[j + 1], adj.stage_l[j], i, dt)
            frag = jac_u_transpose_apply(controls[j], cache.stage_states[j, i], P, kind)
            add(j, frag, dt * b[i])
    return GradientBundle(dK, dbeta, dalpha, np.zeros(n), 0.0)


def stationarity_residual(config, controls, cache, adj):
    """Per-layer ``sum_i b_i (d_u f(y_i, u))^T p_i`` with ``p_i`` from the companion tableau.

    The stage costates are rebuilt as ``p_i = p[j] + dt * sum_l a~_il l_l`` using
    :func:`tableau.adjoint_of`, independently of the recursion in :func:`backward`.
    The control gradient of layer ``j`` equals ``dt`` times this residual (the
    residual itself for Net, which has no step), so a
    gradient of norm ``tau`` certifies a residual of norm ``tau / dt``.
    """
    kind, N, s, dt = config.kind, config.N, config.stages, config.dt
    out = []
    if kind is ArchitectureKind.NET:
        for j in range(N):
            out.append(jac_u_transpose_apply(controls[j], cache.states[j], adj.p[j + 1], kind))
        return out
    adj_tab = adjoint_of(config.tableau)
    b = config.tableau.b
    for j in range(N):
        total = None
        for i in range(s):
            P = adj.p[j] + dt * sum(adj_tab.A[i, l] * adj.stage_l[j, l] for l in range(s))
            frag = jac_u_transpose_apply(controls[j], cache.stage_states[j, i], P, kind)
            frag = LayerControls(b[i] * frag.K, b[i] * frag.beta,
                                 None if frag.alpha is None else b[i] * frag.alpha)
            if total is None:
                total = frag
            else:
                total = LayerControls(total.K + frag.K, total.beta + frag.beta,
                                      None if total.alpha is None else total.alpha + frag.alpha)
        out.append(total)
    return out


def classifier_gradients(yN_batch, labels, W, mu):
    """Gradients of the batch loss with respect to ``W`` and ``mu``."""
    c = check_labels(labels)
    yN = np.atleast_2d(np.asarray(yN_batch, dtype=float))
    z = scores(yN, ClassifierHead(W, mu))
    gamma = (hypothesis(z) - c) * hypothesis_prime(z)
    return gamma @ yN, float(gamma.sum())


def full_gradient(config, controls, W, mu, dataset, cache=None):
    """Gradient of the batch loss over all parameters and the loss itself.

    ``dataset`` is anything with ``X`` and ``c`` attributes, or an ``(X, c)``
    pair. A cache from a previous forward pass over the same inputs may be passed
    to skip recomputing it.
    """
    X, c = (dataset.X, dataset.c) if hasattr(dataset, "X") else dataset
    X = np.atleast_2d(np.asarray(X, dtype=float))
    c = check_labels(c)
    if cache is None:
        cache = forward(config, controls, X)
    yN = cache.final
    pN = terminal_costate(yN, W, mu, c)
    adj = backward(config, controls, cache, pN)
    grad = control_gradients(config, controls, cache, adj)
    grad.dW, grad.dmu = classifier_gradients(yN, c, W, mu)
    return grad, batch_loss(yN, c, ClassifierHead(W, mu))
