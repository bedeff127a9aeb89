"""Layer vector fields and the Jacobian products used by forward and adjoint passes.

All functions accept a single state ``y`` of shape ``(n,)`` or a batch of shape
``(m, n)``; batched Jacobian-transpose products with respect to the controls are
summed over the batch.
"""

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConfigurationError, ShapeError


class ArchitectureKind(enum.Enum):
    NET = "Net"
    RESNET = "ResNet"
    ODENET = "ODENet"
    ODENET_SIMPLEX = "ODENetSimplex"

    @property
    def has_alpha(self):
        return self in (ArchitectureKind.ODENET, ArchitectureKind.ODENET_SIMPLEX)

    @property
    def uses_tableau(self):
        return self is not ArchitectureKind.NET

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        for kind in cls:
            if value in (kind.value, kind.name) or str(value).lower() == kind.value.lower():
                return kind
        raise ConfigurationError(
            f"unknown architecture {value!r}; expected one of {', '.join(k.value for k in cls)}"
        )


@dataclass
class LayerControls:
    """Parameters ``(K, beta[, alpha])`` of one layer."""

    K: np.ndarray
    beta: np.ndarray
    alpha: Optional[float] = None

    @property
    def n(self):
        return self.beta.shape[0]


def activation(z):
    return np.tanh(z)


def activation_prime(z):
    t = np.tanh(z)
    return 1.0 - t * t


def _check(u, y, kind, p=None):
    n = u.beta.shape[0]
    if u.K.shape != (n, n) or y.shape[-1] != n:
        raise ShapeError(f"K{u.K.shape}, beta({n},) and y{y.shape} disagree")
    if p is not None and p.shape != y.shape:
        raise ShapeError(f"costate shape {p.shape} differs from state shape {y.shape}")
    if kind.has_alpha and u.alpha is None:
        raise ShapeError(f"{kind.value} layer requires alpha")


def _preactivation(u, y):
    return y @ u.K.T + u.beta


def vector_field(u, y, kind):
    """``sigma(K y + beta)``, scaled by ``alpha`` for the ODENet kinds."""
    y = np.asarray(y, dtype=float)
    _check(u, y, kind)
    f = activation(_preactivation(u, y))
    if kind.has_alpha:
        f = u.alpha * f
    return f


def _gamma(u, y, p, kind):
    g = activation_prime(_preactivation(u, y)) * p
    if kind.has_alpha:
        g = u.alpha * g
    return g


def jac_y_apply(u, y, v, kind):
    """Directional derivative ``d_y f(y, u) v``."""
    y = np.asarray(y, dtype=float)
    _check(u, y, kind, v)
    return _gamma(u, y, v @ u.K.T, kind)


def jac_u_apply(u, y, w, kind):
    """Directional derivative ``d_u f(y, u) w`` for a perturbation ``w`` of the layer."""
    y = np.asarray(y, dtype=float)
    _check(u, y, kind)
    z = _preactivation(u, y)
    dz = y @ w.K.T + w.beta
    out = activation_prime(z) * dz
    if kind.has_alpha:
        out = u.alpha * out + w.alpha * activation(z)
    return out


def jac_y_transpose_apply(u, y, p, kind):
    """``(d_y f)^T p = K^T (sigma'(K y + beta) * p)``, times ``alpha`` for ODENet."""
    y = np.asarray(y, dtype=float)
    p = np.asarray(p, dtype=float)
    _check(u, y, kind, p)
    return _gamma(u, y, p, kind) @ u.K


def jac_u_transpose_apply(u, y, p, kind):
    """``(d_u f)^T p`` laid out as a :class:`LayerControls` fragment.

    With ``gamma = sigma'(K y + beta) * p`` (times ``alpha``): the K part is
    ``gamma y^T``, the beta part ``gamma`` and, for ODENet kinds, the alpha part
    ``<p, sigma(K y + beta)>``. Batches are summed over their leading axis.
    """
    y = np.asarray(y, dtype=float)
    p = np.asarray(p, dtype=float)
    _check(u, y, kind, p)
    z = _preactivation(u, y)
    gamma = activation_prime(z) * p
    if kind.has_alpha:
        # per-sample sums first, then over the batch
        dalpha = float(np.sum(np.sum(p * activation(z), axis=-1)))
        gamma = u.alpha * gamma
    else:
        dalpha = None
    if y.ndim == 1:
        dK = np.outer(gamma, y)
        dbeta = gamma
    else:
        dK = gamma.T @ y
        dbeta = gamma.sum(axis=0)
    return LayerControls(dK, dbeta, dalpha)


def hamiltonian(y, p, u, kind):
    """``<p, f(y, u)>``; summed over a batch."""
    return float(np.sum(np.asarray(p, dtype=float) * vector_field(u, y, kind)))
