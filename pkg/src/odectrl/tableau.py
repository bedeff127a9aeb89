"""Runge--Kutta coefficient schemes and their symplectic adjoint companions."""

from dataclasses import dataclass, field
from fractions import Fraction as F

import numpy as np

from .errors import ConfigurationError, InvalidTableauError, UnsupportedError

METHODS = ("euler", "improved_euler", "kutta3", "kutta4")

_TABLES = {
    "euler": ([[0]], [1]),
    "improved_euler": ([[0, 0], [1, 0]], [F(1, 2), F(1, 2)]),
    "kutta3": (
        [[0, 0, 0], [F(1, 2), 0, 0], [-1, 2, 0]],
        [F(1, 6), F(2, 3), F(1, 6)],
    ),
    "kutta4": (
        [[0, 0, 0, 0], [F(1, 2), 0, 0, 0], [0, F(1, 2), 0, 0], [0, 0, 1, 0]],
        [F(1, 6), F(1, 3), F(1, 3), F(1, 6)],
    ),
}

NOMINAL_ORDER = {"euler": 1, "improved_euler": 2, "kutta3": 3, "kutta4": 4}


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ButcherTableau:
    """Coefficients ``(A, b, c)`` of an ``s``-stage Runge--Kutta method."""

    name: str
    A: np.ndarray
    b: np.ndarray
    c: np.ndarray = field(default=None)

    def __post_init__(self):
        A = _frozen(self.A)
        b = _frozen(self.b)
        if A.ndim != 2 or A.shape[0] != A.shape[1] or b.shape != (A.shape[0],):
            raise InvalidTableauError(f"inconsistent shapes A{A.shape}, b{b.shape}")
        c = A.sum(axis=1) if self.c is None else self.c
        c = _frozen(c)
        if c.shape != b.shape or not np.allclose(c, A.sum(axis=1), rtol=0, atol=1e-14):
            raise InvalidTableauError("nodes c must equal the row sums of A")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)

    @property
    def s(self):
        return self.b.size

    @property
    def explicit(self):
        return not np.any(np.triu(self.A))


@dataclass(frozen=True)
class AdjointTableau:
    """Coefficients of the method applied backwards to the costate."""

    A: np.ndarray
    b: np.ndarray
    c: np.ndarray


def make_tableau(name):
    """Return one of the built-in explicit methods by name."""
    try:
        A, b = _TABLES[name]
    except KeyError:
        raise ConfigurationError(
            f"unknown tableau {name!r}; expected one of {', '.join(METHODS)}"
        ) from None
    A = [[float(F(x)) for x in row] for row in A]
    c = [float(sum(F(x) for x in row)) for row in _TABLES[name][0]]
    return ButcherTableau(name, A, [float(x) for x in b], c)


def adjoint_of(t):
    """Symplectic companion of ``t``.

    Solves ``b_i a~_ij + b_j a_ji - b_i b_j = 0`` for ``a~`` with ``b~ = b``
    and ``c~ = c``. The explicit Euler method maps to implicit Euler.
    """
    b = t.b
    if np.any(b == 0):
        raise InvalidTableauError(f"tableau {t.name!r} has a zero weight")
    At = b[None, :] - b[None, :] * t.A.T / b[:, None]
    return AdjointTableau(_frozen(At), t.b, t.c)


def symplectic_residual(t, adj):
    """Entrywise ``b_i a~_ij + b~_j a_ji - b_i b~_j``."""
    b, bt = t.b, adj.b
    return b[:, None] * adj.A + bt[None, :] * t.A.T - b[:, None] * bt[None, :]


def verify_order(t, order, tol=1e-12):
    """Check the classical rooted-tree order conditions up to ``order`` (<= 4)."""
    if not 1 <= order <= 4:
        raise UnsupportedError(f"order conditions implemented for 1..4, got {order}")
    A, b, c = t.A, t.b, t.c
    conditions = [(b.sum(), 1.0)]
    if order >= 2:
        conditions.append((b @ c, 1 / 2))
    if order >= 3:
        conditions += [(b @ c**2, 1 / 3), (b @ A @ c, 1 / 6)]
    if order >= 4:
        conditions += [
            (b @ c**3, 1 / 4),
            (b @ (c * (A @ c)), 1 / 8),
            (b @ A @ c**2, 1 / 12),
            (b @ A @ A @ c, 1 / 24),
        ]
    return all(abs(lhs - rhs) <= tol for lhs, rhs in conditions)
