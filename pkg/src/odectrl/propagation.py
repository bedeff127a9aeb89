"""Forward propagation through the network with full stage caching."""

from dataclasses import dataclass

import numpy as np

from .dynamics import ArchitectureKind, jac_u_apply, jac_y_apply, vector_field
from .errors import ConfigurationError, ContractError, ShapeError, UnsupportedError
from .tableau import ButcherTableau, make_tableau

DEFAULT_T = 5.0


def default_dt(kind, N, T=DEFAULT_T):
    """Step size used when none is given.

    ResNet spreads ``T`` evenly over the layers. The ODENet kinds multiply the
    step by a learned ``alpha`` that starts at ``1/N``, so their default step is
    ``T`` itself: the initial layer steps then match ResNet and an ``alpha`` on
    the simplex distributes the total time ``T``.
    """
    kind = ArchitectureKind.parse(kind)
    if not isinstance(N, (int, np.integer)) or N < 1:
        raise ConfigurationError(f"layer count must be a positive integer, got {N!r}")
    return T if kind.has_alpha else T / N


@dataclass(frozen=True)
class NetworkConfig:
    kind: ArchitectureKind
    tableau: ButcherTableau
    n: int
    N: int
    dt: float

    def __post_init__(self):
        object.__setattr__(self, "kind", ArchitectureKind.parse(self.kind))
        if isinstance(self.tableau, str):
            object.__setattr__(self, "tableau", make_tableau(self.tableau))
        if self.N < 1 or self.n < 1:
            raise ConfigurationError(f"need N >= 1 and n >= 1, got N={self.N}, n={self.n}")
        if not self.dt > 0:
            raise ConfigurationError(f"dt must be positive, got {self.dt}")

    @property
    def stages(self):
        return self.tableau.s if self.kind.uses_tableau else 1


def make_config(kind, tableau="euler", n=2, N=20, dt=None, T=DEFAULT_T):
    kind = ArchitectureKind.parse(kind)
    if dt is None:
        dt = default_dt(kind, N, T)
    return NetworkConfig(kind, make_tableau(tableau), n, N, float(dt))


@dataclass
class TrajectoryCache:
    """Layer states ``(N+1, ..., n)``, stage states and stage fields ``(N, s, ..., n)``.

    For the feed-forward Net the single "stage" is the layer input itself.
    """

    states: np.ndarray
    stage_states: np.ndarray
    stage_fields: np.ndarray

    @property
    def final(self):
        return self.states[-1]


def _validate(config, controls, x):
    if len(controls) != config.N:
        raise ContractError(f"expected {config.N} layer controls, got {len(controls)}")
    if config.kind.uses_tableau and not config.tableau.explicit:
        raise UnsupportedError(f"tableau {config.tableau.name!r} is not explicit")
    if x.ndim not in (1, 2) or x.shape[-1] != config.n:
        raise ShapeError(f"input of shape {x.shape} does not match width n={config.n}")


def forward(config, controls, x):
    """Propagate ``x`` (one sample ``(n,)`` or a batch ``(m, n)``) through all layers."""
    x = np.asarray(x, dtype=float)
    _validate(config, controls, x)
    kind, N, s, dt = config.kind, config.N, config.stages, config.dt
    states = np.empty((N + 1,) + x.shape)
    stage_states = np.empty((N, s) + x.shape)
    stage_fields = np.empty((N, s) + x.shape)
    states[0] = x
    if kind is ArchitectureKind.NET:
        for j, u in enumerate(controls):
            stage_states[j, 0] = states[j]
            stage_fields[j, 0] = vector_field(u, states[j], kind)
            states[j + 1] = stage_fields[j, 0]
        return TrajectoryCache(states, stage_states, stage_fields)

    A, b = config.tableau.A, config.tableau.b
    for j, u in enumerate(controls):
        y = states[j]
        for i in range(s):
            yi = y.copy()
            for l in range(i):
                if A[i, l] != 0.0:
                    yi += dt * A[i, l] * stage_fields[j, l]
            stage_states[j, i] = yi
            stage_fields[j, i] = vector_field(u, yi, kind)
        incr = b[0] * stage_fields[j, 0]
        for i in range(1, s):
            incr = incr + b[i] * stage_fields[j, i]
        states[j + 1] = y + dt * incr
    return TrajectoryCache(states, stage_states, stage_fields)


def forward_batch(config, controls, X):
    """One cache per row of ``X``, in row order."""
    X = np.asarray(X, dtype=float)
    if X.size == 0:
        return []
    return [forward(config, controls, x) for x in X]


def evolve_variational(config, controls, cache, v0, w=None):
    """Propagate a state variation ``v0`` and control variation ``w`` with the same method.

    ``w`` is a list of per-layer :class:`LayerControls` perturbations, or ``None``
    for no control variation.
    """
    v0 = np.asarray(v0, dtype=float)
    N, s, dt, kind = config.N, config.stages, config.dt, config.kind
    if cache.states.shape[0] != N + 1 or cache.stage_states.shape[1] != s:
        raise ContractError("trajectory cache does not match the network configuration")
    if v0.shape != cache.states.shape[1:]:
        raise ContractError(f"variation shape {v0.shape} does not match states {cache.states.shape[1:]}")
    if w is not None and len(w) != N:
        raise ContractError(f"expected {N} control perturbations, got {len(w)}")

    def rhs(j, i, vi):
        u, yi = controls[j], cache.stage_states[j, i]
        g = jac_y_apply(u, yi, vi, kind)
        if w is not None:
            g = g + jac_u_apply(u, yi, w[j], kind)
        return g

    vs = np.empty((N + 1,) + v0.shape)
    vs[0] = v0
    if kind is ArchitectureKind.NET:
        for j in range(N):
            vs[j + 1] = rhs(j, 0, vs[j])
        return vs

    A, b = config.tableau.A, config.tableau.b
    for j in range(N):
        g = np.empty((s,) + v0.shape)
        for i in range(s):
            vi = vs[j] + dt * sum((A[i, l] * g[l] for l in range(i)), np.zeros_like(v0))
            g[i] = rhs(j, i, vi)
        vs[j + 1] = vs[j] + dt * sum(b[i] * g[i] for i in range(s))
    return vs
