"""Trainable parameter container shared by the optimizer, the oracle and the CLI."""

from dataclasses import dataclass
from typing import List

import numpy as np

from .dynamics import ArchitectureKind, LayerControls
from .errors import ContractError
from .loss import ClassifierHead


@dataclass
class Parameters:
    """Per-layer controls plus the classifier head ``(W, mu)``.

    The flat vector layout is, layer by layer, ``K`` (row-major), ``beta`` and
    ``alpha`` when present, followed by ``W`` and ``mu``.
    """

    controls: List[LayerControls]
    W: np.ndarray
    mu: float

    @property
    def N(self):
        return len(self.controls)

    @property
    def n(self):
        return self.W.shape[0]

    @property
    def has_alpha(self):
        return self.controls[0].alpha is not None

    @property
    def head(self):
        return ClassifierHead(self.W, self.mu)

    def alphas(self):
        if not self.has_alpha:
            return None
        return np.array([u.alpha for u in self.controls])

    def vector(self):
        parts = []
        for u in self.controls:
            parts += [u.K.ravel(), u.beta]
            if u.alpha is not None:
                parts.append([u.alpha])
        parts += [self.W, [self.mu]]
        return np.concatenate(parts).astype(float)

    @property
    def size(self):
        per_layer = self.n * self.n + self.n + (1 if self.has_alpha else 0)
        return self.N * per_layer + self.n + 1

    def with_vector(self, vec):
        """New parameters of the same layout filled from ``vec``."""
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (self.size,):
            raise ContractError(f"expected a vector of length {self.size}, got {vec.shape}")
        n, pos, controls = self.n, 0, []
        for u in self.controls:
            K = vec[pos:pos + n * n].reshape(n, n).copy()
            pos += n * n
            beta = vec[pos:pos + n].copy()
            pos += n
            alpha = None
            if u.alpha is not None:
                alpha = float(vec[pos])
                pos += 1
            controls.append(LayerControls(K, beta, alpha))
        W = vec[pos:pos + n].copy()
        return Parameters(controls, W, float(vec[pos + n]))

    def coordinate_name(self, k):
        """Human-readable name of flat coordinate ``k``, e.g. ``K[2][0,1]``."""
        n = self.n
        per_layer = n * n + n + (1 if self.has_alpha else 0)
        j, r = divmod(k, per_layer)
        if j < self.N:
            if r < n * n:
                return f"K[{j}][{r // n},{r % n}]"
            if r < n * n + n:
                return f"beta[{j}][{r - n * n}]"
            return f"alpha[{j}]"
        r = k - self.N * per_layer
        return f"W[{r}]" if r < n else "mu"

    def with_alphas(self, alphas):
        controls = [LayerControls(u.K, u.beta, float(a)) for u, a in zip(self.controls, alphas)]
        return Parameters(controls, self.W, self.mu)

    def copy(self):
        return self.with_vector(self.vector())


def initialize(kind, n, N, rng):
    """Random initial parameters.

    ``K`` and ``W`` entries are ``N(0, 1/n)``, biases and ``mu`` start at zero and
    ``alpha`` starts uniform at ``1/N`` (a point of the simplex).
    """
    kind = ArchitectureKind.parse(kind)
    scale = 1.0 / np.sqrt(n)
    controls = []
    for _ in range(N):
        K = rng.standard_normal((n, n)) * scale
        alpha = 1.0 / N if kind.has_alpha else None
        controls.append(LayerControls(K, np.zeros(n), alpha))
    W = rng.standard_normal(n) * scale
    return Parameters(controls, W, 0.0)


def random_parameters(kind, n, N, rng, scale=0.1):
    """All entries drawn from ``N(0, 1) * scale``; used for gradient checks."""
    kind = ArchitectureKind.parse(kind)
    controls = []
    for _ in range(N):
        K = rng.standard_normal((n, n)) * scale
        beta = rng.standard_normal(n) * scale
        alpha = float(rng.standard_normal() * scale) if kind.has_alpha else None
        controls.append(LayerControls(K, beta, alpha))
    W = rng.standard_normal(n) * scale
    return Parameters(controls, W, float(rng.standard_normal() * scale))
