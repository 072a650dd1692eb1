"""Smoothed surrogate of the max-off-diagonal coherence objective.

The exact objective is ``f(M) = ||M^T M - I||_inf``. Writing the inf-norm as a
maximum over the unit l1-ball and subtracting a quadratic prox term gives

    f_rho(M) = max_{||V||_1 <= 1} <M^T M - I, V> - (rho / 2) ||V||_F^2,

whose maximizer is the l1-ball projection of ``(M^T M - I) / rho`` and whose
gradient is ``M (V + V^T)``. For unit-column ``M`` we have
``f_rho <= f <= f_rho + rho / 2``.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidDims
from .matcore import gram

STEP_RATIO = 0.99


@dataclass(frozen=True)
class SmoothingState:
    """Smoothness ``rho`` and its proximal step size ``alpha = 0.99 rho``."""

    rho: float
    alpha: float = field(init=False)

    def __post_init__(self):
        rho = float(self.rho)
        if not (rho > 0 and np.isfinite(rho)):
            raise ValueError(f"rho must be positive and finite, got {self.rho!r}")
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "alpha", STEP_RATIO * rho)


def project_l1_ball(X, radius=1.0):
    """Euclidean projection of ``X`` (any shape) onto ``{Y : sum|Y_ij| <= radius}``.

    Exact sort-based threshold search. Only entries that can survive the
    soft-threshold are sorted: any feasible threshold is bounded below by
    ``max|x| - radius`` and by ``(||x||_1 - radius) / N``, so smaller
    entries are dropped before sorting without changing the result.

    Returns a new array of the same shape.
    """
    radius = float(radius)
    if not radius > 0:
        raise ValueError(f"radius must be positive, got {radius!r}")
    X = np.asarray(X, dtype=np.float64)
    a = np.abs(X)
    total = a.sum()
    if total <= radius:
        return X.copy()
    lower = max(a.max() - radius, (total - radius) / a.size, 0.0)
    u = np.sort(a[a > lower], axis=None)[::-1]
    css = np.cumsum(u) - radius
    j = np.arange(1, u.size + 1)
    k = np.flatnonzero(u - css / j > 0)[-1]
    theta = css[k] / (k + 1)
    return np.sign(X) * np.maximum(a - theta, 0.0)


def shifted_gram(M):
    G = gram(M)
    G[np.diag_indices_from(G)] -= 1.0
    return G


def _state(state):
    return state if isinstance(state, SmoothingState) else SmoothingState(state)


def solve_dual(M, state):
    """Maximizer ``V`` of the inner problem: the l1-ball projection of ``(G - I) / rho``."""
    state = _state(state)
    return project_l1_ball(shifted_gram(M) / state.rho, 1.0)


def f_exact(M):
    """``max_ij |(M^T M - I)_ij|`` (equals the mutual coherence for unit columns)."""
    return float(np.abs(shifted_gram(M)).max())


def _f_from(E, V, rho):
    return float(np.vdot(E, V) - 0.5 * rho * np.vdot(V, V))


def f_rho(M, state):
    state = _state(state)
    E = shifted_gram(M)
    V = project_l1_ball(E / state.rho, 1.0)
    return _f_from(E, V, state.rho)


def grad_f_rho(M, state):
    """Gradient ``M (V + V^T)`` of :func:`f_rho` with respect to ``M``."""
    V = solve_dual(M, state)
    return M @ (V + V.T)


def evaluate(M, state):
    """Value, gradient and dual maximizer of ``f_rho`` at ``M`` in one pass.

    Returns ``(value, grad, V)``. The solvers use this to avoid forming the
    Gram matrix and projecting twice per iteration.
    """
    state = _state(state)
    if M.ndim != 2:
        raise InvalidDims(f"M must be 2-D, got shape {M.shape}")
    E = shifted_gram(M)
    V = project_l1_ball(E / state.rho, 1.0)
    return _f_from(E, V, state.rho), M @ (V + V.T), V
