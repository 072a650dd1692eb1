"""Projection design for a fixed dictionary (DMCM-P).

The joint objective over a unit-column ``M`` (m x n) and a projection ``P``
(m x d) is

    F(M, P) = f_rho(M) + ||M - P D||_F^2 / (2 beta).

Alternating minimization: ``P`` is the least-squares fit ``M D^+``, then ``M``
takes a linearized proximal step on ``f_rho`` combined with the coupling term
and is renormalized column by column. The continuation wrapper shrinks
``rho`` and ``beta`` by ``eta`` after every round, down to fixed floors.
"""

from dataclasses import dataclass, field
from functools import cached_property
import logging

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import RankDeficient, ShapeMismatch
from .matcore import as_dense, check_unit_columns, column_norm_deviation, normalize_columns
from .smoothing import SmoothingState, f_rho, grad_f_rho, project_l1_ball, shifted_gram
from .trace import SolveTrace, TraceRecord

log = logging.getLogger(__name__)

RANK_TOL = 1e-10


class Dictionary:
    """A full-row-rank ``d x n`` dictionary with ``d <= n``.

    Caches the Cholesky factor of ``D D^T`` so that ``X D^+`` can be formed
    repeatedly without an explicit inverse. ``d == n`` is accepted so the
    baselines can run with ``D = I``.
    """

    def __init__(self, matrix):
        D = as_dense(matrix, "D")
        d, n = D.shape
        if d > n:
            raise ShapeMismatch(f"dictionary must have d <= n, got {d} x {n}")
        s = np.linalg.svd(D, compute_uv=False)
        if s[-1] <= RANK_TOL * s[0]:
            raise RankDeficient(
                f"dictionary is not full row rank (sigma_min/sigma_max = {s[-1] / s[0]:.2e})")
        self.matrix = D
        self.d, self.n = d, n
        self.ddt = D @ D.T
        self._chol = cho_factor(self.ddt)

    @classmethod
    def gaussian(cls, d, n, rng):
        return cls(np.random.default_rng(rng).standard_normal((d, n)))

    @classmethod
    def identity(cls, n):
        return cls(np.eye(n))

    @cached_property
    def pinv(self):
        """``D^+ = D^T (D D^T)^{-1}`` (n x d)."""
        return self.pinv_apply(np.eye(self.n))

    def pinv_apply(self, X):
        """``X D^+`` for ``X`` with ``n`` columns, via the cached Cholesky factor."""
        X = np.asarray(X, dtype=np.float64)
        if X.shape[-1] != self.n:
            raise ShapeMismatch(f"expected {self.n} columns, got shape {X.shape}")
        return cho_solve(self._chol, self.matrix @ X.T).T


@dataclass(frozen=True)
class AmConfig:
    beta: float
    smoothing: SmoothingState
    max_inner_iters: int = 15
    tol: float = None

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta!r}")
        if int(self.max_inner_iters) < 1:
            raise ValueError("max_inner_iters must be >= 1")
        if not isinstance(self.smoothing, SmoothingState):
            object.__setattr__(self, "smoothing", SmoothingState(self.smoothing))


@dataclass(frozen=True)
class AmSchedule:
    rho0: float = 0.5
    beta0: float = 2.0
    eta: float = 1.2
    outer_iters: int = 1000
    rho_floor: float = 1e-2
    beta_floor: float = 1e-2
    inner_iters: int = 15
    tol: float = None

    def __post_init__(self):
        if not self.eta > 1:
            raise ValueError(f"eta must exceed 1, got {self.eta!r}")
        if not (self.rho_floor > 0 and self.beta_floor > 0):
            raise ValueError("floors must be positive")
        if not (self.rho0 >= self.rho_floor and self.beta0 >= self.beta_floor):
            raise ValueError("initial rho/beta must not be below their floors")
        if int(self.outer_iters) < 1 or int(self.inner_iters) < 1:
            raise ValueError("outer_iters and inner_iters must be >= 1")

    def params(self):
        """``(rho, beta)`` for each outer round."""
        out, rho, beta = [], float(self.rho0), float(self.beta0)
        for _ in range(int(self.outer_iters)):
            out.append((rho, beta))
            rho = max(rho / self.eta, self.rho_floor)
            beta = max(beta / self.eta, self.beta_floor)
        return out


def _check_shapes(M, P, D):
    m, n = M.shape
    if n != D.n or P.shape != (m, D.d):
        raise ShapeMismatch(
            f"M is {M.shape}, P is {P.shape}, D is {D.d} x {D.n}; need P: m x d, M: m x n")


def _dict(D):
    return D if isinstance(D, Dictionary) else Dictionary(D)


def objective_F(M, P, D, cfg):
    """``f_rho(M) + ||M - P D||_F^2 / (2 beta)``."""
    D = _dict(D)
    M, P = as_dense(M, "M"), as_dense(P, "P")
    _check_shapes(M, P, D)
    R = M - P @ D.matrix
    return f_rho(M, cfg.smoothing) + float(np.vdot(R, R)) / (2.0 * cfg.beta)


def am_update_M(M_k, P_k, D, cfg):
    """Closed-form M-step: renormalized columns of the proximal anchor

    ``((1/alpha) M_k + (1/beta) P_k D - grad f_rho(M_k)) / (1/alpha + 1/beta)``.
    """
    D = _dict(D)
    _check_shapes(M_k, P_k, D)
    grad = grad_f_rho(M_k, cfg.smoothing)
    return normalize_columns(_anchor(M_k, P_k @ D.matrix, grad, cfg.smoothing.alpha, cfg.beta))


def _anchor(M, PD, grad, alpha, beta):
    ia, ib = 1.0 / alpha, 1.0 / beta
    return (ia * M + ib * PD - grad) / (ia + ib)


def am_update_P(M_next, D):
    """Least-squares projection ``M_next D^+``."""
    D = _dict(D)
    return D.pinv_apply(M_next)


def am_solve(M0, P0, D, cfg, round_index=0):
    """Alternating minimization for a fixed ``(rho, beta)``.

    Each iteration updates ``P`` (least squares), then the dual variable,
    then ``M`` (proximal step). Returns ``(M, P, trace)``; record ``k``
    holds ``F`` before and after the ``k``-th update triple.
    """
    D = _dict(D)
    M = check_unit_columns(M0, name="M0").copy()
    P = as_dense(P0, "P0").copy()
    _check_shapes(M, P, D)
    rho, alpha, beta = cfg.smoothing.rho, cfg.smoothing.alpha, cfg.beta
    Dm = D.matrix

    def smoothed(E):
        V = project_l1_ball(E / rho, 1.0)
        return float(np.vdot(E, V) - 0.5 * rho * np.vdot(V, V)), V

    def coupling(M, P):
        R = M - P @ Dm
        return float(np.vdot(R, R)) / (2.0 * beta)

    trace = SolveTrace()
    E = shifted_gram(M)
    trace.initial_f_exact = float(np.abs(E).max())
    f_cur, V = smoothed(E)
    F_cur = f_cur + coupling(M, P)

    for k in range(int(cfg.max_inner_iters)):
        P_next = D.pinv_apply(M)
        grad = M @ (V + V.T)
        M_next = normalize_columns(_anchor(M, P_next @ Dm, grad, alpha, beta))
        E = shifted_gram(M_next)
        f_next, V = smoothed(E)
        gap = float(np.linalg.norm(M_next - P_next @ Dm))
        F_next = f_next + gap * gap / (2.0 * beta)
        step = float(np.linalg.norm(M_next - M))
        rec = TraceRecord(
            round=round_index, iteration=k, rho=rho, beta=beta,
            objective_before=F_cur, objective=F_next, f_rho=f_next,
            f_exact=float(np.abs(E).max()), col_dev=column_norm_deviation(M_next),
            step_M=step, step_P=float(np.linalg.norm(P_next - P)), gap=gap,
            descent_bound=(0.5 / alpha - 0.5 / rho) * step * step,
        )
        M, P, F_cur = M_next, P_next, F_next
        trace.append(rec, M)
        if cfg.tol is not None and step <= cfg.tol:
            break
    return M, P, trace


def initial_pair(D, m, rng):
    """Seeded Gaussian ``P`` and ``M = normalize_columns(P D)``."""
    D = _dict(D)
    P = np.random.default_rng(rng).standard_normal((m, D.d))
    return normalize_columns(P @ D.matrix), P


def dmcmp_continuation(D, m, sched=None, seed=None, init=None):
    """Alternating minimization with continuation on ``(rho, beta)``.

    ``init`` may supply a starting ``(M, P)``; otherwise ``P`` is seeded
    Gaussian and ``M = normalize_columns(P D)``. Returns ``(M, P, trace)``.
    """
    D = _dict(D)
    sched = sched or AmSchedule()
    M, P = init if init is not None else initial_pair(D, m, seed)
    trace = SolveTrace()
    for t, (rho, beta) in enumerate(sched.params()):
        cfg = AmConfig(beta, SmoothingState(rho), sched.inner_iters, tol=sched.tol)
        M, P, sub = am_solve(M, P, D, cfg, round_index=t)
        trace.extend(sub)
    log.debug("dmcm-p: %d rounds, final gap %.3e", sched.outer_iters, trace.records[-1].gap)
    return M, P, trace
