"""Direct mutual-coherence minimization over unit-column matrices.

Proximal gradient on the smoothed objective ``f_rho``: each step moves
against the gradient with step ``alpha = 0.99 rho`` and projects back onto the
unit-column set by renormalizing every column. ``dmcm_continuation`` repeats
the solve while shrinking ``rho`` geometrically, warm-starting each round.
"""

from dataclasses import dataclass
import logging

import numpy as np

from .matcore import check_unit_columns, column_norm_deviation, normalize_columns
from .smoothing import SmoothingState, evaluate, project_l1_ball, shifted_gram
from .trace import SolveTrace, TraceRecord

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PgConfig:
    max_inner_iters: int
    smoothing: SmoothingState
    tol: float = None

    def __post_init__(self):
        if int(self.max_inner_iters) < 1:
            raise ValueError("max_inner_iters must be >= 1")
        if not isinstance(self.smoothing, SmoothingState):
            object.__setattr__(self, "smoothing", SmoothingState(self.smoothing))


@dataclass(frozen=True)
class ContinuationSchedule:
    rho0: float = 0.5
    eta: float = 1.2
    outer_iters: int = 1000
    rho_floor: float = 1e-2
    inner_iters: int = 15
    tol: float = None

    def __post_init__(self):
        if not self.eta > 1:
            raise ValueError(f"eta must exceed 1, got {self.eta!r}")
        if not self.rho_floor > 0:
            raise ValueError("rho_floor must be positive")
        if not self.rho0 >= self.rho_floor:
            raise ValueError("rho0 must be >= rho_floor")
        if int(self.outer_iters) < 1 or int(self.inner_iters) < 1:
            raise ValueError("outer_iters and inner_iters must be >= 1")

    def rhos(self):
        """The ``rho`` used by each outer round."""
        out, rho = [], float(self.rho0)
        for _ in range(int(self.outer_iters)):
            out.append(rho)
            rho = max(rho / self.eta, self.rho_floor)
        return out


def random_unit_matrix(m, n, rng):
    """Column-normalized standard-normal ``m x n`` matrix."""
    rng = np.random.default_rng(rng)
    return normalize_columns(rng.standard_normal((m, n)))


def pg_step(M, state):
    """One proximal-gradient step: ``normalize_columns(M - alpha * grad f_rho(M))``."""
    if not isinstance(state, SmoothingState):
        state = SmoothingState(state)
    _, grad, _ = evaluate(M, state)
    return normalize_columns(M - state.alpha * grad)


def quadratic_model(M, M_k, grad, alpha):
    """Linearized objective minimized by :func:`pg_step`, relative to ``M_k``."""
    D = M - M_k
    return float(np.vdot(grad, D) + np.vdot(D, D) / (2.0 * alpha))


def pg_solve(M0, cfg, round_index=0):
    """Run ``cfg.max_inner_iters`` proximal-gradient steps from ``M0``.

    Returns ``(M, trace)`` where ``M`` is the final iterate.
    """
    M = check_unit_columns(M0, name="M0").copy()
    state = cfg.smoothing
    rho, alpha = state.rho, state.alpha
    trace = SolveTrace()

    E = shifted_gram(M)
    trace.initial_f_exact = float(np.abs(E).max())
    V = project_l1_ball(E / rho, 1.0)
    f_cur = float(np.vdot(E, V) - 0.5 * rho * np.vdot(V, V))

    for k in range(int(cfg.max_inner_iters)):
        grad = M @ (V + V.T)
        M_next = normalize_columns(M - alpha * grad)
        E = shifted_gram(M_next)
        V = project_l1_ball(E / rho, 1.0)
        f_next = float(np.vdot(E, V) - 0.5 * rho * np.vdot(V, V))
        step = float(np.linalg.norm(M_next - M))
        rec = TraceRecord(
            round=round_index, iteration=k, rho=rho, beta=np.nan,
            objective_before=f_cur, objective=f_next, f_rho=f_next,
            f_exact=float(np.abs(E).max()), col_dev=column_norm_deviation(M_next),
            step_M=step, descent_bound=(0.5 / alpha - 0.5 / rho) * step * step,
        )
        M, f_cur = M_next, f_next
        trace.append(rec, M)
        if cfg.tol is not None and step <= cfg.tol:
            break
    return M, trace


def dmcm_continuation(M0, sched=None):
    """Proximal gradient with continuation on ``rho``.

    For each outer round ``t`` the solve runs at ``rho_t`` (``alpha = 0.99 rho_t``)
    from the previous round's output, then ``rho <- max(rho / eta, rho_floor)``.
    Returns the final iterate and the concatenated trace.
    """
    sched = sched or ContinuationSchedule()
    M = check_unit_columns(M0, name="M0")
    trace = SolveTrace()
    for t, rho in enumerate(sched.rhos()):
        cfg = PgConfig(sched.inner_iters, SmoothingState(rho), tol=sched.tol)
        M, sub = pg_solve(M, cfg, round_index=t)
        trace.extend(sub)
    log.debug("dmcm: %d rounds, final coherence %.6f", sched.outer_iters,
              trace.records[-1].f_exact)
    return M, trace
