"""Sparse-signal generation, Orthogonal Matching Pursuit and error scoring."""

from dataclasses import dataclass, field
import math

import numpy as np

from .errors import BadSparsity, DegenerateLS, ShapeMismatch
from .matcore import as_dense, mutual_coherence

RESIDUAL_TOL = 1e-12
LS_RANK_TOL = 1e-10
DEFAULT_THRESHOLD = 1e-4


@dataclass(frozen=True)
class SparseSignal:
    n: int
    support: np.ndarray
    values: np.ndarray

    @property
    def T(self):
        return int(self.support.size)

    def dense(self):
        x = np.zeros(self.n)
        x[self.support] = self.values
        return x


def gen_sparse_signal(n, T, rng):
    """``T``-sparse length-``n`` vector: uniform random support, values U[-1, 1] (no exact zeros)."""
    if T < 0 or T > n:
        raise BadSparsity(f"sparsity T={T} must satisfy 0 <= T <= n={n}")
    rng = np.random.default_rng(rng)
    support = np.sort(rng.choice(n, size=T, replace=False)) if T else np.zeros(0, dtype=np.int64)
    values = rng.uniform(-1.0, 1.0, size=T)
    while np.any(values == 0.0):
        zero = values == 0.0
        values[zero] = rng.uniform(-1.0, 1.0, size=int(zero.sum()))
    return SparseSignal(n, support.astype(np.int64), values)


@dataclass
class RecoveryResult:
    estimate: np.ndarray
    residual_norm: float
    support: list = field(default_factory=list)
    residual_history: list = field(default_factory=list)
    reconstruction_error: float = math.nan
    success: bool = None


def omp(M, y, T, tol=RESIDUAL_TOL):
    """Orthogonal Matching Pursuit with exactly ``T`` selections.

    Each round picks the column with the largest ``|<M_i, r>|`` (lowest index
    on ties, never a column already chosen), refits all chosen coefficients
    by least squares through a QR factorization, and updates the residual.
    Stops early once ``||r||_2 <= tol``.

    Raises
    ------
    DegenerateLS
        If the chosen columns are numerically linearly dependent.
    """
    M = as_dense(M, "M")
    y = np.asarray(y, dtype=np.float64).ravel()
    m, n = M.shape
    if y.size != m:
        raise ShapeMismatch(f"y has length {y.size}, M has {m} rows")
    if T < 0 or T > min(m, n):
        raise BadSparsity(f"T={T} must satisfy 0 <= T <= min(m, n) = {min(m, n)}")

    coef = np.zeros(n)
    support = []
    r = y.copy()
    history = [float(np.linalg.norm(r))]
    x_s = np.zeros(0)
    for _ in range(int(T)):
        if history[-1] <= tol:
            break
        c = np.abs(M.T @ r)
        c[support] = -1.0
        support.append(int(np.argmax(c)))
        A = M[:, support]
        Q, R = np.linalg.qr(A)
        diag = np.abs(np.diag(R))
        if diag.min() <= LS_RANK_TOL * max(diag.max(), 1.0):
            raise DegenerateLS(f"selected columns {support} are rank deficient")
        x_s = np.linalg.solve(R, Q.T @ y)
        r = y - A @ x_s
        history.append(float(np.linalg.norm(r)))
    coef[support] = x_s
    return RecoveryResult(estimate=coef, residual_norm=history[-1],
                          support=support, residual_history=history)


def recon_error(D, alpha_true, alpha_hat):
    """Signal-space error ``||D alpha_true - D alpha_hat||_2``."""
    D = D.matrix if hasattr(D, "matrix") else as_dense(D, "D")
    a = alpha_true.dense() if isinstance(alpha_true, SparseSignal) else np.asarray(alpha_true, float)
    b = np.asarray(alpha_hat, dtype=np.float64).ravel()
    if a.size != D.shape[1] or b.size != D.shape[1]:
        raise ShapeMismatch(f"coefficient vectors must have length {D.shape[1]}")
    return float(np.linalg.norm(D @ (a - b)))


def score(result, D, alpha_true, threshold=DEFAULT_THRESHOLD):
    """Fill in ``reconstruction_error`` and ``success`` (squared error below ``threshold``)."""
    err = recon_error(D, alpha_true, result.estimate)
    result.reconstruction_error = err
    result.success = bool(err * err < threshold)
    return result


def recovery_guarantee_holds(M, T):
    """True iff ``T < (1 + 1/mu(M)) / 2``, the coherence condition for exact OMP recovery."""
    mu = mutual_coherence(M)
    if mu == 0.0:
        return True
    return T < 0.5 * (1.0 + 1.0 / mu)
