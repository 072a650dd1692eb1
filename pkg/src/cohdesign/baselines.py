"""Prior projection-design algorithms used as comparison points.

* ``elad_projection``: shrink large Gram entries, truncate the Gram matrix to
  rank ``m``, refactor it as ``S^T S`` and map back with ``P = S D^+``.
* ``xu_projection``: the same loop, with the shrink replaced by clamping the
  off-diagonals to the Welch bound and resetting the diagonal to 1.
* ``duarte_projection``: closed-form whitening of the top ``m`` eigen-directions
  of ``D D^T`` (Gram matrix pushed towards the identity).
* ``random_projection``: i.i.d. standard-normal entries.
"""

from dataclasses import dataclass

import numpy as np

from .dmcmp import Dictionary
from .errors import RankDeficient
from .matcore import gram, normalize_columns, welch_bound


@dataclass(frozen=True)
class EladParams:
    t: float = 0.2
    down_scale: float = 0.95
    iters: int = 100

    def __post_init__(self):
        if not 0 < self.down_scale < 1:
            raise ValueError("down_scale must lie in (0, 1)")
        if not self.t > 0:
            raise ValueError("threshold t must be positive")
        if int(self.iters) < 1:
            raise ValueError("iters must be >= 1")


# Small grid swept when the shrinkage method is compared against others; (t, down_scale).
ELAD_GRID = ((0.2, 0.95), (0.4, 0.8), (0.6, 0.6))


@dataclass(frozen=True)
class XuParams:
    iters: int = 100

    def __post_init__(self):
        if int(self.iters) < 1:
            raise ValueError("iters must be >= 1")


def _as_dictionary(D):
    return D if isinstance(D, Dictionary) else Dictionary(D)


def _check_m(m, D):
    if not 1 <= m <= D.d:
        raise ValueError(f"need 1 <= m <= d = {D.d}, got m = {m}")


def elad_shrink(G, params):
    """Three-branch shrink applied to the off-diagonal entries of ``G``."""
    t, g = params.t, params.down_scale
    G = np.asarray(G, dtype=np.float64)
    a = np.abs(G)
    out = np.where(a >= t, g * G, np.where(a >= g * t, g * t * np.sign(G), G))
    np.fill_diagonal(out, np.diag(G))
    return out


def welch_clamp(G, mu):
    """Clamp off-diagonals of ``G`` to ``[-mu, mu]`` and set the diagonal to 1."""
    out = np.clip(np.asarray(G, dtype=np.float64), -mu, mu)
    np.fill_diagonal(out, 1.0)
    return out


def rank_reduce(G, m):
    """Square-root factor ``S`` (m x n) of the best rank-``m`` PSD approximation of ``G``.

    The symmetric part of ``G`` is eigendecomposed; the ``m`` largest
    eigenvalues (negatives clipped to 0) are kept and ``S = L^{1/2} U^T``,
    so that ``S^T S`` is the truncated matrix.
    """
    w, U = np.linalg.eigh(0.5 * (G + G.T))
    idx = np.argsort(w)[::-1][:m]
    w = np.clip(w[idx], 0.0, None)
    return np.sqrt(w)[:, None] * U[:, idx].T


def _gram_shaping_loop(D, m, shape_gram, iters, rng):
    P = rng.standard_normal((m, D.d))
    for _ in range(int(iters)):
        G = gram(normalize_columns(P @ D.matrix))
        S = rank_reduce(shape_gram(G), m)
        P = D.pinv_apply(S)
    return P


def elad_projection(D, m, params=None, seed=None):
    """Projection ``P`` (m x d) after ``params.iters`` rounds of the shrink-and-truncate update."""
    D = _as_dictionary(D)
    params = params or EladParams()
    _check_m(m, D)
    rng = np.random.default_rng(seed)
    return _gram_shaping_loop(D, m, lambda G: elad_shrink(G, params), params.iters, rng)


def xu_projection(D, m, params=None, seed=None):
    D = _as_dictionary(D)
    params = params or XuParams()
    _check_m(m, D)
    mu = welch_bound(m, D.n)
    rng = np.random.default_rng(seed)
    return _gram_shaping_loop(D, m, lambda G: welch_clamp(G, mu), params.iters, rng)


def duarte_projection(D, m, seed=None):
    """Closed-form eigen-whitening projection.

    With ``D D^T = V diag(lam) V^T`` (descending), returns
    ``P = Gamma V^T`` where ``Gamma = [diag(lam_1..lam_m)^{-1/2} | 0]``.

    The eigenbasis is only unique up to rotations inside repeated
    eigenvalues (all of it when ``D D^T`` is a multiple of the identity).
    Without ``seed`` the basis returned by ``eigh`` is used; with ``seed``
    each repeated-eigenvalue block is rotated by a seeded Haar-random
    orthogonal matrix, which keeps the objective value unchanged.
    """
    D = _as_dictionary(D)
    _check_m(m, D)
    lam, V = duarte_eigen(D, seed)
    if np.any(lam[:m] <= 1e-12):
        raise RankDeficient("D D^T has a non-positive eigenvalue among the top m")
    return (V[:, :m] / np.sqrt(lam[:m])).T


def duarte_eigen(D, seed=None):
    """Descending eigenpairs of ``D D^T`` (with optional seeded rotation of repeated blocks)."""
    D = _as_dictionary(D)
    lam, V = np.linalg.eigh(D.ddt)
    order = np.argsort(lam)[::-1]
    lam, V = lam[order], V[:, order]
    if seed is not None:
        rng = np.random.default_rng(seed)
        scale = max(abs(lam[0]), 1.0)
        start = 0
        while start < lam.size:
            stop = start + 1
            while stop < lam.size and abs(lam[stop] - lam[start]) <= 1e-10 * scale:
                stop += 1
            if stop - start > 1:
                Q, R = np.linalg.qr(rng.standard_normal((stop - start, stop - start)))
                Q = Q * np.sign(np.diag(R))
                V[:, start:stop] = V[:, start:stop] @ Q
            start = stop
    return lam, V


def duarte_residual(D, P):
    """``||Lam - Lam Gamma^T Gamma Lam||_F^2`` for ``Gamma = P V``."""
    D = _as_dictionary(D)
    lam, V = duarte_eigen(D)
    L = np.diag(lam)
    Gam = P @ V
    R = L - L @ Gam.T @ Gam @ L
    return float(np.vdot(R, R))


def random_projection(m, d, seed=None):
    if m < 1 or d < 1:
        raise ValueError("m and d must be >= 1")
    return np.random.default_rng(seed).standard_normal((m, d))
