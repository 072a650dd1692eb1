"""Dense-matrix primitives: column normalization, Gram matrices, coherence and
the Welch bound, plus a plain-text matrix format.

Matrices are ordinary 2-D float64 ``numpy`` arrays. A "unit-column" matrix is
one whose columns all have Euclidean norm 1 to within ``UNIT_TOL``; the
helpers below check that property instead of wrapping arrays in a class.
"""

import io
import os

import numpy as np

from .errors import (BadBins, InvalidDims, NonFinite, NotUnitColumn,
                     TooFewColumns, ZeroColumn)

UNIT_TOL = 1e-12
ZERO_NORM = 1e-300


def as_dense(A, name="matrix"):
    """Return ``A`` as a finite 2-D float64 array (copying only if needed)."""
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] < 1 or A.shape[1] < 1:
        raise InvalidDims(f"{name} must be a non-empty 2-D array, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise NonFinite(f"{name} contains NaN or Inf")
    return A


def column_norm_deviation(M):
    """Largest ``| ||M_i||_2 - 1 |`` over the columns of ``M``."""
    return float(np.max(np.abs(np.linalg.norm(M, axis=0) - 1.0)))


def is_unit_column(M, tol=UNIT_TOL):
    return column_norm_deviation(M) <= tol


def check_unit_columns(M, tol=UNIT_TOL, name="M"):
    M = as_dense(M, name)
    dev = column_norm_deviation(M)
    if dev > tol:
        raise NotUnitColumn(f"{name} has a column norm off by {dev:.3e} (tol {tol:g})")
    return M


def normalize_columns(A):
    """Scale every column of ``A`` to unit Euclidean norm.

    Raises
    ------
    ZeroColumn
        If some column has norm <= 1e-300; the exception carries its index.
    """
    A = as_dense(A, "A")
    norms = np.linalg.norm(A, axis=0)
    bad = np.flatnonzero(~(norms > ZERO_NORM))
    if bad.size:
        raise ZeroColumn(bad[0])
    return A / norms


def gram(M):
    """Gram matrix ``M^T M``, symmetrized so it is exactly symmetric."""
    G = M.T @ M
    return 0.5 * (G + G.T)


def inf_off_norm(G):
    """Largest off-diagonal magnitude of a square matrix."""
    G = np.asarray(G, dtype=np.float64)
    n = G.shape[0]
    if G.ndim != 2 or G.shape[1] != n:
        raise InvalidDims(f"expected a square matrix, got shape {G.shape}")
    if n < 2:
        raise TooFewColumns("need at least 2 columns for an off-diagonal entry")
    A = np.abs(G)
    np.fill_diagonal(A, 0.0)
    return float(A.max())


def mutual_coherence(M):
    """Mutual coherence of a unit-column matrix: ``max_{i != j} |<M_i, M_j>|``."""
    M = as_dense(M)
    if M.shape[1] < 2:
        raise TooFewColumns("mutual coherence needs at least 2 columns")
    return inf_off_norm(gram(M))


def coherence_of(A):
    """Mutual coherence of an arbitrary matrix (its columns are normalized first)."""
    return mutual_coherence(normalize_columns(A))


def welch_bound(m, n):
    """Welch lower bound ``sqrt((n - m) / (m (n - 1)))`` on the coherence of m x n matrices."""
    m, n = int(m), int(n)
    if m < 1 or n < 2 or n < m:
        raise InvalidDims(f"welch bound needs n >= m >= 1 and n >= 2, got m={m}, n={n}")
    return float(np.sqrt((n - m) / (m * (n - 1))))


def offdiag_abs(M):
    """``|G_ij|`` for all column pairs ``i < j`` of ``G = M^T M``."""
    G = gram(M)
    iu = np.triu_indices(G.shape[0], k=1)
    return np.abs(G[iu])


def gram_abs_histogram(M, bin_edges):
    """Histogram of ``|G_ij|`` over distinct column pairs.

    Bins are half-open ``[e_k, e_{k+1})`` except the last, which is closed,
    matching ``numpy.histogram``. Values are clipped to ``[0, 1]`` first so
    round-off above 1 lands in the top bin.
    """
    edges = np.asarray(bin_edges, dtype=np.float64)
    if edges.ndim != 1 or edges.size < 2 or np.any(np.diff(edges) <= 0):
        raise BadBins("bin edges must be a strictly increasing sequence of length >= 2")
    if edges[0] > 0.0 or edges[-1] < 1.0:
        raise BadBins("bin edges must cover [0, 1]")
    vals = np.clip(offdiag_abs(as_dense(M)), 0.0, 1.0)
    counts, _ = np.histogram(vals, bins=edges)
    return counts


def t_averaged_coherence(M, t):
    """Mean of the off-diagonal ``|G_ij|`` that are >= t (0 when none are)."""
    vals = offdiag_abs(M)
    sel = vals[vals >= t]
    return float(sel.mean()) if sel.size else 0.0


# -- text format --------------------------------------------------------------

def format_matrix(A):
    A = as_dense(A)
    buf = io.StringIO()
    buf.write(f"{A.shape[0]} {A.shape[1]}\n")
    for row in A:
        buf.write(" ".join(repr(float(x)) for x in row))
        buf.write("\n")
    return buf.getvalue()


def parse_matrix(text):
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise InvalidDims("empty matrix text")
    try:
        rows, cols = (int(tok) for tok in lines[0].split())
    except ValueError as exc:
        raise InvalidDims(f"bad header line {lines[0]!r}") from exc
    if len(lines) - 1 != rows:
        raise InvalidDims(f"header says {rows} rows, found {len(lines) - 1}")
    data = [[float(tok) for tok in ln.split()] for ln in lines[1:]]
    if any(len(r) != cols for r in data):
        raise InvalidDims(f"every row must have {cols} entries")
    return as_dense(np.array(data, dtype=np.float64).reshape(rows, cols))


def save_matrix(path, A):
    with open(os.fspath(path), "w") as fh:
        fh.write(format_matrix(A))


def load_matrix(path):
    with open(os.fspath(path)) as fh:
        return parse_matrix(fh.read())
