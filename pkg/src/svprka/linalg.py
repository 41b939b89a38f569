"""Dense real-matrix primitives: SVD, rank-r projection, vec, and the
scaled condition number.

Matrices are plain 2-D ``numpy`` float arrays. ``vec`` stacks columns, so
``vectorize(A) @ vectorize(B) == trace(A.T @ B)``.
"""

from typing import NamedTuple

import numpy as np

from .errors import SvdError

# singular values at or below RANK_RTOL * sigma_max count as zero
RANK_RTOL = 1e-10


class SvdFactorization(NamedTuple):
    U: np.ndarray
    s: np.ndarray
    Vt: np.ndarray


def as_matrix(M, name="M"):
    """Return ``M`` as a finite 2-D float64 array or raise ``ValueError``."""
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {M.shape}")
    if M.size == 0:
        raise ValueError(f"{name} must be non-empty")
    if not np.all(np.isfinite(M)):
        raise ValueError(f"{name} contains NaN or Inf")
    return M


def svd(M):
    """Thin SVD of a finite real matrix.

    Returns ``SvdFactorization(U, s, Vt)`` with ``s`` non-increasing and
    inner dimension ``min(M.shape)``. Raises :class:`SvdError` if LAPACK
    fails to converge.
    """
    M = as_matrix(M)
    try:
        U, s, Vt = np.linalg.svd(M, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise SvdError("linalg", "svd", str(exc)) from exc
    return SvdFactorization(U, s, Vt)


def singular_values(M):
    M = as_matrix(M)
    try:
        return np.linalg.svd(M, compute_uv=False)
    except np.linalg.LinAlgError as exc:
        raise SvdError("linalg", "svd", str(exc)) from exc


def _project(M, r):
    # hot path for the solvers: no validation
    try:
        U, s, Vt = np.linalg.svd(M, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise SvdError("linalg", "rank_r_project", str(exc)) from exc
    return (U[:, :r] * s[:r]) @ Vt[:r]


def rank_r_project(M, r):
    """Best rank-``r`` approximation ``sum_{k<=r} s_k u_k v_k^T``.

    When ``s_r == s_{r+1}`` the result depends on how LAPACK orders the
    tied singular vectors; any such output is an equally good approximation.
    """
    M = as_matrix(M)
    if int(r) != r or r < 1:
        raise ValueError(f"rank must be a positive integer, got {r}")
    r = int(r)
    if r >= min(M.shape):
        return M.copy()
    return _project(M, r)


def numerical_rank(M, rtol=RANK_RTOL):
    s = singular_values(M)
    if s[0] == 0.0:
        return 0
    return int(np.count_nonzero(s > rtol * s[0]))


def scaled_condition_number(M):
    """``||M||_F * ||M^+||_2``.

    ``||M^+||_2`` is one over the smallest singular value above
    ``1e-10 * sigma_max``. Always at least 1.
    """
    s = singular_values(M)
    if s[0] == 0.0:
        raise ValueError("scaled condition number of an all-zero matrix")
    kept = s[s > RANK_RTOL * s[0]]
    return float(np.sqrt(np.sum(s**2)) / kept[-1])


def vectorize(M):
    """Column-stacked vec of ``M``."""
    return np.asarray(M, dtype=np.float64).reshape(-1, order="F")


def unvectorize(v, rows, cols):
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or v.size != rows * cols:
        raise ValueError(f"cannot reshape vector of length {v.size} to {rows}x{cols}")
    return v.reshape((rows, cols), order="F")
