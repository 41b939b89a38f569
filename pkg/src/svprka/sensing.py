"""Gaussian sensing ensembles, planted low-rank ground truth, and the
trace-inner-product measurement operator.

Normal variates come from ``numpy.random.Generator(PCG64(seed))``, whose
``standard_normal`` uses the 256-layer ziggurat method. The ensemble array
of shape ``(n, n1, n2)`` is filled in C (row-major) order.
"""

from dataclasses import dataclass

import numpy as np

from .linalg import as_matrix
from .seeds import make_rng


@dataclass(frozen=True)
class SensingEnsemble:
    """``n`` sensing matrices ``A_j`` of shape ``(n1, n2)``, stacked as ``matrices[j]``."""

    matrices: np.ndarray
    seed: int

    @property
    def n(self):
        return self.matrices.shape[0]

    @property
    def n1(self):
        return self.matrices.shape[1]

    @property
    def n2(self):
        return self.matrices.shape[2]

    def __len__(self):
        return self.n

    @classmethod
    def from_matrices(cls, matrices, seed=0):
        A = np.asarray(matrices, dtype=np.float64)
        if A.ndim == 2:
            A = A[None]
        if A.ndim != 3 or A.shape[0] == 0:
            raise ValueError(f"expected a stack of matrices, got shape {A.shape}")
        if not np.all(np.isfinite(A)):
            raise ValueError("sensing matrices contain NaN or Inf")
        return cls(A, seed)


@dataclass(frozen=True)
class GroundTruth:
    X: np.ndarray
    rank: int

    @property
    def frob_norm(self):
        return float(np.linalg.norm(self.X))


def _check_dims(*dims):
    for d in dims:
        if int(d) != d or d < 1:
            raise ValueError(f"dimensions must be positive integers, got {dims}")


def generate_gaussian_ensemble(n, n1, n2, seed):
    """``n`` matrices of i.i.d. standard normal entries, deterministic in ``seed``."""
    _check_dims(n, n1, n2)
    rng = make_rng(seed)
    return SensingEnsemble(rng.standard_normal((int(n), int(n1), int(n2))), int(seed))


def generate_low_rank(n1, n2, r, normalize=True, seed=0):
    """Planted truth ``G1 @ G2.T`` with Gaussian factors of width ``r``.

    With ``normalize`` the result is scaled to unit Frobenius norm.
    """
    _check_dims(n1, n2)
    if int(r) != r or not 1 <= r <= min(n1, n2):
        raise ValueError(f"rank {r} out of range for a {n1}x{n2} matrix")
    rng = make_rng(seed)
    G1 = rng.standard_normal((n1, r))
    G2 = rng.standard_normal((n2, r))
    X = G1 @ G2.T
    if normalize:
        X = X / np.linalg.norm(X)
    return GroundTruth(X, int(r))


def apply_operator(ens, X, normalized=False):
    """Measurements ``y_j = Tr(A_j^T X)``, times ``1/sqrt(n)`` if ``normalized``."""
    X = as_matrix(X, "X")
    if X.shape != (ens.n1, ens.n2):
        raise ValueError(f"X has shape {X.shape}, ensemble expects {(ens.n1, ens.n2)}")
    y = np.einsum("jab,ab->j", ens.matrices, X)
    if normalized:
        y = y / np.sqrt(ens.n)
    return y


def assemble_V(ens):
    """The ``n x (n1*n2)`` matrix whose row ``j`` is ``vec(A_j)``."""
    # vec stacks columns, i.e. row-major order of A_j^T
    return np.ascontiguousarray(ens.matrices.transpose(0, 2, 1).reshape(ens.n, -1))


def row_norms_sq(ens):
    """``||A_j||_F^2`` for every ``j``."""
    return np.einsum("jab,jab->j", ens.matrices, ens.matrices)

