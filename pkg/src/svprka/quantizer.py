"""Dithered one-bit acquisition and row access to the sign polyhedron.

A record holds the sign matrix ``R`` (``n x m``, entries +-1) and the
threshold matrix ``Gamma`` whose column ``l`` is the dither sequence
``tau^(l)``. Together with the sensing ensemble it defines the polyhedron

    { X' : R[j, l] * (Tr(A_j^T X') - Gamma[j, l]) >= 0  for all j, l }.

The stacked constraint matrix is never formed; :func:`polyhedron_row`
builds single rows on demand, with flat row index ``k = l * n + j``.

Record files
------------
:func:`save_record` writes a little-endian binary file::

    offset  size     field
    0       4        magic b"OBRC"
    4       4        uint32 format version (currently 1)
    8       8        uint64 n
    16      8        uint64 m
    24      n*m      int8 R, row-major (j outer, l inner)
    24+n*m  8*n*m    float64 Gamma, row-major
"""

import struct
import warnings
from dataclasses import dataclass

import numpy as np

from .linalg import as_matrix, vectorize
from .seeds import make_rng
from .sensing import apply_operator

RECORD_MAGIC = b"OBRC"
RECORD_VERSION = 1
_HEADER = struct.Struct("<4sIQQ")


@dataclass(frozen=True)
class DitherPlan:
    m: int
    sigma: float
    seed: int

    def __post_init__(self):
        if self.m < 1:
            raise ValueError(f"need at least one threshold sequence, got m={self.m}")
        if not self.sigma >= 0:
            raise ValueError(f"dither std must be nonnegative, got {self.sigma}")


@dataclass(frozen=True)
class OneBitRecord:
    R: np.ndarray
    Gamma: np.ndarray

    @property
    def n(self):
        return self.R.shape[0]

    @property
    def m(self):
        return self.R.shape[1]

    def __post_init__(self):
        if self.R.shape != self.Gamma.shape or self.R.ndim != 2:
            raise ValueError(f"R {self.R.shape} and Gamma {self.Gamma.shape} must be equal 2-D shapes")
        if not np.all(np.abs(self.R) == 1):
            raise ValueError("sign matrix entries must be exactly +1 or -1")


@dataclass(frozen=True)
class PolyhedronRow:
    p: np.ndarray
    t: float
    j: int
    l: int


def dynamic_range(y, definition="max_abs"):
    """Dynamic range of the measurements.

    ``"max_abs"`` gives ``max_j |y_j|``; ``"peak_to_peak"`` gives
    ``max(y) - min(y)``.
    """
    y = np.asarray(y, dtype=np.float64)
    if y.size == 0:
        raise ValueError("dynamic range of an empty vector")
    if definition == "max_abs":
        return float(np.max(np.abs(y)))
    if definition == "peak_to_peak":
        return float(np.ptp(y))
    raise ValueError(f"unknown dynamic range definition {definition!r}")


def dither_std(y, definition="max_abs"):
    """Dither standard deviation ``beta_y / 3``, floored to 1 when ``beta_y == 0``."""
    beta = dynamic_range(y, definition)
    if beta == 0.0:
        warnings.warn("measurements have zero dynamic range; using dither std 1", RuntimeWarning, stacklevel=2)
        return 1.0
    return beta / 3.0


def generate_dithers(plan, n):
    """Threshold matrix ``Gamma`` (``n x m``) with i.i.d. ``N(0, sigma^2)`` entries."""
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    if plan.sigma == 0:
        return np.zeros((n, plan.m))
    rng = make_rng(plan.seed)
    return plan.sigma * rng.standard_normal((n, plan.m))


def quantize(y, Gamma):
    """Sign record ``R[j, l] = sgn(y_j - Gamma[j, l])`` with ``sgn(0) = +1``."""
    y = np.asarray(y, dtype=np.float64)
    Gamma = np.asarray(Gamma, dtype=np.float64)
    if Gamma.ndim == 1:
        Gamma = Gamma[:, None]
    if y.ndim != 1 or Gamma.shape[0] != y.size:
        raise ValueError(f"y of length {y.size} does not match Gamma of shape {Gamma.shape}")
    R = np.where(y[:, None] >= Gamma, 1, -1).astype(np.int8)
    return OneBitRecord(R, Gamma.copy())


def _check_index(rec, j, l):
    if not (0 <= j < rec.n and 0 <= l < rec.m):
        raise IndexError(f"row ({j}, {l}) outside a record with n={rec.n}, m={rec.m}")


def polyhedron_row(rec, ens, j, l):
    """Row ``(j, l)`` of the polyhedron: ``<p, vec(X)> >= t``."""
    _check_index(rec, j, l)
    if rec.n != ens.n:
        raise ValueError(f"record has {rec.n} measurements, ensemble has {ens.n}")
    sign = float(rec.R[j, l])
    return PolyhedronRow(sign * vectorize(ens.matrices[j]), sign * float(rec.Gamma[j, l]), j, l)


def violations_from_measurements(rec, y):
    """Per-row slack ``t - <p, x>`` given the measurements ``y`` of ``x``."""
    return rec.R * (rec.Gamma - np.asarray(y)[:, None])


def max_violation(rec, ens, X):
    """Largest constraint violation ``max (t - <p, vec(X)>)^+``; zero iff ``X`` is in the polyhedron."""
    X = as_matrix(X, "X")
    if rec.n != ens.n:
        raise ValueError(f"record has {rec.n} measurements, ensemble has {ens.n}")
    worst = np.max(violations_from_measurements(rec, apply_operator(ens, X)))
    return max(float(worst), 0.0)


def save_record(rec, path):
    R = np.ascontiguousarray(rec.R, dtype=np.int8)
    G = np.ascontiguousarray(rec.Gamma, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(RECORD_MAGIC, RECORD_VERSION, rec.n, rec.m))
        fh.write(R.tobytes())
        fh.write(G.tobytes())


def load_record(path):
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < _HEADER.size:
        raise ValueError(f"{path}: truncated record header")
    magic, version, n, m = _HEADER.unpack_from(data)
    if magic != RECORD_MAGIC:
        raise ValueError(f"{path}: not a one-bit record (magic {magic!r})")
    if version != RECORD_VERSION:
        raise ValueError(f"{path}: unsupported record version {version}")
    size = n * m
    if len(data) != _HEADER.size + 9 * size:
        raise ValueError(f"{path}: expected {_HEADER.size + 9 * size} bytes, found {len(data)}")
    off = _HEADER.size
    R = np.frombuffer(data, dtype=np.int8, count=size, offset=off).reshape(n, m).copy()
    G = np.frombuffer(data, dtype="<f8", count=size, offset=off + size).reshape(n, m).astype(np.float64)
    return OneBitRecord(R, G)
