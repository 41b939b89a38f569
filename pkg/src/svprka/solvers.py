"""Randomized Kaczmarz solvers for linear feasibility problems.

:func:`rka_feasibility` handles a general system of equalities and
inequalities ``C x (>=|=) b``. :func:`svp_rka` specializes the inequality
step to the one-bit polyhedron of a :class:`~svprka.quantizer.OneBitRecord`
and follows every step with a rank-r projection. :func:`hsvt_baseline` is
the one-shot back-projection estimator used for comparison.

Row indices are drawn with replacement, with probability proportional to
the squared row norm. Draws come from ``Generator.random`` in fixed blocks
and are inverted through the cumulative weights, so the sequence of chosen
rows depends only on the seed and never on the tracing stride.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalError, SvdError
from .linalg import _project, as_matrix, numerical_rank, rank_r_project, unvectorize, vectorize
from .seeds import make_rng
from .sensing import assemble_V, row_norms_sq

DRAW_BLOCK = 8192
MIN_CHUNK = 8
MAX_CHUNK = 512


@dataclass
class RkaConfig:
    """Solver budget and telemetry.

    ``violation_tol=None`` disables the early exit. The exit test runs at
    every trace point, so ``trace_every`` is also the stopping-check stride.
    """

    max_iters: int = 1000
    violation_tol: float | None = 1e-6
    seed: int = 0
    trace_every: int = 1

    def __post_init__(self):
        if self.max_iters < 0:
            raise ValueError(f"max_iters must be nonnegative, got {self.max_iters}")
        if self.trace_every < 1:
            raise ValueError(f"trace_every must be positive, got {self.trace_every}")
        if self.violation_tol is not None and not self.violation_tol >= 0:
            raise ValueError(f"violation_tol must be nonnegative, got {self.violation_tol}")


@dataclass
class SolveTrace:
    """Telemetry of one solver run.

    Entry ``k`` describes the state right after iteration ``iterations[k]``.
    ``pre_step_distance`` is the distance of the previous iterate and
    ``pre_projection_distance`` that of the Kaczmarz point before the rank
    projection (for :func:`rka_feasibility` the two updates coincide).
    Distance arrays are ``None`` when no truth was supplied.
    """

    iterations: np.ndarray
    chosen_rows: np.ndarray
    max_violations: np.ndarray
    distance_to_truth: np.ndarray | None
    pre_step_distance: np.ndarray | None
    pre_projection_distance: np.ndarray | None
    initial_violation: float
    initial_distance: float | None
    n_iter: int
    converged: bool


@dataclass
class _Recorder:
    with_truth: bool
    iterations: list = field(default_factory=list)
    rows: list = field(default_factory=list)
    viol: list = field(default_factory=list)
    dist: list = field(default_factory=list)
    pre: list = field(default_factory=list)
    prez: list = field(default_factory=list)

    def add(self, i, row, viol, dist, pre, prez):
        self.iterations.append(i)
        self.rows.append(row)
        self.viol.append(viol)
        if self.with_truth:
            self.dist.append(dist)
            self.pre.append(pre)
            self.prez.append(prez)

    def finish(self, init_viol, init_dist, n_iter, converged):
        truth = self.with_truth
        return SolveTrace(
            iterations=np.asarray(self.iterations, dtype=np.int64),
            chosen_rows=np.asarray(self.rows, dtype=np.int64).reshape(-1, 2),
            max_violations=np.asarray(self.viol, dtype=np.float64),
            distance_to_truth=np.asarray(self.dist, dtype=np.float64) if truth else None,
            pre_step_distance=np.asarray(self.pre, dtype=np.float64) if truth else None,
            pre_projection_distance=np.asarray(self.prez, dtype=np.float64) if truth else None,
            initial_violation=init_viol,
            initial_distance=init_dist,
            n_iter=n_iter,
            converged=converged,
        )


def sample_rows(weights, size, rng):
    """Draw ``size`` row indices with ``Pr{k} = weights[k] / sum(weights)``."""
    cdf = np.cumsum(np.asarray(weights, dtype=np.float64))
    return _invert_cdf(cdf, rng.random(size))


def _invert_cdf(cdf, u):
    idx = np.searchsorted(cdf, u * cdf[-1], side="right")
    return np.minimum(idx, cdf.size - 1)


class _RowStream:
    """Iteration-indexed row draws: iteration ``i`` (1-based) uses draw ``i - 1``."""

    def __init__(self, weights, rng):
        self.cdf = np.cumsum(weights)
        self.rng = rng
        self.start = 0
        self.buf = np.empty(0, dtype=np.int64)

    def window(self, first, count):
        end = first + count
        while self.start + self.buf.size < end:
            fresh = _invert_cdf(self.cdf, self.rng.random(DRAW_BLOCK))
            drop = min(first - self.start, self.buf.size)
            self.buf = np.concatenate([self.buf[drop:], fresh])
            self.start += drop
        return self.buf[first - self.start:end - self.start]


def _check_partition(m, ineq_rows, eq_rows):
    ineq = {int(k) for k in ineq_rows}
    eq = {int(k) for k in eq_rows}
    if ineq & eq:
        raise ValueError(f"rows {sorted(ineq & eq)} are both equalities and inequalities")
    if ineq | eq != set(range(m)):
        raise ValueError("inequality and equality rows must partition the row set")
    mask = np.zeros(m, dtype=bool)
    mask[list(ineq)] = True
    return mask


def rka_feasibility(C, b, ineq_rows, eq_rows, x0, cfg, x_true=None):
    """Randomized Kaczmarz for ``c_k . x >= b_k`` (k in ``ineq_rows``) and
    ``c_k . x = b_k`` (k in ``eq_rows``).

    Each iteration draws a row ``k`` with probability ``||c_k||^2 / ||C||_F^2``
    and moves ``x`` by ``beta / ||c_k||^2 * c_k``, where ``beta`` is the
    residual ``b_k - c_k . x``, clipped at zero for inequality rows.

    Returns
    -------
    x : ndarray
        Last iterate.
    trace : SolveTrace
        ``chosen_rows`` holds ``(k, 0)``.
    """
    C = as_matrix(C, "C")
    b = np.asarray(b, dtype=np.float64)
    m, d = C.shape
    if b.shape != (m,):
        raise ValueError(f"b has shape {b.shape}, expected ({m},)")
    is_ineq = _check_partition(m, ineq_rows, eq_rows)
    norms = np.einsum("ij,ij->i", C, C)
    if np.any(norms == 0):
        raise ValueError(f"zero rows {np.flatnonzero(norms == 0).tolist()} have no projection")
    x = np.array(x0, dtype=np.float64)
    if x.shape != (d,):
        raise ValueError(f"x0 has shape {x.shape}, expected ({d},)")
    xt = None if x_true is None else np.asarray(x_true, dtype=np.float64)

    def max_residual(x):
        res = b - C @ x
        res = np.where(is_ineq, np.maximum(res, 0.0), np.abs(res))
        return float(res.max())

    def dist(x):
        return float(np.linalg.norm(x - xt)) if xt is not None else None

    rec = _Recorder(xt is not None)
    init_viol = max_residual(x)
    init_dist = dist(x)
    tol = cfg.violation_tol
    if tol is not None and init_viol <= tol:
        return x, rec.finish(init_viol, init_dist, 0, True)

    stream = _RowStream(norms, make_rng(cfg.seed))
    converged = False
    i = 0
    while i < cfg.max_iters:
        k = int(stream.window(i, 1)[0])
        ck = C[k]
        beta = b[k] - ck @ x
        if is_ineq[k] and beta < 0:
            beta = 0.0
        pre = dist(x)
        x = x + (beta / norms[k]) * ck
        i += 1
        if i % cfg.trace_every == 0 or i == cfg.max_iters:
            v = max_residual(x)
            d_now = dist(x)
            rec.add(i, (k, 0), v, d_now, pre, d_now)
            if tol is not None and v <= tol:
                converged = True
                break
    return x, rec.finish(init_viol, init_dist, i, converged)


def svp_rka(rec, ens, r, X0=None, cfg=None, X_true=None, margin=0.0):
    """SVP-RKA: one Kaczmarz half-space step on the one-bit polyhedron,
    then a rank-``r`` projection, per iteration.

    The row ``(j, l)`` is drawn with probability proportional to
    ``||A_j||_F^2`` (uniform over ``l``). With ``beta = (t - <p, x>)^+``,

        Z = X + beta / ||A_j||_F^2 * R[j, l] * A_j,    X <- P_r(Z).

    Steps with ``beta == 0`` leave a rank-``r`` iterate unchanged, so the
    loop scans ahead over the pre-drawn rows and runs the SVD only on
    violated ones; the iterates are identical to the one-step-at-a-time
    recursion.

    Stops after ``cfg.max_iters`` iterations, or at a trace point where the
    maximum violation is at most ``cfg.violation_tol`` and the iterate has
    rank at most ``r``. ``X0`` defaults to zero.

    A positive ``margin`` replaces every constraint by
    ``<p, x> >= t + margin``; violations are then measured against the
    shifted constraints. Iterates approach the polyhedron from outside, so a
    margin larger than ``violation_tol`` is needed to end strictly inside it
    (i.e. with every sign reproduced).

    Returns
    -------
    X : ndarray
        Final iterate, shape ``(n1, n2)``.
    trace : SolveTrace
        ``chosen_rows`` holds ``(j, l)``; distances are filled when
        ``X_true`` is given.
    """
    if cfg is None:
        cfg = RkaConfig()
    n, n1, n2 = ens.n, ens.n1, ens.n2
    m = rec.m
    if rec.n != n:
        raise ValueError(f"record has {rec.n} measurements, ensemble has {n}")
    if int(r) != r or not 1 <= r <= min(n1, n2):
        raise ValueError(f"rank {r} out of range for {n1}x{n2} matrices")
    r = int(r)
    norms = row_norms_sq(ens)
    if np.any(norms == 0):
        raise ValueError(f"sensing matrices {np.flatnonzero(norms == 0).tolist()} are zero")
    V = assemble_V(ens)
    if not margin >= 0:
        raise ValueError(f"margin must be nonnegative, got {margin}")
    R = rec.R.astype(np.float64)
    G = rec.Gamma + margin * R if margin else rec.Gamma
    full_rank_ok = r >= min(n1, n2)

    if X0 is None:
        x = np.zeros(n1 * n2)
        low_rank = True
    else:
        X0 = as_matrix(X0, "X0")
        if X0.shape != (n1, n2):
            raise ValueError(f"X0 has shape {X0.shape}, expected {(n1, n2)}")
        x = vectorize(X0).copy()
        low_rank = full_rank_ok or numerical_rank(X0) <= r
    xt = None if X_true is None else vectorize(as_matrix(X_true, "X_true"))

    cache = {}

    def violation():
        if "v" not in cache:
            cache["v"] = max(float(np.max(R * (G - (V @ x)[:, None]))), 0.0)
        return cache["v"]

    def dist(vec):
        return float(np.linalg.norm(vec - xt)) if xt is not None else None

    trace = _Recorder(xt is not None)
    init_viol = violation()
    init_dist = dist(x)
    tol = cfg.violation_tol
    if tol is not None and init_viol <= tol and low_rank:
        return unvectorize(x, n1, n2).copy(), trace.finish(init_viol, init_dist, 0, True)

    stream = _RowStream(np.tile(norms, m), make_rng(cfg.seed))
    i = 0
    converged = False
    chunk = MIN_CHUNK
    next_trace = cfg.trace_every
    # distances belonging to the step that produced iteration `last_hit`
    last_hit, hit_pre, hit_z = -1, None, None

    while i < cfg.max_iters:
        stop_at = min(next_trace, cfg.max_iters)
        while i < stop_at:
            c = 1 if not low_rank else min(chunk, stop_at - i)
            ks = stream.window(i, c)
            js = ks % n
            ls = ks // n
            sgn = R[js, ls]
            # row-wise reduction: rounding must not depend on the chunk size
            beta = sgn * (G[js, ls] - (V[js] * x).sum(axis=1))
            hits = np.flatnonzero(beta > 0)
            if low_rank and hits.size == 0:
                i += c
                chunk = min(2 * chunk, MAX_CHUNK)
                continue
            h = int(hits[0]) if hits.size else 0
            i += h
            j = js[h]
            step = max(beta[h], 0.0) / norms[j] * sgn[h]
            z = x + step * V[j]
            pre = dist(x)
            if full_rank_ok:
                x = z
            else:
                try:
                    x = vectorize(_project(unvectorize(z, n1, n2), r))
                except SvdError as exc:
                    raise NumericalError("solvers", "svp_rka", f"SVD failed at iteration {i + 1}: {exc.detail}") from exc
            low_rank = True
            cache.clear()
            i += 1
            last_hit, hit_pre, hit_z = i, pre, dist(z)
            chunk = max(MIN_CHUNK, chunk // 2)

        k = int(stream.window(i - 1, 1)[0])
        d_now = dist(x)
        if last_hit == i:
            trace.add(i, (k % n, k // n), violation(), d_now, hit_pre, hit_z)
        else:
            trace.add(i, (k % n, k // n), violation(), d_now, d_now, d_now)
        if i == next_trace:
            next_trace += cfg.trace_every
        if tol is not None and low_rank and violation() <= tol:
            converged = True
            break

    if not np.all(np.isfinite(x)):
        raise NumericalError("solvers", "svp_rka", "iterate diverged to non-finite values")
    return unvectorize(x, n1, n2).copy(), trace.finish(init_viol, init_dist, i, converged)


def hsvt_oracle_scale(frob_norm, sigma):
    """Scale that makes the HSVT back-projection unbiased for Gaussian
    sensing and ``N(0, sigma^2)`` dithers: ``sqrt(pi/2) * sqrt(||X||_F^2 + sigma^2)``."""
    return float(np.sqrt(np.pi / 2.0) * np.hypot(frob_norm, sigma))


def hsvt_baseline(rec, ens, r, scale):
    """Hard singular value thresholding of the scaled back-projection
    ``scale / (n m) * sum_{j,l} R[j, l] A_j``."""
    if not np.isfinite(scale):
        raise ValueError(f"scale must be finite, got {scale}")
    if rec.n != ens.n:
        raise ValueError(f"record has {rec.n} measurements, ensemble has {ens.n}")
    weights = rec.R.sum(axis=1).astype(np.float64)
    B = np.tensordot(weights, ens.matrices, axes=(0, 0)) * (scale / (rec.n * rec.m))
    r = min(int(r), min(B.shape))
    if scale == 0:
        return np.zeros_like(B)
    try:
        return rank_r_project(B, r)
    except SvdError as exc:
        raise NumericalError("solvers", "hsvt_baseline", exc.detail) from exc


def lemma1_bound(kappa, i, e0, rho):
    """Expected-distance envelope ``(1 - 1/kappa^2)^(i/2) * e0 + rho``."""
    if not kappa >= 1:
        raise ValueError(f"scaled condition number must be at least 1, got {kappa}")
    return (1.0 - 1.0 / kappa**2) ** (i / 2.0) * e0 + rho
