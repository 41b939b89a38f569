"""Seeded Monte Carlo driver: SVP-RKA vs HSVT sweeps over the
oversampling factor, the tessellation probe, and the convergence-bound
diagnostic.

Seeds
-----
Trial ``t`` at oversampling factor ``lam`` uses
``seed = mix64(master_seed, float_bits(lam), t)`` (see :mod:`svprka.seeds`);
truth, ensemble, dithers, noise and the solver's row draws each get
``mix64(seed, stream_tag)``. A trial is therefore a pure function of
``(config, lam, t)`` and sweeps are independent of scheduling.

The number of measurements is ``n = floor(lam * n1 * rank + 0.5)``.
"""

import csv
import dataclasses
import io
import json
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from threadpoolctl import threadpool_limits

from . import seeds
from .errors import ConfigError
from .linalg import scaled_condition_number
from .quantizer import DitherPlan, dither_std, generate_dithers, max_violation, quantize
from .sensing import apply_operator, assemble_V, generate_gaussian_ensemble, generate_low_rank
from .solvers import RkaConfig, hsvt_baseline, hsvt_oracle_scale, lemma1_bound, svp_rka

ALGORITHMS = ("svp_rka", "hsvt")
DETAIL_COLUMNS = (
    "lambda", "n", "trial", "seed", "algorithm", "rel_error", "fro_error",
    "iterations", "final_violation", "kappa_v", "runtime_ms",
)
_STAT_COLUMNS = ("rel_error", "fro_error", "iterations", "final_violation", "kappa_v", "runtime_ms")


@dataclass
class SolverSettings:
    """Per-run solver budget. ``None`` budgets scale with the problem:
    ``max_iters = iters_per_row * n * m`` and ``trace_every = n * m``."""

    max_iters: int | None = None
    iters_per_row: int = 50
    violation_tol: float | None = 1e-6
    trace_every: int | None = None

    def rka_config(self, rows, seed):
        max_iters = self.iters_per_row * rows if self.max_iters is None else self.max_iters
        trace_every = rows if self.trace_every is None else self.trace_every
        return RkaConfig(max_iters=max_iters, violation_tol=self.violation_tol, seed=seed, trace_every=trace_every)


@dataclass
class ExperimentConfig:
    n1: int = 30
    n2: int = 30
    rank: int = 2
    lambda_grid: tuple = (8.0, 16.0, 32.0, 64.0)
    m: int = 1
    trials: int = 100
    # "beta_over_3" or a fixed nonnegative dither std
    dither_rule: str | float = "beta_over_3"
    dynamic_range: str = "max_abs"
    # which measurements calibrate the dither scale: "clean" or "noisy"
    dither_reference: str = "clean"
    noise_std: float = 0.0
    normalize_truth: bool = True
    solver: SolverSettings = field(default_factory=SolverSettings)
    master_seed: int = 0

    def n_measurements(self, lam):
        return int(np.floor(lam * self.n1 * self.rank + 0.5))

    def validate(self):
        for name in ("n1", "n2", "rank", "m", "trials"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, int) or v < 1:
                raise ConfigError(f"{name} must be a positive integer, got {v!r}")
        if self.rank > min(self.n1, self.n2):
            raise ConfigError(f"rank {self.rank} exceeds min(n1, n2) = {min(self.n1, self.n2)}")
        if not self.lambda_grid:
            raise ConfigError("lambda_grid is empty")
        for lam in self.lambda_grid:
            if not isinstance(lam, (int, float)) or isinstance(lam, bool) or not lam > 0:
                raise ConfigError(f"oversampling factors must be positive numbers, got {lam!r}")
            if self.n_measurements(lam) < 1:
                raise ConfigError(f"lambda={lam} gives no measurements")
        if len(set(self.lambda_grid)) != len(self.lambda_grid):
            raise ConfigError("lambda_grid has duplicates")
        if isinstance(self.dither_rule, str):
            if self.dither_rule != "beta_over_3":
                raise ConfigError(f"dither_rule must be 'beta_over_3' or a number, got {self.dither_rule!r}")
        elif isinstance(self.dither_rule, bool) or not isinstance(self.dither_rule, (int, float)) or not self.dither_rule >= 0:
            raise ConfigError(f"fixed dither std must be a nonnegative number, got {self.dither_rule!r}")
        if self.dynamic_range not in ("max_abs", "peak_to_peak"):
            raise ConfigError(f"dynamic_range must be 'max_abs' or 'peak_to_peak', got {self.dynamic_range!r}")
        if self.dither_reference not in ("clean", "noisy"):
            raise ConfigError(f"dither_reference must be 'clean' or 'noisy', got {self.dither_reference!r}")
        if not isinstance(self.noise_std, (int, float)) or not self.noise_std >= 0:
            raise ConfigError(f"noise_std must be nonnegative, got {self.noise_std!r}")
        if not isinstance(self.master_seed, int) or not 0 <= self.master_seed < 2**64:
            raise ConfigError(f"master_seed must be an unsigned 64-bit integer, got {self.master_seed!r}")
        s = self.solver
        if s.max_iters is not None and (not isinstance(s.max_iters, int) or s.max_iters < 0):
            raise ConfigError(f"solver.max_iters must be a nonnegative integer or null, got {s.max_iters!r}")
        if not isinstance(s.iters_per_row, int) or s.iters_per_row < 0:
            raise ConfigError(f"solver.iters_per_row must be a nonnegative integer, got {s.iters_per_row!r}")
        if s.trace_every is not None and (not isinstance(s.trace_every, int) or s.trace_every < 1):
            raise ConfigError(f"solver.trace_every must be a positive integer or null, got {s.trace_every!r}")
        if s.violation_tol is not None and (not isinstance(s.violation_tol, (int, float)) or not s.violation_tol >= 0):
            raise ConfigError(f"solver.violation_tol must be nonnegative or null, got {s.violation_tol!r}")
        return self

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        known = {f.name for f in dataclasses.fields(cls)}
        for key in data:
            if key not in known:
                raise ConfigError(f"unknown config key {key!r}")
        kwargs = dict(data)
        if "solver" in kwargs:
            sdata = kwargs["solver"]
            if not isinstance(sdata, dict):
                raise ConfigError("solver must be a JSON object")
            sknown = {f.name for f in dataclasses.fields(SolverSettings)}
            for key in sdata:
                if key not in sknown:
                    raise ConfigError(f"unknown config key 'solver.{key}'")
            kwargs["solver"] = SolverSettings(**sdata)
        if "lambda_grid" in kwargs:
            if not isinstance(kwargs["lambda_grid"], list):
                raise ConfigError("lambda_grid must be a list")
            kwargs["lambda_grid"] = tuple(kwargs["lambda_grid"])
        return cls(**kwargs).validate()

    @classmethod
    def from_json(cls, path):
        try:
            with open(path) as fh:
                data = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        return cls.from_dict(data)

    def to_dict(self):
        return dataclasses.asdict(self)


@dataclass
class AlgorithmResult:
    rel_error: float
    fro_error: float
    iterations: int
    final_violation: float
    runtime_ms: float | None = None


@dataclass
class TrialResult:
    lam: float
    n: int
    trial: int
    seed: int
    kappa_v: float
    results: dict


@dataclass
class _Instance:
    seed: int
    n: int
    truth: object
    ens: object
    rec: object
    sigma: float


def trial_seed(master_seed, lam, trial_index):
    return seeds.mix64(master_seed, seeds.float_bits(lam), trial_index)


def build_instance(cfg, lam, trial_index):
    """Truth, ensemble and one-bit record for one trial."""
    seed = trial_seed(cfg.master_seed, lam, trial_index)
    n = cfg.n_measurements(lam)
    truth = generate_low_rank(cfg.n1, cfg.n2, cfg.rank, cfg.normalize_truth, seeds.mix64(seed, seeds.STREAM_TRUTH))
    ens = generate_gaussian_ensemble(n, cfg.n1, cfg.n2, seeds.mix64(seed, seeds.STREAM_ENSEMBLE))
    y_clean = apply_operator(ens, truth.X)
    y = y_clean
    if cfg.noise_std > 0:
        noise_rng = seeds.make_rng(seeds.mix64(seed, seeds.STREAM_NOISE))
        y = y_clean + cfg.noise_std * noise_rng.standard_normal(n)
    if cfg.dither_rule == "beta_over_3":
        ref = y_clean if cfg.dither_reference == "clean" else y
        sigma = dither_std(ref, cfg.dynamic_range)
    else:
        sigma = float(cfg.dither_rule)
    Gamma = generate_dithers(DitherPlan(cfg.m, sigma, seeds.mix64(seed, seeds.STREAM_DITHER)), n)
    return _Instance(seed, n, truth, ens, quantize(y, Gamma), sigma)


def _errors(X_hat, X):
    fro = float(np.linalg.norm(X_hat - X))
    return fro / float(np.linalg.norm(X)), fro


def run_trial(cfg, lam, trial_index, timing=False):
    """Run SVP-RKA and HSVT on one seeded instance.

    Wall-clock runtimes are measured only with ``timing=True``; otherwise
    ``runtime_ms`` is ``None`` and the result is fully reproducible.
    """
    inst = build_instance(cfg, lam, trial_index)
    X = inst.truth.X
    rcfg = cfg.solver.rka_config(inst.n * cfg.m, seeds.mix64(inst.seed, seeds.STREAM_SOLVER))

    t0 = time.perf_counter()
    X_svp, trace = svp_rka(inst.rec, inst.ens, cfg.rank, None, rcfg)
    t1 = time.perf_counter()
    scale = hsvt_oracle_scale(inst.truth.frob_norm, inst.sigma)
    X_hsvt = hsvt_baseline(inst.rec, inst.ens, cfg.rank, scale)
    t2 = time.perf_counter()

    results = {}
    for name, X_hat, iters, dt in (
        ("svp_rka", X_svp, trace.n_iter, t1 - t0),
        ("hsvt", X_hsvt, 0, t2 - t1),
    ):
        rel, fro = _errors(X_hat, X)
        results[name] = AlgorithmResult(
            rel, fro, iters, max_violation(inst.rec, inst.ens, X_hat), 1e3 * dt if timing else None
        )
    kappa = scaled_condition_number(assemble_V(inst.ens))
    return TrialResult(float(lam), inst.n, trial_index, inst.seed, kappa, results)


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return repr(float(v))


def detail_rows(result):
    for name in ALGORITHMS:
        a = result.results[name]
        yield [
            _fmt(result.lam), _fmt(result.n), _fmt(result.trial), _fmt(result.seed), name,
            _fmt(a.rel_error), _fmt(a.fro_error), _fmt(a.iterations), _fmt(a.final_violation),
            _fmt(result.kappa_v), _fmt(a.runtime_ms),
        ]


def summary_rows(results, lambda_grid):
    """Mean and median rows per (lambda, algorithm), in grid order."""
    for lam in lambda_grid:
        group = [r for r in results if r.lam == float(lam)]
        if not group:
            continue
        for name in ALGORITHMS:
            values = {
                "rel_error": [r.results[name].rel_error for r in group],
                "fro_error": [r.results[name].fro_error for r in group],
                "iterations": [r.results[name].iterations for r in group],
                "final_violation": [r.results[name].final_violation for r in group],
                "kappa_v": [r.kappa_v for r in group],
                "runtime_ms": [r.results[name].runtime_ms for r in group],
            }
            for stat, fn in (("mean", statistics.fmean), ("median", statistics.median)):
                row = [_fmt(float(lam)), _fmt(group[0].n), stat, "", name]
                for col in _STAT_COLUMNS:
                    vals = values[col]
                    row.append("" if any(v is None for v in vals) else _fmt(float(fn(vals))))
                yield row


def write_csv(results, lambda_grid, stream):
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(DETAIL_COLUMNS)
    for res in results:
        writer.writerows(detail_rows(res))
    writer.writerows(summary_rows(results, lambda_grid))


def _single_thread_trial(args):
    cfg, lam, t, timing = args
    with threadpool_limits(limits=1):
        return run_trial(cfg, lam, t, timing)


def run_trials(cfg, threads=1, timing=False):
    """All trials of the sweep, ordered by (lambda grid position, trial).

    BLAS is pinned to one thread inside every trial so results are
    bit-identical for any worker count.
    """
    tasks = [(cfg, float(lam), t, timing) for lam in cfg.lambda_grid for t in range(cfg.trials)]
    if threads <= 1:
        return [_single_thread_trial(task) for task in tasks]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(_single_thread_trial, tasks, chunksize=1))


def run_sweep(cfg, stream=None, threads=1, timing=False):
    """Run every (lambda, trial) pair and write the CSV to ``stream``.

    Returns the list of :class:`TrialResult`.
    """
    cfg.validate()
    results = run_trials(cfg, threads, timing)
    if stream is not None:
        write_csv(results, cfg.lambda_grid, stream)
    return results


def sweep_csv(cfg, threads=1, timing=False):
    buf = io.StringIO()
    run_sweep(cfg, buf, threads, timing)
    return buf.getvalue()


# --- tessellation probe ---------------------------------------------------


def consistency_distance(rec, ens, X_hat, X):
    """Whether ``X_hat`` reproduces every sign of ``rec``, and ``||X_hat - X||_F``."""
    R_hat = quantize(apply_operator(ens, X_hat), rec.Gamma).R
    return bool(np.array_equal(R_hat, rec.R)), float(np.linalg.norm(X_hat - X))


@dataclass
class ProbeCell:
    n: int
    trials: int
    consistent: int
    max_distance: float | None
    median_distance: float | None
    distances: list

    @property
    def consistent_fraction(self):
        return self.consistent / self.trials


def _probe_cell(args):
    n1, n2, r, n, trials, master_seed, iters_per_row, margin = args
    distances = []
    with threadpool_limits(limits=1):
        for t in range(trials):
            seed = seeds.mix64(master_seed, n, t)
            truth = generate_low_rank(n1, n2, r, True, seeds.mix64(seed, seeds.STREAM_TRUTH))
            ens = generate_gaussian_ensemble(n, n1, n2, seeds.mix64(seed, seeds.STREAM_ENSEMBLE))
            Gamma = generate_dithers(DitherPlan(1, 1.0, seeds.mix64(seed, seeds.STREAM_DITHER)), n)
            rec = quantize(apply_operator(ens, truth.X), Gamma)
            cfg = RkaConfig(max_iters=iters_per_row * n, violation_tol=margin / 2,
                            seed=seeds.mix64(seed, seeds.STREAM_SOLVER), trace_every=n)
            X_hat, _ = svp_rka(rec, ens, r, None, cfg, margin=margin)
            ok, d = consistency_distance(rec, ens, X_hat, truth.X)
            if ok:
                distances.append(d)
    return ProbeCell(
        n, trials, len(distances),
        max(distances) if distances else None,
        float(np.median(distances)) if distances else None,
        distances,
    )


def tessellation_probe(n1, n2, r, n_grid, trials, master_seed, iters_per_row=500, margin=1e-4, threads=1):
    """Distance of sign-consistent SVP-RKA solutions to the truth, per ``n``.

    Each trial draws a unit-norm rank-``r`` truth, standard normal sensing
    matrices and standard normal thresholds (one sequence), and runs SVP-RKA
    on the constraints tightened by ``margin`` until they are violated by
    less than ``margin / 2`` (so the originals hold strictly) or the budget
    ``iters_per_row * n`` is spent. The distance is kept only if the solution
    reproduces every sign; cells with no consistent trial report ``None``.
    """
    n_grid = [int(n) for n in n_grid]
    if any(b <= a for a, b in zip(n_grid, n_grid[1:])):
        raise ValueError(f"n_grid must be increasing, got {n_grid}")
    tasks = [(n1, n2, r, n, trials, master_seed, iters_per_row, margin) for n in n_grid]
    if threads <= 1:
        return [_probe_cell(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(_probe_cell, tasks))


def write_probe_csv(cells, stream):
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(["n", "trials", "consistent", "consistent_fraction", "max_distance", "median_distance"])
    for c in cells:
        writer.writerow([c.n, c.trials, c.consistent, _fmt(c.consistent_fraction),
                         _fmt(c.max_distance), _fmt(c.median_distance)])


# --- convergence-bound diagnostic -----------------------------------------


@dataclass
class BoundReport:
    kappa_v: float
    e0: float
    initial_distance: float
    iterations: np.ndarray
    distance: np.ndarray
    pre_step_distance: np.ndarray
    pre_projection_distance: np.ndarray
    bound: np.ndarray

    @property
    def nonexpansive(self):
        """Per step: the Kaczmarz point is no farther from the truth than the previous iterate."""
        return self.pre_projection_distance <= self.pre_step_distance + 1e-10

    @property
    def violations(self):
        return int(np.count_nonzero(~self.nonexpansive))


def bound_diagnostic(cfg, lam, trial_index, trace_every=1):
    """Dense SVP-RKA trace of one trial next to the envelope
    ``lemma1_bound(kappa(V), i, ||X_0 - X_final||_F, 0)``."""
    inst = build_instance(cfg, lam, trial_index)
    base = cfg.solver.rka_config(inst.n * cfg.m, seeds.mix64(inst.seed, seeds.STREAM_SOLVER))
    rcfg = dataclasses.replace(base, trace_every=trace_every)
    with threadpool_limits(limits=1):
        X_hat, trace = svp_rka(inst.rec, inst.ens, cfg.rank, None, rcfg, X_true=inst.truth.X)
        kappa = scaled_condition_number(assemble_V(inst.ens))
    e0 = float(np.linalg.norm(X_hat))  # X_0 = 0
    bound = np.array([lemma1_bound(kappa, int(i), e0, 0.0) for i in trace.iterations])
    return BoundReport(
        kappa, e0, trace.initial_distance, trace.iterations, trace.distance_to_truth,
        trace.pre_step_distance, trace.pre_projection_distance, bound,
    )


def write_bound_csv(report, stream):
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(["iteration", "distance", "pre_step_distance", "pre_projection_distance", "bound", "nonexpansive"])
    ok = report.nonexpansive
    for k, i in enumerate(report.iterations):
        writer.writerow([int(i), _fmt(report.distance[k]), _fmt(report.pre_step_distance[k]),
                         _fmt(report.pre_projection_distance[k]), _fmt(report.bound[k]), int(ok[k])])

