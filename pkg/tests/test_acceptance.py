"""End-to-end acceptance checks, one test per criterion."""

import json
import os
import time

import numpy as np
import pytest

from svprka.cli import main
from svprka.harness import ExperimentConfig, run_sweep, tessellation_probe
from svprka.linalg import rank_r_project, scaled_condition_number
from svprka.quantizer import DitherPlan, generate_dithers, quantize
from svprka.sensing import apply_operator, generate_gaussian_ensemble, generate_low_rank
from svprka.solvers import RkaConfig, rka_feasibility, svp_rka

WORKERS = os.cpu_count() or 1


def bootstrap_ci(x, rng, resamples=4000):
    means = rng.choice(x, size=(resamples, len(x)), replace=True).mean(axis=1)
    return np.quantile(means, [0.025, 0.975])


@pytest.mark.slow
def test_ac1_error_trend(acceptance):
    cfg = ExperimentConfig(n1=30, n2=30, rank=2, m=1, lambda_grid=(8.0, 16.0, 32.0, 64.0), trials=100,
                           master_seed=20231018)
    start = time.perf_counter()
    results = run_sweep(cfg, threads=WORKERS)
    elapsed = time.perf_counter() - start

    rng = np.random.default_rng(0)
    svp_means, lines, disjoint = [], [], True
    for lam in cfg.lambda_grid:
        group = [r for r in results if r.lam == lam]
        svp = np.array([r.results["svp_rka"].rel_error for r in group])
        hsvt = np.array([r.results["hsvt"].rel_error for r in group])
        ci_s, ci_h = bootstrap_ci(svp, rng), bootstrap_ci(hsvt, rng)
        svp_means.append(svp.mean())
        if svp.mean() >= hsvt.mean():
            disjoint = False
        if lam >= 16 and not ci_s[1] < ci_h[0]:
            disjoint = False
        lines.append(f"lam={lam:g} svp={svp.mean():.4f} [{ci_s[0]:.4f},{ci_s[1]:.4f}] "
                     f"hsvt={hsvt.mean():.4f} [{ci_h[0]:.4f},{ci_h[1]:.4f}]")
    decreasing = all(b < a for a, b in zip(svp_means, svp_means[1:]))
    in_budget = elapsed <= 900
    ok = acceptance("AC1 trend", decreasing and disjoint and in_budget,
                    f"{'; '.join(lines)}; {elapsed:.0f}s on {WORKERS} worker(s)")
    assert decreasing, svp_means
    assert disjoint, lines
    assert in_budget, elapsed
    assert ok


def test_ac2_rka_rate(acceptance):
    start = time.perf_counter()
    rng = np.random.default_rng(11)
    C = rng.standard_normal((200, 20))
    x_star = rng.standard_normal(20)
    b = C @ x_star
    kappa = scaled_condition_number(C)
    checkpoints = (20, 50, 100)
    sq = np.zeros((200, len(checkpoints)))
    for run in range(200):
        _, tr = rka_feasibility(C, b, [], range(200), np.zeros(20),
                                RkaConfig(max_iters=100, violation_tol=None, seed=run), x_true=x_star)
        sq[run] = tr.distance_to_truth[[i - 1 for i in checkpoints]] ** 2
    mean_sq = sq.mean(axis=0)
    e0 = float(x_star @ x_star)
    limits = np.array([1.5 * (1 - 1 / kappa**2) ** i * e0 for i in checkpoints])
    elapsed = time.perf_counter() - start
    ok = bool(np.all(mean_sq < limits)) and elapsed <= 30
    acceptance("AC2 RKA rate", ok, ", ".join(
        f"i={i}: {m:.4g} < {lim:.4g}" for i, m, lim in zip(checkpoints, mean_sq, limits)) + f"; {elapsed:.1f}s")
    assert ok


def test_ac3_nonexpansive_steps(acceptance):
    violations = steps = 0
    for seed in range(20):
        truth = generate_low_rank(10, 10, 2, True, 1000 + seed)
        ens = generate_gaussian_ensemble(320, 10, 10, 2000 + seed)
        y = apply_operator(ens, truth.X)
        rec = quantize(y, generate_dithers(DitherPlan(1, np.max(np.abs(y)) / 3, 3000 + seed), 320))
        _, tr = svp_rka(rec, ens, 2, None, RkaConfig(max_iters=4000, violation_tol=None, seed=seed), X_true=truth.X)
        violations += int(np.count_nonzero(tr.pre_projection_distance > tr.pre_step_distance + 1e-10))
        steps += tr.iterations.size
    ok = violations == 0
    acceptance("AC3 non-expansiveness", ok, f"{violations} violations in {steps} traced steps")
    assert ok


def test_ac4_best_rank_r(acceptance):
    rng = np.random.default_rng(4)
    worst = -np.inf
    for k in range(1000):
        r = 1 + k % 3
        Z = rng.standard_normal((6, 5))
        Y = rng.standard_normal((6, r)) @ rng.standard_normal((r, 5))
        worst = max(worst, np.linalg.norm(rank_r_project(Z, r) - Z) - np.linalg.norm(Y - Z))
    ok = worst <= 1e-10
    acceptance("AC4 best rank-r", ok, f"max excess {worst:.3g} over 1000 pairs")
    assert ok


def test_ac5_hsvt_identity(acceptance):
    start = time.perf_counter()
    n, sigma = 100_000, 0.5
    X = generate_low_rank(4, 4, 2, False, 5).X
    ens = generate_gaussian_ensemble(n, 4, 4, 6)
    rec = quantize(apply_operator(ens, X), generate_dithers(DitherPlan(1, sigma, 7), n))
    samples = rec.R[:, 0, None, None] * ens.matrices
    mean = samples.mean(axis=0)
    se = samples.std(axis=0, ddof=1) / np.sqrt(n)
    target = np.sqrt(2 / np.pi) * X / np.sqrt(np.sum(X**2) + sigma**2)
    within = int(np.count_nonzero(np.abs(mean - target) <= 3 * se))
    elapsed = time.perf_counter() - start
    ok = within >= 14 and elapsed <= 60
    acceptance("AC5 HSVT identity", ok, f"{within}/16 entries within 3 SE; {elapsed:.1f}s")
    assert ok


@pytest.mark.slow
def test_ac6_tessellation_probe(acceptance):
    cells = tessellation_probe(8, 8, 1, [120, 480, 1920], 50, 2024, threads=WORKERS)
    medians = [c.median_distance for c in cells]
    ok = None not in medians and all(b <= a for a, b in zip(medians, medians[1:]))
    acceptance("AC6 tessellation probe", ok, ", ".join(
        f"n={c.n}: median {c.median_distance} ({c.consistent}/{c.trials} consistent)" for c in cells))
    assert ok


def test_ac7_replay(acceptance, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"n1": 8, "n2": 8, "rank": 1, "lambda_grid": [8, 16], "trials": 4}))
    outs = []
    for threads in (1, 2):
        out = tmp_path / f"t{threads}.csv"
        assert main(["sweep", "--config", str(cfg), "--seed", "42", "--threads", str(threads), "--out", str(out)]) == 0
        outs.append(out.read_bytes())
    ok = outs[0] == outs[1]
    acceptance("AC7 replay", ok, f"--threads 1 vs 2: {len(outs[0])} bytes, identical={ok}")
    assert ok


def test_ac8_sampling_distribution(acceptance):
    rng = np.random.default_rng(8)
    C = rng.standard_normal((50, 6)) * rng.uniform(0.2, 3.0, (50, 1))
    draws = 100_000
    _, tr = rka_feasibility(C, np.zeros(50), [], range(50), np.ones(6),
                            RkaConfig(max_iters=draws, violation_tol=None, seed=1))
    freq = np.bincount(tr.chosen_rows[:, 0], minlength=50) / draws
    p = np.sum(C**2, axis=1) / np.sum(C**2)
    z = np.abs(freq - p) / np.sqrt(p * (1 - p) / draws)
    ok = bool(np.all(z <= 3))
    acceptance("AC8 sampling distribution", ok, f"max |z| = {z.max():.2f} over 50 rows")
    assert ok
