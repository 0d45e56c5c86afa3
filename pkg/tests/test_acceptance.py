"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

The shared battery fixture evaluates all estimators over 100 generated
scenarios once; criteria 2-4 assert against it.
"""

import math
import time

import numpy as np
import pytest
from scipy.special import ndtr

from brisk import kernels
from brisk.gaussian import GaussianVector, bivariate_normal_cdf, mvn_cdf
from brisk.generator import random_scenario
from brisk.geometry import (Ball, Halfspace, Polygon, Segment, Workspace,
                            separating_hyperplane)
from brisk.montecarlo import SimulationConfig, estimate_risk
from brisk.process import (NoiseModel, build_trajectory, cross_covariance,
                           propagate_covariance, segment_gaussian,
                           stacked_pair_gaussian, uniform_grid)
from brisk.risk import (EstimatorConfig, discrete_time_bound,
                        pair_risk_lower_bound, segment_risk, total_risk)


def report_line(n, ok, detail):
    print(f"ACCEPTANCE {n}: {'PASS' if ok else 'FAIL'} ({detail})")


@pytest.fixture(scope="module")
def battery(warm_kernels):
    """All estimators over 100 generated scenarios with a 1e4-path MC reference."""
    rows = []
    t_bounds = 0.0
    t0_all = time.perf_counter()
    for s in range(100):
        workspace, traj, noise = random_scenario(s)
        t0 = time.perf_counter()
        report = total_risk(workspace, traj, noise, EstimatorConfig())
        t_bounds += time.perf_counter() - t0
        sched = propagate_covariance(traj, noise)
        pieces = [p for _, p in workspace.convex_pieces()]
        dt5 = discrete_time_bound(traj, sched, pieces, 5)
        mc = estimate_risk(traj, noise, workspace,
                           SimulationConfig(paths=10_000, r_d=100, seed=1000 + s))
        rows.append({
            "full_horizon": report.bounds_raw["full_horizon"],
            "first_order": report.bounds_raw["first_order"],
            "second_order": report.bounds_raw["second_order"],
            "dt5": dt5,
            "dt100": report.bounds_raw["discrete_time_rd100"],
            "mc": mc.p_hat,
            "mc_stderr": mc.stderr,
        })
    return {"rows": rows, "elapsed_bounds": t_bounds,
            "elapsed_total": time.perf_counter() - t0_all}


def test_criterion_1_reflection_closed_form_and_mc():
    t0 = time.perf_counter()
    d = 0.11
    sigma2 = 1e-3
    traj = build_trajectory([[0.0, 0.0], [1.0, 0.0]], speed=1.0)
    noise = NoiseModel(sigma2 * np.eye(2))
    sched = propagate_covariance(traj, noise)
    h = separating_hyperplane(Segment([0.0, 0.0], [1.0, 0.0]),
                              Halfspace([0.0, 1.0], d))
    sr = segment_risk(h, 0, sched)
    closed = 2.0 * (1.0 - float(ndtr(d / math.sqrt(sigma2))))
    exact_ok = abs(sr.p - closed) <= 1e-10

    ws = Workspace([0, 0], [1, 1], [Halfspace([0.0, 1.0], d)])
    mc = estimate_risk(traj, noise, ws,
                       SimulationConfig(paths=100_000, r_d=200, seed=0))
    mc_ok = abs(mc.p_hat - closed) <= 3.0 * mc.stderr
    elapsed = time.perf_counter() - t0
    ok = exact_ok and mc_ok and elapsed < 10.0
    report_line(1, ok, f"|p1-closed|={abs(sr.p - closed):.2e}, "
                       f"|mc-closed|={abs(mc.p_hat - closed):.2e} vs 3se="
                       f"{3 * mc.stderr:.2e}, {elapsed:.1f}s")
    assert exact_ok
    assert mc_ok
    assert elapsed < 10.0


def test_criterion_2_bound_ordering(battery):
    rows = battery["rows"]
    holds = sum(1 for r in rows
                if r["second_order"] <= r["first_order"] + 1e-5
                and r["first_order"] <= r["full_horizon"] + 1e-5)
    ok = holds == len(rows) and battery["elapsed_total"] < 300.0
    report_line(2, ok, f"ordering holds {holds}/{len(rows)}, "
                       f"battery {battery['elapsed_total']:.0f}s")
    assert holds == len(rows)
    assert battery["elapsed_total"] < 300.0


def test_criterion_3_conservatism_and_rmse_ordering(battery):
    rows = battery["rows"]
    conservative = sum(
        1 for r in rows
        if r["first_order"] >= r["mc"] - 3 * r["mc_stderr"]
        and r["second_order"] >= r["mc"] - 3 * r["mc_stderr"])
    rmse = {}
    for key in ("full_horizon", "first_order", "second_order"):
        rmse[key] = math.sqrt(np.mean([(r[key] - r["mc"]) ** 2 for r in rows]))
    order_ok = rmse["second_order"] < rmse["first_order"] < rmse["full_horizon"]
    ok = conservative == len(rows) and order_ok
    report_line(3, ok, f"conservative {conservative}/{len(rows)}, RMSE "
                       f"second {rmse['second_order']:.3f} < first "
                       f"{rmse['first_order']:.3f} < baseline {rmse['full_horizon']:.3f}")
    assert conservative == len(rows)
    assert order_ok


def test_criterion_4_discrete_time_pathology(battery):
    rows = battery["rows"]
    under = sum(1 for r in rows if r["dt5"] < r["mc"])
    frac = under / len(rows)
    mean_dt100 = float(np.mean([r["dt100"] for r in rows]))
    mean_second = float(np.mean([r["second_order"] for r in rows]))
    factor = mean_dt100 / mean_second
    ok = frac >= 0.20 and factor >= 2.0
    report_line(4, ok, f"rd=5 underestimates in {100 * frac:.0f}% of scenarios, "
                       f"rd=100 mean / second-order mean = {factor:.1f}x")
    assert frac >= 0.20
    assert factor >= 2.0


def test_criterion_5_speedup_over_monte_carlo():
    wps = [[0.1, 0.1], [0.1, 0.9], [0.3, 0.9], [0.3, 0.1], [0.5, 0.1],
           [0.5, 0.9], [0.7, 0.9], [0.7, 0.1], [0.9, 0.1], [0.9, 0.9]]
    fine = [np.array(wps[0])]
    for j in range(len(wps) - 1):
        a, b = np.array(wps[j]), np.array(wps[j + 1])
        ts = (1 / 3, 2 / 3, 1.0) if j < 2 else (0.5, 1.0)
        fine.extend(a + (b - a) * t for t in ts)
    traj = build_trajectory(np.array(fine), speed=1.0)
    assert traj.n_segments == 20
    obstacles = [Ball([0.2, 0.5], 0.018),
                 Polygon([[0.38, 0.47], [0.42, 0.47], [0.42, 0.53], [0.38, 0.53]]),
                 Ball([0.6, 0.5], 0.018),
                 Polygon([[0.78, 0.47], [0.82, 0.47], [0.82, 0.53], [0.78, 0.53]])]
    workspace = Workspace([0, 0], [1, 1], obstacles)
    noise = NoiseModel(1e-3 * np.eye(2))

    report = total_risk(workspace, traj, noise, EstimatorConfig())  # warm path
    report = total_risk(workspace, traj, noise, EstimatorConfig())
    t_first = report.timings["first_order_total"]
    t_second = report.timings["second_order_total"]

    t0 = time.perf_counter()
    mc = estimate_risk(traj, noise, workspace,
                       SimulationConfig(paths=100_000, r_d=100, seed=11))
    t_mc = time.perf_counter() - t0

    ratio_first = t_mc / t_first
    ratio_second = t_mc / t_second
    conservative = (report.bounds_raw["second_order"] >= mc.p_hat - 3 * mc.stderr)
    ok = ratio_first >= 10.0 and ratio_second >= 10.0 and conservative
    report_line(5, ok, f"MC {t_mc:.1f}s vs first {t_first:.3f}s ({ratio_first:.0f}x) "
                       f"and second {t_second:.2f}s ({ratio_second:.0f}x)")
    assert ratio_first >= 10.0
    assert ratio_second >= 10.0
    assert conservative


def test_criterion_6_mvn_cdf_against_monte_carlo():
    t0 = time.perf_counter()
    rng = np.random.default_rng(9)
    checked = 0
    worst = 0.0
    for case in range(50):
        k = 2 + case % 5
        A = rng.normal(size=(k, k))
        cov = A @ A.T + k * np.eye(k)   # diagonally dominant PSD
        lo = rng.normal(size=k) * np.sqrt(np.diag(cov)) - 1.0
        hi = lo + rng.uniform(0.8, 2.5, size=k) * np.sqrt(np.diag(cov))
        res = mvn_cdf(GaussianVector(cov), lo, hi)
        L = np.linalg.cholesky(cov)
        g = np.random.default_rng(10_000 + case)
        hits = 0
        n = 10_000_000
        batch = 2_000_000
        for _ in range(n // batch):
            z = g.standard_normal((batch, k)) @ L.T
            hits += int(np.all((z >= lo) & (z <= hi), axis=1).sum())
        p_mc = hits / n
        se = math.sqrt(max(p_mc * (1 - p_mc), 1e-12) / n)
        tol = max(3 * se, res.err)
        worst = max(worst, abs(res.prob - p_mc) - tol)
        assert abs(res.prob - p_mc) <= tol, (case, k, res, p_mc, se)
        checked += 1

    bvn_worst = 0.0
    for _ in range(50):
        rho = rng.uniform(-0.98, 0.98)
        h, k2 = rng.normal(size=2)
        cov = np.array([[1.0, rho], [rho, 1.0]])
        res = mvn_cdf(GaussianVector(cov), np.array([-np.inf, -np.inf]),
                      np.array([h, k2]))
        bvn_worst = max(bvn_worst, abs(res.prob - bivariate_normal_cdf(h, k2, rho)))
    elapsed = time.perf_counter() - t0
    ok = checked == 50 and bvn_worst <= 1e-6 and elapsed < 120.0
    report_line(6, ok, f"{checked}/50 boxes within tolerance, bivariate max diff "
                       f"{bvn_worst:.1e}, {elapsed:.0f}s")
    assert ok


def test_criterion_7_refinement_monotonicity():
    scenarios = 0
    seed = 0
    pair_checks = 0
    while scenarios < 20:
        workspace, traj, noise = random_scenario(seed)
        seed += 1
        sched = propagate_covariance(traj, noise)
        pieces = [p for _, p in workspace.convex_pieces()]
        best = None
        for piece in pieces:
            hs, srs = [], []
            try:
                for j in range(traj.n_segments):
                    h = separating_hyperplane(
                        Segment(traj.waypoints[j], traj.waypoints[j + 1]), piece)
                    hs.append(h)
                    srs.append(segment_risk(h, j, sched))
            except Exception:
                continue
            for j in range(traj.n_segments - 1):
                coupling = min(srs[j].p, srs[j + 1].p)
                if best is None or coupling > best[0]:
                    best = (coupling, j, hs[j], hs[j + 1])
        if best is None or best[0] < 1e-4:
            continue
        _, j, h1, h2 = best
        values, errs = [], []
        for r in (1, 2, 4, 8):
            pr = pair_risk_lower_bound(
                j, h1, h2, uniform_grid(traj, j, r), uniform_grid(traj, j + 1, r),
                sched, noise)
            values.append(pr.p_lb)
            errs.append(pr.err)
        for i in range(3):
            slack = 2 * (errs[i] + errs[i + 1])
            assert values[i + 1] >= values[i] - slack, (seed - 1, values, errs)
            pair_checks += 1
        scenarios += 1
    # a non-decreasing joint term means a non-increasing second-order bound
    report_line(7, True, f"{scenarios} scenarios, {pair_checks} nested-grid "
                         f"comparisons all monotone")


def test_criterion_8_covariance_assembly_cross_check():
    rng = np.random.default_rng(4)
    worst = 0.0
    min_eig_ratio = 0.0
    for _ in range(100):
        n_seg = int(rng.integers(2, 5))
        wp = np.cumsum(rng.uniform(0.2, 0.8, size=(n_seg + 1, 2)), axis=0)
        traj = build_trajectory(wp, speed=float(rng.uniform(0.5, 2.0)))
        A = rng.normal(size=(2, 2))
        noise = NoiseModel(A @ A.T + 0.3 * np.eye(2))
        sched = propagate_covariance(traj, noise)
        j = int(rng.integers(0, n_seg - 1))
        a1 = rng.normal(size=2)
        a1 /= np.linalg.norm(a1)
        a2 = rng.normal(size=2)
        a2 /= np.linalg.norm(a2)
        g1 = uniform_grid(traj, j, int(rng.integers(1, 6)))
        g2 = uniform_grid(traj, j + 1, int(rng.integers(1, 6)))

        scalar11 = float(a1 @ noise.R @ a1)
        seg_cov = segment_gaussian(j, a1, g1, sched, noise).covariance
        oracle = scalar11 * np.minimum.outer(g1.times, g1.times)
        worst = max(worst, float(np.abs(seg_cov - oracle).max()))

        scalar12 = float(a1 @ noise.R @ a2)
        H = cross_covariance(j, a1, a2, g1, g2, sched, noise)
        oracle_h = scalar12 * np.minimum.outer(g1.times, g2.times)
        worst = max(worst, float(np.abs(H - oracle_h).max()))

        stacked = stacked_pair_gaussian(j, a1, a2, g1, g2, sched, noise).covariance
        eigs = np.linalg.eigvalsh(stacked)
        min_eig_ratio = min(min_eig_ratio, float(eigs.min() / np.trace(stacked)))
    ok = worst <= 1e-12 and min_eig_ratio >= -1e-9
    report_line(8, ok, f"max assembly-vs-min-rule deviation {worst:.1e}, "
                       f"min eig/trace {min_eig_ratio:.1e}")
    assert worst <= 1e-12
    assert min_eig_ratio >= -1e-9
