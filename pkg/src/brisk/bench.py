"""Aggregate accuracy/timing statistics for all estimators over random scenarios."""

import math
import time
from dataclasses import dataclass

from .generator import random_scenario
from .montecarlo import SimulationConfig, estimate_risk
from .process import propagate_covariance
from .risk import EstimatorConfig, discrete_time_bound, total_risk


@dataclass(frozen=True)
class MethodStats:
    method: str
    bias: float
    rmse: float
    pct_conservative: float
    avg_time: float


def _conservative(est, ref):
    return est >= ref - 1e-3 * max(ref, 1e-12)


def run_benchmark(count, seed=0, rd_list=(5, 10, 100), mc_paths=10_000,
                  config=EstimatorConfig(), progress=None):
    """Bias, RMSE, %conservative, and average time per method vs MC reference.

    Scenarios come from the documented random generator with seeds
    seed..seed+count-1; the MC reference reruns with a derived per-scenario
    seed so results are deterministic.
    """
    methods = ["full_horizon", "first_order", "second_order"]
    methods += [f"discrete_time_rd{rd}" for rd in rd_list]
    estimates = {m: [] for m in methods}
    times = {m: [] for m in methods}
    mc_values = []
    mc_times = []

    for i in range(count):
        workspace, traj, noise = random_scenario(seed + i)
        report = total_risk(workspace, traj, noise, config)
        estimates["full_horizon"].append(report.bounds_raw["full_horizon"])
        estimates["first_order"].append(report.bounds_raw["first_order"])
        estimates["second_order"].append(report.bounds_raw["second_order"])
        times["full_horizon"].append(report.timings["full_horizon_total"])
        times["first_order"].append(report.timings["first_order_total"])
        times["second_order"].append(report.timings["second_order_total"])

        sched = propagate_covariance(traj, noise)
        pieces = [p for _, p in workspace.convex_pieces()]
        for rd in rd_list:
            name = f"discrete_time_rd{rd}"
            t0 = time.perf_counter()
            saturated = any(pr.saturated for pr in report.pieces)
            if saturated:
                value = float(sum(1.0 if pr.saturated else pr.discrete_time
                                  for pr in report.pieces))
            else:
                value = discrete_time_bound(traj, sched, pieces, rd)
            estimates[name].append(value)
            times[name].append(time.perf_counter() - t0)

        mc = estimate_risk(traj, noise, workspace,
                           SimulationConfig(paths=mc_paths, r_d=100,
                                            seed=(seed + i) * 7919 + 13))
        mc_values.append(mc.p_hat)
        mc_times.append(mc.elapsed)
        if progress is not None:
            progress(i + 1, count)

    rows = [MethodStats("monte_carlo", 0.0, 0.0, 100.0,
                        sum(mc_times) / count)]
    for m in methods:
        diffs = [e - r for e, r in zip(estimates[m], mc_values)]
        bias = sum(diffs) / count
        rmse = math.sqrt(sum(d * d for d in diffs) / count)
        cons = 100.0 * sum(_conservative(e, r) for e, r
                           in zip(estimates[m], mc_values)) / count
        rows.append(MethodStats(m, bias, rmse, cons, sum(times[m]) / count))
    return rows
