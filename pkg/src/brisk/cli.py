"""Command-line interface: estimate, compare, simulate, bench, render.

Exit codes: 0 success, 1 input error, 2 saturated (zero-clearance) scenario,
3 numerical non-convergence (partial report is still written).
"""

import argparse
import sys
from dataclasses import replace

import numpy as np

from . import __version__, kernels
from .bench import run_benchmark
from .geometry import Ball, Polytope, Workspace, convex_pieces
from .montecarlo import SimulationConfig, estimate_risk
from .process import propagate_covariance
from .risk import EstimatorConfig, total_risk
from .render import render_svg
from .scenario import (Scenario, ScenarioError, emit_report, load_scenario,
                       report_to_doc)

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_SATURATED = 2
EXIT_NOT_CONVERGED = 3


def _add_common(parser):
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--out", type=str, default=None)
    parser.add_argument("--format", choices=("json", "csv", "text"), default="text")
    parser.add_argument("--mvn-tol", type=float, default=None)
    parser.add_argument("--r-seg", type=int, default=None)
    parser.add_argument("--rd", type=str, default=None,
                        help="substeps per segment (compare accepts a comma list)")
    parser.add_argument("--mc-paths", type=int, default=None)
    parser.add_argument("--threads", type=int, default=None)


def _apply_overrides(cfg, args, rd_single=True):
    updates = {}
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.mvn_tol is not None:
        updates["mvn_target_abs_err"] = args.mvn_tol
    if args.r_seg is not None:
        updates["r_seg"] = args.r_seg
    if args.rd is not None and rd_single:
        updates["r_d"] = int(args.rd)
    if args.mc_paths is not None:
        updates["mc_paths"] = args.mc_paths
    if args.threads is not None:
        updates["threads"] = args.threads
    return replace(cfg, **updates)


def _set_threads(cfg):
    if cfg.threads and kernels.NUMBA_ENABLED:
        import numba
        numba.set_num_threads(max(1, min(cfg.threads, numba.config.NUMBA_NUM_THREADS)))


def _write_or_print(text, out):
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _float_cell(x):
    return repr(float(x))


def _config_dict(cfg):
    return {"r_seg": cfg.r_seg, "r_d": cfg.r_d,
            "mvn_tol": cfg.mvn_target_abs_err, "mvn_points": cfg.mvn_points,
            "mvn_shifts": cfg.mvn_shifts, "mc_paths": cfg.mc_paths,
            "seed": cfg.seed, "threads": cfg.threads}


def _echo_line(cfg, **extra):
    items = {**_config_dict(cfg), **extra, "version": __version__,
             "backend": kernels.BACKEND}
    body = " ".join(f"{k}={v}" for k, v in items.items())
    return f"# config: {body}"


def _report_exit_code(report):
    if report.saturated:
        return EXIT_SATURATED
    if not report.mvn_converged:
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def _summary_text(report, mc=None, cfg=None):
    lines = []
    if cfg is not None:
        lines.append(_echo_line(cfg))
    lines.append("bound            raw           clamped")
    for key, raw in report.bounds_raw.items():
        lines.append(f"{key:<16} {raw:<13.6g} {report.bounds_clamped[key]:.6g}")
    if mc is not None:
        lines.append(f"monte_carlo      {mc.p_hat:<13.6g} (stderr {mc.stderr:.2e}, "
                     f"{mc.paths} paths)")
    lines.append(f"saturated: {report.saturated}   mvn_converged: {report.mvn_converged}")
    lines.append(f"backend: {report.metadata['backend']}")
    return "\n".join(lines) + "\n"


def cmd_estimate(args):
    scenario = load_scenario(args.scenario)
    cfg = _apply_overrides(scenario.config, args)
    _set_threads(cfg)
    report = total_risk(scenario.workspace, scenario.trajectory, scenario.noise, cfg)
    mc = None
    if args.mc_paths is not None:
        mc = estimate_risk(scenario.trajectory, scenario.noise, scenario.workspace,
                           SimulationConfig(paths=cfg.mc_paths, r_d=cfg.r_d,
                                            seed=cfg.seed))
    doc = report_to_doc(report, cfg, __version__, mc=mc)
    if args.format == "json" or args.out:
        _write_or_print(emit_report(doc), args.out)
    if args.format == "text" and not args.out:
        sys.stdout.write(_summary_text(report, mc, cfg))
    elif args.format == "csv" and not args.out:
        rows = [_echo_line(cfg), "bound,raw,clamped"]
        for key, raw in report.bounds_raw.items():
            rows.append(f"{key},{_float_cell(raw)},{_float_cell(report.bounds_clamped[key])}")
        sys.stdout.write("\n".join(rows) + "\n")
    elif args.out and args.format != "json":
        sys.stdout.write(_summary_text(report, mc, cfg))
    return _report_exit_code(report)


def _dilate_piece(piece, margin):
    if isinstance(piece, Ball):
        return Ball(piece.center, piece.radius + margin)
    from .geometry import convex_hull
    hull = convex_hull(piece.vertices)
    m = hull.shape[0]
    lines = []
    for i in range(m):
        a, b = hull[i], hull[(i + 1) % m]
        edge = b - a
        n = np.array([edge[1], -edge[0]])
        n /= np.linalg.norm(n)
        lines.append((n, float(n @ a) + margin))
    verts = []
    for i in range(m):
        n1, b1 = lines[i - 1]
        n2, b2 = lines[i]
        A = np.vstack([n1, n2])
        verts.append(np.linalg.solve(A, np.array([b1, b2])))
    return Polytope(np.array(verts))


def _dilated_workspace(workspace, margin):
    if margin == 0.0:
        return workspace
    out = []
    for obs in workspace.obstacles:
        out.extend(_dilate_piece(p, margin) for p in convex_pieces(obs))
    return Workspace(workspace.lo, workspace.hi, out)


def cmd_compare(args):
    scenario = load_scenario(args.scenario)
    cfg = _apply_overrides(scenario.config, args, rd_single=False)
    _set_threads(cfg)
    rd_list = [int(x) for x in (args.rd or "5,10,20,55,100").split(",")]
    margins = [float(x) for x in args.sweep.split(",")] if args.sweep else [0.0]
    rows = []
    for margin in margins:
        ws = _dilated_workspace(scenario.workspace, margin)
        report = total_risk(ws, scenario.trajectory, scenario.noise, cfg)
        sched = propagate_covariance(scenario.trajectory, scenario.noise)
        pieces = [p for _, p in ws.convex_pieces()]
        rows.append((margin, "full_horizon", report.bounds_raw["full_horizon"],
                     report.timings["full_horizon_total"]))
        rows.append((margin, "first_order", report.bounds_raw["first_order"],
                     report.timings["first_order_total"]))
        rows.append((margin, "second_order", report.bounds_raw["second_order"],
                     report.timings["second_order_total"]))
        from .risk import discrete_time_bound
        import time as _time
        for rd in rd_list:
            t0 = _time.perf_counter()
            # per-piece sums in report order, so shared quantities match
            # cmd_estimate to the last digit
            per_piece = [1.0 if pr.saturated else
                         discrete_time_bound(scenario.trajectory, sched,
                                             [pieces[i]], rd)
                         for i, pr in enumerate(report.pieces)]
            rows.append((margin, f"discrete_time_rd{rd}", float(sum(per_piece)),
                         _time.perf_counter() - t0))
        mc = estimate_risk(scenario.trajectory, scenario.noise, ws,
                           SimulationConfig(paths=cfg.mc_paths, r_d=cfg.r_d,
                                            seed=cfg.seed))
        rows.append((margin, "monte_carlo", mc.p_hat, mc.elapsed))

    if args.format == "json":
        import json
        doc = {"config": _config_dict(cfg), "version": __version__,
               "rows": [{"margin": m, "method": name, "value": v, "time": t}
                        for m, name, v, t in rows]}
        _write_or_print(json.dumps(doc, indent=2, sort_keys=True) + "\n", args.out)
    else:
        sep = "," if args.format == "csv" else "\t"
        lines = [_echo_line(cfg, rd_list=";".join(map(str, rd_list))),
                 sep.join(["margin", "method", "value", "time"])]
        for m, name, v, t in rows:
            lines.append(sep.join([_float_cell(m), name, _float_cell(v), f"{t:.6f}"]))
        _write_or_print("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def cmd_simulate(args):
    scenario = load_scenario(args.scenario)
    cfg = _apply_overrides(scenario.config, args)
    _set_threads(cfg)
    mc = estimate_risk(scenario.trajectory, scenario.noise, scenario.workspace,
                       SimulationConfig(paths=cfg.mc_paths, r_d=cfg.r_d,
                                        seed=cfg.seed))
    if args.format == "json":
        import json
        doc = {"p_hat": mc.p_hat, "stderr": mc.stderr, "paths": mc.paths,
               "elapsed": mc.elapsed, "metadata": mc.metadata,
               "config": _config_dict(cfg), "version": __version__}
        _write_or_print(json.dumps(doc, indent=2, sort_keys=True) + "\n", args.out)
    else:
        _write_or_print(f"{_echo_line(cfg)}\np_hat {mc.p_hat!r}\nstderr {mc.stderr!r}\n"
                        f"paths {mc.paths}\nelapsed {mc.elapsed:.3f}\n", args.out)
    return EXIT_OK


def cmd_bench(args):
    cfg = _apply_overrides(EstimatorConfig(), args, rd_single=False)
    _set_threads(cfg)
    rd_list = [int(x) for x in (args.rd or "5,10,100").split(",")]
    rows = run_benchmark(args.count, seed=args.seed or 0, rd_list=rd_list,
                         mc_paths=args.mc_paths or 10_000, config=cfg)
    if args.format == "json":
        import json
        doc = {"config": _config_dict(cfg), "version": __version__,
               "count": args.count, "bench_seed": args.seed or 0,
               "rows": [{"method": r.method, "bias": r.bias, "rmse": r.rmse,
                         "pct_conservative": r.pct_conservative,
                         "avg_time": r.avg_time} for r in rows]}
        _write_or_print(json.dumps(doc, indent=2, sort_keys=True) + "\n", args.out)
    else:
        sep = "," if args.format == "csv" else "\t"
        lines = [_echo_line(cfg, count=args.count, bench_seed=args.seed or 0),
                 sep.join(["method", "bias", "rmse", "pct_conservative", "avg_time"])]
        for r in rows:
            lines.append(sep.join([r.method, f"{r.bias:.6g}", f"{r.rmse:.6g}",
                                   f"{r.pct_conservative:.1f}", f"{r.avg_time:.4f}"]))
        _write_or_print("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def cmd_render(args):
    scenario = load_scenario(args.scenario)
    levels = [float(x) for x in args.ellipses.split(",")] if args.ellipses else [0.95]
    sched = propagate_covariance(scenario.trajectory, scenario.noise)
    svg = render_svg(scenario.workspace, scenario.trajectory, sched, levels=levels)
    _write_or_print(svg, args.out)
    return EXIT_OK


def main(argv=None):
    import warnings
    warnings.filterwarnings("ignore", message="The TBB threading layer requires TBB")
    parser = argparse.ArgumentParser(
        prog="brisk",
        description="Continuous-time collision risk bounds for waypoint plans "
                    "under Brownian process noise.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_est = sub.add_parser("estimate", help="compute all analytic bounds")
    p_est.add_argument("scenario")
    _add_common(p_est)

    p_cmp = sub.add_parser("compare", help="method comparison table")
    p_cmp.add_argument("scenario")
    p_cmp.add_argument("--sweep", type=str, default=None,
                       help="comma list of obstacle dilation margins")
    _add_common(p_cmp)

    p_sim = sub.add_parser("simulate", help="Monte Carlo estimate only")
    p_sim.add_argument("scenario")
    _add_common(p_sim)

    p_bench = sub.add_parser("bench", help="random-scenario benchmark statistics")
    p_bench.add_argument("--count", type=int, default=10)
    _add_common(p_bench)

    p_render = sub.add_parser("render", help="SVG drawing with confidence ellipses")
    p_render.add_argument("scenario")
    p_render.add_argument("--ellipses", type=str, default="0.95",
                          help="comma list of confidence levels")
    _add_common(p_render)

    args = parser.parse_args(argv)
    handlers = {"estimate": cmd_estimate, "compare": cmd_compare,
                "simulate": cmd_simulate, "bench": cmd_bench,
                "render": cmd_render}
    try:
        return handlers[args.command](args)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except RuntimeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
