"""Scenario and report file schemas (versioned ``brisk/1``).

Both documents are canonical JSON: sorted keys, two-space indent, trailing
newline. Emitting a parsed document reproduces it byte for byte.
"""

import json
from dataclasses import dataclass, replace

import numpy as np

from .geometry import Ball, Polygon, Polytope, Workspace
from .process import NoiseModel, PlannedTrajectory, build_trajectory
from .risk import EstimatorConfig

SCHEMA_VERSION = "brisk/1"


class ScenarioError(Exception):
    """Scenario document failed to parse or validate."""


@dataclass(frozen=True)
class Scenario:
    workspace: Workspace
    trajectory: PlannedTrajectory
    noise: NoiseModel
    config: EstimatorConfig
    speed: float = None           # None when explicit durations were given
    goal: dict = None


def _canonical(doc):
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _require(doc, key, kind, where):
    if key not in doc:
        raise ScenarioError(f"{where}: missing field '{key}'")
    value = doc[key]
    if kind is not None and not isinstance(value, kind):
        raise ScenarioError(f"{where}: field '{key}' has wrong type")
    return value


def _finite_array(value, where, shape_hint=None):
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"{where}: not numeric ({exc})")
    if not np.all(np.isfinite(arr)):
        raise ScenarioError(f"{where}: non-finite values")
    return arr


def _parse_obstacle(doc, idx):
    where = f"obstacles[{idx}]"
    kind = _require(doc, "type", str, where)
    if kind == "polygon":
        verts = _finite_array(_require(doc, "vertices", list, where), where)
        pieces = None
        if doc.get("convex_pieces") is not None:
            pieces = tuple(Polytope(_finite_array(p, f"{where}.convex_pieces"))
                           for p in doc["convex_pieces"])
        try:
            return Polygon(verts, convex_pieces=pieces)
        except Exception as exc:
            raise ScenarioError(f"{where}: {exc}")
    if kind == "circle":
        center = _finite_array(_require(doc, "center", list, where), where)
        radius = _require(doc, "radius", (int, float), where)
        try:
            return Ball(center, float(radius))
        except ValueError as exc:
            raise ScenarioError(f"{where}: {exc}")
    raise ScenarioError(f"{where}: unknown obstacle type '{kind}'")


def _emit_obstacle(obs):
    if isinstance(obs, Polygon):
        doc = {"type": "polygon", "vertices": [list(map(float, v)) for v in obs.vertices]}
        if obs.convex_pieces is not None:
            doc["convex_pieces"] = [[list(map(float, v)) for v in p.vertices]
                                    for p in obs.convex_pieces]
        return doc
    if isinstance(obs, Ball):
        return {"type": "circle", "center": list(map(float, obs.center)),
                "radius": float(obs.radius)}
    raise TypeError(f"cannot serialize obstacle {type(obs).__name__}")


def parse_scenario(text):
    """Scenario from JSON text; raises ScenarioError with field diagnostics."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}")
    if not isinstance(doc, dict):
        raise ScenarioError("top level: expected an object")
    version = _require(doc, "version", str, "top level")
    if version != SCHEMA_VERSION:
        raise ScenarioError(f"top level: unsupported version '{version}'")

    ws_doc = _require(doc, "workspace", dict, "top level")
    bounds = _require(ws_doc, "bounds", dict, "workspace")
    lo = _finite_array(_require(bounds, "lo", list, "workspace.bounds"), "workspace.bounds.lo")
    hi = _finite_array(_require(bounds, "hi", list, "workspace.bounds"), "workspace.bounds.hi")
    if lo.shape != hi.shape or np.any(lo >= hi):
        raise ScenarioError("workspace.bounds: need lo < hi elementwise")

    obstacles = [_parse_obstacle(o, i)
                 for i, o in enumerate(_require(doc, "obstacles", list, "top level"))]

    waypoints = _finite_array(_require(doc, "waypoints", list, "top level"), "waypoints")
    if waypoints.ndim != 2 or waypoints.shape[0] < 2:
        raise ScenarioError("waypoints: need at least two points")

    noise_doc = _require(doc, "noise", (int, float, list), "top level")
    n = waypoints.shape[1]
    if isinstance(noise_doc, (int, float)):
        if not np.isfinite(float(noise_doc)):
            raise ScenarioError("noise: non-finite value")
        R = float(noise_doc) * np.eye(n)
    else:
        R = _finite_array(noise_doc, "noise")
    try:
        noise = NoiseModel(R)
    except ValueError as exc:
        raise ScenarioError(f"noise: {exc}")

    speed = doc.get("speed")
    durations = doc.get("durations")
    if durations is None and speed is None:
        raise ScenarioError("top level: need 'speed' or 'durations'")
    try:
        if durations is not None:
            traj = build_trajectory(waypoints, durations=_finite_array(durations, "durations"))
            speed = None
        else:
            traj = build_trajectory(waypoints, speed=float(speed))
    except Exception as exc:
        raise ScenarioError(f"trajectory: {exc}")

    est_doc = doc.get("estimator", {})
    if not isinstance(est_doc, dict):
        raise ScenarioError("estimator: expected an object")
    cfg = EstimatorConfig()
    known = {"r_seg": int, "r_d": int, "mvn_tol": float, "mvn_points": int,
             "mvn_shifts": int, "mc_paths": int, "seed": int, "threads": int}
    updates = {}
    for key, value in est_doc.items():
        if key not in known:
            raise ScenarioError(f"estimator: unknown field '{key}'")
        field_name = "mvn_target_abs_err" if key == "mvn_tol" else key
        updates[field_name] = known[key](value)
    cfg = replace(cfg, **updates)

    return Scenario(workspace=Workspace(lo, hi, obstacles), trajectory=traj,
                    noise=noise, config=cfg, speed=speed, goal=doc.get("goal"))


def emit_scenario(scenario):
    """Canonical JSON for a Scenario (round-trip stable)."""
    cfg = scenario.config
    doc = {
        "version": SCHEMA_VERSION,
        "workspace": {"bounds": {"lo": list(map(float, scenario.workspace.lo)),
                                 "hi": list(map(float, scenario.workspace.hi))}},
        "obstacles": [_emit_obstacle(o) for o in scenario.workspace.obstacles],
        "waypoints": [list(map(float, w)) for w in scenario.trajectory.waypoints],
        "noise": [list(map(float, row)) for row in scenario.noise.R],
        "estimator": {
            "r_seg": cfg.r_seg, "r_d": cfg.r_d,
            "mvn_tol": cfg.mvn_target_abs_err, "mvn_points": cfg.mvn_points,
            "mvn_shifts": cfg.mvn_shifts, "mc_paths": cfg.mc_paths,
            "seed": cfg.seed, "threads": cfg.threads,
        },
    }
    if scenario.speed is not None:
        doc["speed"] = float(scenario.speed)
    else:
        doc["durations"] = list(map(float, scenario.trajectory.durations))
    if scenario.goal is not None:
        doc["goal"] = scenario.goal
    return _canonical(doc)


def load_scenario(path):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_scenario(fh.read())


def save_scenario(scenario, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(emit_scenario(scenario))


# ---------------------------------------------------------------------------
# report documents
# ---------------------------------------------------------------------------

def _segment_risk_doc(sr):
    return {"segment": sr.segment, "clearance": sr.clearance, "p": sr.p,
            "p_at_start": sr.p_at_start, "p_during": sr.p_during,
            "full_horizon": sr.full_horizon, "saturated": sr.saturated}


def _pair_risk_doc(pr):
    return {"segment": pr.segment, "p_lb": pr.p_lb, "r_first": pr.r_first,
            "r_second": pr.r_second, "err": pr.err, "converged": pr.converged}


def report_to_doc(report, config, tool_version, mc=None, extra=None):
    doc = {
        "version": SCHEMA_VERSION,
        "tool_version": tool_version,
        "bounds": {"raw": dict(report.bounds_raw),
                   "clamped": dict(report.bounds_clamped)},
        "saturated": report.saturated,
        "mvn_converged": report.mvn_converged,
        "pieces": [{
            "obstacle": pr.obstacle, "piece": pr.piece, "saturated": pr.saturated,
            "full_horizon": pr.full_horizon, "first_order": pr.first_order,
            "second_order": pr.second_order, "discrete_time": pr.discrete_time,
            "segment_risks": [_segment_risk_doc(s) for s in pr.segment_risks],
            "pair_risks": [_pair_risk_doc(p) for p in pr.pair_risks],
        } for pr in report.pieces],
        "timings": dict(report.timings),
        "metadata": dict(report.metadata),
        "config": {
            "r_seg": config.r_seg, "r_d": config.r_d,
            "mvn_tol": config.mvn_target_abs_err, "mvn_points": config.mvn_points,
            "mvn_shifts": config.mvn_shifts, "mc_paths": config.mc_paths,
            "seed": config.seed, "threads": config.threads,
        },
    }
    if mc is not None:
        doc["mc"] = {"p_hat": mc.p_hat, "stderr": mc.stderr, "paths": mc.paths,
                     "elapsed": mc.elapsed, "metadata": dict(mc.metadata)}
    if extra:
        doc.update(extra)
    return doc


def emit_report(doc):
    return _canonical(doc)


def parse_report(text):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}")
    if doc.get("version") != SCHEMA_VERSION:
        raise ScenarioError("unsupported report version")
    return doc
