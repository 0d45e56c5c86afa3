import math

import numpy as np
import pytest
from scipy.special import ndtr

from brisk.gaussian import mvn_cdf
from brisk.geometry import (Ball, Halfspace, Polygon, Segment, Workspace,
                            separating_hyperplane)
from brisk.montecarlo import SimulationConfig, estimate_risk
from brisk.process import (NoiseModel, build_trajectory, propagate_covariance,
                           uniform_grid)
from brisk.risk import (discrete_time_bound, first_order_bound,
                        full_horizon_segment_risk, pair_risk_lower_bound,
                        second_order_bound, segment_risk, total_risk)

# discrete-grid maxima of Brownian motion sit below the continuous maximum by
# an effective threshold shift of about 0.5826 sigma sqrt(dt)
GRID_SHIFT = 0.5826


def first_segment_setup(d, length=1.0, sigma2=1e-3):
    traj = build_trajectory([[0.0, 0.0], [length, 0.0]], speed=1.0)
    noise = NoiseModel(sigma2 * np.eye(2))
    sched = propagate_covariance(traj, noise)
    h = separating_hyperplane(Segment([0.0, 0.0], [length, 0.0]),
                              Halfspace([0.0, 1.0], d))
    return traj, noise, sched, h


class TestSegmentRisk:
    def test_first_segment_reflection_closed_form(self):
        traj, noise, sched, h = first_segment_setup(0.0627)
        sr = segment_risk(h, 0, sched)
        closed = 2.0 * (1.0 - float(ndtr(0.0627 / math.sqrt(1e-3))))
        assert sr.p == pytest.approx(closed, abs=1e-10)
        assert sr.p == pytest.approx(0.0474, abs=1e-4)
        assert sr.p_at_start == 0.0
        assert sr.full_horizon == pytest.approx(sr.p, abs=1e-12)

    def test_matches_monte_carlo_with_grid_correction(self):
        # the MC grid only sees the discrete maximum; compare against the
        # shifted-threshold reference for the known sqrt(dt) under-count
        d = 0.0627
        traj, noise, sched, h = first_segment_setup(d)
        sr = segment_risk(h, 0, sched)
        r_d = 200
        ws = Workspace([0, 0], [1, 1], [Halfspace([0.0, 1.0], d)])
        mc = estimate_risk(traj, noise, ws,
                           SimulationConfig(paths=100_000, r_d=r_d, seed=21))
        sigma = math.sqrt(1e-3)
        d_eff = d + GRID_SHIFT * sigma * math.sqrt(1.0 / r_d)
        reference = 2.0 * (1.0 - float(ndtr(d_eff / sigma)))
        assert mc.p_hat == pytest.approx(reference, abs=3 * mc.stderr)
        assert sr.p >= mc.p_hat - 3 * mc.stderr  # conservative either way

    def test_tail_limit(self):
        traj, noise, sched, h = first_segment_setup(1.0)
        sr = segment_risk(h, 0, sched)
        assert sr.p < 1e-200
        assert sr.p_at_start == 0.0 and sr.p_during < 1e-200

    def test_split_nonnegative_and_bounded(self, rng):
        for _ in range(20):
            wp = np.cumsum(rng.uniform(0.2, 0.6, size=(4, 2)), axis=0)
            traj = build_trajectory(wp, speed=1.0)
            noise = NoiseModel(1e-2 * np.eye(2))
            sched = propagate_covariance(traj, noise)
            j = int(rng.integers(0, 3))
            h = separating_hyperplane(
                Segment(wp[j], wp[j + 1]),
                Ball(wp[j] + np.array([0.0, rng.uniform(0.15, 0.6)]),
                     rng.uniform(0.03, 0.1)))
            sr = segment_risk(h, j, sched)
            assert sr.p_at_start >= 0.0 and sr.p_during >= 0.0
            assert sr.p == pytest.approx(sr.p_at_start + sr.p_during, abs=1e-15)
            assert sr.p <= 1.0 + 1e-6
            assert sr.p <= sr.full_horizon + 1e-6

    def test_dense_grid_mvn_approaches_from_below(self):
        traj = build_trajectory([[0, 0], [1, 0], [2, 0]], speed=1.0)
        noise = NoiseModel(1e-2 * np.eye(2))
        sched = propagate_covariance(traj, noise)
        h = separating_hyperplane(Segment([1, 0], [2, 0]), Halfspace([0, 1.0], 0.15))
        sr = segment_risk(h, 1, sched)
        from brisk.process import segment_gaussian
        probs = []
        for r in (8, 64):
            g = segment_gaussian(1, h.normal, uniform_grid(traj, 1, r), sched, noise)
            below = mvn_cdf(g, np.full(r + 1, -np.inf), np.full(r + 1, h.clearance))
            probs.append(1.0 - below.prob)
        tol = 5e-6
        assert probs[0] <= probs[1] + tol
        assert probs[1] <= sr.p + tol
        assert sr.p - probs[1] < sr.p - probs[0] + tol

    def test_monotone_in_clearance(self):
        values = []
        for d in (0.05, 0.08, 0.12):
            _, _, sched, h = first_segment_setup(d, length=2.0)
            values.append(segment_risk(h, 0, sched).p)
        assert values[0] > values[1] > values[2]


class TestFullHorizonRisk:
    def test_first_segment_equals_exact(self):
        _, _, sched, h = first_segment_setup(0.08)
        sr = segment_risk(h, 0, sched)
        assert full_horizon_segment_risk(h, 0, sched) == pytest.approx(sr.p, abs=1e-12)

    def test_later_segments_dominate_exact(self, rng):
        for _ in range(15):
            wp = np.cumsum(rng.uniform(0.3, 0.7, size=(4, 2)), axis=0)
            traj = build_trajectory(wp, speed=1.0)
            noise = NoiseModel(5e-3 * np.eye(2))
            sched = propagate_covariance(traj, noise)
            j = int(rng.integers(1, 3))
            h = separating_hyperplane(
                Segment(wp[j], wp[j + 1]),
                Ball(wp[j] + np.array([0.0, rng.uniform(0.2, 0.5)]), 0.05))
            sr = segment_risk(h, j, sched)
            assert full_horizon_segment_risk(h, j, sched) >= sr.p - 1e-12

    def test_zero_clearance_limit(self):
        _, _, sched, h = first_segment_setup(1e-6)
        assert full_horizon_segment_risk(h, 0, sched) == pytest.approx(1.0, abs=1e-3)


class TestPairRisk:
    def test_huge_clearance_gives_zero(self):
        traj = build_trajectory([[0, 0], [1, 0], [2, 0]], speed=1.0)
        noise = NoiseModel(1e-3 * np.eye(2))
        sched = propagate_covariance(traj, noise)
        h1 = separating_hyperplane(Segment([0, 0], [1, 0]), Halfspace([0, 1.0], 50.0))
        h2 = separating_hyperplane(Segment([1, 0], [2, 0]), Halfspace([0, 1.0], 50.0))
        pr = pair_risk_lower_bound(0, h1, h2, uniform_grid(traj, 0, 1),
                                   uniform_grid(traj, 1, 1), sched, noise)
        assert pr.p_lb == pytest.approx(0.0, abs=1e-9)

    def test_shared_waypoint_closed_form_anchor(self):
        # collinear segments with a ball over the shared waypoint: identical
        # normals and clearances make p_lb collapse to P(z(t_1) >= d)
        traj = build_trajectory([[0, 0], [1, 0], [2, 0]], speed=1.0)
        noise = NoiseModel(np.eye(2))
        sched = propagate_covariance(traj, noise)
        ball = Ball([1.0, 0.5], 0.2)
        h1 = separating_hyperplane(Segment([0, 0], [1, 0]), ball)
        h2 = separating_hyperplane(Segment([1, 0], [2, 0]), ball)
        pr = pair_risk_lower_bound(0, h1, h2, uniform_grid(traj, 0, 1),
                                   uniform_grid(traj, 1, 1), sched, noise)
        exact = float(ndtr(-0.3))
        assert pr.p_lb == pytest.approx(exact, abs=max(3 * pr.err, 3e-6))

    def test_grid_events_match_monte_carlo(self):
        # r = 1 grids: the events depend only on z at the three waypoint times
        traj = build_trajectory([[0, 0], [1, 0], [2, 0]], speed=1.0)
        noise = NoiseModel(np.eye(2))
        sched = propagate_covariance(traj, noise)
        h1 = separating_hyperplane(Segment([0, 0], [1, 0]), Ball([0.7, 0.9], 0.2))
        h2 = separating_hyperplane(Segment([1, 0], [2, 0]), Ball([1.6, 1.0], 0.3))
        pr = pair_risk_lower_bound(0, h1, h2, uniform_grid(traj, 0, 1),
                                   uniform_grid(traj, 1, 1), sched, noise)
        g = np.random.default_rng(5)
        n = 10_000_000
        hits = 0
        for _ in range(10):
            w1 = g.standard_normal((n // 10, 2))
            w2 = w1 + g.standard_normal((n // 10, 2))
            z1s = (w1 @ h1.normal >= h1.clearance)
            z2e = (w2 @ h2.normal >= h2.clearance)
            z2s = (w1 @ h2.normal >= h2.clearance)
            hits += int(np.sum(z1s & (z2s | z2e)))
        p_mc = hits / n
        se = math.sqrt(p_mc * (1 - p_mc) / n)
        assert pr.p_lb == pytest.approx(p_mc, abs=max(3 * se, pr.err))

    def test_refinement_monotone(self):
        traj = build_trajectory([[0, 0], [0.6, 0], [1.2, 0]], speed=1.0)
        noise = NoiseModel(1e-2 * np.eye(2))
        sched = propagate_covariance(traj, noise)
        ball = Ball([0.6, 0.2], 0.05)
        h1 = separating_hyperplane(Segment([0, 0], [0.6, 0]), ball)
        h2 = separating_hyperplane(Segment([0.6, 0], [1.2, 0]), ball)
        values, errs = [], []
        for r in (1, 2, 4, 8):
            pr = pair_risk_lower_bound(0, h1, h2, uniform_grid(traj, 0, r),
                                       uniform_grid(traj, 1, r), sched, noise)
            values.append(pr.p_lb)
            errs.append(pr.err)
        for i in range(3):
            assert values[i + 1] >= values[i] - 2 * (errs[i] + errs[i + 1])


class TestAggregates:
    def test_first_order_single_segment(self):
        _, _, sched, h = first_segment_setup(0.07)
        sr = segment_risk(h, 0, sched)
        assert first_order_bound([sr]) == sr.p
        assert second_order_bound([sr], []) == sr.p

    def test_zero_risks(self):
        _, _, sched, h = first_segment_setup(0.9)
        srs = [segment_risk(h, 0, sched)]
        assert first_order_bound(srs) == pytest.approx(0.0, abs=1e-100)

    def test_second_at_most_first(self, rng):
        traj = build_trajectory([[0, 0], [0.5, 0], [1.0, 0], [1.5, 0]], speed=1.0)
        noise = NoiseModel(5e-3 * np.eye(2))
        sched = propagate_covariance(traj, noise)
        ball = Ball([0.75, 0.2], 0.06)
        srs, hs = [], []
        for j in range(3):
            h = separating_hyperplane(Segment(traj.waypoints[j], traj.waypoints[j + 1]), ball)
            hs.append(h)
            srs.append(segment_risk(h, j, sched))
        prs = [pair_risk_lower_bound(j, hs[j], hs[j + 1], uniform_grid(traj, j, 4),
                                     uniform_grid(traj, j + 1, 4), sched, noise,
                                     cap=min(srs[j].p, srs[j + 1].p))
               for j in range(2)]
        so = second_order_bound(srs, prs)
        fo = first_order_bound(srs)
        assert 0.0 <= so <= fo + 1e-12
        assert prs[0].p_lb > 0.0  # the shared obstacle couples the segments


class TestDiscreteTime:
    def test_single_segment_rd1(self):
        d = 0.08
        traj, noise, sched, _ = first_segment_setup(d)
        piece = Halfspace([0.0, 1.0], d)
        value = discrete_time_bound(traj, sched, [piece], 1)
        expected = 1.0 - float(ndtr(d / math.sqrt(1e-3)))
        assert value == pytest.approx(expected, abs=1e-12)

    def test_monotone_in_rd(self):
        traj, noise, sched, _ = first_segment_setup(0.08)
        piece = Halfspace([0.0, 1.0], 0.08)
        values = [discrete_time_bound(traj, sched, [piece], rd)
                  for rd in (1, 2, 5, 20, 100)]
        for a, b in zip(values, values[1:]):
            assert b >= a - 1e-12

    def test_high_rate_grossly_exceeds_continuous(self):
        traj, noise, sched, h = first_segment_setup(0.05)
        piece = Halfspace([0.0, 1.0], 0.05)
        sr = segment_risk(h, 0, sched)
        dt100 = discrete_time_bound(traj, sched, [piece], 100)
        assert dt100 > 2.0 * sr.p

    def test_zero_clearance_steps_count_one(self):
        traj = build_trajectory([[0, 0], [1, 0]], speed=1.0)
        noise = NoiseModel(1e-3 * np.eye(2))
        sched = propagate_covariance(traj, noise)
        piece = Ball([0.5, 0.0], 0.1)  # segment passes through the ball
        assert discrete_time_bound(traj, sched, [piece], 5) == 6.0


class TestTotalRisk:
    def scenario(self):
        traj = build_trajectory([[0.1, 0.1], [0.4, 0.1], [0.7, 0.1], [0.95, 0.3]],
                                speed=1.0)
        noise = NoiseModel(1e-3 * np.eye(2))
        obstacles = [Ball([0.4, 0.21], 0.05),
                     Polygon([[0.6, 0.2], [0.8, 0.2], [0.8, 0.3],
                              [0.7, 0.26], [0.6, 0.3]])]
        return Workspace([0, 0], [1, 1], obstacles), traj, noise

    def test_empty_obstacles(self):
        traj = build_trajectory([[0, 0], [1, 0]], speed=1.0)
        report = total_risk(Workspace([0, 0], [1, 1], []), traj,
                            NoiseModel(1e-3 * np.eye(2)))
        assert all(v == 0.0 for v in report.bounds_raw.values())
        assert not report.saturated

    def test_single_obstacle_identity_aggregation(self):
        ws, traj, noise = self.scenario()
        single = Workspace(ws.lo, ws.hi, [ws.obstacles[0]])
        rep = total_risk(single, traj, noise)
        assert rep.bounds_raw["first_order"] == pytest.approx(
            rep.pieces[0].first_order, abs=1e-15)

    def test_two_obstacles_sum_of_singles(self):
        ws, traj, noise = self.scenario()
        full = total_risk(ws, traj, noise)
        parts = [total_risk(Workspace(ws.lo, ws.hi, [obs]), traj, noise)
                 for obs in ws.obstacles]
        for key in full.bounds_raw:
            assert full.bounds_raw[key] == pytest.approx(
                sum(p.bounds_raw[key] for p in parts), abs=5e-6)

    def test_ordering_chain(self):
        ws, traj, noise = self.scenario()
        rep = total_risk(ws, traj, noise)
        assert rep.bounds_raw["second_order"] <= rep.bounds_raw["first_order"] + 1e-5
        assert rep.bounds_raw["first_order"] <= rep.bounds_raw["full_horizon"] + 1e-5

    def test_conservative_vs_monte_carlo(self):
        ws, traj, noise = self.scenario()
        rep = total_risk(ws, traj, noise)
        mc = estimate_risk(traj, noise, ws, SimulationConfig(paths=20_000, seed=3))
        band = mc.p_hat - 3 * mc.stderr
        assert rep.bounds_raw["second_order"] >= band
        assert rep.bounds_raw["first_order"] >= band

    def test_saturation_flag_and_value(self):
        traj = build_trajectory([[0.5, 0.5], [0.9, 0.5]], speed=1.0)
        noise = NoiseModel(1e-3 * np.eye(2))
        ws = Workspace([0, 0], [1, 1], [Ball([0.5, 0.5], 0.1)])
        rep = total_risk(ws, traj, noise)
        assert rep.saturated
        assert rep.bounds_raw["first_order"] == 1.0
        assert rep.pieces[0].segment_risks[0].saturated

    def test_translation_invariance(self):
        ws, traj, noise = self.scenario()
        base = total_risk(ws, traj, noise)
        shift = np.array([3.7, -1.2])
        moved_obs = [Ball(ws.obstacles[0].center + shift, ws.obstacles[0].radius),
                     Polygon(ws.obstacles[1].vertices + shift)]
        moved = total_risk(Workspace(ws.lo + shift, ws.hi + shift, moved_obs),
                           build_trajectory(traj.waypoints + shift, speed=1.0),
                           noise)
        for key in base.bounds_raw:
            assert moved.bounds_raw[key] == pytest.approx(
                base.bounds_raw[key], abs=1e-9)

    def test_rotation_invariance_isotropic_noise(self):
        ws, traj, noise = self.scenario()
        base = total_risk(ws, traj, noise)
        theta = 0.83
        R = np.array([[math.cos(theta), -math.sin(theta)],
                      [math.sin(theta), math.cos(theta)]])
        rot_obs = [Ball(R @ ws.obstacles[0].center, ws.obstacles[0].radius),
                   Polygon(ws.obstacles[1].vertices @ R.T)]
        corners = np.array([[0, 0], [1, 0], [1, 1], [0, 1]]) @ R.T
        rot = total_risk(Workspace(corners.min(axis=0), corners.max(axis=0), rot_obs),
                         build_trajectory(traj.waypoints @ R.T, speed=1.0), noise)
        for key in base.bounds_raw:
            assert rot.bounds_raw[key] == pytest.approx(base.bounds_raw[key], abs=1e-9)

    def test_metadata_records_choices(self):
        ws, traj, noise = self.scenario()
        rep = total_risk(ws, traj, noise)
        assert "discrete_time_method" in rep.metadata
        assert rep.metadata["backend"] in ("numba", "numpy")
