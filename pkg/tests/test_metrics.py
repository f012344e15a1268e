"""Aggregation, profile similarity, residual maps, kernel re-estimation,
and spatial comparison metrics."""

import math

import numpy as np
import pytest

from rhythmsim import (
    GridSpec,
    HourCategoryMatrix,
    N_CATEGORIES,
    N_HOURS,
    SimLog,
    StayCorpus,
    ValidationError,
    aggregate_hour_category,
    day_hour_heatmaps,
    diurnal_profiles,
    diurnal_similarity,
    estimate_transition_kernels,
    first_event_compliance,
    hit_rate,
    kernel_distances,
    reestimate_kernels,
    residual_report,
    simlog_day_heatmaps,
    spatial_diff,
)
from rhythmsim.config import DEFAULT_ZONE_LAT, DEFAULT_ZONE_LON
from rhythmsim.geo import METERS_PER_DEGREE

from conftest import make_grid_inventory

# rmse between a uniform 24-hour share profile and a single-hour spike
UNIFORM_VS_SPIKE_RMSE = 0.19982631347136332


def _corpus(rows):
    """rows: (user, day, start_hour, dwell_min, lon, lat, P-row or cat)."""
    user, day, start, dwell, lon, lat, P = [], [], [], [], [], [], []
    for u, d, h, dw, lo, la, p in rows:
        user.append(u)
        day.append(d)
        start.append(h * 3600.0)
        dwell.append(dw)
        lon.append(lo)
        lat.append(la)
        if np.isscalar(p):
            row = np.zeros(N_CATEGORIES)
            row[int(p)] = 1.0
        else:
            row = np.asarray(p, dtype=np.float64)
        P.append(row)
    return StayCorpus(user=user, day=day, start_s=np.array(start),
                      dwell_min=np.array(dwell), lon=np.array(lon),
                      lat=np.array(lat), P=np.array(P))


def _mklog(rows, scenario_id="baseline"):
    """rows: (run, user, seq, hour, cat, dwell_min[, lon, lat])."""
    n = len(rows)
    run = np.array([r[0] for r in rows], dtype=np.int64)
    user = np.array([r[1] for r in rows], dtype=np.int64)
    seq = np.array([r[2] for r in rows], dtype=np.int64)
    hour = np.array([r[3] for r in rows], dtype=np.int64)
    cat = np.array([r[4] for r in rows], dtype=np.int64)
    dwell = np.array([r[5] for r in rows], dtype=np.float64)
    lon = np.array([r[6] if len(r) > 6 else 139.0 for r in rows])
    lat = np.array([r[7] if len(r) > 7 else 35.0 for r in rows])
    chains = len({(r[0], r[1]) for r in rows})
    return SimLog(scenario_id=scenario_id, run=run, user=user, seq=seq,
                  start_s=hour * 3600.0 + seq, hour=hour, category=cat,
                  dwell_min=dwell, poi_idx=np.zeros(n, dtype=np.int64),
                  poi_id=["p"] * n, lon=lon, lat=lat, n_chains=chains)


LON0, LAT0 = DEFAULT_ZONE_LON, DEFAULT_ZONE_LAT


class TestAggregate:
    def _mixed_corpus(self):
        split = np.eye(N_CATEGORIES)[6] * 0.75 + np.eye(N_CATEGORIES)[2] * 0.25
        return _corpus([
            ("u1", "d1", 9, 30.0, LON0, LAT0, split),
            ("u1", "d1", 10, 60.0, LON0, LAT0, 8),
        ])

    def test_event_share_soft(self):
        m = aggregate_hour_category(self._mixed_corpus(), mode="ES")
        assert m.kind == "counts"
        assert m.m[9, 6] == pytest.approx(0.75, abs=1e-12)
        assert m.m[9, 2] == pytest.approx(0.25, abs=1e-12)
        assert m.m[10, 8] == pytest.approx(1.0, abs=1e-12)
        assert m.total() == pytest.approx(2.0, abs=1e-12)

    def test_dwell_mass_soft(self):
        m = aggregate_hour_category(self._mixed_corpus(), mode="EDM")
        assert m.kind == "minutes"
        assert m.m[9, 6] == pytest.approx(22.5, abs=1e-12)
        assert m.m[9, 2] == pytest.approx(7.5, abs=1e-12)
        assert m.m[10, 8] == pytest.approx(60.0, abs=1e-12)

    def test_hard_labeling_uses_argmax(self):
        m = aggregate_hour_category(self._mixed_corpus(), mode="EDM",
                                    labeling="hard")
        assert m.m[9, 6] == pytest.approx(30.0, abs=1e-12)
        assert m.m[9, 2] == 0.0

    def test_simlog_aggregation(self):
        log = _mklog([(0, 0, 0, 9, 6, 30.0), (0, 0, 1, 9, 6, 15.0),
                      (0, 1, 0, 14, 2, 45.0)])
        es = aggregate_hour_category(log, mode="ES")
        edm = aggregate_hour_category(log, mode="EDM")
        assert es.m[9, 6] == 2.0 and es.m[14, 2] == 1.0
        assert edm.m[9, 6] == 45.0 and edm.m[14, 2] == 45.0

    def test_bad_arguments_rejected(self):
        c = self._mixed_corpus()
        with pytest.raises(ValidationError, match="aggregation mode"):
            aggregate_hour_category(c, mode="sum")
        with pytest.raises(ValidationError, match="labeling"):
            aggregate_hour_category(c, labeling="fuzzy")
        with pytest.raises(ValidationError, match="cannot aggregate"):
            aggregate_hour_category([1, 2, 3])


class TestDiurnal:
    def _profiles(self, spike_hour=12):
        obs = np.zeros((N_HOURS, N_CATEGORIES))
        obs[:, 3] = 1.0
        sim = np.zeros((N_HOURS, N_CATEGORIES))
        sim[spike_hour, 3] = 24.0
        return (diurnal_profiles(HourCategoryMatrix(obs, kind="minutes")),
                diurnal_profiles(HourCategoryMatrix(sim, kind="minutes")))

    def test_profiles_normalize_columns(self):
        obs, _ = self._profiles()
        assert obs.shares[3].sum() == pytest.approx(1.0, abs=1e-12)
        assert np.all(obs.shares[3] == pytest.approx(1 / 24, abs=1e-12))
        assert obs.mass[3] == 24.0
        # categories without mass keep an all-zero profile
        assert np.all(obs.shares[5] == 0.0)

    def test_uniform_vs_spike_rmse(self):
        obs, sim = self._profiles()
        rep = diurnal_similarity(obs, sim)
        assert rep.valid.tolist() == [c == 3 for c in range(N_CATEGORIES)]
        assert rep.rmse[3] == pytest.approx(UNIFORM_VS_SPIKE_RMSE, rel=1e-12)
        assert rep.macro_rmse == pytest.approx(UNIFORM_VS_SPIKE_RMSE, rel=1e-12)
        assert rep.weighted_rmse == pytest.approx(UNIFORM_VS_SPIKE_RMSE, rel=1e-12)
        # a constant profile has no defined correlation
        assert math.isnan(rep.pearson[3])
        assert math.isnan(rep.macro_pearson)

    def test_identical_profiles(self):
        m = np.zeros((N_HOURS, N_CATEGORIES))
        m[9, 3] = 2.0
        m[15, 3] = 1.0
        p = diurnal_profiles(HourCategoryMatrix(m, kind="minutes"))
        rep = diurnal_similarity(p, p)
        assert rep.rmse[3] == 0.0
        assert rep.pearson[3] == pytest.approx(1.0, abs=1e-12)
        assert rep.macro_pearson == pytest.approx(1.0, abs=1e-12)

    def test_disjoint_mass_rejected(self):
        a = np.zeros((N_HOURS, N_CATEGORIES))
        a[9, 3] = 1.0
        b = np.zeros((N_HOURS, N_CATEGORIES))
        b[9, 4] = 1.0
        with pytest.raises(ValidationError, match="no category"):
            diurnal_similarity(
                diurnal_profiles(HourCategoryMatrix(a, kind="minutes")),
                diurnal_profiles(HourCategoryMatrix(b, kind="minutes")))

    def test_report_dict_masks_invalid(self):
        obs, sim = self._profiles()
        d = diurnal_similarity(obs, sim).to_dict()
        assert d["rmse"][3] is not None
        assert d["rmse"][5] is None
        assert d["pearson"][3] is None


class TestHeatmaps:
    def test_corpus_maps_layout(self):
        c = _corpus([
            ("u1", "d1", 9, 30.0, LON0, LAT0, 6),
            ("u2", "d1", 9, 30.0, LON0, LAT0, 6),
            ("u1", "d2", 15, 60.0, LON0, LAT0, 6),
        ])
        days, maps = day_hour_heatmaps(c, mode="EDM")
        assert days == ["d1", "d2"]
        assert maps.shape == (N_CATEGORIES, 2, N_HOURS)
        assert maps[6].sum() == pytest.approx(1.0, abs=1e-12)
        assert maps[6, 0, 9] == pytest.approx(60.0 / 120.0, abs=1e-12)
        assert maps[6, 1, 15] == pytest.approx(60.0 / 120.0, abs=1e-12)
        assert np.all(maps[0] == 0.0)

    def test_hard_equals_soft_on_one_hot(self):
        c = _corpus([
            ("u1", "d1", 9, 30.0, LON0, LAT0, 6),
            ("u1", "d2", 11, 45.0, LON0, LAT0, 2),
        ])
        _, soft = day_hour_heatmaps(c, labeling="soft")
        _, hard = day_hour_heatmaps(c, labeling="hard")
        assert np.array_equal(soft, hard)

    def test_simlog_user_day_mapping(self):
        # chains map to days round-robin by user slot
        log = _mklog([
            (0, 0, 0, 9, 6, 30.0),
            (0, 1, 0, 9, 6, 30.0),
            (0, 2, 0, 15, 6, 30.0),
            (1, 0, 0, 9, 2, 10.0),
        ])
        runs, out = simlog_day_heatmaps(log, ["d1", "d2"], mode="EDM")
        assert runs == [0, 1]
        m0 = out[0]
        assert m0.shape == (N_CATEGORIES, 2, N_HOURS)
        # users 0 and 2 land on day 0, user 1 on day 1
        assert m0[6, 0, 9] == pytest.approx(1 / 3, abs=1e-12)
        assert m0[6, 0, 15] == pytest.approx(1 / 3, abs=1e-12)
        assert m0[6, 1, 9] == pytest.approx(1 / 3, abs=1e-12)
        assert out[1][2, 0, 9] == 1.0

    def test_simlog_needs_days(self):
        log = _mklog([(0, 0, 0, 9, 6, 30.0)])
        with pytest.raises(ValidationError, match="at least one day"):
            simlog_day_heatmaps(log, [])


class TestResiduals:
    def test_self_residual_zero(self):
        c = _corpus([
            ("u1", "d1", 9, 30.0, LON0, LAT0, 6),
            ("u1", "d2", 15, 60.0, LON0, LAT0, 2),
        ])
        _, obs = day_hour_heatmaps(c)
        rep = residual_report(obs, [obs.copy(), obs.copy(), obs.copy()])
        assert np.all(rep.mar == 0.0)
        assert np.all(rep.p95 == 0.0)
        assert np.all(rep.frob == 0.0)
        assert rep.macro_mar == 0.0 and rep.weighted_frob == 0.0

    def test_percentile_interpolates(self):
        obs = np.zeros((N_CATEGORIES, 1, N_HOURS))
        obs[4, 0] = np.arange(24.0)
        zeros = np.zeros_like(obs)
        rep = residual_report(obs, [zeros, zeros, zeros],
                              obs_mass=np.eye(N_CATEGORIES)[4])
        assert rep.p95[4] == pytest.approx(21.85, abs=1e-12)
        assert rep.mar[4] == pytest.approx(np.arange(24.0).mean(), abs=1e-12)
        assert rep.frob[4] == pytest.approx(
            math.sqrt(float((np.arange(24.0) ** 2).sum())), rel=1e-12)
        # the supplied mass confines every weighted figure to category 4
        assert rep.weighted_p95 == rep.p95[4]
        assert rep.macro_p95 == rep.p95[4]

    def test_shape_mismatch_rejected(self):
        obs = np.zeros((N_CATEGORIES, 2, N_HOURS))
        with pytest.raises(ValidationError, match="do not match"):
            residual_report(obs, [np.zeros((N_CATEGORIES, 3, N_HOURS))])


class TestReestimate:
    def test_matches_corpus_estimator_on_hard_chains(self):
        edges = (0, 5, 8, 11, 14, 18, 24)
        rows = [
            (0, 0, 0, 9, 6, 30.0), (0, 0, 1, 10, 8, 30.0), (0, 0, 2, 12, 2, 30.0),
            (0, 1, 0, 9, 2, 30.0), (0, 1, 1, 9, 6, 30.0),
            (1, 0, 0, 15, 8, 30.0), (1, 0, 1, 16, 8, 30.0),
        ]
        log = _mklog(rows)
        got = reestimate_kernels(log, alpha=0.5, block_edges=edges)
        corpus = _corpus([
            (f"r{r}u{u}", "d1", h, dw, LON0, LAT0, c)
            for r, u, s, h, c, dw in rows])
        want = estimate_transition_kernels(corpus, alpha=0.5, block_edges=edges)
        assert got.n_pairs == want.n_pairs == 4
        assert np.array_equal(got.n_global, want.n_global)
        assert np.array_equal(got.n_blocks, want.n_blocks)
        assert np.array_equal(got.t_global, want.t_global)
        assert np.array_equal(got.t_blocks, want.t_blocks)

    def test_pairs_blocked_by_earlier_hour(self):
        edges = (0, 5, 8, 11, 14, 18, 24)
        log = _mklog([(0, 0, 0, 10, 6, 30.0), (0, 0, 1, 11, 8, 30.0)])
        k = reestimate_kernels(log, alpha=0.0, block_edges=edges)
        assert k.n_blocks[2, 6, 8] == 1.0
        assert k.n_blocks[3].sum() == 0.0

    def test_bad_edges_rejected(self):
        log = _mklog([(0, 0, 0, 10, 6, 30.0)])
        with pytest.raises(ValidationError, match="outside block edges"):
            reestimate_kernels(log, alpha=0.5, block_edges=(0, 12))


class TestKernelDistances:
    def _uniform_kernels(self, edges=(0, 12, 24)):
        nb = len(edges) - 1
        t = np.full((N_CATEGORIES, N_CATEGORIES), 1.0 / N_CATEGORIES)
        from rhythmsim import TransitionKernels
        return TransitionKernels(
            alpha=0.5, block_edges=edges,
            n_global=np.zeros((N_CATEGORIES, N_CATEGORIES)),
            t_global=t.copy(),
            n_blocks=np.zeros((nb, N_CATEGORIES, N_CATEGORIES)),
            t_blocks=np.tile(t, (nb, 1, 1)), n_pairs=0)

    def test_identical_kernels(self):
        a = self._uniform_kernels()
        rows = kernel_distances(a, a)
        assert [r.scope for r in rows] == ["global", "block0", "block1"]
        for r in rows:
            assert r.frobenius == 0.0
            assert r.cosine == pytest.approx(1.0, abs=1e-12)
            assert r.mean_js == 0.0

    def test_disjoint_rows_reach_log2(self):
        a = self._uniform_kernels()
        b = self._uniform_kernels()
        a.t_global[0] = np.eye(N_CATEGORIES)[0]
        b.t_global[0] = np.eye(N_CATEGORIES)[1]
        rows = kernel_distances(a, b)
        g = rows[0]
        # one fully disjoint row contributes ln 2, the other nine nothing
        assert g.mean_js == pytest.approx(math.log(2.0) / N_CATEGORIES, rel=1e-12)
        assert g.frobenius == pytest.approx(math.sqrt(2.0), rel=1e-12)
        assert g.cosine < 1.0

    def test_edge_mismatch_rejected(self):
        with pytest.raises(ValidationError, match="different block edges"):
            kernel_distances(self._uniform_kernels((0, 12, 24)),
                             self._uniform_kernels((0, 24)))


class TestFirstEventCompliance:
    def test_exact_match_scores_zero(self):
        log = _mklog([(0, 0, 0, 9, 6, 30.0), (0, 0, 1, 10, 8, 30.0),
                      (0, 1, 0, 9, 6, 45.0)])
        m = np.zeros((N_HOURS, N_CATEGORIES))
        m[9, 6] = 5.0
        assert first_event_compliance(
            log, HourCategoryMatrix(m, kind="target-mass")) == 0.0

    def test_total_miss_scores_sqrt_two(self):
        log = _mklog([(0, 0, 0, 9, 6, 30.0)])
        m = np.zeros((N_HOURS, N_CATEGORIES))
        m[10, 8] = 1.0
        got = first_event_compliance(log, HourCategoryMatrix(m, kind="target-mass"))
        assert got == pytest.approx(math.sqrt(2.0), rel=1e-12)

    def test_empty_log_rejected(self):
        log = _mklog([(0, 0, 0, 9, 6, 30.0)])
        empty = SimLog(scenario_id="x", run=np.zeros(0, dtype=np.int64),
                       user=np.zeros(0, dtype=np.int64),
                       seq=np.zeros(0, dtype=np.int64), start_s=np.zeros(0),
                       hour=np.zeros(0, dtype=np.int64),
                       category=np.zeros(0, dtype=np.int64),
                       dwell_min=np.zeros(0), poi_idx=np.zeros(0, dtype=np.int64),
                       poi_id=[], lon=np.zeros(0), lat=np.zeros(0), n_chains=0)
        m = np.zeros((N_HOURS, N_CATEGORIES))
        m[9, 6] = 1.0
        with pytest.raises(ValidationError, match="empty log"):
            first_event_compliance(empty, HourCategoryMatrix(m, kind="target-mass"))


class TestHitRate:
    def test_fractions(self):
        inv = make_grid_inventory(per_cat=1, step_m=200.0)
        dlat = 1.0 / METERS_PER_DEGREE
        on = (float(inv.lon[0]), float(inv.lat[0]))
        near = (float(inv.lon[0]), float(inv.lat[0]) + 100.0 * dlat)
        far = (float(inv.lon[0]), float(inv.lat[0]) + 5000.0 * dlat)
        lons = np.array([on[0], near[0], far[0]])
        lats = np.array([on[1], near[1], far[1]])
        assert hit_rate(lons, lats, inv, radius_m=150.0) == pytest.approx(2 / 3)
        assert hit_rate(lons[:1], lats[:1], inv, radius_m=1.0) == 1.0
        assert hit_rate(lons[2:], lats[2:], inv, radius_m=150.0) == 0.0

    def test_empty_rejected(self):
        inv = make_grid_inventory(per_cat=1)
        with pytest.raises(ValidationError, match="no points"):
            hit_rate(np.zeros(0), np.zeros(0), inv)


class TestSpatialDiff:
    def _grid(self):
        return GridSpec(lon0=LON0 - 0.01, lat0=LAT0 - 0.01,
                        cell_m=500.0, nx=8, ny=8)

    def test_self_difference_zero(self):
        log = _mklog([(0, 0, 0, 9, 6, 30.0, LON0, LAT0),
                      (0, 1, 0, 10, 2, 60.0, LON0 + 0.004, LAT0)])
        d = spatial_diff(log, log, self._grid())
        assert np.all(d.diff == 0.0)
        assert d.oob_a == d.oob_b

    def test_direction_b_minus_a(self):
        grid = self._grid()
        a = _mklog([(0, 0, 0, 9, 6, 30.0, LON0, LAT0)])
        b = _mklog([(0, 0, 0, 9, 6, 30.0, LON0 + 0.004, LAT0)])
        d = spatial_diff(a, b, grid)
        ga, _ = grid.accumulate(a.lon, a.lat, None)
        gb, _ = grid.accumulate(b.lon, b.lat, None)
        ia = np.unravel_index(np.argmax(ga), ga.shape)
        ib = np.unravel_index(np.argmax(gb), gb.shape)
        assert ia != ib
        assert d.diff[ia] == pytest.approx(-1.0, abs=1e-12)
        assert d.diff[ib] == pytest.approx(1.0, abs=1e-12)

    def test_mode_validation(self):
        log = _mklog([(0, 0, 0, 9, 6, 30.0, LON0, LAT0)])
        with pytest.raises(ValidationError, match="unknown mode"):
            spatial_diff(log, log, self._grid(), mode="XY")
