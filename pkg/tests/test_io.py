"""CSV/GeoJSON readers and writers, the simulation-log sidecar, and the
synthetic corpus generator."""

import json
import math
import os

import numpy as np
import pytest

from rhythmsim import (
    HourCategoryMatrix,
    MID10_LABELS,
    N_CATEGORIES,
    N_HOURS,
    Poi,
    PoiInventory,
    SimLog,
    StayCorpus,
    SynthSpec,
    ValidationError,
    hit_rate,
    inventory_from_geojson,
    inventory_to_geojson,
    load_inventory,
    load_matrix_csv,
    load_simlog,
    load_stay_corpus,
    synthesize_corpus,
    write_inventory,
    write_matrix_csv,
    write_simlog,
    write_stay_corpus,
)
from rhythmsim.io_corpus import (
    SIMLOG_FORMAT,
    _f17,
    _iso_to_sec,
    _sec_to_iso,
    atomic_write_text,
    synth_truth,
)
from rhythmsim.taxonomy import Mid10, SECONDS_PER_DAY


class TestScalars:
    def test_f17_round_trips_doubles(self):
        rng = np.random.default_rng(5)
        vals = [0.0, 1.0, -1.5, 1e-300, math.pi, 86399.0 + 1e-6,
                *np.exp(rng.normal(0, 5, 200)).tolist()]
        for v in vals:
            assert float(_f17(v)) == v

    def test_iso_formatting(self):
        assert _sec_to_iso(0.0) == "00:00:00"
        assert _sec_to_iso(86399.0) == "23:59:59"
        assert _sec_to_iso(9 * 3600 + 5 * 60 + 7.9) == "09:05:07"

    @pytest.mark.parametrize("sec", [0, 1, 3599, 3600, 43200, 86399])
    def test_iso_round_trip(self, sec):
        assert _iso_to_sec(_sec_to_iso(float(sec)), "t") == sec

    def test_iso_accepts_midnight_end(self):
        assert _iso_to_sec("24:00:00", "t") == SECONDS_PER_DAY

    @pytest.mark.parametrize("bad", ["12:00", "ab:00:00", "12:60:00",
                                     "12:00:61", "25:00:00", ""])
    def test_iso_rejects_malformed(self, bad):
        with pytest.raises(ValidationError, match="bad time"):
            _iso_to_sec(bad, "t")

    def test_iso_rejects_past_midnight(self):
        with pytest.raises(ValidationError, match="beyond"):
            _iso_to_sec("24:00:01", "t")


class TestAtomicWrite:
    def test_writes_and_overwrites(self, tmp_path):
        p = tmp_path / "out.txt"
        atomic_write_text(p, "first\n")
        assert p.read_text() == "first\n"
        atomic_write_text(p, "second\n")
        assert p.read_text() == "second\n"
        leftovers = [f for f in os.listdir(tmp_path) if f.startswith(".tmp-")]
        assert leftovers == []


def _corpus(rows):
    """rows: (user, day, start_s, dwell_min, lon, lat, P-row or cat)."""
    user, day, start, dwell, lon, lat, P = [], [], [], [], [], [], []
    for u, d, s, dw, lo, la, p in rows:
        user.append(u)
        day.append(d)
        start.append(float(s))
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


class TestStayCorpusFiles:
    def _sample(self):
        split = np.eye(N_CATEGORIES)[6] * 0.75 + np.eye(N_CATEGORIES)[2] * 0.25
        return _corpus([
            ("u1", "2021-11-03", 9 * 3600, 42.25, 139.10771, 35.23214, split),
            ("u2", "2021-11-04", 23 * 3600 + 1800, 25.0, 139.11, 35.235, 8),
        ])

    def test_round_trip(self, tmp_path):
        c = self._sample()
        p = tmp_path / "stays.csv"
        write_stay_corpus(c, p)
        back = load_stay_corpus(p)
        assert list(back.user) == list(c.user)
        assert list(back.day) == list(c.day)
        assert np.array_equal(back.start_s, c.start_s)
        assert np.array_equal(back.dwell_min, c.dwell_min)
        assert np.array_equal(back.lon, c.lon)
        assert np.array_equal(back.lat, c.lat)
        assert np.allclose(back.P, c.P, atol=1e-15)

    def test_fractional_starts_are_floored(self, tmp_path):
        c = _corpus([("u1", "2021-11-03", 9 * 3600 + 0.75, 30.0,
                      139.1, 35.2, 6)])
        p = tmp_path / "stays.csv"
        write_stay_corpus(c, p)
        assert load_stay_corpus(p).start_s[0] == 9 * 3600.0

    def test_empty_corpus_round_trips(self, tmp_path):
        empty = StayCorpus([], [], np.zeros(0), np.zeros(0), np.zeros(0),
                           np.zeros(0), np.zeros((0, N_CATEGORIES)))
        p = tmp_path / "stays.csv"
        write_stay_corpus(empty, p)
        back = load_stay_corpus(p)
        assert len(back) == 0
        assert back.P.shape == (0, N_CATEGORIES)

    def _write_rows(self, tmp_path, mutate):
        p = tmp_path / "stays.csv"
        write_stay_corpus(self._sample(), p)
        lines = p.read_text().splitlines()
        mutate(lines)
        p.write_text("\n".join(lines) + "\n")
        return p

    def test_rejects_wrong_header(self, tmp_path):
        p = self._write_rows(tmp_path, lambda L: L.__setitem__(0, "a,b,c"))
        with pytest.raises(ValidationError, match="unexpected header"):
            load_stay_corpus(p)

    def test_rejects_empty_file(self, tmp_path):
        p = tmp_path / "stays.csv"
        p.write_text("")
        with pytest.raises(ValidationError, match="empty file"):
            load_stay_corpus(p)

    def test_rejects_short_row(self, tmp_path):
        p = self._write_rows(
            tmp_path, lambda L: L.__setitem__(1, ",".join(L[1].split(",")[:5])))
        with pytest.raises(ValidationError, match="row 2: expected"):
            load_stay_corpus(p)

    def _mutate_field(self, tmp_path, col, value):
        def mutate(lines):
            parts = lines[1].split(",")
            parts[col] = value
            lines[1] = ",".join(parts)
        return self._write_rows(tmp_path, mutate)

    def test_rejects_bad_day(self, tmp_path):
        p = self._mutate_field(tmp_path, 1, "Nov 3")
        with pytest.raises(ValidationError, match="bad day"):
            load_stay_corpus(p)

    def test_rejects_midnight_start(self, tmp_path):
        def mutate(lines):
            parts = lines[1].split(",")
            parts[2] = "24:00:00"
            parts[3] = "24:42:15"
            parts[4] = "24"
            lines[1] = ",".join(parts)
        p = self._write_rows(tmp_path, mutate)
        with pytest.raises(ValidationError, match="bad time|past midnight"):
            load_stay_corpus(p)

    def test_rejects_nonpositive_dwell(self, tmp_path):
        p = self._mutate_field(tmp_path, 5, "0")
        with pytest.raises(ValidationError, match="dwell must be positive"):
            load_stay_corpus(p)

    def test_rejects_hour_mismatch(self, tmp_path):
        p = self._mutate_field(tmp_path, 4, "11")
        with pytest.raises(ValidationError, match="does not match"):
            load_stay_corpus(p)

    def test_rejects_inconsistent_end(self, tmp_path):
        p = self._mutate_field(tmp_path, 3, "22:00:00")
        with pytest.raises(ValidationError, match="end_iso disagrees"):
            load_stay_corpus(p)

    def test_rejects_bad_soft_label(self, tmp_path):
        p = self._mutate_field(tmp_path, 8, "0.5")
        with pytest.raises(ValidationError, match="soft label sums"):
            load_stay_corpus(p)

    def test_rejects_nonnumeric(self, tmp_path):
        p = self._mutate_field(tmp_path, 6, "east")
        with pytest.raises(ValidationError, match="not a number"):
            load_stay_corpus(p)

    def test_renormalizes_tolerated_drift(self, tmp_path):
        # sums within 1e-6 of one are accepted and scaled back to exactly one
        p = self._mutate_field(tmp_path, 8 + 6, _f17(0.75 + 4e-7))
        back = load_stay_corpus(p)
        assert back.P[0].sum() == pytest.approx(1.0, abs=1e-15)


class TestInventoryFiles:
    def _inv(self):
        return PoiInventory([
            Poi("a0", 139.105, 35.231, Mid10.Accommodation),
            Poi("s0", 139.1077, 35.2321, Mid10.SpaOnsen),
            Poi("f0", 139.1101, 35.2330, Mid10.FoodDrink),
        ])

    def test_csv_round_trip(self, tmp_path):
        inv = self._inv()
        p = tmp_path / "inv.csv"
        write_inventory(inv, p)
        back = load_inventory(p)
        assert list(back.ids) == list(inv.ids)
        assert np.array_equal(back.lon, inv.lon)
        assert np.array_equal(back.lat, inv.lat)
        assert np.array_equal(back.cat, inv.cat)

    def test_csv_uses_labels(self, tmp_path):
        p = tmp_path / "inv.csv"
        write_inventory(self._inv(), p)
        text = p.read_text()
        assert "SpaOnsen" in text and "5" not in text.split("\n")[0]

    def test_csv_rejects_header_only(self, tmp_path):
        p = tmp_path / "inv.csv"
        p.write_text("poi_id,lon,lat,mid10\n")
        with pytest.raises(ValidationError, match="no POIs"):
            load_inventory(p)

    def test_csv_rejects_wrong_header(self, tmp_path):
        p = tmp_path / "inv.csv"
        p.write_text("id,x,y,cat\nq,1,2,SpaOnsen\n")
        with pytest.raises(ValidationError, match="unexpected header"):
            load_inventory(p)

    def test_csv_rejects_short_row(self, tmp_path):
        p = tmp_path / "inv.csv"
        p.write_text("poi_id,lon,lat,mid10\nq,1,2\n")
        with pytest.raises(ValidationError, match="expected 4 fields"):
            load_inventory(p)

    def test_geojson_round_trip(self):
        inv = self._inv()
        back = inventory_from_geojson(inventory_to_geojson(inv))
        assert list(back.ids) == list(inv.ids)
        assert np.array_equal(back.lon, inv.lon)
        assert np.array_equal(back.cat, inv.cat)

    def test_geojson_structure(self):
        inv = self._inv()
        d = json.loads(inventory_to_geojson(inv))
        assert d["type"] == "FeatureCollection"
        f = d["features"][list(inv.ids).index("s0")]
        assert f["geometry"]["type"] == "Point"
        assert f["properties"] == {"poi_id": "s0", "mid10": "SpaOnsen"}

    @pytest.mark.parametrize("text,msg", [
        ("{not json", "not valid GeoJSON"),
        ('{"type": "Feature"}', "FeatureCollection"),
        ('{"type": "FeatureCollection", "features": []}', "no features"),
        ('{"type": "FeatureCollection", "features": [{"geometry": '
         '{"type": "LineString"}, "properties": {}}]}', "only Point"),
        ('{"type": "FeatureCollection", "features": [{"geometry": '
         '{"type": "Point", "coordinates": [1, 2]}, "properties": '
         '{"poi_id": "q"}}]}', "required"),
    ])
    def test_geojson_rejects(self, text, msg):
        with pytest.raises(ValidationError, match=msg):
            inventory_from_geojson(text)


class TestMatrixFiles:
    def _mat(self):
        rng = np.random.default_rng(17)
        return HourCategoryMatrix(rng.random((N_HOURS, N_CATEGORIES)),
                                  kind="target-mass")

    def test_round_trip_exact(self, tmp_path):
        m = self._mat()
        p = tmp_path / "m.csv"
        write_matrix_csv(m, p)
        back = load_matrix_csv(p)
        assert back.kind == "target-mass"
        assert np.array_equal(back.m, m.m)

    def test_kind_parameter(self, tmp_path):
        p = tmp_path / "m.csv"
        write_matrix_csv(self._mat(), p)
        assert load_matrix_csv(p, kind="counts").kind == "counts"

    def test_layout_is_category_rows(self, tmp_path):
        p = tmp_path / "m.csv"
        write_matrix_csv(self._mat(), p)
        lines = p.read_text().splitlines()
        assert lines[0].split(",")[:2] == ["category", "hour_0"]
        assert len(lines) == 1 + N_CATEGORIES
        assert [ln.split(",")[0] for ln in lines[1:]] == list(MID10_LABELS)
        row5 = lines[1 + 5].split(",")
        assert float(row5[1 + 9]) == self._mat().m[9, 5]

    def test_rejects_reordered_rows(self, tmp_path):
        p = tmp_path / "m.csv"
        write_matrix_csv(self._mat(), p)
        lines = p.read_text().splitlines()
        lines[1], lines[2] = lines[2], lines[1]
        p.write_text("\n".join(lines) + "\n")
        with pytest.raises(ValidationError, match="categories in order"):
            load_matrix_csv(p)

    def test_rejects_bad_header(self, tmp_path):
        p = tmp_path / "m.csv"
        p.write_text("cat,h0\n")
        with pytest.raises(ValidationError, match="unexpected header"):
            load_matrix_csv(p)


def _mklog(rows, scenario_id="baseline", **meta):
    """rows: (run, user, seq, hour, cat, dwell_min)."""
    n = len(rows)
    hour = np.array([r[3] for r in rows], dtype=np.int64)
    seq = np.array([r[2] for r in rows], dtype=np.int64)
    return SimLog(scenario_id=scenario_id,
                  run=np.array([r[0] for r in rows], dtype=np.int64),
                  user=np.array([r[1] for r in rows], dtype=np.int64),
                  seq=seq, start_s=hour * 3600.0 + seq * 60.0, hour=hour,
                  category=np.array([r[4] for r in rows], dtype=np.int64),
                  dwell_min=np.array([r[5] for r in rows], dtype=np.float64),
                  poi_idx=np.zeros(n, dtype=np.int64), poi_id=["p"] * n,
                  lon=np.full(n, 139.1), lat=np.full(n, 35.2),
                  n_chains=len({(r[0], r[1]) for r in rows}), **meta)


class TestSimlogFiles:
    def _log(self):
        return _mklog([(0, 0, 0, 9, 6, 42.5), (0, 0, 1, 10, 8, 7.25),
                       (1, 3, 0, 14, 2, 30.0)],
                      config_fingerprint="cfg123", artifact_fingerprint="art456")

    def test_round_trip(self, tmp_path):
        log = self._log()
        p = tmp_path / "log.csv"
        write_simlog(log, p)
        back = load_simlog(p)
        assert back.scenario_id == log.scenario_id
        for col in ("run", "user", "seq", "start_s", "hour", "category",
                    "dwell_min", "lon", "lat"):
            assert np.array_equal(getattr(back, col), getattr(log, col)), col
        assert back.poi_id == log.poi_id
        assert back.n_chains == log.n_chains
        assert back.config_fingerprint == "cfg123"
        assert back.artifact_fingerprint == "art456"

    def test_loaded_poi_idx_is_unresolved(self, tmp_path):
        p = tmp_path / "log.csv"
        write_simlog(self._log(), p)
        assert np.all(load_simlog(p).poi_idx == -1)

    def test_sidecar_contents(self, tmp_path):
        p = tmp_path / "log.csv"
        write_simlog(self._log(), p)
        side = json.loads((tmp_path / "log.csv.meta.json").read_text())
        assert side["format"] == SIMLOG_FORMAT
        assert side["n_events"] == 3
        assert side["n_chains"] == 2
        assert side["scenario_id"] == "baseline"

    def test_explicit_sidecar_path(self, tmp_path):
        p = tmp_path / "log.csv"
        s = tmp_path / "meta.json"
        write_simlog(self._log(), p, sidecar_path=s)
        back = load_simlog(p, sidecar_path=s)
        assert back.config_fingerprint == "cfg123"

    def test_missing_sidecar(self, tmp_path):
        p = tmp_path / "log.csv"
        write_simlog(self._log(), p)
        os.unlink(tmp_path / "log.csv.meta.json")
        with pytest.raises(ValidationError, match="missing sidecar"):
            load_simlog(p)

    def test_bad_sidecar_json(self, tmp_path):
        p = tmp_path / "log.csv"
        write_simlog(self._log(), p)
        (tmp_path / "log.csv.meta.json").write_text("{oops")
        with pytest.raises(ValidationError, match="invalid JSON"):
            load_simlog(p)

    def test_unknown_format_tag(self, tmp_path):
        p = tmp_path / "log.csv"
        write_simlog(self._log(), p)
        side = json.loads((tmp_path / "log.csv.meta.json").read_text())
        side["format"] = "other-v9"
        (tmp_path / "log.csv.meta.json").write_text(json.dumps(side))
        with pytest.raises(ValidationError, match="unrecognized format"):
            load_simlog(p)

    def _corrupt(self, tmp_path, col, value, row=1):
        p = tmp_path / "log.csv"
        write_simlog(self._log(), p)
        lines = p.read_text().splitlines()
        parts = lines[row].split(",")
        parts[col] = value
        lines[row] = ",".join(parts)
        p.write_text("\n".join(lines) + "\n")
        return p

    def test_rejects_mixed_scenarios(self, tmp_path):
        p = self._corrupt(tmp_path, 0, "other", row=2)
        with pytest.raises(ValidationError, match="mixed scenario"):
            load_simlog(p)

    def test_rejects_unknown_category(self, tmp_path):
        p = self._corrupt(tmp_path, 6, "Castle")
        with pytest.raises(ValidationError, match="unknown category"):
            load_simlog(p)

    def test_rejects_hour_disagreement(self, tmp_path):
        p = self._corrupt(tmp_path, 5, "11")
        with pytest.raises(ValidationError, match="hour disagrees"):
            load_simlog(p)

    def test_rejects_event_count_mismatch(self, tmp_path):
        p = tmp_path / "log.csv"
        write_simlog(self._log(), p)
        lines = p.read_text().splitlines()
        p.write_text("\n".join(lines[:-1]) + "\n")
        with pytest.raises(ValidationError, match="events"):
            load_simlog(p)

    def test_rejects_scenario_disagreement(self, tmp_path):
        p = tmp_path / "log.csv"
        write_simlog(self._log(), p)
        side = json.loads((tmp_path / "log.csv.meta.json").read_text())
        side["scenario_id"] = "renamed"
        (tmp_path / "log.csv.meta.json").write_text(json.dumps(side))
        with pytest.raises(ValidationError, match="disagrees with the CSV"):
            load_simlog(p)


class TestSynthSpec:
    def test_json_round_trip(self):
        spec = SynthSpec(n_users=33, n_days=3, seed=9, label_temperature=0.1)
        assert SynthSpec.from_json(spec.to_json()) == spec

    def test_rejects_unknown_field(self):
        with pytest.raises(ValidationError, match="unknown synth spec"):
            SynthSpec.from_json('{"n_users": 10, "speed": 3}')

    def test_rejects_bad_json(self):
        with pytest.raises(ValidationError, match="not valid JSON"):
            SynthSpec.from_json("{")

    @pytest.mark.parametrize("kw", [
        {"n_users": 0}, {"n_days": 0}, {"label_temperature": 1.5},
        {"poi_total": 49},
    ])
    def test_rejects_bad_values(self, kw):
        with pytest.raises(ValidationError):
            SynthSpec(**kw)

    def test_rejects_bad_date(self):
        with pytest.raises(ValueError):
            SynthSpec(start_date="first of May")


SMALL_SPEC = SynthSpec(n_users=30, n_days=2, seed=13, poi_total=60,
                       max_events=8, spread_m=1500.0)


@pytest.fixture(scope="module")
def generated():
    return synthesize_corpus(SMALL_SPEC)


class TestSynthesize:
    def test_deterministic(self, generated):
        c1, inv1, _ = generated
        c2, inv2, _ = synthesize_corpus(SMALL_SPEC)
        assert list(inv1.ids) == list(inv2.ids)
        assert np.array_equal(inv1.lon, inv2.lon)
        assert list(c1.user) == list(c2.user)
        assert list(c1.day) == list(c2.day)
        assert np.array_equal(c1.start_s, c2.start_s)
        assert np.array_equal(c1.dwell_min, c2.dwell_min)
        assert np.array_equal(c1.lon, c2.lon)
        assert np.array_equal(c1.P, c2.P)

    def test_shape_and_naming(self, generated):
        corpus, inventory, art = generated
        assert len(corpus) > 0
        assert set(corpus.day) == {"2021-11-01", "2021-11-02"}
        assert all(u.startswith("u") and len(u) == 6 for u in corpus.user)
        assert np.array_equal(corpus.start_s, np.floor(corpus.start_s))
        assert np.allclose(corpus.P.sum(axis=1), 1.0, atol=1e-12)
        assert art.s_ipf.total() > 0
        assert len(inventory) == 60

    def test_coords_stay_near_pois(self, generated):
        corpus, inventory, _ = generated
        # observation noise is 12 m per axis, so 60 m misses are negligible
        assert hit_rate(corpus.lon, corpus.lat, inventory, radius_m=60.0) > 0.99

    def test_zero_temperature_gives_hard_labels(self):
        spec = SynthSpec(n_users=12, n_days=1, seed=3, poi_total=60,
                         max_events=6, label_temperature=0.0)
        corpus, _, _ = synthesize_corpus(spec)
        assert np.array_equal(np.sort(np.unique(corpus.P)), [0.0, 1.0])

    def test_truth_reproducible(self):
        inv_a, art_a = synth_truth(SMALL_SPEC)
        inv_b, art_b = synth_truth(SMALL_SPEC)
        assert list(inv_a.ids) == list(inv_b.ids)
        assert np.array_equal(art_a.s_ipf.m, art_b.s_ipf.m)
        assert np.array_equal(art_a.kernels.t_blocks, art_b.kernels.t_blocks)

    def test_corpus_file_round_trip(self, generated, tmp_path):
        corpus, _, _ = generated
        p = tmp_path / "synth.csv"
        write_stay_corpus(corpus, p)
        back = load_stay_corpus(p)
        assert list(back.user) == list(corpus.user)
        assert np.array_equal(back.start_s, corpus.start_s)
        assert np.allclose(back.P, corpus.P, atol=1e-12)
