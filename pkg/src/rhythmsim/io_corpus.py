"""File formats (stay corpora, inventories, matrices, simulation logs) and
the synthetic-corpus generator used for closed-loop checks.

All writers are atomic (temp file + rename) and emit floats with 17
significant digits so values round-trip exactly.
"""

from __future__ import annotations

import csv
import datetime
import io
import json
import os
import tempfile
from dataclasses import dataclass, field

import numpy as np

from .config import DEFAULT_ZONE_LAT, DEFAULT_ZONE_LON, SimConfig
from .estimation import (
    DwellModel,
    DwellParams,
    PoiPriorTable,
    RhythmArtifacts,
    StopHazard,
    TransitionKernels,
    bundle_artifacts,
    derive_start_priors,
)
from .geo import METERS_PER_DEGREE, CategoryIndex
from .simulate import SimLog, run_monte_carlo
from .taxonomy import (
    MID10_LABELS,
    N_CATEGORIES,
    N_HOURS,
    SECONDS_PER_DAY,
    SOFT_COLUMNS,
    HourCategoryMatrix,
    Mid10,
    Poi,
    PoiInventory,
    StayCorpus,
    ValidationError,
)

SIMLOG_FORMAT = "rhythmsim-simlog-v1"

STAY_HEADER = ["user_id", "day", "start_iso", "end_iso", "start_hour",
               "dwell_min", "lon", "lat", *SOFT_COLUMNS]
INVENTORY_HEADER = ["poi_id", "lon", "lat", "mid10"]
SIMLOG_HEADER = ["scenario_id", "run", "user", "seq", "start_iso", "hour",
                 "category", "dwell_min", "poi_id", "lon", "lat"]


def _f17(v: float) -> str:
    return format(float(v), ".17g")


def _sec_to_iso(s: float) -> str:
    t = int(s)
    return f"{t // 3600:02d}:{t % 3600 // 60:02d}:{t % 60:02d}"


def _iso_to_sec(text: str, where: str) -> int:
    parts = text.split(":")
    if len(parts) != 3:
        raise ValidationError(f"{where}: bad time {text!r}")
    try:
        hh, mm, ss = (int(p) for p in parts)
    except ValueError:
        raise ValidationError(f"{where}: bad time {text!r}") from None
    if not (0 <= mm < 60 and 0 <= ss < 60 and 0 <= hh <= 24):
        raise ValidationError(f"{where}: bad time {text!r}")
    sec = hh * 3600 + mm * 60 + ss
    if sec > SECONDS_PER_DAY:
        raise ValidationError(f"{where}: time {text!r} beyond 24:00:00")
    return sec


def atomic_write_text(path, text: str) -> None:
    path = os.fspath(path)
    d = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "w", newline="") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _float(row_no: int, col: str, raw: str) -> float:
    try:
        return float(raw)
    except ValueError:
        raise ValidationError(f"row {row_no}: column {col} is not a number: {raw!r}") from None


def write_stay_corpus(corpus: StayCorpus, path) -> None:
    """Starts are written as whole seconds (floored); fractional-second
    corpora therefore do not round-trip below one second."""
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(STAY_HEADER)
    for i in range(len(corpus)):
        start = float(corpus.start_s[i])
        dwell = float(corpus.dwell_min[i])
        end = min(float(SECONDS_PER_DAY), start + dwell * 60.0)
        w.writerow([
            corpus.user[i], corpus.day[i], _sec_to_iso(start), _sec_to_iso(end),
            int(start) // 3600, _f17(dwell), _f17(corpus.lon[i]), _f17(corpus.lat[i]),
            *(_f17(v) for v in corpus.P[i]),
        ])
    atomic_write_text(path, buf.getvalue())


def load_stay_corpus(path) -> StayCorpus:
    with open(path, newline="") as f:
        rd = csv.reader(f)
        try:
            header = next(rd)
        except StopIteration:
            raise ValidationError(f"{path}: empty file") from None
        if header != STAY_HEADER:
            raise ValidationError(f"{path}: unexpected header {header!r}")
        cols = {k: [] for k in ("user", "day", "start", "dwell", "lon", "lat")}
        P = []
        for no, row in enumerate(rd, start=2):
            if len(row) != len(STAY_HEADER):
                raise ValidationError(f"row {no}: expected {len(STAY_HEADER)} fields, "
                                      f"got {len(row)}")
            user, day, s_iso, e_iso, s_hour, dwell = row[:6]
            try:
                datetime.date.fromisoformat(day)
            except ValueError:
                raise ValidationError(f"row {no}: bad day {day!r}") from None
            start = _iso_to_sec(s_iso, f"row {no}")
            if start >= SECONDS_PER_DAY:
                raise ValidationError(f"row {no}: start at or past midnight")
            end = _iso_to_sec(e_iso, f"row {no}")
            dwell_v = _float(no, "dwell_min", dwell)
            if dwell_v <= 0:
                raise ValidationError(f"row {no}: dwell must be positive")
            if int(s_hour) != start // 3600:
                raise ValidationError(f"row {no}: start_hour {s_hour} does not match "
                                      f"{s_iso}")
            if abs(end - (start + dwell_v * 60.0)) > 1.0:
                raise ValidationError(f"row {no}: end_iso disagrees with start + dwell")
            p = np.array([_float(no, c, v) for c, v in zip(SOFT_COLUMNS, row[8:])])
            ps = p.sum()
            if abs(ps - 1.0) > 1e-6 or np.any(p < 0):
                raise ValidationError(f"row {no}: soft label sums to {ps!r}")
            cols["user"].append(user)
            cols["day"].append(day)
            cols["start"].append(float(start))
            cols["dwell"].append(dwell_v)
            cols["lon"].append(_float(no, "lon", row[6]))
            cols["lat"].append(_float(no, "lat", row[7]))
            P.append(p / ps)
    n = len(cols["user"])
    return StayCorpus(cols["user"], cols["day"], cols["start"], cols["dwell"],
                      cols["lon"], cols["lat"],
                      np.array(P) if n else np.zeros((0, N_CATEGORIES)))


def write_inventory(inventory: PoiInventory, path) -> None:
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(INVENTORY_HEADER)
    for i, pid in enumerate(inventory.ids):
        w.writerow([pid, _f17(inventory.lon[i]), _f17(inventory.lat[i]),
                    MID10_LABELS[inventory.cat[i]]])
    atomic_write_text(path, buf.getvalue())


def load_inventory(path) -> PoiInventory:
    with open(path, newline="") as f:
        rd = csv.reader(f)
        try:
            header = next(rd)
        except StopIteration:
            raise ValidationError(f"{path}: empty file") from None
        if header != INVENTORY_HEADER:
            raise ValidationError(f"{path}: unexpected header {header!r}")
        pois = []
        for no, row in enumerate(rd, start=2):
            if len(row) != 4:
                raise ValidationError(f"row {no}: expected 4 fields, got {len(row)}")
            pois.append(Poi(row[0], _float(no, "lon", row[1]),
                            _float(no, "lat", row[2]), Mid10.from_label(row[3])))
    if not pois:
        raise ValidationError(f"{path}: no POIs")
    return PoiInventory(pois)


def inventory_to_geojson(inventory: PoiInventory) -> str:
    feats = []
    for i, pid in enumerate(inventory.ids):
        feats.append({
            "type": "Feature",
            "geometry": {"type": "Point",
                         "coordinates": [float(inventory.lon[i]), float(inventory.lat[i])]},
            "properties": {"poi_id": pid, "mid10": MID10_LABELS[inventory.cat[i]]},
        })
    return json.dumps({"type": "FeatureCollection", "features": feats}, indent=2)


def inventory_from_geojson(text: str) -> PoiInventory:
    try:
        d = json.loads(text)
    except json.JSONDecodeError as e:
        raise ValidationError(f"not valid GeoJSON: {e}") from None
    if not isinstance(d, dict) or d.get("type") != "FeatureCollection":
        raise ValidationError("expected a FeatureCollection")
    pois = []
    for i, feat in enumerate(d.get("features", [])):
        geom = feat.get("geometry") or {}
        props = feat.get("properties") or {}
        if geom.get("type") != "Point":
            raise ValidationError(f"feature {i}: only Point geometries are supported")
        lon, lat = geom.get("coordinates", [None, None])[:2]
        pid = props.get("poi_id")
        label = props.get("mid10")
        if pid is None or label is None:
            raise ValidationError(f"feature {i}: poi_id and mid10 properties required")
        pois.append(Poi(str(pid), float(lon), float(lat), Mid10.from_label(label)))
    if not pois:
        raise ValidationError("FeatureCollection has no features")
    return PoiInventory(pois)


_MATRIX_HEADER = ["category", *(f"hour_{h}" for h in range(N_HOURS))]


def write_matrix_csv(mat: HourCategoryMatrix, path) -> None:
    """Canonical orientation: one row per category in taxonomy order,
    hour_0..hour_23 columns."""
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(_MATRIX_HEADER)
    for c in range(N_CATEGORIES):
        w.writerow([MID10_LABELS[c], *(_f17(v) for v in mat.m[:, c])])
    atomic_write_text(path, buf.getvalue())


def load_matrix_csv(path, kind: str = "target-mass") -> HourCategoryMatrix:
    with open(path, newline="") as f:
        rd = csv.reader(f)
        try:
            header = next(rd)
        except StopIteration:
            raise ValidationError(f"{path}: empty file") from None
        if header != _MATRIX_HEADER:
            raise ValidationError(f"{path}: unexpected header {header!r}")
        rows = list(rd)
    if [r[0] for r in rows] != list(MID10_LABELS):
        raise ValidationError(f"{path}: rows must list all categories in order")
    m = np.zeros((N_HOURS, N_CATEGORIES))
    for c, row in enumerate(rows):
        if len(row) != N_HOURS + 1:
            raise ValidationError(f"{path}: row {c + 2} has {len(row)} fields")
        for h in range(N_HOURS):
            m[h, c] = _float(c + 2, f"hour_{h}", row[h + 1])
    return HourCategoryMatrix(m, kind=kind)


def write_simlog(log: SimLog, csv_path, sidecar_path=None) -> None:
    """Event CSV plus a JSON sidecar carrying run metadata and fingerprints."""
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(SIMLOG_HEADER)
    for i in range(len(log)):
        w.writerow([
            log.scenario_id, int(log.run[i]), int(log.user[i]), int(log.seq[i]),
            _sec_to_iso(float(log.start_s[i])), int(log.hour[i]),
            MID10_LABELS[log.category[i]], _f17(log.dwell_min[i]),
            log.poi_id[i], _f17(log.lon[i]), _f17(log.lat[i]),
        ])
    atomic_write_text(csv_path, buf.getvalue())
    if sidecar_path is None:
        sidecar_path = os.fspath(csv_path) + ".meta.json"
    side = {
        "format": SIMLOG_FORMAT,
        "scenario_id": log.scenario_id,
        "n_events": len(log),
        "n_chains": log.n_chains,
        "config_fingerprint": log.config_fingerprint,
        "artifact_fingerprint": log.artifact_fingerprint,
    }
    atomic_write_text(sidecar_path, json.dumps(side, indent=2, sort_keys=True))


def load_simlog(csv_path, sidecar_path=None) -> SimLog:
    if sidecar_path is None:
        sidecar_path = os.fspath(csv_path) + ".meta.json"
    try:
        with open(sidecar_path) as f:
            side = json.load(f)
    except FileNotFoundError:
        raise ValidationError(f"missing sidecar {sidecar_path}") from None
    except json.JSONDecodeError as e:
        raise ValidationError(f"{sidecar_path}: invalid JSON: {e}") from None
    if side.get("format") != SIMLOG_FORMAT:
        raise ValidationError(f"{sidecar_path}: unrecognized format "
                              f"{side.get('format')!r}")
    label_to_cat = {name: i for i, name in enumerate(MID10_LABELS)}
    cols = {k: [] for k in ("run", "user", "seq", "s", "h", "c", "d", "pid",
                            "lon", "lat")}
    scen = None
    with open(csv_path, newline="") as f:
        rd = csv.reader(f)
        try:
            header = next(rd)
        except StopIteration:
            raise ValidationError(f"{csv_path}: empty file") from None
        if header != SIMLOG_HEADER:
            raise ValidationError(f"{csv_path}: unexpected header {header!r}")
        for no, row in enumerate(rd, start=2):
            if len(row) != len(SIMLOG_HEADER):
                raise ValidationError(f"row {no}: expected {len(SIMLOG_HEADER)} "
                                      f"fields, got {len(row)}")
            if scen is None:
                scen = row[0]
            elif row[0] != scen:
                raise ValidationError(f"row {no}: mixed scenario ids in one log")
            if row[6] not in label_to_cat:
                raise ValidationError(f"row {no}: unknown category {row[6]!r}")
            start = _iso_to_sec(row[4], f"row {no}")
            if int(row[5]) != start // 3600:
                raise ValidationError(f"row {no}: hour disagrees with start_iso")
            cols["run"].append(int(row[1]))
            cols["user"].append(int(row[2]))
            cols["seq"].append(int(row[3]))
            cols["s"].append(float(start))
            cols["h"].append(int(row[5]))
            cols["c"].append(label_to_cat[row[6]])
            cols["d"].append(_float(no, "dwell_min", row[7]))
            cols["pid"].append(row[8])
            cols["lon"].append(_float(no, "lon", row[9]))
            cols["lat"].append(_float(no, "lat", row[10]))
    if scen is None:
        scen = side.get("scenario_id", "")
    if scen != side.get("scenario_id"):
        raise ValidationError("scenario id in sidecar disagrees with the CSV")
    n = len(cols["run"])
    if n != int(side.get("n_events", -1)):
        raise ValidationError(f"sidecar reports {side.get('n_events')} events, "
                              f"file has {n}")
    return SimLog(
        scenario_id=scen,
        run=np.array(cols["run"], dtype=np.int64),
        user=np.array(cols["user"], dtype=np.int64),
        seq=np.array(cols["seq"], dtype=np.int64),
        start_s=np.array(cols["s"]), hour=np.array(cols["h"], dtype=np.int64),
        category=np.array(cols["c"], dtype=np.int64),
        dwell_min=np.array(cols["d"]),
        poi_idx=np.full(n, -1, dtype=np.int64),
        poi_id=cols["pid"],
        lon=np.array(cols["lon"]), lat=np.array(cols["lat"]),
        n_chains=int(side.get("n_chains", 0)),
        config_fingerprint=str(side.get("config_fingerprint", "")),
        artifact_fingerprint=str(side.get("artifact_fingerprint", "")),
    )


# rough popularity of each category in the synthetic field, taxonomy order
_SYNTH_CAT_WEIGHT = np.array([0.08, 0.10, 0.15, 0.06, 0.07, 0.09, 0.20,
                              0.07, 0.11, 0.07])


@dataclass(frozen=True)
class SynthSpec:
    """Knobs for the synthetic corpus generator; everything downstream of
    the seed is deterministic."""

    n_users: int = 200
    n_days: int = 7
    seed: int = 7
    label_temperature: float = 0.2
    coord_noise_m: float = 12.0
    start_date: str = "2021-11-01"
    poi_total: int = 400
    center_lon: float = DEFAULT_ZONE_LON
    center_lat: float = DEFAULT_ZONE_LAT
    spread_m: float = 2500.0
    n_clusters: int = 6
    max_events: int = 24
    label_mix_radius_m: float = 300.0

    def __post_init__(self):
        if self.n_users < 1 or self.n_days < 1:
            raise ValidationError("need at least one user and one day")
        if not (0.0 <= self.label_temperature <= 1.0):
            raise ValidationError("label_temperature must be in [0, 1]")
        if self.poi_total < 5 * N_CATEGORIES:
            raise ValidationError(f"poi_total must be at least {5 * N_CATEGORIES}")
        datetime.date.fromisoformat(self.start_date)

    def to_json(self, indent=2) -> str:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        return json.dumps(d, indent=indent, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "SynthSpec":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as e:
            raise ValidationError(f"synth spec is not valid JSON: {e}") from None
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise ValidationError(f"unknown synth spec field(s): {sorted(extra)}")
        return cls(**d)


def _synth_inventory(spec: SynthSpec, rng) -> PoiInventory:
    counts = np.maximum(5, np.floor(spec.poi_total * _SYNTH_CAT_WEIGHT).astype(int))
    while counts.sum() > spec.poi_total:
        counts[np.argmax(counts)] -= 1
    kx = METERS_PER_DEGREE * np.cos(np.radians(spec.center_lat))
    centers = np.stack([
        spec.center_lon + rng.normal(0, spec.spread_m, spec.n_clusters) / kx,
        spec.center_lat + rng.normal(0, spec.spread_m, spec.n_clusters) / METERS_PER_DEGREE,
    ], axis=1)
    # each category leans toward a few clusters, so geography carries signal
    affinity = rng.dirichlet(np.full(spec.n_clusters, 0.8), size=N_CATEGORIES)
    pois = []
    i = 0
    for c in range(N_CATEGORIES):
        for _ in range(counts[c]):
            cl = rng.choice(spec.n_clusters, p=affinity[c])
            lon = centers[cl, 0] + rng.normal(0, spec.spread_m / 6.0) / kx
            lat = centers[cl, 1] + rng.normal(0, spec.spread_m / 6.0) / METERS_PER_DEGREE
            pois.append(Poi(f"p{i:05d}", float(lon), float(lat), Mid10(c)))
            i += 1
    return PoiInventory(pois)


def _synth_start_matrix(rng) -> HourCategoryMatrix:
    m = np.zeros((N_HOURS, N_CATEGORIES))
    hours = np.arange(N_HOURS, dtype=float)
    for c in range(N_CATEGORIES):
        peak = rng.uniform(8.0, 12.0)
        width = rng.uniform(1.2, 2.2)
        w = _SYNTH_CAT_WEIGHT[c] * rng.uniform(0.7, 1.3)
        prof = w * np.exp(-((hours - peak) ** 2) / (2 * width * width))
        prof[(hours >= 6) & (hours <= 21)] += 1e-4 * w
        prof[hours < 5] = 0.0
        prof[hours > 22] = 0.0
        m[:, c] = prof
    return HourCategoryMatrix(m, kind="target-mass")


def _synth_hazard(rng) -> StopHazard:
    h_target = np.empty(N_HOURS)
    for hh in range(N_HOURS):
        base = 0.015 + 0.55 / (1.0 + np.exp(-(hh - 19.0) / 1.3))
        h_target[hh] = min(0.9, base * rng.uniform(0.9, 1.1))
    h_target[23] = 1.0
    n0 = 100000
    ended = np.zeros(N_HOURS, dtype=np.int64)
    at_risk = np.zeros(N_HOURS, dtype=np.int64)
    alive = n0
    for hh in range(N_HOURS):
        at_risk[hh] = alive
        ended[hh] = int(round(alive * h_target[hh]))
        alive -= ended[hh]
    ended[23] = at_risk[23]
    h = np.ones(N_HOURS)
    pos = at_risk > 0
    h[pos] = ended[pos] / at_risk[pos]
    return StopHazard(h=h, at_risk=at_risk, ended=ended)


def _synth_kernels(rng, cfg: SimConfig) -> TransitionKernels:
    nb = cfg.n_blocks()
    edges = cfg.block_edges
    t_blocks = np.zeros((nb, N_CATEGORIES, N_CATEGORIES))
    for b in range(nb):
        mid = 0.5 * (edges[b] + edges[b + 1])
        base = rng.gamma(1.2, 1.0, size=(N_CATEGORIES, N_CATEGORIES))
        base += 2.5 * np.eye(N_CATEGORIES)
        if 11 <= mid < 15 or 18 <= mid < 22:
            base[:, Mid10.FoodDrink] *= 2.5
        if mid >= 18:
            base[:, Mid10.Accommodation] *= 2.0
        if 9 <= mid < 17:
            base[:, Mid10.Sightseeing] *= 1.6
            base[:, Mid10.NaturePark] *= 1.4
        t_blocks[b] = base / base.sum(axis=1, keepdims=True)
    n_blocks = t_blocks * 1000.0
    n_global = n_blocks.sum(axis=0)
    t_global = n_global / n_global.sum(axis=1, keepdims=True)
    return TransitionKernels(alpha=cfg.alpha, block_edges=edges,
                             n_global=n_global, t_global=t_global,
                             n_blocks=n_blocks, t_blocks=t_blocks,
                             n_pairs=int(n_global.sum()))


def _synth_dwell(rng, cfg: SimConfig) -> DwellModel:
    cats = []
    for c in range(N_CATEGORIES):
        mu_s = np.log(rng.uniform(12.0, 35.0))
        mu_l = np.log(rng.uniform(60.0, 170.0))
        sg = rng.uniform(0.25, 0.45, size=2)
        ws = rng.uniform(0.45, 0.75)
        cats.append(DwellParams(w=np.array([ws, 1.0 - ws]),
                                mu=np.array([mu_s, mu_l]), sigma=sg))
    w_all = np.mean([p.w for p in cats], axis=0)
    mu_all = np.mean([p.mu for p in cats], axis=0)
    sg_all = np.mean([p.sigma for p in cats], axis=0)
    overall = DwellParams(w=w_all / w_all.sum(), mu=mu_all, sigma=sg_all)
    return DwellModel(k=2, threshold=cfg.dwell_min_effw_hour, shrink=cfg.dwell_shrink,
                      overall=overall, category=cats, local={},
                      w_eff=np.zeros((N_HOURS, N_CATEGORIES)))


def synth_truth(spec: SynthSpec) -> tuple:
    """(inventory, truth artifacts): the hidden generative model."""
    rng = np.random.default_rng(spec.seed)
    inventory = _synth_inventory(spec, rng)
    cfg = SimConfig(
        sim_users_n=spec.n_users, mc_runs=spec.n_days, persondays_per_user=1,
        max_events=spec.max_events, random_seed=spec.seed * 7919 + 17,
        use_spatial_start=False, use_soft_spatial_prior=False,
        use_scenario_boost=False, use_yumoto_zone_boost=False,
        zone_center_lon=spec.center_lon, zone_center_lat=spec.center_lat,
    )
    s_true = _synth_start_matrix(rng)
    hazard = _synth_hazard(rng)
    kernels = _synth_kernels(rng, cfg)
    dwell = _synth_dwell(rng, cfg)
    prior = PoiPriorTable(poi_ids=list(inventory.ids),
                          counters=np.zeros((len(inventory), N_CATEGORIES)),
                          matched=0, dropped=0,
                          zone_share_overall=float("nan"),
                          zone_share_cat=np.full(N_CATEGORIES, np.nan))
    art = bundle_artifacts(cfg, s_true, derive_start_priors(s_true), hazard,
                           kernels, dwell, prior)
    return inventory, art


def synthesize_corpus(spec: SynthSpec):
    """Simulate the hidden truth, then observe it with coordinate noise and
    soft-label mixing.  Returns (corpus, inventory, truth artifacts)."""
    from .poi_assign import InventoryContext

    inventory, art = synth_truth(spec)
    ctx = InventoryContext(inventory, art.config, prior_table=art.prior_table)
    log = run_monte_carlo(art, ctx, scenario_id="synth")

    # neighborhood category mix per POI, for label blurring
    tau = spec.label_temperature
    n_poi = len(inventory)
    q = np.zeros((n_poi, N_CATEGORIES))
    if tau > 0:
        index = CategoryIndex(inventory)
        for i in range(n_poi):
            near, _d = index.query_radius(float(inventory.lon[i]),
                                          float(inventory.lat[i]),
                                          spec.label_mix_radius_m)
            cnt = np.bincount(inventory.cat[near], minlength=N_CATEGORIES)
            q[i] = cnt / cnt.sum()

    noise = np.random.default_rng([spec.seed, 210])
    n = len(log)
    kx = METERS_PER_DEGREE * np.cos(np.radians(spec.center_lat))
    lon = log.lon + noise.normal(0, spec.coord_noise_m, n) / kx
    lat = log.lat + noise.normal(0, spec.coord_noise_m, n) / METERS_PER_DEGREE
    P = np.zeros((n, N_CATEGORIES))
    P[np.arange(n), log.category] = 1.0
    if tau > 0:
        P = (1.0 - tau) * P + tau * q[log.poi_idx]

    d0 = datetime.date.fromisoformat(spec.start_date)
    dates = [(d0 + datetime.timedelta(days=int(r))).isoformat()
             for r in range(spec.n_days)]
    day = [dates[r] for r in log.run]
    user = [f"u{u:05d}" for u in log.user]
    start = np.floor(log.start_s)

    corpus = StayCorpus(user, day, start, log.dwell_min.copy(), lon, lat, P)
    return corpus, inventory, art
