"""Validation metrics: hour-by-category aggregation, diurnal profile
similarity, day-by-hour residuals, kernel re-estimation distances,
first-event compliance, POI hit rate, and spatial difference grids."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .estimation import TransitionKernels, _smooth_rows
from .geo import GridSpec
from .simulate import SimLog
from .taxonomy import (
    N_CATEGORIES,
    N_HOURS,
    HourCategoryMatrix,
    PoiInventory,
    StayCorpus,
    ValidationError,
)


def aggregate_hour_category(obj, mode: str = "EDM",
                            labeling: str = "soft") -> HourCategoryMatrix:
    """Sum event presence over the (hour, category) plane.

    mode 'ES' adds one unit per event, 'EDM' adds its dwell minutes.  Soft
    labeling spreads each unit over the label vector; hard labeling puts it
    on the argmax (or the simulated category, which is already hard).
    """
    if mode not in ("ES", "EDM"):
        raise ValidationError(f"unknown aggregation mode {mode!r}")
    if labeling not in ("soft", "hard"):
        raise ValidationError(f"unknown labeling {labeling!r}")
    out = np.zeros((N_HOURS, N_CATEGORIES))
    if isinstance(obj, StayCorpus):
        w = corpus_weights = obj.dwell_min if mode == "EDM" else np.ones(len(obj))
        if labeling == "soft":
            np.add.at(out, obj.hour, obj.P * w[:, None])
        else:
            np.add.at(out, (obj.hour, np.argmax(obj.P, axis=1)), w)
    elif isinstance(obj, SimLog):
        w = obj.dwell_min if mode == "EDM" else np.ones(len(obj))
        np.add.at(out, (obj.hour, obj.category), w)
    else:
        raise ValidationError(f"cannot aggregate a {type(obj).__name__}")
    return HourCategoryMatrix(out, kind="minutes" if mode == "EDM" else "counts")


@dataclass
class DiurnalProfiles:
    """Per-category 24-hour share profiles plus their source masses."""

    shares: np.ndarray
    mass: np.ndarray

    def __post_init__(self):
        if self.shares.shape != (N_CATEGORIES, N_HOURS):
            raise ValidationError("shares must be 10x24")
        if self.mass.shape != (N_CATEGORIES,):
            raise ValidationError("mass must have 10 entries")


def diurnal_profiles(mat: HourCategoryMatrix) -> DiurnalProfiles:
    mass = mat.col_marginal()
    shares = np.zeros((N_CATEGORIES, N_HOURS))
    pos = mass > 0
    shares[pos] = (mat.m[:, pos] / mass[pos]).T
    return DiurnalProfiles(shares=shares, mass=mass)


@dataclass
class DiurnalReport:
    rmse: np.ndarray
    pearson: np.ndarray
    valid: np.ndarray
    macro_rmse: float
    macro_pearson: float
    weighted_rmse: float
    weighted_pearson: float

    def to_dict(self) -> dict:
        return {
            "rmse": [None if not v else float(r) for r, v in zip(self.rmse, self.valid)],
            "pearson": [None if np.isnan(p) else float(p) for p in self.pearson],
            "macro_rmse": self.macro_rmse,
            "macro_pearson": self.macro_pearson,
            "weighted_rmse": self.weighted_rmse,
            "weighted_pearson": self.weighted_pearson,
        }


def _pearson(a: np.ndarray, b: np.ndarray) -> float:
    sa, sb = a.std(), b.std()
    if sa == 0.0 or sb == 0.0:
        return float("nan")
    return float(np.corrcoef(a, b)[0, 1])


def diurnal_similarity(obs: DiurnalProfiles, sim: DiurnalProfiles) -> DiurnalReport:
    """Compare share profiles category by category.

    A category enters only when both sides carry mass.  Macro figures average
    the valid categories; weighted figures use observed mass shares.  Pearson
    is undefined (NaN) for constant profiles and such categories drop out of
    the correlation averages.
    """
    valid = (obs.mass > 0) & (sim.mass > 0)
    if not np.any(valid):
        raise ValidationError("no category has mass on both sides")
    rmse = np.full(N_CATEGORIES, np.nan)
    pear = np.full(N_CATEGORIES, np.nan)
    for c in range(N_CATEGORIES):
        if not valid[c]:
            continue
        diff = obs.shares[c] - sim.shares[c]
        rmse[c] = float(np.sqrt(np.mean(diff * diff)))
        pear[c] = _pearson(obs.shares[c], sim.shares[c])
    vr = valid
    vp = valid & ~np.isnan(pear)
    w = obs.mass * valid
    w = w / w.sum()
    wp = obs.mass * vp
    return DiurnalReport(
        rmse=rmse, pearson=pear, valid=valid,
        macro_rmse=float(np.mean(rmse[vr])),
        macro_pearson=float(np.mean(pear[vp])) if np.any(vp) else float("nan"),
        weighted_rmse=float(np.sum(w[vr] * rmse[vr])),
        weighted_pearson=float(np.sum(wp[vp] * pear[vp]) / wp[vp].sum())
        if np.any(vp) else float("nan"),
    )


def day_hour_heatmaps(corpus: StayCorpus, mode: str = "EDM",
                      labeling: str = "soft"):
    """(days, maps): per-category day x hour mass, each category's map
    normalized to total 1 (zero maps stay zero)."""
    days = corpus.days()
    day_pos = {d: i for i, d in enumerate(days)}
    nd = len(days)
    maps = np.zeros((N_CATEGORIES, nd, N_HOURS))
    di = np.array([day_pos[d] for d in corpus.day], dtype=np.int64)
    w = corpus.dwell_min if mode == "EDM" else np.ones(len(corpus))
    if labeling == "soft":
        for c in range(N_CATEGORIES):
            np.add.at(maps[c], (di, corpus.hour), corpus.P[:, c] * w)
    else:
        hard = np.argmax(corpus.P, axis=1)
        np.add.at(maps, (hard, di, corpus.hour), w)
    return days, _normalize_maps(maps)


def simlog_day_heatmaps(log: SimLog, days, mode: str = "EDM"):
    """Per run: (10, D, 24) maps with chains assigned day days[user % D].

    This fixed mapping is the public convention tying simulated chains to
    calendar days, and self-comparisons under it are exact.
    """
    nd = len(days)
    if nd == 0:
        raise ValidationError("need at least one day")
    runs = np.unique(log.run)
    w = log.dwell_min if mode == "EDM" else np.ones(len(log))
    di = (log.user % nd).astype(np.int64)
    out = []
    for r in runs:
        sel = log.run == r
        maps = np.zeros((N_CATEGORIES, nd, N_HOURS))
        np.add.at(maps, (log.category[sel], di[sel], log.hour[sel]), w[sel])
        out.append(_normalize_maps(maps))
    return list(runs), out


def _normalize_maps(maps: np.ndarray) -> np.ndarray:
    tot = maps.sum(axis=(1, 2), keepdims=True)
    return np.divide(maps, tot, out=np.zeros_like(maps), where=tot > 0)


@dataclass
class ResidualReport:
    mar: np.ndarray
    p95: np.ndarray
    frob: np.ndarray
    macro_mar: float
    macro_p95: float
    macro_frob: float
    weighted_mar: float
    weighted_p95: float
    weighted_frob: float

    def to_dict(self) -> dict:
        return {
            "mar": self.mar.tolist(), "p95": self.p95.tolist(),
            "frobenius": self.frob.tolist(),
            "macro_mar": self.macro_mar, "macro_p95": self.macro_p95,
            "macro_frobenius": self.macro_frob,
            "weighted_mar": self.weighted_mar, "weighted_p95": self.weighted_p95,
            "weighted_frobenius": self.weighted_frob,
        }


def residual_report(obs_maps: np.ndarray, run_maps, obs_mass=None) -> ResidualReport:
    """Residuals of observed maps against the cellwise median over runs.

    MAR is the mean absolute residual per category, P95 the linearly
    interpolated 95th percentile, Frobenius the norm of the residual map.
    """
    stack = np.stack(run_maps, axis=0)
    if stack.shape[1:] != obs_maps.shape:
        raise ValidationError("run maps do not match the observed map shape")
    med = np.median(stack, axis=0)
    resid = np.abs(obs_maps - med)
    mar = resid.mean(axis=(1, 2))
    p95 = np.percentile(resid.reshape(N_CATEGORIES, -1), 95.0, axis=1)
    frob = np.sqrt((resid * resid).sum(axis=(1, 2)))
    if obs_mass is None:
        obs_mass = obs_maps.sum(axis=(1, 2))
    pos = obs_mass > 0
    w = np.where(pos, obs_mass, 0.0)
    w = w / w.sum() if w.sum() > 0 else np.full(N_CATEGORIES, 1 / N_CATEGORIES)
    return ResidualReport(
        mar=mar, p95=p95, frob=frob,
        macro_mar=float(mar[pos].mean()), macro_p95=float(p95[pos].mean()),
        macro_frob=float(frob[pos].mean()),
        weighted_mar=float((w * mar).sum()), weighted_p95=float((w * p95).sum()),
        weighted_frob=float((w * frob).sum()),
    )


def reestimate_kernels(log: SimLog, alpha: float, block_edges) -> TransitionKernels:
    """Transition kernels re-fitted from a simulated log's hard categories,
    with pairs blocked by the earlier event's hour, mirroring estimation."""
    block_edges = tuple(int(e) for e in block_edges)
    nb = len(block_edges) - 1
    lu = np.empty(N_HOURS, dtype=np.int64)
    for hh in range(N_HOURS):
        b = -1
        for k in range(nb):
            if block_edges[k] <= hh < block_edges[k + 1]:
                b = k
                break
        if b < 0:
            raise ValidationError(f"hour {hh} outside block edges {block_edges}")
        lu[hh] = b
    n = len(log)
    if n >= 2:
        same = (log.run[1:] == log.run[:-1]) & (log.user[1:] == log.user[:-1])
    else:
        same = np.zeros(0, dtype=bool)
    a = log.category[:-1][same] if n >= 2 else np.zeros(0, dtype=np.int64)
    b = log.category[1:][same] if n >= 2 else np.zeros(0, dtype=np.int64)
    hb = lu[log.hour[:-1][same]] if n >= 2 else np.zeros(0, dtype=np.int64)
    n_global = np.zeros((N_CATEGORIES, N_CATEGORIES))
    np.add.at(n_global, (a, b), 1.0)
    n_blocks = np.zeros((nb, N_CATEGORIES, N_CATEGORIES))
    np.add.at(n_blocks, (hb, a, b), 1.0)
    return TransitionKernels(alpha=float(alpha), block_edges=block_edges,
                             n_global=n_global, t_global=_smooth_rows(n_global, alpha),
                             n_blocks=n_blocks, t_blocks=_smooth_rows(n_blocks, alpha),
                             n_pairs=int(a.shape[0]))


def _js_divergence(p: np.ndarray, q: np.ndarray) -> float:
    # natural-log Jensen-Shannon divergence of two probability rows
    m = 0.5 * (p + q)
    def kl(a, b):
        sel = a > 0
        return float(np.sum(a[sel] * np.log(a[sel] / b[sel])))
    return 0.5 * kl(p, m) + 0.5 * kl(q, m)


@dataclass
class KernelDistanceRow:
    scope: str
    frobenius: float
    cosine: float
    mean_js: float


def kernel_distances(a: TransitionKernels, b: TransitionKernels):
    """Per-scope distances between two kernel sets: Frobenius norm of the
    difference, cosine of the flattened kernels, and the mean row-wise JS
    divergence.  Scopes are 'global' then 'block0'.. in edge order."""
    if a.block_edges != b.block_edges:
        raise ValidationError("kernel sets use different block edges")
    rows = []
    pairs = [("global", a.t_global, b.t_global)]
    for k in range(a.n_blocks_count()):
        pairs.append((f"block{k}", a.t_blocks[k], b.t_blocks[k]))
    for scope, ta, tb in pairs:
        diff = ta - tb
        fa = ta.ravel()
        fb = tb.ravel()
        cos = float(fa @ fb / (np.linalg.norm(fa) * np.linalg.norm(fb)))
        js = float(np.mean([_js_divergence(ta[i], tb[i]) for i in range(N_CATEGORIES)]))
        rows.append(KernelDistanceRow(scope=scope,
                                      frobenius=float(np.linalg.norm(diff)),
                                      cosine=cos, mean_js=js))
    return rows


def first_event_compliance(log: SimLog, s_ipf: HourCategoryMatrix) -> float:
    """Relative Frobenius gap between the simulated first-event (hour,
    category) distribution and the normalized start target."""
    starts, _ends = log.chain_bounds()
    if starts.shape[0] == 0:
        raise ValidationError("empty log")
    f = np.zeros((N_HOURS, N_CATEGORIES))
    np.add.at(f, (log.hour[starts], log.category[starts]), 1.0)
    f /= f.sum()
    tgt = s_ipf.m / s_ipf.total()
    return float(np.linalg.norm(f - tgt) / np.linalg.norm(tgt))


def hit_rate(lons, lats, inventory: PoiInventory, radius_m: float = 150.0) -> float:
    """Share of points with some inventory POI within radius_m."""
    lons = np.ascontiguousarray(lons, dtype=np.float64)
    lats = np.ascontiguousarray(lats, dtype=np.float64)
    if lons.shape[0] == 0:
        raise ValidationError("no points given")
    out = np.zeros(lons.shape[0], dtype=np.uint8)
    hits = _kernels._hit_flags(lons, lats, inventory.lon, inventory.lat,
                               float(radius_m), out)
    return float(hits / lons.shape[0])


@dataclass
class SpatialDiff:
    grid: GridSpec
    diff: np.ndarray
    oob_a: float
    oob_b: float


def spatial_diff(log_a: SimLog, log_b: SimLog, grid: GridSpec,
                 mode: str = "EDM") -> SpatialDiff:
    """Cellwise difference of per-map normalized densities, b minus a."""
    if mode not in ("ES", "EDM"):
        raise ValidationError(f"unknown mode {mode!r}")

    def density(log):
        w = log.dwell_min if mode == "EDM" else None
        g, oob = grid.accumulate(log.lon, log.lat, w)
        tot = g.sum()
        return (g / tot if tot > 0 else g), oob

    da, oa = density(log_a)
    db, ob = density(log_b)
    return SpatialDiff(grid=grid, diff=db - da, oob_a=oa, oob_b=ob)
