"""Estimation: turn a stay corpus into the model pieces the simulator consumes.

All estimators here are deterministic numpy code.  Only the optional
resampling mode of the dwell fitter draws random numbers, and it takes an
explicit seed.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .config import SimConfig
from .geo import haversine_m
from .taxonomy import (
    N_CATEGORIES,
    N_HOURS,
    HourCategoryMatrix,
    PoiInventory,
    StayCorpus,
    ValidationError,
)

SIGMA_FLOOR = 0.05
EM_MAX_ITER = 200
EM_TOL = 1e-8

ARTIFACTS_FORMAT = "rhythmsim-artifacts-v1"


class IpfError(ValidationError):
    """Iterative fitting failed to converge or the instance is infeasible."""


@dataclass
class IpfResult:
    matrix: np.ndarray
    iterations: int
    deviation: float
    trace: list


def fit_ipf(seed, row_marginals, col_marginals, tol: float = 1e-9,
            max_iter: int = 1000) -> IpfResult:
    """Scale a nonnegative seed to match both marginals by alternate raking.

    Zero seed cells stay zero.  Column marginals are rescaled to the row
    total up front (they must already agree within 1e-6 relative).  The
    convergence tolerance is read relative to total mass when that exceeds 1,
    absolute otherwise; the reported deviation is the max absolute marginal
    gap after the final sweep.
    """
    if isinstance(seed, HourCategoryMatrix):
        seed = seed.m
    seed = np.asarray(seed, dtype=np.float64)
    row_m = np.asarray(row_marginals, dtype=np.float64)
    col_m = np.asarray(col_marginals, dtype=np.float64)
    if seed.ndim != 2:
        raise ValidationError("seed must be a 2-d matrix")
    nr, ncol = seed.shape
    if row_m.shape != (nr,) or col_m.shape != (ncol,):
        raise ValidationError("marginal lengths do not match the seed shape")
    for name, a in (("seed", seed), ("row marginals", row_m), ("col marginals", col_m)):
        if not np.all(np.isfinite(a)) or np.any(a < 0):
            raise ValidationError(f"{name} must be finite and nonnegative")

    tr = float(row_m.sum())
    tc = float(col_m.sum())
    if abs(tr - tc) > 1e-6 * max(tr, tc, 1.0):
        raise IpfError(f"marginal totals disagree: rows {tr!r} vs cols {tc!r}")
    if tr == 0.0:
        return IpfResult(np.zeros_like(seed), 0, 0.0, [])
    col_m = col_m * (tr / tc)

    # cells in zero-marginal rows or columns can never carry mass
    eff = seed * np.outer(row_m > 0, col_m > 0)
    bad_rows = np.flatnonzero((row_m > 0) & (eff.sum(axis=1) == 0))
    if bad_rows.size:
        raise IpfError(f"row {int(bad_rows[0])} has positive target mass but no "
                       f"admissible seed cells")
    bad_cols = np.flatnonzero((col_m > 0) & (eff.sum(axis=0) == 0))
    if bad_cols.size:
        raise IpfError(f"column {int(bad_cols[0])} has positive target mass but no "
                       f"admissible seed cells")

    tol_eff = tol * max(1.0, tr)
    x = eff.copy()
    trace = []
    for it in range(1, max_iter + 1):
        rs = x.sum(axis=1)
        x *= np.where(rs > 0, row_m / np.where(rs > 0, rs, 1.0), 0.0)[:, None]
        cs = x.sum(axis=0)
        x *= np.where(cs > 0, col_m / np.where(cs > 0, cs, 1.0), 0.0)[None, :]
        dev = max(float(np.max(np.abs(x.sum(axis=1) - row_m))),
                  float(np.max(np.abs(x.sum(axis=0) - col_m))))
        trace.append(dev)
        if dev < tol_eff:
            return IpfResult(x, it, dev, trace)
    raise IpfError(f"no convergence in {max_iter} sweeps; deviation {trace[-1]!r}")


def fit_start_matrix(seed, row_marginals, col_marginals, tol=1e-9,
                     max_iter=1000) -> HourCategoryMatrix:
    """fit_ipf specialized to the 24x10 start matrix."""
    res = fit_ipf(seed, row_marginals, col_marginals, tol=tol, max_iter=max_iter)
    if res.matrix.shape != (N_HOURS, N_CATEGORIES):
        raise ValidationError("start matrix fitting requires a 24x10 seed")
    return HourCategoryMatrix(res.matrix, kind="target-mass")


@dataclass
class StartPriors:
    """Start-hour distribution and per-hour category conditionals."""

    p_h: np.ndarray
    p_c_given_h: np.ndarray

    def __post_init__(self):
        self.p_h = np.asarray(self.p_h, dtype=np.float64)
        self.p_c_given_h = np.asarray(self.p_c_given_h, dtype=np.float64)
        if self.p_h.shape != (N_HOURS,):
            raise ValidationError("p_h must have 24 entries")
        if self.p_c_given_h.shape != (N_HOURS, N_CATEGORIES):
            raise ValidationError("p_c_given_h must be 24x10")
        if abs(float(self.p_h.sum()) - 1.0) > 1e-9 or np.any(self.p_h < 0):
            raise ValidationError("p_h must be a probability vector")
        rs = self.p_c_given_h.sum(axis=1)
        if np.any(np.abs(rs - 1.0) > 1e-9) or np.any(self.p_c_given_h < 0):
            raise ValidationError("each p_c_given_h row must be a probability vector")


def derive_start_priors(s_ipf: HourCategoryMatrix) -> StartPriors:
    """Row sums give the hour distribution; rows normalize to conditionals.
    Hours with zero mass get a uniform conditional (they are never drawn)."""
    m = s_ipf.m
    total = float(m.sum())
    if total <= 0:
        raise ValidationError("start matrix has zero total mass")
    rows = m.sum(axis=1)
    p_h = rows / total
    cond = np.full((N_HOURS, N_CATEGORIES), 1.0 / N_CATEGORIES)
    pos = rows > 0
    cond[pos] = m[pos] / rows[pos, None]
    return StartPriors(p_h=p_h, p_c_given_h=cond)


@dataclass
class StopHazard:
    """Discrete end-of-day hazard: chance the chain ends at its hour-h event."""

    h: np.ndarray
    at_risk: np.ndarray
    ended: np.ndarray

    def __post_init__(self):
        self.h = np.asarray(self.h, dtype=np.float64)
        self.at_risk = np.asarray(self.at_risk, dtype=np.int64)
        self.ended = np.asarray(self.ended, dtype=np.int64)
        for name, a in (("h", self.h), ("at_risk", self.at_risk), ("ended", self.ended)):
            if a.shape != (N_HOURS,):
                raise ValidationError(f"{name} must have 24 entries")
        if np.any(self.h < 0) or np.any(self.h > 1):
            raise ValidationError("hazard values must lie in [0, 1]")
        if np.any(np.diff(self.at_risk) > 0):
            raise ValidationError("at-risk counts must be non-increasing by hour")

    def scaled(self, scale: float) -> np.ndarray:
        return np.clip(self.h * scale, 0.0, 1.0)


def estimate_stop_hazard(corpus: StayCorpus) -> StopHazard:
    """Kaplan-Meier style: per person-day, the hour of its last event; then
    H(h) = ended(h) / at_risk(h).  Hours past all support carry H = 1."""
    if len(corpus) == 0:
        raise ValidationError("cannot estimate a hazard from an empty corpus")
    codes, keys = corpus.person_days()
    hours = corpus.hour
    # canonical order puts the last event of each person-day at the run end
    last = np.flatnonzero(np.r_[codes[1:] != codes[:-1], True])
    h_max = hours[last]
    ended = np.bincount(h_max, minlength=N_HOURS).astype(np.int64)
    # at_risk(h) = person-days whose last event is at hour >= h
    at_risk = ended[::-1].cumsum()[::-1]
    h = np.ones(N_HOURS)
    pos = at_risk > 0
    h[pos] = ended[pos] / at_risk[pos]
    return StopHazard(h=h, at_risk=at_risk, ended=ended)


@dataclass
class TransitionKernels:
    """Soft-count category transition kernels, global and per time block."""

    alpha: float
    block_edges: tuple
    n_global: np.ndarray
    t_global: np.ndarray
    n_blocks: np.ndarray
    t_blocks: np.ndarray
    n_pairs: int

    def __post_init__(self):
        self.block_edges = tuple(int(e) for e in self.block_edges)
        nb = len(self.block_edges) - 1
        if self.n_blocks.shape != (nb, N_CATEGORIES, N_CATEGORIES):
            raise ValidationError("n_blocks shape does not match block_edges")
        for t in (self.t_global, *self.t_blocks):
            rs = t.sum(axis=1)
            if np.any(np.abs(rs - 1.0) > 1e-9) or np.any(t < 0):
                raise ValidationError("each kernel row must be a probability vector")

    def n_blocks_count(self) -> int:
        return len(self.block_edges) - 1

    def block_of(self, hour: int) -> int:
        for k in range(len(self.block_edges) - 1):
            if self.block_edges[k] <= hour < self.block_edges[k + 1]:
                return k
        raise ValidationError(f"hour {hour} outside block edges {self.block_edges}")

    def block_lookup(self) -> np.ndarray:
        lu = np.empty(N_HOURS, dtype=np.int64)
        for hh in range(N_HOURS):
            lu[hh] = self.block_of(hh)
        return lu


def _smooth_rows(n: np.ndarray, alpha: float) -> np.ndarray:
    t = n + alpha
    rs = t.sum(axis=-1)
    out = np.full_like(t, 1.0 / N_CATEGORIES)
    pos = rs > 0
    out[pos] = t[pos] / rs[pos][:, None]
    return out


def estimate_transition_kernels(corpus: StayCorpus, alpha: float,
                                block_edges) -> TransitionKernels:
    """Expected transition counts from consecutive soft labels.

    Each within-person-day pair adds the outer product of its two label
    vectors; pairs land in the time block of the earlier event's hour.
    """
    block_edges = tuple(int(e) for e in block_edges)
    nb = len(block_edges) - 1
    codes, _ = corpus.person_days()
    n = len(corpus)
    if n >= 2:
        same = codes[1:] == codes[:-1]
    else:
        same = np.zeros(0, dtype=bool)
    pt = corpus.P[:-1][same] if n >= 2 else np.zeros((0, N_CATEGORIES))
    pt1 = corpus.P[1:][same] if n >= 2 else np.zeros((0, N_CATEGORIES))
    ht = corpus.hour[:-1][same] if n >= 2 else np.zeros(0, dtype=np.int64)

    n_global = pt.T @ pt1
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
    bid = lu[ht]
    n_blocks = np.zeros((nb, N_CATEGORIES, N_CATEGORIES))
    for b in range(nb):
        sel = bid == b
        if np.any(sel):
            n_blocks[b] = pt[sel].T @ pt1[sel]

    return TransitionKernels(
        alpha=float(alpha), block_edges=block_edges,
        n_global=n_global, t_global=_smooth_rows(n_global, alpha),
        n_blocks=n_blocks, t_blocks=_smooth_rows(n_blocks, alpha),
        n_pairs=int(pt.shape[0]),
    )


@dataclass
class DwellParams:
    """Log-normal mixture over dwell minutes, components sorted by mean."""

    w: np.ndarray
    mu: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        self.w = np.asarray(self.w, dtype=np.float64)
        self.mu = np.asarray(self.mu, dtype=np.float64)
        self.sigma = np.asarray(self.sigma, dtype=np.float64)
        k = self.w.shape[0]
        if self.mu.shape != (k,) or self.sigma.shape != (k,):
            raise ValidationError("mixture parameter lengths disagree")
        if abs(float(self.w.sum()) - 1.0) > 1e-9 or np.any(self.w < 0):
            raise ValidationError("mixture weights must sum to 1")
        if np.any(self.sigma <= 0):
            raise ValidationError("mixture sigmas must be positive")
        if np.any(np.diff(self.mu) < 0):
            raise ValidationError("components must be sorted by ascending mean")

    def k(self) -> int:
        return self.w.shape[0]

    def log_moments(self):
        """(mean, variance) of the mixture in log space."""
        m = float(np.sum(self.w * self.mu))
        v = float(np.sum(self.w * (self.sigma ** 2 + self.mu ** 2)) - m * m)
        return m, v


def _weighted_quantile(x_sorted: np.ndarray, cumw: np.ndarray, q: float) -> float:
    target = q * cumw[-1]
    i = int(np.searchsorted(cumw, target, side="left"))
    if i >= x_sorted.shape[0]:
        i = x_sorted.shape[0] - 1
    return float(x_sorted[i])


def _weighted_em(x: np.ndarray, w: np.ndarray, k: int,
                 sigma_floor: float = SIGMA_FLOOR,
                 max_iter: int = EM_MAX_ITER, tol: float = EM_TOL) -> DwellParams:
    """EM for a 1-d Gaussian mixture under per-sample weights.

    Init: means at spread weighted percentiles, shared pooled sigma, equal
    weights.  Components returned sorted by mean.
    """
    W = float(w.sum())
    if W <= 0 or x.shape[0] == 0:
        raise ValidationError("cannot fit a mixture with zero total weight")

    mean0 = float(np.sum(w * x) / W)
    var0 = float(np.sum(w * (x - mean0) ** 2) / W)
    sig0 = max(sigma_floor, math.sqrt(max(var0, 0.0)))
    if k == 1:
        return DwellParams(w=np.ones(1), mu=np.array([mean0]), sigma=np.array([sig0]))

    order = np.argsort(x, kind="mergesort")
    xs = x[order]
    cumw = np.cumsum(w[order])
    mu = np.array([_weighted_quantile(xs, cumw, (2 * j + 1) / (2 * k)) for j in range(k)])
    sg = np.full(k, sig0)
    wk = np.full(k, 1.0 / k)

    ll_prev = -np.inf
    for _ in range(max_iter):
        lp = (np.log(wk)[None, :] - np.log(sg)[None, :]
              - 0.5 * ((x[:, None] - mu[None, :]) / sg[None, :]) ** 2
              - 0.5 * math.log(2.0 * math.pi))
        m = lp.max(axis=1)
        lse = m + np.log(np.exp(lp - m[:, None]).sum(axis=1))
        ll = float(np.sum(w * lse))
        r = np.exp(lp - lse[:, None])
        nk = (w[:, None] * r).sum(axis=0)
        ok = nk > 0
        new_mu = np.where(ok, (w[:, None] * r * x[:, None]).sum(axis=0) / np.where(ok, nk, 1.0), mu)
        var = (w[:, None] * r * (x[:, None] - new_mu[None, :]) ** 2).sum(axis=0) / np.where(ok, nk, 1.0)
        new_sg = np.where(ok, np.maximum(sigma_floor, np.sqrt(np.maximum(var, 0.0))), sg)
        mu, sg = new_mu, new_sg
        wk = nk / W
        wk = np.maximum(wk, 0.0)
        wk = wk / wk.sum()
        if abs(ll - ll_prev) < tol:
            break
        ll_prev = ll

    order = np.argsort(mu, kind="mergesort")
    wk, mu, sg = wk[order], mu[order], sg[order]
    return DwellParams(w=wk / wk.sum(), mu=mu, sigma=sg)


def _shrink(local: DwellParams, parent: DwellParams, s: float) -> DwellParams:
    """Convex pull of each sorted component toward its parent counterpart."""
    w = (1.0 - s) * local.w + s * parent.w
    mu = (1.0 - s) * local.mu + s * parent.mu
    sg = np.maximum(SIGMA_FLOOR, (1.0 - s) * local.sigma + s * parent.sigma)
    order = np.argsort(mu, kind="mergesort")
    return DwellParams(w=(w / w.sum())[order], mu=mu[order], sigma=sg[order])


@dataclass
class DwellModel:
    """Dwell mixtures at three scopes: per (hour, category), per category,
    and overall; lookups fall back outward."""

    k: int
    threshold: float
    shrink: float
    overall: DwellParams
    category: list
    local: dict
    w_eff: np.ndarray

    def resolve(self, hour: int, cat: int):
        """(params, scope) where scope names which level supplied them."""
        p = self.local.get((hour, cat))
        if p is not None:
            return p, "local"
        if self.category[cat] is not None:
            return self.category[cat], "category"
        return self.overall, "overall"

    def dense(self):
        """Resolved (w, mu, sigma) tables of shape (24, 10, k)."""
        w = np.empty((N_HOURS, N_CATEGORIES, self.k))
        mu = np.empty((N_HOURS, N_CATEGORIES, self.k))
        sg = np.empty((N_HOURS, N_CATEGORIES, self.k))
        for hh in range(N_HOURS):
            for c in range(N_CATEGORIES):
                p, _ = self.resolve(hh, c)
                w[hh, c] = p.w
                mu[hh, c] = p.mu
                sg[hh, c] = p.sigma
        return w, mu, sg


def fit_dwell_models(corpus: StayCorpus, cfg: SimConfig, mode: str = "em",
                     resample_seed=None) -> DwellModel:
    """Fit log-dwell mixtures at all scopes with soft-label weights.

    A cell or category is fitted only when its effective soft mass reaches
    cfg.dwell_min_effw_hour; fitted cells shrink toward their category fit.
    mode="resample" replaces weighted EM with EM on a weighted bootstrap
    (seeded), as a robustness cross-check.
    """
    if len(corpus) == 0:
        raise ValidationError("cannot fit dwell models on an empty corpus")
    if mode not in ("em", "resample"):
        raise ValidationError(f"unknown dwell fit mode {mode!r}")
    k = cfg.gmm_components if cfg.use_dwell_mixture else 1
    x = np.log(corpus.dwell_min)
    hours = corpus.hour

    def fit(xs, ws):
        if mode == "em":
            return _weighted_em(xs, ws, k)
        rng = np.random.default_rng(resample_seed)
        p = ws / ws.sum()
        idx = rng.choice(xs.shape[0], size=xs.shape[0], p=p)
        return _weighted_em(xs[idx], np.ones(idx.shape[0]), k)

    overall = fit(x, np.ones(len(corpus)))

    category = []
    for c in range(N_CATEGORIES):
        wc = corpus.P[:, c]
        if float(wc.sum()) >= cfg.dwell_min_effw_hour:
            category.append(fit(x, wc))
        else:
            category.append(None)

    w_eff = np.zeros((N_HOURS, N_CATEGORIES))
    local = {}
    for hh in range(N_HOURS):
        sel = hours == hh
        if not np.any(sel):
            continue
        xs = x[sel]
        for c in range(N_CATEGORIES):
            ws = corpus.P[sel, c]
            w_eff[hh, c] = float(ws.sum())
            if w_eff[hh, c] >= cfg.dwell_min_effw_hour:
                raw = fit(xs, ws)
                local[(hh, c)] = _shrink(raw, category[c], cfg.dwell_shrink)

    return DwellModel(k=k, threshold=cfg.dwell_min_effw_hour, shrink=cfg.dwell_shrink,
                      overall=overall, category=category, local=local, w_eff=w_eff)


@dataclass
class PoiPriorTable:
    """Observed soft visitation mass accumulated onto POIs by nearest match."""

    poi_ids: list
    counters: np.ndarray
    matched: int
    dropped: int
    zone_share_overall: float
    zone_share_cat: np.ndarray

    def __post_init__(self):
        self.counters = np.asarray(self.counters, dtype=np.float64)
        if self.counters.shape != (len(self.poi_ids), N_CATEGORIES):
            raise ValidationError("counter shape does not match poi_ids")
        if np.any(self.counters < 0) or not np.all(np.isfinite(self.counters)):
            raise ValidationError("counters must be finite and nonnegative")

    def own_category_mass(self, inventory: PoiInventory) -> np.ndarray:
        """pi_i: accumulated mass of each POI's own category, aligned to inventory."""
        if self.poi_ids != inventory.ids:
            raise ValidationError("prior table is not aligned to this inventory")
        n = len(inventory)
        return self.counters[np.arange(n), inventory.cat]

    def reindexed(self, new_ids: list) -> "PoiPriorTable":
        """Rows for new_ids; ids unseen before get zero counters."""
        pos = {pid: i for i, pid in enumerate(self.poi_ids)}
        out = np.zeros((len(new_ids), N_CATEGORIES))
        for j, pid in enumerate(new_ids):
            i = pos.get(pid)
            if i is not None:
                out[j] = self.counters[i]
        return PoiPriorTable(poi_ids=list(new_ids), counters=out,
                             matched=self.matched, dropped=self.dropped,
                             zone_share_overall=self.zone_share_overall,
                             zone_share_cat=self.zone_share_cat.copy())


def accumulate_weak_prior(corpus: StayCorpus, inventory: PoiInventory,
                          cfg: SimConfig) -> PoiPriorTable:
    """Snap each event to its nearest POI within the match radius and add its
    soft label there.  Also records in-zone visitation shares."""
    n_ev = len(corpus)
    n_poi = len(inventory)
    if n_poi == 0:
        raise ValidationError("cannot accumulate a prior onto an empty inventory")
    idx = np.empty(n_ev, dtype=np.int64)
    dist = np.empty(n_ev, dtype=np.float64)
    matched = int(_kernels._match_events(corpus.lon, corpus.lat,
                                         inventory.lon, inventory.lat,
                                         float(cfg.prior_match_radius_m), idx, dist))
    counters = np.zeros((n_poi, N_CATEGORIES))
    hit = idx >= 0
    if np.any(hit):
        np.add.at(counters, idx[hit], corpus.P[hit])

    zone_d = haversine_m(inventory.lon, inventory.lat,
                         cfg.zone_center_lon, cfg.zone_center_lat)
    in_zone = zone_d <= cfg.yumoto_r_m
    cat_mass = corpus.P[hit].sum(axis=0) if np.any(hit) else np.zeros(N_CATEGORIES)
    zone_hit = hit.copy()
    zone_hit[hit] = in_zone[idx[hit]]
    zone_mass = corpus.P[zone_hit].sum(axis=0) if np.any(zone_hit) else np.zeros(N_CATEGORIES)

    share_cat = np.full(N_CATEGORIES, np.nan)
    pos = cat_mass > 0
    share_cat[pos] = zone_mass[pos] / cat_mass[pos]
    tot = float(cat_mass.sum())
    share_all = float(zone_mass.sum() / tot) if tot > 0 else float("nan")

    return PoiPriorTable(poi_ids=list(inventory.ids), counters=counters,
                         matched=matched, dropped=n_ev - matched,
                         zone_share_overall=share_all, zone_share_cat=share_cat)


def _params_to_dict(p: DwellParams) -> dict:
    return {"w": p.w.tolist(), "mu": p.mu.tolist(), "sigma": p.sigma.tolist()}


def _params_from_dict(d: dict) -> DwellParams:
    return DwellParams(w=np.array(d["w"]), mu=np.array(d["mu"]),
                       sigma=np.array(d["sigma"]))


@dataclass
class RhythmArtifacts:
    """Everything the simulator needs, plus the config it was built under."""

    config: SimConfig
    s_ipf: HourCategoryMatrix
    start_priors: StartPriors
    stop_hazard: StopHazard
    kernels: TransitionKernels
    dwell: DwellModel
    prior_table: PoiPriorTable
    fingerprint: str = ""

    def payload_dict(self) -> dict:
        d = {
            "format": ARTIFACTS_FORMAT,
            "config": self.config.to_dict(),
            "s_ipf": self.s_ipf.m.tolist(),
            "start_priors": {
                "p_h": self.start_priors.p_h.tolist(),
                "p_c_given_h": self.start_priors.p_c_given_h.tolist(),
            },
            "stop_hazard": {
                "h": self.stop_hazard.h.tolist(),
                "at_risk": self.stop_hazard.at_risk.tolist(),
                "ended": self.stop_hazard.ended.tolist(),
            },
            "kernels": {
                "alpha": self.kernels.alpha,
                "block_edges": list(self.kernels.block_edges),
                "n_global": self.kernels.n_global.tolist(),
                "t_global": self.kernels.t_global.tolist(),
                "n_blocks": self.kernels.n_blocks.tolist(),
                "t_blocks": self.kernels.t_blocks.tolist(),
                "n_pairs": self.kernels.n_pairs,
            },
            "dwell": {
                "k": self.dwell.k,
                "threshold": self.dwell.threshold,
                "shrink": self.dwell.shrink,
                "overall": _params_to_dict(self.dwell.overall),
                "category": [None if p is None else _params_to_dict(p)
                             for p in self.dwell.category],
                "local": {f"{h}:{c}": _params_to_dict(p)
                          for (h, c), p in sorted(self.dwell.local.items())},
                "w_eff": self.dwell.w_eff.tolist(),
            },
            "prior_table": {
                "poi_ids": list(self.prior_table.poi_ids),
                "counters": self.prior_table.counters.tolist(),
                "matched": self.prior_table.matched,
                "dropped": self.prior_table.dropped,
                "zone_share_overall": _nan_none(self.prior_table.zone_share_overall),
                "zone_share_cat": [_nan_none(v) for v in self.prior_table.zone_share_cat],
            },
        }
        return d

    def to_json(self, indent=2) -> str:
        d = self.payload_dict()
        d["fingerprint"] = self.fingerprint
        return json.dumps(d, indent=indent, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RhythmArtifacts":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as e:
            raise ValidationError(f"artifacts are not valid JSON: {e}") from None
        if not isinstance(d, dict) or d.get("format") != ARTIFACTS_FORMAT:
            raise ValidationError(f"unrecognized artifacts format "
                                  f"{d.get('format') if isinstance(d, dict) else None!r}")
        cfg = SimConfig.from_dict(d["config"])
        dw = d["dwell"]
        local = {}
        for key, pd in dw["local"].items():
            hs, cs = key.split(":")
            local[(int(hs), int(cs))] = _params_from_dict(pd)
        pt = d["prior_table"]
        art = cls(
            config=cfg,
            s_ipf=HourCategoryMatrix(np.array(d["s_ipf"]), kind="target-mass"),
            start_priors=StartPriors(p_h=np.array(d["start_priors"]["p_h"]),
                                     p_c_given_h=np.array(d["start_priors"]["p_c_given_h"])),
            stop_hazard=StopHazard(h=np.array(d["stop_hazard"]["h"]),
                                   at_risk=np.array(d["stop_hazard"]["at_risk"]),
                                   ended=np.array(d["stop_hazard"]["ended"])),
            kernels=TransitionKernels(
                alpha=float(d["kernels"]["alpha"]),
                block_edges=tuple(d["kernels"]["block_edges"]),
                n_global=np.array(d["kernels"]["n_global"]),
                t_global=np.array(d["kernels"]["t_global"]),
                n_blocks=np.array(d["kernels"]["n_blocks"]),
                t_blocks=np.array(d["kernels"]["t_blocks"]),
                n_pairs=int(d["kernels"]["n_pairs"])),
            dwell=DwellModel(k=int(dw["k"]), threshold=float(dw["threshold"]),
                             shrink=float(dw["shrink"]),
                             overall=_params_from_dict(dw["overall"]),
                             category=[None if p is None else _params_from_dict(p)
                                       for p in dw["category"]],
                             local=local, w_eff=np.array(dw["w_eff"])),
            prior_table=PoiPriorTable(
                poi_ids=list(pt["poi_ids"]),
                counters=np.array(pt["counters"]) if pt["poi_ids"] else
                np.zeros((0, N_CATEGORIES)),
                matched=int(pt["matched"]), dropped=int(pt["dropped"]),
                zone_share_overall=_none_nan(pt["zone_share_overall"]),
                zone_share_cat=np.array([_none_nan(v) for v in pt["zone_share_cat"]])),
            fingerprint=str(d.get("fingerprint", "")),
        )
        expect = _fingerprint_of(art)
        if art.fingerprint and art.fingerprint != expect:
            raise ValidationError("artifact fingerprint mismatch; file corrupted "
                                  "or edited")
        art.fingerprint = expect
        return art


def _nan_none(v):
    v = float(v)
    return None if math.isnan(v) else v


def _none_nan(v):
    return float("nan") if v is None else float(v)


def _fingerprint_of(art: RhythmArtifacts) -> str:
    canon = json.dumps(art.payload_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def bundle_artifacts(config: SimConfig, s_ipf: HourCategoryMatrix,
                     start_priors: StartPriors, stop_hazard: StopHazard,
                     kernels: TransitionKernels, dwell: DwellModel,
                     prior_table: PoiPriorTable) -> RhythmArtifacts:
    """Assemble and cross-check the full artifact bundle, then fingerprint it."""
    if kernels.block_edges != config.block_edges:
        raise ValidationError("kernel block edges disagree with the config")
    if kernels.alpha != config.alpha:
        raise ValidationError("kernel smoothing disagrees with the config")
    want_k = config.gmm_components if config.use_dwell_mixture else 1
    if dwell.k != want_k:
        raise ValidationError(f"dwell model has {dwell.k} components, config wants {want_k}")
    if s_ipf.total() <= 0:
        raise ValidationError("start matrix has zero mass")
    art = RhythmArtifacts(config=config, s_ipf=s_ipf, start_priors=start_priors,
                          stop_hazard=stop_hazard, kernels=kernels, dwell=dwell,
                          prior_table=prior_table)
    art.fingerprint = _fingerprint_of(art)
    return art


def fit_artifacts(corpus: StayCorpus, inventory: PoiInventory, cfg: SimConfig,
                  s_ipf: HourCategoryMatrix | None = None,
                  ipf_smoothing: float = 1e-6) -> RhythmArtifacts:
    """One-call estimation pipeline.

    When no start matrix is supplied, the observed soft first-event counts
    (plus a uniform ipf_smoothing floor) are raked to their own marginals,
    which leaves them essentially unchanged but validates feasibility.
    """
    if s_ipf is None:
        codes, _ = corpus.person_days()
        if len(corpus) == 0:
            raise ValidationError("cannot fit on an empty corpus")
        first = np.flatnonzero(np.r_[True, codes[1:] != codes[:-1]])
        seed = np.zeros((N_HOURS, N_CATEGORIES))
        np.add.at(seed, corpus.hour[first], corpus.P[first])
        seed += ipf_smoothing
        s_ipf = fit_start_matrix(seed, seed.sum(axis=1), seed.sum(axis=0))
    priors = derive_start_priors(s_ipf)
    hazard = estimate_stop_hazard(corpus)
    kernels = estimate_transition_kernels(corpus, cfg.alpha, cfg.block_edges)
    dwell = fit_dwell_models(corpus, cfg)
    prior = accumulate_weak_prior(corpus, inventory, cfg)
    return bundle_artifacts(cfg, s_ipf, priors, hazard, kernels, dwell, prior)
