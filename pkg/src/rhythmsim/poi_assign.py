"""Candidate retrieval, scoring, and sampling of concrete POIs for chain events.

The scoring chain lives in _kernels._score_into; this module prepares inputs
for it and exposes an inspectable object API.  The simulator consumes the
same packed arrays, so a score computed here matches the simulator bitwise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .config import SimConfig
from .estimation import PoiPriorTable
from .geo import CategoryIndex, haversine_m
from .taxonomy import MID10_LABELS, N_CATEGORIES, PoiInventory, ValidationError


@dataclass
class CandidateDistribution:
    """Scored candidate set for one placement decision."""

    idx: np.ndarray
    dist_m: np.ndarray
    probs: np.ndarray
    category: int

    def __post_init__(self):
        if not (self.idx.shape == self.dist_m.shape == self.probs.shape):
            raise ValidationError("candidate arrays must share one shape")
        if self.idx.shape[0] == 0:
            raise ValidationError("empty candidate set")

    def sample(self, u: float) -> int:
        """Global POI index at the first cumulative probability reaching u."""
        cum = np.cumsum(self.probs)
        return int(self.idx[_kernels._pick_from_cum(cum, float(u))])


class InventoryContext:
    """A POI inventory packed for simulation under one config.

    Carries the category index, per-POI scoring attributes (visitation mass,
    zone membership, change marks), start-POI samplers, and lazily built KNN
    tables.  Scenario runs construct one context per edited inventory.
    """

    def __init__(self, inventory: PoiInventory, cfg: SimConfig,
                 prior_table: PoiPriorTable | None = None,
                 changed_ids=()):
        if len(inventory) == 0:
            raise ValidationError("inventory is empty")
        counts = inventory.category_counts()
        missing = [MID10_LABELS[c] for c in range(N_CATEGORIES) if counts[c] == 0]
        if missing:
            raise ValidationError(
                f"inventory has no POIs in: {', '.join(missing)}; every category "
                f"must be populated for simulation")
        self.inventory = inventory
        self.cfg = cfg
        self.index = CategoryIndex(inventory)

        n = len(inventory)
        if prior_table is not None:
            if prior_table.poi_ids != inventory.ids:
                raise ValidationError("prior table is not aligned to this inventory")
            self.pi = prior_table.own_category_mass(inventory)
        else:
            self.pi = np.zeros(n)
        self.prior_table = prior_table

        zone_d = haversine_m(inventory.lon, inventory.lat,
                             cfg.zone_center_lon, cfg.zone_center_lat)
        self.in_zone = (zone_d <= cfg.yumoto_r_m).astype(np.uint8)

        self.changed = np.zeros(n, dtype=np.uint8)
        for pid in changed_ids:
            self.changed[inventory.index_of(pid)] = 1
        self.changed_ids = frozenset(changed_ids)

        # observed in-zone share per category, falling back to the overall
        # share; the zone correction only runs when some share is known
        self.use_zone = bool(cfg.use_yumoto_zone_boost)
        self.s_obs = np.full(N_CATEGORIES, 0.5)
        if prior_table is None:
            self.use_zone = False
        else:
            overall = prior_table.zone_share_overall
            if np.isnan(overall):
                self.use_zone = False
            else:
                cat = prior_table.zone_share_cat
                self.s_obs = np.where(np.isnan(cat), overall, cat)

        self._start_cum_flat = self._build_start_cums()
        self._knn_cache = {}

    def _build_start_cums(self) -> np.ndarray:
        """Per-category cumulative start-POI weights over segment order."""
        idx = self.index
        cfg = self.cfg
        n = len(self.inventory)
        flat = np.empty(n)
        pi_seg = self.pi[idx.seg_glob]
        for c in range(N_CATEGORIES):
            lo, hi = int(idx.cat_starts[c]), int(idx.cat_starts[c + 1])
            nc = hi - lo
            if nc == 0:
                continue
            if cfg.use_spatial_start:
                pw = (pi_seg[lo:hi] + cfg.prior_eps) ** cfg.start_beta
                w = (1.0 - cfg.start_lambda) / nc + cfg.start_lambda * pw / pw.sum()
            else:
                w = np.full(nc, 1.0 / nc)
            flat[lo:hi] = np.cumsum(w / w.sum())
        return flat

    def start_cums(self) -> np.ndarray:
        return self._start_cum_flat

    def knn_tables(self, k: int | None = None):
        k = self.cfg.poi_k_neigh if k is None else int(k)
        if k not in self._knn_cache:
            self._knn_cache[k] = self.index.build_knn_tables(k)
        return self._knn_cache[k]

    def sample_start_poi(self, category: int, u: float) -> int:
        """Global index of a start POI for the category, by the shared
        cumulative convention."""
        c = int(category)
        lo, hi = int(self.index.cat_starts[c]), int(self.index.cat_starts[c + 1])
        if hi == lo:
            raise ValidationError(f"no POIs in category {MID10_LABELS[c]}")
        sel = _kernels._pick_from_cum(self._start_cum_flat[lo:hi], float(u))
        return int(self.index.seg_glob[lo + sel])


def retrieve_candidates(ctx: InventoryContext, lon: float, lat: float,
                        category: int, explore: bool = False):
    """Candidate set around an anchor: the k nearest of the category, or in
    exploration mode everything within the exploration radius (falling back
    to the k nearest when that ring is empty).  Returns (idx, dist_m)."""
    cfg = ctx.cfg
    if explore:
        idx, dist = ctx.index.query_radius(lon, lat, cfg.poi_explore_radius_m,
                                           category=category)
        if idx.shape[0] > 0:
            return idx, dist
    return ctx.index.query_knn(lon, lat, cfg.poi_k_neigh, category=category)


def score_candidates(ctx: InventoryContext, idx: np.ndarray, dist_m: np.ndarray,
                     category: int) -> CandidateDistribution:
    """Run the scoring chain over a candidate set and normalize."""
    cfg = ctx.cfg
    nc = idx.shape[0]
    if nc == 0:
        raise ValidationError("cannot score an empty candidate set")
    inv = ctx.inventory
    cats = inv.cat[idx].astype(np.int64)
    pis = ctx.pi[idx]
    inzone = ctx.in_zone[idx]
    changed = ctx.changed[idx]
    probs = np.empty(nc)
    scratch = np.empty(nc)
    _kernels._score_into(
        nc, np.ascontiguousarray(dist_m, dtype=np.float64), cats, pis, inzone, changed,
        float(cfg.r_default), float(cfg.r_accom), float(cfg.poi_dist_power),
        float(cfg.poi_uniform_mix),
        bool(cfg.use_soft_spatial_prior), float(cfg.prior_lambda),
        float(cfg.prior_beta), float(cfg.prior_eps),
        ctx.use_zone, float(cfg.zone_lambda), float(cfg.zone_beta), ctx.s_obs,
        bool(cfg.use_scenario_boost), float(cfg.poi_boost_factor),
        probs, scratch)
    return CandidateDistribution(idx=np.asarray(idx, dtype=np.int64).copy(),
                                 dist_m=np.asarray(dist_m, dtype=np.float64).copy(),
                                 probs=probs, category=int(category))


def sample_poi(ctx: InventoryContext, lon: float, lat: float, category: int,
               u_select: float, explore: bool = False) -> int:
    """Retrieve, score, and pick in one call; returns a global POI index."""
    idx, dist = retrieve_candidates(ctx, lon, lat, category, explore=explore)
    return score_candidates(ctx, idx, dist, category).sample(u_select)


def distance_likelihood(dist_m, category: int, cfg: SimConfig):
    """The raw distance kernel exp(-(d/R)^power) before any blending; the
    scale radius depends on the candidate category."""
    d = np.asarray(dist_m, dtype=np.float64)
    r = cfg.r_accom if int(category) == 0 else cfg.r_default
    return np.exp(-((d / r) ** cfg.poi_dist_power))
