"""Geographic primitives: haversine distance, exact category-segmented
neighbor queries over a POI inventory, and a local analysis grid."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from ._kernels import EARTH_RADIUS_M, _haversine
from .taxonomy import N_CATEGORIES, PoiInventory, ValidationError

METERS_PER_DEGREE = EARTH_RADIUS_M * np.pi / 180.0


def haversine_m(lon1, lat1, lon2, lat2):
    """Great-circle distance in meters; accepts scalars or broadcastable arrays."""
    lon1 = np.asarray(lon1, dtype=np.float64)
    lat1 = np.asarray(lat1, dtype=np.float64)
    lon2 = np.asarray(lon2, dtype=np.float64)
    lat2 = np.asarray(lat2, dtype=np.float64)
    if lon1.ndim == 0 and lat1.ndim == 0 and lon2.ndim == 0 and lat2.ndim == 0:
        return _haversine(float(lon1), float(lat1), float(lon2), float(lat2))
    rl1 = np.radians(lat1)
    rl2 = np.radians(lat2)
    sa = np.sin((rl2 - rl1) * 0.5)
    sb = np.sin(np.radians(lon2 - lon1) * 0.5)
    a = np.clip(sa * sa + np.cos(rl1) * np.cos(rl2) * sb * sb, 0.0, 1.0)
    return 2.0 * EARTH_RADIUS_M * np.arcsin(np.sqrt(a))


class CategoryIndex:
    """Exact nearest-neighbor queries against an inventory, whole or per category.

    POIs are rearranged into contiguous per-category segments (stable on
    poi_id), so a category query is a linear scan of one slice.  Results are
    sorted ascending by distance with ties broken by poi_id; this relies on
    stable sorting over the poi_id-ordered segments.
    """

    def __init__(self, inventory: PoiInventory):
        if len(inventory) == 0:
            raise ValidationError("cannot index an empty inventory")
        self.inventory = inventory
        order = np.argsort(inventory.cat, kind="stable")
        self.seg_lon = inventory.lon[order].copy()
        self.seg_lat = inventory.lat[order].copy()
        self.seg_glob = order.astype(np.int64)
        counts = np.bincount(inventory.cat, minlength=N_CATEGORIES)
        self.cat_starts = np.zeros(N_CATEGORIES + 1, dtype=np.int64)
        np.cumsum(counts, out=self.cat_starts[1:])
        for a in (self.seg_lon, self.seg_lat, self.seg_glob, self.cat_starts):
            a.setflags(write=False)

    def category_count(self, category: int) -> int:
        return int(self.cat_starts[category + 1] - self.cat_starts[category])

    def _slice_for(self, category):
        if category is None:
            # global arrays are already poi_id-ordered
            return self.inventory.lon, self.inventory.lat, None, 0, len(self.inventory)
        c = int(category)
        if not 0 <= c < N_CATEGORIES:
            raise ValidationError(f"category index {c} out of range")
        return self.seg_lon, self.seg_lat, self.seg_glob, int(self.cat_starts[c]), int(self.cat_starts[c + 1])

    def query_knn(self, lon: float, lat: float, k: int, category=None):
        """k exact nearest POIs; returns (global indices, distances)."""
        if k < 1:
            raise ValidationError("k must be >= 1")
        lons, lats, glob, lo, hi = self._slice_for(category)
        out_idx = np.empty(max(hi - lo, 1), dtype=np.int64)
        out_dist = np.empty(max(hi - lo, 1), dtype=np.float64)
        cnt = _kernels._knn_scan(lons, lats, lo, hi, float(lon), float(lat),
                                 int(k), out_idx, out_dist)
        idx = out_idx[:cnt]
        if glob is not None:
            idx = glob[idx]
        return idx.copy(), out_dist[:cnt].copy()

    def query_radius(self, lon: float, lat: float, radius_m: float, category=None):
        """All POIs within radius_m, ascending by distance (ties by poi_id)."""
        if radius_m <= 0:
            raise ValidationError("radius_m must be > 0")
        lons, lats, glob, lo, hi = self._slice_for(category)
        out_idx = np.empty(max(hi - lo, 1), dtype=np.int64)
        out_dist = np.empty(max(hi - lo, 1), dtype=np.float64)
        cnt = _kernels._radius_scan(lons, lats, lo, hi, float(lon), float(lat),
                                    float(radius_m), out_idx, out_dist)
        idx = out_idx[:cnt]
        dist = out_dist[:cnt]
        # scan emits poi_id order; stable sort on distance keeps that for ties
        order = np.argsort(dist, kind="mergesort")
        idx = idx[order]
        dist = dist[order]
        if glob is not None:
            idx = glob[idx]
        return idx.copy(), dist.copy()

    def nearest(self, lon: float, lat: float, category=None):
        """(global index, distance) of the single nearest POI."""
        lons, lats, glob, lo, hi = self._slice_for(category)
        if hi - lo == 0:
            return -1, float("inf")
        best, bd = _kernels._nearest_scan(lons, lats, lo, hi, float(lon), float(lat))
        if glob is not None:
            best = int(glob[best])
        return int(best), float(bd)

    def build_knn_tables(self, k: int):
        """Precompute per-(POI, category) KNN rows used by the simulator.

        Returns (idx (n,10,k) global indices, dist (n,10,k), cnt (n,10)).
        """
        n = len(self.inventory)
        knn_idx = np.zeros((n, N_CATEGORIES, k), dtype=np.int64)
        knn_dist = np.zeros((n, N_CATEGORIES, k), dtype=np.float64)
        knn_cnt = np.zeros((n, N_CATEGORIES), dtype=np.int64)
        _kernels._build_knn_tables(self.seg_lon, self.seg_lat, self.seg_glob,
                                   self.cat_starts, self.inventory.lon,
                                   self.inventory.lat, int(k),
                                   knn_idx, knn_dist, knn_cnt)
        return knn_idx, knn_dist, knn_cnt


@dataclass(frozen=True)
class GridSpec:
    """Equirectangular local grid anchored at a southwest origin.

    Cells are half-open: a point lands in cell (floor(x/cell), floor(y/cell))
    with x, y its eastward/northward offset in meters.  Longitude is scaled
    by cos(origin latitude).
    """

    lon0: float
    lat0: float
    cell_m: float
    nx: int
    ny: int

    def __post_init__(self):
        if self.cell_m <= 0:
            raise ValidationError("cell_m must be > 0")
        if self.nx < 1 or self.ny < 1:
            raise ValidationError("grid must have at least one cell per axis")

    @classmethod
    def from_points(cls, lons, lats, cell_m: float = 250.0, pad_m: float = 0.0):
        lons = np.asarray(lons, dtype=np.float64)
        lats = np.asarray(lats, dtype=np.float64)
        if lons.size == 0:
            raise ValidationError("cannot build a grid from zero points")
        kx = METERS_PER_DEGREE * np.cos(np.radians(np.min(lats)))
        lon0 = float(np.min(lons) - pad_m / kx)
        lat0 = float(np.min(lats) - pad_m / METERS_PER_DEGREE)
        kx0 = METERS_PER_DEGREE * np.cos(np.radians(lat0))
        xmax = (np.max(lons) - lon0) * kx0 + pad_m
        ymax = (np.max(lats) - lat0) * METERS_PER_DEGREE + pad_m
        nx = int(np.floor(xmax / cell_m)) + 1
        ny = int(np.floor(ymax / cell_m)) + 1
        return cls(lon0=lon0, lat0=lat0, cell_m=float(cell_m), nx=nx, ny=ny)

    def cell_of(self, lon, lat):
        """(ix, iy) arrays; may fall outside [0,nx) x [0,ny)."""
        lon = np.asarray(lon, dtype=np.float64)
        lat = np.asarray(lat, dtype=np.float64)
        kx = METERS_PER_DEGREE * np.cos(np.radians(self.lat0))
        x = (lon - self.lon0) * kx
        y = (lat - self.lat0) * METERS_PER_DEGREE
        ix = np.floor(x / self.cell_m).astype(np.int64)
        iy = np.floor(y / self.cell_m).astype(np.int64)
        return ix, iy

    def in_bounds(self, ix, iy):
        return (ix >= 0) & (ix < self.nx) & (iy >= 0) & (iy < self.ny)

    def accumulate(self, lons, lats, weights=None):
        """Sum weights into cells; returns ((ny, nx) grid, out-of-bounds weight)."""
        lons = np.asarray(lons, dtype=np.float64)
        lats = np.asarray(lats, dtype=np.float64)
        if weights is None:
            weights = np.ones(lons.shape[0], dtype=np.float64)
        else:
            weights = np.asarray(weights, dtype=np.float64)
        ix, iy = self.cell_of(lons, lats)
        ok = self.in_bounds(ix, iy)
        grid = np.zeros((self.ny, self.nx), dtype=np.float64)
        np.add.at(grid, (iy[ok], ix[ok]), weights[ok])
        return grid, float(weights[~ok].sum())
