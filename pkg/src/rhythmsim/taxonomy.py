"""Core vocabulary: the fixed 10-category taxonomy, soft labels, stay events.

Everything downstream indexes categories by position, so the member order
here is load-bearing and must never be reordered.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np


class ValidationError(ValueError):
    """Raised when input data violates a documented contract."""


class Mid10(enum.IntEnum):
    """Mid-level place taxonomy. Values are array indices."""

    Accommodation = 0
    Transit = 1
    Retail = 2
    Services = 3
    Parking = 4
    SpaOnsen = 5
    FoodDrink = 6
    Culture = 7
    Sightseeing = 8
    NaturePark = 9

    @classmethod
    def from_label(cls, label: str) -> "Mid10":
        try:
            return cls[label]
        except KeyError:
            raise ValidationError(f"unknown category label {label!r}") from None


N_CATEGORIES = len(Mid10)
MID10_LABELS: tuple[str, ...] = tuple(m.name for m in Mid10)

N_HOURS = 24

# trailing part of the soft-label CSV header, in taxonomy order
SOFT_COLUMNS: tuple[str, ...] = tuple("p_" + name for name in MID10_LABELS)

_PROB_TOL = 1e-9


def _check_prob_vector(p: np.ndarray, what: str) -> None:
    if p.shape != (N_CATEGORIES,):
        raise ValidationError(f"{what}: expected {N_CATEGORIES} entries, got shape {p.shape}")
    if not np.all(np.isfinite(p)):
        raise ValidationError(f"{what}: non-finite entries")
    if np.any(p < 0):
        raise ValidationError(f"{what}: negative entries")
    s = float(p.sum())
    if abs(s - 1.0) > _PROB_TOL:
        raise ValidationError(f"{what}: entries sum to {s!r}, not 1")


@dataclass(frozen=True)
class SoftLabel:
    """Probability vector over the 10 categories."""

    p: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.p, dtype=np.float64)
        _check_prob_vector(p, "soft label")
        p = p.copy()
        p.setflags(write=False)
        object.__setattr__(self, "p", p)

    @classmethod
    def from_weights(cls, w) -> "SoftLabel":
        """Build from nonnegative weights, renormalizing to sum 1."""
        w = np.asarray(w, dtype=np.float64)
        if w.shape != (N_CATEGORIES,):
            raise ValidationError(f"weights: expected {N_CATEGORIES} entries, got shape {w.shape}")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise ValidationError("weights must be finite and nonnegative")
        total = float(w.sum())
        if total <= 0.0:
            raise ValidationError("weights sum to zero; cannot normalize")
        return cls(w / total)

    @classmethod
    def one_hot(cls, category: Mid10 | int) -> "SoftLabel":
        p = np.zeros(N_CATEGORIES)
        p[int(category)] = 1.0
        return cls(p)

    def argmax(self) -> Mid10:
        return Mid10(int(np.argmax(self.p)))


SECONDS_PER_DAY = 86400
# last admissible event end within a day: 23:59:59
DAY_END_CAP_S = 86399.0


def hour_of_seconds(start_s: float) -> int:
    if not (0.0 <= start_s < SECONDS_PER_DAY):
        raise ValidationError(f"start time {start_s!r} outside [0, 86400)")
    return int(start_s) // 3600


@dataclass(frozen=True)
class StayEvent:
    """One observed stay: a user at a place for a contiguous span of one day."""

    user_id: str
    day: str
    start_s: float
    dwell_min: float
    lon: float
    lat: float
    label: SoftLabel

    def __post_init__(self):
        if not (0.0 <= self.start_s < SECONDS_PER_DAY):
            raise ValidationError(f"event start {self.start_s!r} outside [0, 86400)")
        if not (self.dwell_min > 0 and np.isfinite(self.dwell_min)):
            raise ValidationError(f"dwell {self.dwell_min!r} must be positive and finite")
        if self.start_s + self.dwell_min * 60.0 > SECONDS_PER_DAY + 1e-6:
            raise ValidationError(
                f"event starting at {self.start_s}s with dwell {self.dwell_min}min crosses midnight"
            )
        if not (-180.0 <= self.lon <= 180.0) or not (-90.0 <= self.lat <= 90.0):
            raise ValidationError(f"coordinates ({self.lon}, {self.lat}) out of range")

    @property
    def hour(self) -> int:
        return int(self.start_s) // 3600

    @property
    def end_s(self) -> float:
        return self.start_s + self.dwell_min * 60.0


class StayCorpus:
    """Column-oriented collection of stay events, canonically ordered.

    Events are sorted by (user, day, start, input position) at construction,
    so person-day sequences can be recovered by contiguous slicing.  The
    original input order is not preserved.
    """

    __slots__ = ("user", "day", "start_s", "dwell_min", "lon", "lat", "P",
                 "_pd_codes", "_pd_keys")

    def __init__(self, user, day, start_s, dwell_min, lon, lat, P):
        user = np.asarray(user, dtype=object)
        day = np.asarray(day, dtype=object)
        start_s = np.asarray(start_s, dtype=np.float64)
        dwell_min = np.asarray(dwell_min, dtype=np.float64)
        lon = np.asarray(lon, dtype=np.float64)
        lat = np.asarray(lat, dtype=np.float64)
        P = np.asarray(P, dtype=np.float64)

        n = user.shape[0]
        for name, a in (("day", day), ("start_s", start_s), ("dwell_min", dwell_min),
                        ("lon", lon), ("lat", lat)):
            if a.shape != (n,):
                raise ValidationError(f"column {name} has shape {a.shape}, expected ({n},)")
        if P.shape != (n, N_CATEGORIES):
            raise ValidationError(f"label matrix has shape {P.shape}, expected ({n}, {N_CATEGORIES})")

        if n > 0:
            if not np.all(np.isfinite(start_s)) or np.any(start_s < 0) or np.any(start_s >= SECONDS_PER_DAY):
                raise ValidationError("event start times must lie in [0, 86400)")
            if not np.all(np.isfinite(dwell_min)) or np.any(dwell_min <= 0):
                raise ValidationError("dwell minutes must be positive and finite")
            if np.any(start_s + dwell_min * 60.0 > SECONDS_PER_DAY + 1e-6):
                bad = int(np.argmax(start_s + dwell_min * 60.0 > SECONDS_PER_DAY + 1e-6))
                raise ValidationError(f"event {bad} crosses the day boundary")
            if not np.all(np.isfinite(lon)) or np.any(np.abs(lon) > 180.0):
                raise ValidationError("longitudes out of range")
            if not np.all(np.isfinite(lat)) or np.any(np.abs(lat) > 90.0):
                raise ValidationError("latitudes out of range")
            if not np.all(np.isfinite(P)) or np.any(P < 0):
                raise ValidationError("label matrix must be finite and nonnegative")
            rs = P.sum(axis=1)
            if np.any(np.abs(rs - 1.0) > _PROB_TOL):
                bad = int(np.argmax(np.abs(rs - 1.0)))
                raise ValidationError(f"label row {bad} sums to {rs[bad]!r}, not 1")

        # canonical order: user, day, start, then stable on input position
        order = np.lexsort((start_s, day, user)) if n > 0 else np.arange(0)
        self.user = user[order]
        self.day = day[order]
        self.start_s = start_s[order]
        self.dwell_min = dwell_min[order]
        self.lon = lon[order]
        self.lat = lat[order]
        self.P = P[order]
        for a in (self.start_s, self.dwell_min, self.lon, self.lat, self.P):
            a.setflags(write=False)

        self._pd_codes = None
        self._pd_keys = None

    def __len__(self) -> int:
        return self.user.shape[0]

    @property
    def hour(self) -> np.ndarray:
        return (self.start_s.astype(np.int64) // 3600).astype(np.int64)

    def person_days(self):
        """Return (codes, keys): codes[i] indexes keys, keys are (user, day) pairs.

        Codes are nondecreasing along the canonical order, so each person-day
        is one contiguous run.
        """
        if self._pd_codes is None:
            n = len(self)
            if n == 0:
                self._pd_codes = np.zeros(0, dtype=np.int64)
                self._pd_keys = []
            else:
                new = np.ones(n, dtype=bool)
                new[1:] = (self.user[1:] != self.user[:-1]) | (self.day[1:] != self.day[:-1])
                self._pd_codes = np.cumsum(new) - 1
                idx = np.flatnonzero(new)
                self._pd_keys = [(self.user[i], self.day[i]) for i in idx]
        return self._pd_codes, self._pd_keys

    def users(self) -> list:
        seen, out = set(), []
        for u in self.user:
            if u not in seen:
                seen.add(u)
                out.append(u)
        return out

    def days(self) -> list:
        seen, out = set(), []
        for d in self.day:
            if d not in seen:
                seen.add(d)
                out.append(d)
        return sorted(out)

    def event(self, i: int) -> StayEvent:
        return StayEvent(
            user_id=self.user[i], day=self.day[i], start_s=float(self.start_s[i]),
            dwell_min=float(self.dwell_min[i]), lon=float(self.lon[i]),
            lat=float(self.lat[i]), label=SoftLabel(self.P[i]),
        )


@dataclass(frozen=True)
class Poi:
    """One point of interest with a hard category."""

    poi_id: str
    lon: float
    lat: float
    category: Mid10

    def __post_init__(self):
        if not self.poi_id:
            raise ValidationError("poi_id must be non-empty")
        if not (np.isfinite(self.lon) and -180.0 <= self.lon <= 180.0):
            raise ValidationError(f"poi {self.poi_id}: lon {self.lon!r} out of range")
        if not (np.isfinite(self.lat) and -90.0 <= self.lat <= 90.0):
            raise ValidationError(f"poi {self.poi_id}: lat {self.lat!r} out of range")


class PoiInventory:
    """Immutable set of POIs, sorted by poi_id, offering columnar views."""

    __slots__ = ("ids", "lon", "lat", "cat", "_id_to_idx")

    def __init__(self, pois):
        pois = sorted(pois, key=lambda p: p.poi_id)
        ids = [p.poi_id for p in pois]
        if len(set(ids)) != len(ids):
            dup = sorted({i for i in ids if ids.count(i) > 1})
            raise ValidationError(f"duplicate poi_id(s): {dup[:5]}")
        self.ids: list[str] = ids
        self.lon = np.array([p.lon for p in pois], dtype=np.float64)
        self.lat = np.array([p.lat for p in pois], dtype=np.float64)
        self.cat = np.array([int(p.category) for p in pois], dtype=np.int64)
        self.lon.setflags(write=False)
        self.lat.setflags(write=False)
        self.cat.setflags(write=False)
        self._id_to_idx = {pid: i for i, pid in enumerate(ids)}

    def __len__(self) -> int:
        return len(self.ids)

    def __contains__(self, poi_id: str) -> bool:
        return poi_id in self._id_to_idx

    def index_of(self, poi_id: str) -> int:
        try:
            return self._id_to_idx[poi_id]
        except KeyError:
            raise ValidationError(f"unknown poi_id {poi_id!r}") from None

    def poi(self, i: int) -> Poi:
        return Poi(self.ids[i], float(self.lon[i]), float(self.lat[i]), Mid10(int(self.cat[i])))

    def category_counts(self) -> np.ndarray:
        return np.bincount(self.cat, minlength=N_CATEGORIES).astype(np.int64)


MATRIX_KINDS = ("counts", "minutes", "target-mass", "probability")


@dataclass
class HourCategoryMatrix:
    """24 x 10 nonnegative matrix over (hour, category) with a semantic tag."""

    m: np.ndarray
    kind: str = "counts"

    def __post_init__(self):
        m = np.asarray(self.m, dtype=np.float64)
        if m.shape != (N_HOURS, N_CATEGORIES):
            raise ValidationError(f"matrix shape {m.shape}, expected ({N_HOURS}, {N_CATEGORIES})")
        if not np.all(np.isfinite(m)):
            raise ValidationError("matrix has non-finite entries")
        if np.any(m < 0):
            raise ValidationError("matrix has negative entries")
        if self.kind not in MATRIX_KINDS:
            raise ValidationError(f"unknown matrix kind {self.kind!r}")
        if self.kind == "probability":
            s = float(m.sum())
            if abs(s - 1.0) > 1e-6:
                raise ValidationError(f"probability matrix sums to {s!r}, not 1")
        self.m = m

    def total(self) -> float:
        return float(self.m.sum())

    def row_marginal(self) -> np.ndarray:
        """Mass per hour, length 24."""
        return self.m.sum(axis=1)

    def col_marginal(self) -> np.ndarray:
        """Mass per category, length 10."""
        return self.m.sum(axis=0)

    def normalized(self) -> "HourCategoryMatrix":
        t = self.total()
        if t <= 0:
            raise ValidationError("cannot normalize a zero matrix")
        return HourCategoryMatrix(self.m / t, kind="probability")
