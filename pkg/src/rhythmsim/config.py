"""Simulation configuration: one flat record of every knob, with validation,
JSON round-trip, and a content fingerprint used to stamp downstream outputs."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass

from .taxonomy import N_HOURS, ValidationError

# default zone anchor: the hot-spring gateway cluster the sample corpora
# are centered on
DEFAULT_ZONE_LON = 139.1077
DEFAULT_ZONE_LAT = 35.2321


@dataclass(frozen=True)
class SimConfig:
    # population and replication
    sim_users_n: int = 5000
    mc_runs: int = 50
    persondays_per_user: int = 1
    max_events: int = 48
    random_seed: int = 20251209
    reset_seed_per_scenario: bool = True

    # start state
    use_spatial_start: bool = True
    start_lambda: float = 0.70
    start_beta: float = 0.70

    # stopping
    use_stop_hazard: bool = True
    hazard_scale: float = 1.0

    # transitions
    use_t_block: bool = True
    block_edges: tuple = (0, 5, 8, 11, 14, 18, 24)
    alpha: float = 0.5

    # dwell
    use_dwell_mixture: bool = True
    gmm_components: int = 2
    dwell_min_effw_hour: float = 60.0
    dwell_shrink: float = 0.5
    min_dwell_min: float = 5.0

    # POI candidate retrieval and scoring
    poi_k_neigh: int = 40
    poi_explore_eps: float = 0.02
    poi_explore_radius_m: float = 3000.0
    r_default: float = 100.0
    r_accom: float = 120.0
    poi_dist_power: float = 0.75
    poi_uniform_mix: float = 0.06

    # observed-visitation prior
    use_soft_spatial_prior: bool = True
    prior_match_radius_m: float = 80.0
    prior_lambda: float = 0.60
    prior_beta: float = 0.60
    prior_eps: float = 1e-12

    # scenario emphasis
    use_scenario_boost: bool = True
    poi_boost_factor: float = 3.0

    # zone calibration
    use_yumoto_zone_boost: bool = True
    yumoto_r_m: float = 3000.0
    zone_lambda: float = 0.50
    zone_beta: float = 0.50
    zone_center_lon: float = DEFAULT_ZONE_LON
    zone_center_lat: float = DEFAULT_ZONE_LAT

    def __post_init__(self):
        object.__setattr__(self, "block_edges", tuple(int(e) for e in self.block_edges))
        validate_config(self)

    def n_blocks(self) -> int:
        return len(self.block_edges) - 1

    def block_of_hour(self, hour: int) -> int:
        """Index of the half-open block [e_k, e_{k+1}) containing the hour."""
        edges = self.block_edges
        for k in range(len(edges) - 1):
            if edges[k] <= hour < edges[k + 1]:
                return k
        raise ValidationError(f"hour {hour} outside block edges {edges}")

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["block_edges"] = list(self.block_edges)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SimConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        extra = set(d) - known
        if extra:
            raise ValidationError(f"unknown config field(s): {sorted(extra)}")
        return cls(**d)

    def to_json(self, indent=2) -> str:
        return json.dumps(self.to_dict(), indent=indent, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "SimConfig":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as e:
            raise ValidationError(f"config is not valid JSON: {e}") from None
        if not isinstance(d, dict):
            raise ValidationError("config JSON must be an object")
        return cls.from_dict(d)

    def fingerprint(self) -> str:
        """sha256 over the canonical JSON form; stable across field order."""
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()

    def replace(self, **kw) -> "SimConfig":
        return dataclasses.replace(self, **kw)


def _require(cond: bool, msg: str):
    if not cond:
        raise ValidationError(f"config: {msg}")


def validate_config(cfg: SimConfig) -> None:
    _require(cfg.sim_users_n >= 1, "sim_users_n must be >= 1")
    _require(cfg.mc_runs >= 1, "mc_runs must be >= 1")
    _require(cfg.persondays_per_user >= 1, "persondays_per_user must be >= 1")
    _require(cfg.max_events >= 1, "max_events must be >= 1")
    _require(cfg.random_seed >= 0, "random_seed must be nonnegative")

    edges = cfg.block_edges
    _require(len(edges) >= 2, "block_edges needs at least two entries")
    _require(edges[0] == 0 and edges[-1] == N_HOURS, "block_edges must start at 0 and end at 24")
    _require(all(a < b for a, b in zip(edges, edges[1:])), "block_edges must be strictly increasing")

    _require(cfg.alpha >= 0, "alpha must be >= 0")
    _require(cfg.hazard_scale > 0, "hazard_scale must be > 0")

    _require(cfg.gmm_components >= 1, "gmm_components must be >= 1")
    _require(cfg.dwell_min_effw_hour >= 0, "dwell_min_effw_hour must be >= 0")
    _require(0.0 <= cfg.dwell_shrink <= 1.0, "dwell_shrink must be in [0, 1]")
    _require(cfg.min_dwell_min > 0, "min_dwell_min must be > 0")

    _require(cfg.poi_k_neigh >= 1, "poi_k_neigh must be >= 1")
    _require(0.0 <= cfg.poi_explore_eps <= 1.0, "poi_explore_eps must be in [0, 1]")
    _require(cfg.poi_explore_radius_m > 0, "poi_explore_radius_m must be > 0")
    _require(cfg.r_default > 0 and cfg.r_accom > 0, "scale radii must be > 0")
    _require(cfg.poi_dist_power > 0, "poi_dist_power must be > 0")
    _require(0.0 <= cfg.poi_uniform_mix <= 1.0, "poi_uniform_mix must be in [0, 1]")

    _require(cfg.prior_match_radius_m > 0, "prior_match_radius_m must be > 0")
    _require(0.0 <= cfg.prior_lambda <= 1.0, "prior_lambda must be in [0, 1]")
    _require(cfg.prior_beta >= 0, "prior_beta must be >= 0")
    _require(cfg.prior_eps > 0, "prior_eps must be > 0")

    _require(cfg.poi_boost_factor > 0, "poi_boost_factor must be > 0")

    _require(cfg.yumoto_r_m > 0, "yumoto_r_m must be > 0")
    _require(0.0 <= cfg.zone_lambda <= 1.0, "zone_lambda must be in [0, 1]")
    _require(cfg.zone_beta >= 0, "zone_beta must be >= 0")
    _require(0.0 <= cfg.start_lambda <= 1.0, "start_lambda must be in [0, 1]")
    _require(cfg.start_beta >= 0, "start_beta must be >= 0")
    _require(-180.0 <= cfg.zone_center_lon <= 180.0, "zone_center_lon out of range")
    _require(-90.0 <= cfg.zone_center_lat <= 90.0, "zone_center_lat out of range")
