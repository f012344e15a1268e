"""Counterfactual inventory edits and paired scenario runs."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .config import SimConfig
from .estimation import PoiPriorTable, RhythmArtifacts
from .poi_assign import InventoryContext
from .simulate import SimLog, run_monte_carlo
from .taxonomy import Mid10, N_CATEGORIES, Poi, PoiInventory, ValidationError

BASELINE_ID = "baseline"

_OPS = ("add", "remove", "move", "recat")


@dataclass(frozen=True)
class ScenarioEdit:
    """One inventory edit: add / remove / move / recat."""

    op: str
    poi_id: str
    lon: float | None = None
    lat: float | None = None
    category: Mid10 | None = None

    def __post_init__(self):
        if self.op not in _OPS:
            raise ValidationError(f"unknown edit op {self.op!r}")
        if not self.poi_id:
            raise ValidationError("edit needs a poi_id")
        if self.op == "add" and (self.lon is None or self.lat is None
                                 or self.category is None):
            raise ValidationError(f"add {self.poi_id}: lon, lat and category required")
        if self.op == "move" and (self.lon is None or self.lat is None):
            raise ValidationError(f"move {self.poi_id}: lon and lat required")
        if self.op == "recat" and self.category is None:
            raise ValidationError(f"recat {self.poi_id}: category required")

    def to_dict(self) -> dict:
        d = {"op": self.op, "poi_id": self.poi_id}
        if self.lon is not None:
            d["lon"] = self.lon
            d["lat"] = self.lat
        if self.category is not None:
            d["category"] = self.category.name
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioEdit":
        cat = d.get("category")
        return cls(op=d.get("op", ""), poi_id=d.get("poi_id", ""),
                   lon=d.get("lon"), lat=d.get("lat"),
                   category=None if cat is None else Mid10.from_label(cat))


@dataclass(frozen=True)
class ScenarioSpec:
    scenario_id: str
    edits: tuple

    def __post_init__(self):
        if not self.scenario_id:
            raise ValidationError("scenario_id must be non-empty")
        if self.scenario_id == BASELINE_ID:
            raise ValidationError(f"scenario_id {BASELINE_ID!r} is reserved")
        object.__setattr__(self, "edits", tuple(self.edits))

    def to_json(self, indent=2) -> str:
        return json.dumps({"scenario_id": self.scenario_id,
                           "edits": [e.to_dict() for e in self.edits]},
                          indent=indent)

    @classmethod
    def from_json(cls, text: str) -> "ScenarioSpec":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as e:
            raise ValidationError(f"scenario is not valid JSON: {e}") from None
        if not isinstance(d, dict) or "scenario_id" not in d:
            raise ValidationError("scenario JSON needs a scenario_id")
        edits = d.get("edits", [])
        if not isinstance(edits, list):
            raise ValidationError("scenario edits must be a list")
        return cls(scenario_id=str(d["scenario_id"]),
                   edits=tuple(ScenarioEdit.from_dict(e) for e in edits))


def apply_edits(inventory: PoiInventory, edits):
    """Apply edits in order; later edits see earlier ones.

    Returns (new inventory, changed ids, removed ids).  Changed marks cover
    added, moved, and recategorized POIs that survive to the final state.
    """
    pois = {pid: inventory.poi(i) for i, pid in enumerate(inventory.ids)}
    changed: set = set()
    removed: set = set()
    for e in edits:
        if e.op == "add":
            if e.poi_id in pois:
                raise ValidationError(f"add {e.poi_id}: id already present")
            pois[e.poi_id] = Poi(e.poi_id, float(e.lon), float(e.lat), e.category)
            changed.add(e.poi_id)
            removed.discard(e.poi_id)
        elif e.op == "remove":
            if e.poi_id not in pois:
                raise ValidationError(f"remove {e.poi_id}: id not present")
            del pois[e.poi_id]
            changed.discard(e.poi_id)
            removed.add(e.poi_id)
        elif e.op == "move":
            if e.poi_id not in pois:
                raise ValidationError(f"move {e.poi_id}: id not present")
            old = pois[e.poi_id]
            pois[e.poi_id] = Poi(e.poi_id, float(e.lon), float(e.lat), old.category)
            changed.add(e.poi_id)
        else:  # recat
            if e.poi_id not in pois:
                raise ValidationError(f"recat {e.poi_id}: id not present")
            old = pois[e.poi_id]
            pois[e.poi_id] = Poi(e.poi_id, old.lon, old.lat, e.category)
            changed.add(e.poi_id)
    return PoiInventory(pois.values()), changed, removed


def adjust_prior_table(prior: PoiPriorTable, base_inventory: PoiInventory,
                       new_inventory: PoiInventory) -> PoiPriorTable:
    """Align the observed-visitation table to an edited inventory.

    Surviving POIs keep their accumulated rows (moves and recats included);
    removed rows are dropped.  A brand-new POI starts from the mean
    own-category mass of the base inventory's POIs of its category, so it
    competes like a typical existing peer rather than at zero.
    """
    out = prior.reindexed(new_inventory.ids)
    base_own = prior.own_category_mass(base_inventory)
    cat_mean = np.zeros(N_CATEGORIES)
    for c in range(N_CATEGORIES):
        sel = base_inventory.cat == c
        if np.any(sel):
            cat_mean[c] = float(base_own[sel].mean())
    known = set(prior.poi_ids)
    for j, pid in enumerate(new_inventory.ids):
        if pid not in known:
            c = int(new_inventory.cat[j])
            out.counters[j, c] = cat_mean[c]
    return out


def build_context(artifacts: RhythmArtifacts, inventory: PoiInventory,
                  spec: ScenarioSpec | None = None) -> InventoryContext:
    """Context for the baseline inventory, or for one edited by a scenario."""
    cfg = artifacts.config
    if spec is None:
        prior = artifacts.prior_table.reindexed(inventory.ids) \
            if artifacts.prior_table.poi_ids != inventory.ids else artifacts.prior_table
        return InventoryContext(inventory, cfg, prior_table=prior)
    edited, changed, _removed = apply_edits(inventory, spec.edits)
    prior = adjust_prior_table(artifacts.prior_table, inventory, edited)
    return InventoryContext(edited, cfg, prior_table=prior, changed_ids=changed)


def run_suite(artifacts: RhythmArtifacts, inventory: PoiInventory,
              scenarios, n_workers: int | None = None) -> dict:
    """Baseline plus each scenario under the shared config, returned as
    {scenario_id: SimLog} with 'baseline' always present."""
    ids = [s.scenario_id for s in scenarios]
    if len(set(ids)) != len(ids):
        raise ValidationError("duplicate scenario ids in suite")
    out = {}
    base_ctx = build_context(artifacts, inventory)
    out[BASELINE_ID] = run_monte_carlo(artifacts, base_ctx, BASELINE_ID,
                                       n_workers=n_workers)
    for spec in scenarios:
        ctx = build_context(artifacts, inventory, spec)
        out[spec.scenario_id] = run_monte_carlo(artifacts, ctx, spec.scenario_id,
                                                n_workers=n_workers)
    return out
