"""Shared fixtures: a deterministic tiny inventory, a synthetic corpus with
its hidden truth bundle, and artifacts fitted from that corpus.

Session-scoped fixtures are deliberately small; scale-sensitive checks build
their own bundles inside the test.
"""

import numpy as np
import pytest

import hypothesis

from rhythmsim import (
    Mid10,
    N_CATEGORIES,
    Poi,
    PoiInventory,
    SimConfig,
    SynthSpec,
    fit_artifacts,
    synthesize_corpus,
)
from rhythmsim.config import DEFAULT_ZONE_LAT, DEFAULT_ZONE_LON
from rhythmsim.geo import METERS_PER_DEGREE
from rhythmsim.poi_assign import InventoryContext

hypothesis.settings.register_profile(
    "suite", deadline=None, max_examples=60,
    suppress_health_check=[hypothesis.HealthCheck.too_slow])
hypothesis.settings.load_profile("suite")


def make_grid_inventory(per_cat=3, step_m=180.0, center=(DEFAULT_ZONE_LON, DEFAULT_ZONE_LAT)):
    """Deterministic inventory with per_cat POIs in every category, laid out
    on a small grid around the given center."""
    lon0, lat0 = center
    dlat = step_m / METERS_PER_DEGREE
    dlon = dlat / np.cos(np.radians(lat0))
    pois = []
    for c in range(N_CATEGORIES):
        for j in range(per_cat):
            pois.append(Poi(
                poi_id=f"p{c:02d}_{j}",
                lon=lon0 + (j - per_cat / 2) * dlon,
                lat=lat0 + (c - N_CATEGORIES / 2) * dlat,
                category=Mid10(c)))
    return PoiInventory(pois)


@pytest.fixture(scope="session")
def tiny_inventory():
    return make_grid_inventory()


@pytest.fixture(scope="session")
def synth_spec():
    return SynthSpec(n_users=120, n_days=4, seed=11, poi_total=160,
                     max_events=16, spread_m=2000.0)


@pytest.fixture(scope="session")
def synth_data(synth_spec):
    """(corpus, inventory, truth artifacts) from the deterministic generator."""
    return synthesize_corpus(synth_spec)


@pytest.fixture(scope="session")
def fit_cfg():
    return SimConfig(sim_users_n=60, mc_runs=2, max_events=16,
                     poi_k_neigh=12, random_seed=4242)


@pytest.fixture(scope="session")
def fitted(synth_data, fit_cfg):
    corpus, inventory, _truth = synth_data
    return fit_artifacts(corpus, inventory, fit_cfg)


@pytest.fixture(scope="session")
def fitted_ctx(synth_data, fitted):
    _corpus, inventory, _truth = synth_data
    return InventoryContext(inventory, fitted.config,
                            prior_table=fitted.prior_table)
