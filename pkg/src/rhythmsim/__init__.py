"""Rhythm simulator toolkit: estimate daily stay rhythms from soft-labeled
stay events, simulate synthetic person-day chains over a POI inventory, and
score counterfactual inventory edits."""

__version__ = "0.1.0"

from ._kernels import NUMBA_ENABLED
from .estimation import (
    DwellModel,
    DwellParams,
    IpfError,
    IpfResult,
    PoiPriorTable,
    RhythmArtifacts,
    StartPriors,
    StopHazard,
    TransitionKernels,
    accumulate_weak_prior,
    bundle_artifacts,
    derive_start_priors,
    estimate_stop_hazard,
    estimate_transition_kernels,
    fit_artifacts,
    fit_dwell_models,
    fit_ipf,
    fit_start_matrix,
)
from .geo import CategoryIndex, GridSpec, haversine_m
from .io_corpus import (
    SynthSpec,
    inventory_from_geojson,
    inventory_to_geojson,
    load_inventory,
    load_matrix_csv,
    load_simlog,
    load_stay_corpus,
    synth_truth,
    synthesize_corpus,
    write_inventory,
    write_matrix_csv,
    write_simlog,
    write_stay_corpus,
)
from .metrics import (
    aggregate_hour_category,
    day_hour_heatmaps,
    diurnal_profiles,
    diurnal_similarity,
    first_event_compliance,
    hit_rate,
    kernel_distances,
    reestimate_kernels,
    residual_report,
    simlog_day_heatmaps,
    spatial_diff,
)
from .poi_assign import (
    CandidateDistribution,
    InventoryContext,
    distance_likelihood,
    retrieve_candidates,
    sample_poi,
    score_candidates,
)
from .scenario import (
    BASELINE_ID,
    ScenarioEdit,
    ScenarioSpec,
    apply_edits,
    build_context,
    run_suite,
)
from .simulate import (
    RngStream,
    SimEvent,
    SimLog,
    derive_stream,
    generate_person_day,
    resolve_workers,
    run_monte_carlo,
    stream_key,
    variates_per_chain,
)
from .taxonomy import (
    DAY_END_CAP_S,
    HourCategoryMatrix,
    MID10_LABELS,
    Mid10,
    N_CATEGORIES,
    N_HOURS,
    Poi,
    PoiInventory,
    SECONDS_PER_DAY,
    SOFT_COLUMNS,
    SoftLabel,
    StayCorpus,
    StayEvent,
    ValidationError,
)
from .config import DEFAULT_ZONE_LAT, DEFAULT_ZONE_LON, SimConfig, validate_config

__all__ = [
    "__version__",
    "NUMBA_ENABLED",
    "Mid10",
    "MID10_LABELS",
    "N_CATEGORIES",
    "N_HOURS",
    "SOFT_COLUMNS",
    "SECONDS_PER_DAY",
    "DAY_END_CAP_S",
    "SoftLabel",
    "StayEvent",
    "StayCorpus",
    "Poi",
    "PoiInventory",
    "HourCategoryMatrix",
    "ValidationError",
    "SimConfig",
    "validate_config",
    "DEFAULT_ZONE_LON",
    "DEFAULT_ZONE_LAT",
    "RhythmArtifacts",
    "StartPriors",
    "StopHazard",
    "TransitionKernels",
    "DwellModel",
    "DwellParams",
    "PoiPriorTable",
    "IpfError",
    "IpfResult",
    "fit_artifacts",
    "fit_ipf",
    "fit_start_matrix",
    "derive_start_priors",
    "estimate_stop_hazard",
    "estimate_transition_kernels",
    "fit_dwell_models",
    "accumulate_weak_prior",
    "bundle_artifacts",
    "CategoryIndex",
    "GridSpec",
    "haversine_m",
    "CandidateDistribution",
    "InventoryContext",
    "distance_likelihood",
    "retrieve_candidates",
    "score_candidates",
    "sample_poi",
    "RngStream",
    "SimEvent",
    "SimLog",
    "stream_key",
    "variates_per_chain",
    "derive_stream",
    "generate_person_day",
    "run_monte_carlo",
    "resolve_workers",
    "BASELINE_ID",
    "ScenarioEdit",
    "ScenarioSpec",
    "apply_edits",
    "build_context",
    "run_suite",
    "aggregate_hour_category",
    "diurnal_profiles",
    "diurnal_similarity",
    "day_hour_heatmaps",
    "simlog_day_heatmaps",
    "residual_report",
    "reestimate_kernels",
    "kernel_distances",
    "first_event_compliance",
    "hit_rate",
    "spatial_diff",
    "SynthSpec",
    "synth_truth",
    "synthesize_corpus",
    "load_stay_corpus",
    "write_stay_corpus",
    "load_inventory",
    "write_inventory",
    "inventory_to_geojson",
    "inventory_from_geojson",
    "load_matrix_csv",
    "write_matrix_csv",
    "load_simlog",
    "write_simlog",
]
