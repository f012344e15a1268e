"""Monte Carlo person-day chain generation.

Every chain owns a fixed-size block of uniforms derived from a counter-based
generator keyed by (base seed, scenario tag, run, user), so results are
independent of execution order, chunking, and worker count, and scenario
pairs share variates when the config asks for paired streams.
"""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .config import SimConfig
from .estimation import RhythmArtifacts
from .poi_assign import InventoryContext
from .taxonomy import DAY_END_CAP_S, Mid10, N_CATEGORIES, N_HOURS, ValidationError

# per-chain variate slots: 3 start draws plus 6 per event
def variates_per_chain(max_events: int) -> int:
    return 3 + 6 * max_events


def stream_key(base_seed: int, scenario_id: str, run: int, user: int,
               reset_per_scenario: bool) -> int:
    """128-bit Philox key.  With paired streams the scenario tag is dropped,
    so every scenario replays identical variates per (run, user)."""
    tag = "" if reset_per_scenario else scenario_id
    text = f"rhythmsim|{base_seed}|{tag}|{run}|{user}"
    digest = hashlib.sha256(text.encode()).digest()
    return int.from_bytes(digest[:16], "little")


class RngStream:
    """Uniform [0,1) stream for one (run, user) pair."""

    def __init__(self, key: int):
        self._gen = np.random.Generator(np.random.Philox(key=key))

    def uniforms(self, m: int) -> np.ndarray:
        return self._gen.random(m)


def derive_stream(cfg: SimConfig, scenario_id: str, run: int, user: int) -> RngStream:
    return RngStream(stream_key(cfg.random_seed, scenario_id, run, user,
                                cfg.reset_seed_per_scenario))


@dataclass(frozen=True)
class SimEvent:
    seq: int
    start_s: float
    hour: int
    category: Mid10
    dwell_min: float
    poi_idx: int
    poi_id: str
    lon: float
    lat: float
    terminal: bool


@dataclass
class SimLog:
    """Flat event log of one scenario's Monte Carlo draw, in chain order."""

    scenario_id: str
    run: np.ndarray
    user: np.ndarray
    seq: np.ndarray
    start_s: np.ndarray
    hour: np.ndarray
    category: np.ndarray
    dwell_min: np.ndarray
    poi_idx: np.ndarray
    poi_id: list
    lon: np.ndarray
    lat: np.ndarray
    n_chains: int
    config_fingerprint: str = ""
    artifact_fingerprint: str = ""

    def __len__(self) -> int:
        return self.run.shape[0]

    def chain_bounds(self):
        """(starts, ends) of each chain's contiguous slice, in log order."""
        n = len(self)
        if n == 0:
            return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
        new = np.ones(n, dtype=bool)
        new[1:] = (self.run[1:] != self.run[:-1]) | (self.user[1:] != self.user[:-1])
        starts = np.flatnonzero(new)
        ends = np.r_[starts[1:], n]
        return starts, ends


def _pack_model(artifacts: RhythmArtifacts, ctx: InventoryContext) -> dict:
    """Flatten artifacts + context into the plain arrays the kernel takes."""
    cfg = artifacts.config
    sp = artifacts.start_priors
    cum_h = np.cumsum(sp.p_h)
    cum_ch = np.cumsum(sp.p_c_given_h, axis=1)

    if cfg.use_stop_hazard:
        hazard = artifacts.stop_hazard.scaled(cfg.hazard_scale)
    else:
        hazard = np.zeros(N_HOURS)

    kern = artifacts.kernels
    block_lu = kern.block_lookup()
    if cfg.use_t_block:
        trans = kern.t_blocks
    else:
        trans = np.broadcast_to(kern.t_global,
                                (kern.n_blocks_count(), N_CATEGORIES, N_CATEGORIES)).copy()
    trans_cum = np.cumsum(trans, axis=2)

    dw, dmu, dsg = artifacts.dwell.dense()
    dwell_cum = np.cumsum(dw, axis=2)

    inv = ctx.inventory
    idx = ctx.index
    knn_idx, knn_dist, knn_cnt = ctx.knn_tables(cfg.poi_k_neigh)

    return dict(
        cum_h=cum_h, cum_ch=cum_ch,
        start_cum_flat=ctx.start_cums(), cat_starts=idx.cat_starts,
        hazard=hazard, block_lu=block_lu, trans_cum=trans_cum,
        dwell_cum=dwell_cum, dwell_mu=dmu, dwell_sg=dsg,
        min_dwell=float(cfg.min_dwell_min), cap_s=DAY_END_CAP_S,
        seg_lon=idx.seg_lon, seg_lat=idx.seg_lat, seg_glob=idx.seg_glob,
        g_lon=inv.lon, g_lat=inv.lat, g_cat=inv.cat.astype(np.int64),
        g_pi=ctx.pi, g_inzone=ctx.in_zone, g_changed=ctx.changed,
        knn_idx=knn_idx, knn_dist=knn_dist, knn_cnt=knn_cnt,
        explore_eps=float(cfg.poi_explore_eps),
        explore_radius=float(cfg.poi_explore_radius_m),
        r_default=float(cfg.r_default), r_accom=float(cfg.r_accom),
        gamma=float(cfg.poi_dist_power), umix=float(cfg.poi_uniform_mix),
        use_prior=bool(cfg.use_soft_spatial_prior),
        lam_p=float(cfg.prior_lambda), beta_p=float(cfg.prior_beta),
        p_eps=float(cfg.prior_eps),
        use_zone=bool(ctx.use_zone), lam_z=float(cfg.zone_lambda),
        beta_z=float(cfg.zone_beta), s_obs_cat=np.ascontiguousarray(ctx.s_obs),
        use_boost=bool(cfg.use_scenario_boost), boost=float(cfg.poi_boost_factor),
    )


def _run_chunk(pack: dict, U: np.ndarray, max_events: int):
    """Run the chain kernel over one block of variate rows.

    Returns (counts, start_s, hour, cat, dwell, poi_idx) with the per-event
    arrays already compacted to the emitted events, chain by chain.
    """
    n = U.shape[0]
    cap = n * max_events
    out_cnt = np.zeros(n, dtype=np.int64)
    out_s = np.zeros(cap)
    out_h = np.zeros(cap, dtype=np.int64)
    out_c = np.zeros(cap, dtype=np.int64)
    out_d = np.zeros(cap)
    out_p = np.zeros(cap, dtype=np.int64)
    _kernels._simulate_chunk(
        U, max_events,
        pack["cum_h"], pack["cum_ch"], pack["start_cum_flat"], pack["cat_starts"],
        pack["hazard"], pack["block_lu"], pack["trans_cum"],
        pack["dwell_cum"], pack["dwell_mu"], pack["dwell_sg"],
        pack["min_dwell"], pack["cap_s"],
        pack["seg_lon"], pack["seg_lat"], pack["seg_glob"],
        pack["g_lon"], pack["g_lat"], pack["g_cat"], pack["g_pi"],
        pack["g_inzone"], pack["g_changed"],
        pack["knn_idx"], pack["knn_dist"], pack["knn_cnt"],
        pack["explore_eps"], pack["explore_radius"],
        pack["r_default"], pack["r_accom"], pack["gamma"], pack["umix"],
        pack["use_prior"], pack["lam_p"], pack["beta_p"], pack["p_eps"],
        pack["use_zone"], pack["lam_z"], pack["beta_z"], pack["s_obs_cat"],
        pack["use_boost"], pack["boost"],
        out_cnt, out_s, out_h, out_c, out_d, out_p)
    keep = np.zeros(cap, dtype=bool)
    for i in range(n):
        keep[i * max_events: i * max_events + out_cnt[i]] = True
    return out_cnt, out_s[keep], out_h[keep], out_c[keep], out_d[keep], out_p[keep]


def generate_person_day(artifacts: RhythmArtifacts, ctx: InventoryContext,
                        stream: RngStream, chain_index: int = 0) -> list:
    """One chain as SimEvent records.  chain_index picks which fixed variate
    block of the stream to consume (person-day p of the pair)."""
    cfg = artifacts.config
    m = variates_per_chain(cfg.max_events)
    u = stream.uniforms(m * (chain_index + 1))[m * chain_index:]
    pack = _pack_model(artifacts, ctx)
    cnt, s, h, c, d, p = _run_chunk(pack, u.reshape(1, m), cfg.max_events)
    inv = ctx.inventory
    events = []
    k = int(cnt[0])
    for t in range(k):
        gi = int(p[t])
        events.append(SimEvent(
            seq=t, start_s=float(s[t]), hour=int(h[t]),
            category=Mid10(int(c[t])), dwell_min=float(d[t]),
            poi_idx=gi, poi_id=inv.ids[gi],
            lon=float(inv.lon[gi]), lat=float(inv.lat[gi]),
            terminal=(t == k - 1)))
    return events


def _chain_variates(cfg: SimConfig, scenario_id: str, run: int, user: int) -> np.ndarray:
    """(persondays_per_user, M) variate rows for one (run, user) pair."""
    m = variates_per_chain(cfg.max_events)
    p = cfg.persondays_per_user
    return derive_stream(cfg, scenario_id, run, user).uniforms(p * m).reshape(p, m)


def _emit_pairs(pack, cfg: SimConfig, scenario_id: str, pairs, chunk_pairs: int = 2048):
    """Generate chains for a list of (run, user) pairs, in order.

    Returns column arrays (run, user_slot, seq, start_s, hour, cat, dwell,
    poi_idx).  With several person-days per user, chain p of user u is
    reported under user slot u * persondays_per_user + p so each chain keeps
    a distinct (run, user) key in the flat log.
    """
    m = variates_per_chain(cfg.max_events)
    p_per = cfg.persondays_per_user
    acc = {k: [] for k in ("run", "user", "seq", "s", "h", "c", "d", "p")}
    for at in range(0, len(pairs), chunk_pairs):
        block = pairs[at: at + chunk_pairs]
        U = np.empty((len(block) * p_per, m))
        for j, (run, user) in enumerate(block):
            U[j * p_per: (j + 1) * p_per] = _chain_variates(cfg, scenario_id, run, user)
        cnt, s, h, c, d, p = _run_chunk(pack, U, cfg.max_events)
        run_col = np.empty(s.shape[0], dtype=np.int64)
        user_col = np.empty(s.shape[0], dtype=np.int64)
        seq_col = np.empty(s.shape[0], dtype=np.int64)
        pos = 0
        for j, (run, user) in enumerate(block):
            for pp in range(p_per):
                k = int(cnt[j * p_per + pp])
                run_col[pos: pos + k] = run
                user_col[pos: pos + k] = user * p_per + pp
                seq_col[pos: pos + k] = np.arange(k)
                pos += k
        acc["run"].append(run_col)
        acc["user"].append(user_col)
        acc["seq"].append(seq_col)
        acc["s"].append(s)
        acc["h"].append(h)
        acc["c"].append(c)
        acc["d"].append(d)
        acc["p"].append(p)
    return {k: (np.concatenate(v) if v else np.zeros(0, dtype=np.int64))
            for k, v in acc.items()}


_POOL_STATE = {}


def _pool_init(pack, cfg_dict, scenario_id):
    _POOL_STATE["pack"] = pack
    _POOL_STATE["cfg"] = SimConfig.from_dict(cfg_dict)
    _POOL_STATE["scenario_id"] = scenario_id


def _pool_work(pairs):
    return _emit_pairs(_POOL_STATE["pack"], _POOL_STATE["cfg"],
                       _POOL_STATE["scenario_id"], pairs)


def resolve_workers(n_workers=None) -> int:
    if n_workers is None:
        env = os.environ.get("RHYTHMSIM_THREADS", "").strip()
        n_workers = int(env) if env else 1
    if n_workers < 1:
        raise ValidationError("worker count must be >= 1")
    return int(n_workers)


def run_monte_carlo(artifacts: RhythmArtifacts, ctx: InventoryContext,
                    scenario_id: str = "baseline",
                    n_workers: int | None = None) -> SimLog:
    """Full Monte Carlo sweep: mc_runs x sim_users_n pairs, each with
    persondays_per_user chains.  Output ordering and content are independent
    of the worker count."""
    cfg = artifacts.config
    if ctx.cfg is not cfg and ctx.cfg.fingerprint() != cfg.fingerprint():
        raise ValidationError("context was packed under a different config")
    n_workers = resolve_workers(n_workers)
    pack = _pack_model(artifacts, ctx)
    pairs = [(run, user) for run in range(cfg.mc_runs)
             for user in range(cfg.sim_users_n)]

    if n_workers == 1 or len(pairs) < 2 * n_workers:
        parts = [_emit_pairs(pack, cfg, scenario_id, pairs)]
    else:
        import multiprocessing as mp

        bounds = np.linspace(0, len(pairs), n_workers + 1).astype(int)
        slabs = [pairs[bounds[i]: bounds[i + 1]] for i in range(n_workers)
                 if bounds[i + 1] > bounds[i]]
        mpctx = mp.get_context("fork")
        with mpctx.Pool(processes=n_workers, initializer=_pool_init,
                        initargs=(pack, cfg.to_dict(), scenario_id)) as pool:
            parts = pool.map(_pool_work, slabs)

    cols = {k: np.concatenate([p[k] for p in parts]) for k in parts[0]}
    inv = ctx.inventory
    pidx = cols["p"]
    return SimLog(
        scenario_id=scenario_id,
        run=cols["run"], user=cols["user"], seq=cols["seq"],
        start_s=cols["s"], hour=cols["h"], category=cols["c"],
        dwell_min=cols["d"], poi_idx=pidx,
        poi_id=[inv.ids[i] for i in pidx],
        lon=inv.lon[pidx].copy(), lat=inv.lat[pidx].copy(),
        n_chains=cfg.mc_runs * cfg.sim_users_n * cfg.persondays_per_user,
        config_fingerprint=cfg.fingerprint(),
        artifact_fingerprint=artifacts.fingerprint,
    )
