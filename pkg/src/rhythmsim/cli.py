"""Command-line entry points: fit, simulate, scenario, validate, synth.

Exit codes: 0 success, 1 usage errors, 2 data or validation errors,
3 unexpected internal failures.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import traceback

import numpy as np

from . import __version__, io_corpus, metrics
from .estimation import RhythmArtifacts, fit_artifacts
from .geo import GridSpec
from .io_corpus import atomic_write_text
from .scenario import BASELINE_ID, ScenarioSpec, build_context, run_suite
from .simulate import resolve_workers, run_monte_carlo
from .config import SimConfig
from .taxonomy import ValidationError


class _UsageExit(SystemExit):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise _UsageExit(1)


def _build_parser() -> _Parser:
    p = _Parser(prog="rhythmsim",
                description="Estimate stay rhythms, simulate person-day chains, "
                            "and score inventory scenarios.")
    p.add_argument("--version", action="version", version=f"rhythmsim {__version__}")
    sub = p.add_subparsers(dest="cmd", required=True)

    f = sub.add_parser("fit", help="estimate artifacts from a stay corpus")
    f.add_argument("--corpus", required=True)
    f.add_argument("--inventory", required=True)
    f.add_argument("--out", required=True)
    f.add_argument("--config", help="JSON config; defaults apply when omitted")
    f.add_argument("--sipf", help="start matrix CSV; fitted from first events "
                                  "when omitted")
    f.add_argument("--json", action="store_true", help="print a summary JSON")

    s = sub.add_parser("simulate", help="run the Monte Carlo sweep")
    s.add_argument("--artifacts", required=True)
    s.add_argument("--inventory", required=True)
    s.add_argument("--out", required=True, help="simulation log CSV path")
    s.add_argument("--scenario-id", default=BASELINE_ID)
    s.add_argument("--workers", type=int)
    s.add_argument("--json", action="store_true")

    c = sub.add_parser("scenario", help="run baseline plus edited inventories")
    c.add_argument("--artifacts", required=True)
    c.add_argument("--inventory", required=True)
    c.add_argument("--scenarios", required=True, nargs="+",
                   help="scenario JSON files")
    c.add_argument("--outdir", required=True)
    c.add_argument("--workers", type=int)
    c.add_argument("--hit-radius", type=float, default=150.0)
    c.add_argument("--json", action="store_true")

    v = sub.add_parser("validate", help="compare a simulation log against a corpus")
    v.add_argument("--corpus", required=True)
    v.add_argument("--artifacts", required=True)
    v.add_argument("--simlog", required=True)
    v.add_argument("--inventory", required=True)
    v.add_argument("--out", help="write the report JSON here as well")
    v.add_argument("--hit-radius", type=float, default=150.0)
    v.add_argument("--json", action="store_true")

    y = sub.add_parser("synth", help="generate a synthetic corpus with known truth")
    y.add_argument("--spec", help="synth spec JSON; defaults apply when omitted")
    y.add_argument("--outdir", required=True)
    y.add_argument("--json", action="store_true")
    return p


def _read(path: str) -> str:
    try:
        with open(path) as f:
            return f.read()
    except OSError as e:
        raise ValidationError(f"cannot read {path}: {e.strerror}") from None


def _emit(args, payload: dict) -> None:
    if getattr(args, "json", False):
        print(json.dumps(payload, indent=2, sort_keys=True))


def cmd_fit(args) -> int:
    cfg = SimConfig.from_json(_read(args.config)) if args.config else SimConfig()
    corpus = io_corpus.load_stay_corpus(args.corpus)
    inventory = io_corpus.load_inventory(args.inventory)
    sipf = io_corpus.load_matrix_csv(args.sipf) if args.sipf else None
    art = fit_artifacts(corpus, inventory, cfg, s_ipf=sipf)
    atomic_write_text(args.out, art.to_json())
    _emit(args, {
        "command": "fit",
        "events": len(corpus),
        "pois": len(inventory),
        "transition_pairs": art.kernels.n_pairs,
        "prior_matched": art.prior_table.matched,
        "prior_dropped": art.prior_table.dropped,
        "dwell_local_cells": len(art.dwell.local),
        "fingerprint": art.fingerprint,
        "out": args.out,
    })
    return 0


def cmd_simulate(args) -> int:
    art = RhythmArtifacts.from_json(_read(args.artifacts))
    inventory = io_corpus.load_inventory(args.inventory)
    ctx = build_context(art, inventory)
    log = run_monte_carlo(art, ctx, scenario_id=args.scenario_id,
                          n_workers=args.workers)
    io_corpus.write_simlog(log, args.out)
    _emit(args, {
        "command": "simulate",
        "scenario_id": log.scenario_id,
        "chains": log.n_chains,
        "events": len(log),
        "workers": resolve_workers(args.workers),
        "out": args.out,
    })
    return 0


def _log_summary(log, inventory, radius):
    zone_target = None
    return {
        "events": len(log),
        "chains": log.n_chains,
        "events_per_chain": len(log) / log.n_chains if log.n_chains else 0.0,
        "mean_dwell_min": float(np.mean(log.dwell_min)) if len(log) else 0.0,
        "hit_rate_vs_baseline_inventory": metrics.hit_rate(log.lon, log.lat,
                                                           inventory, radius),
    }


def cmd_scenario(args) -> int:
    art = RhythmArtifacts.from_json(_read(args.artifacts))
    inventory = io_corpus.load_inventory(args.inventory)
    specs = [ScenarioSpec.from_json(_read(p)) for p in args.scenarios]
    logs = run_suite(art, inventory, specs, n_workers=args.workers)
    os.makedirs(args.outdir, exist_ok=True)
    summary = {"command": "scenario", "outdir": args.outdir, "scenarios": {}}
    base = logs[BASELINE_ID]
    base_sum = _log_summary(base, inventory, args.hit_radius)
    for sid, log in logs.items():
        path = os.path.join(args.outdir, f"{sid}.csv")
        io_corpus.write_simlog(log, path)
        row = _log_summary(log, inventory, args.hit_radius)
        if sid != BASELINE_ID:
            row["delta_hit_rate"] = (row["hit_rate_vs_baseline_inventory"]
                                     - base_sum["hit_rate_vs_baseline_inventory"])
        row["log"] = path
        summary["scenarios"][sid] = row
    atomic_write_text(os.path.join(args.outdir, "summary.json"),
                      json.dumps(summary, indent=2, sort_keys=True))
    _emit(args, summary)
    return 0


def cmd_validate(args) -> int:
    corpus = io_corpus.load_stay_corpus(args.corpus)
    art = RhythmArtifacts.from_json(_read(args.artifacts))
    log = io_corpus.load_simlog(args.simlog)
    inventory = io_corpus.load_inventory(args.inventory)
    if log.config_fingerprint and log.config_fingerprint != art.config.fingerprint():
        raise ValidationError("simulation log was produced under a different config")

    obs_edm = metrics.aggregate_hour_category(corpus, mode="EDM", labeling="soft")
    sim_edm = metrics.aggregate_hour_category(log, mode="EDM")
    diurnal = metrics.diurnal_similarity(metrics.diurnal_profiles(obs_edm),
                                         metrics.diurnal_profiles(sim_edm))
    days, obs_maps = metrics.day_hour_heatmaps(corpus, mode="EDM")
    _runs, run_maps = metrics.simlog_day_heatmaps(log, days, mode="EDM")
    resid = metrics.residual_report(obs_maps, run_maps)
    sim_kern = metrics.reestimate_kernels(log, art.config.alpha, art.config.block_edges)
    kd = metrics.kernel_distances(art.kernels, sim_kern)
    report = {
        "command": "validate",
        "events_observed": len(corpus),
        "events_simulated": len(log),
        "diurnal": diurnal.to_dict(),
        "residuals": resid.to_dict(),
        "kernel_distances": [{"scope": r.scope, "frobenius": r.frobenius,
                              "cosine": r.cosine, "mean_js": r.mean_js}
                             for r in kd],
        "first_event_rel_frobenius": metrics.first_event_compliance(log, art.s_ipf),
        "hit_rate": metrics.hit_rate(log.lon, log.lat, inventory, args.hit_radius),
    }
    if args.out:
        atomic_write_text(args.out, json.dumps(report, indent=2, sort_keys=True))
    print(json.dumps(report, indent=2, sort_keys=True) if args.json
          else _validate_text(report))
    return 0


def _validate_text(report: dict) -> str:
    d = report["diurnal"]
    r = report["residuals"]
    lines = [
        f"observed events      {report['events_observed']}",
        f"simulated events     {report['events_simulated']}",
        f"diurnal rmse         macro {d['macro_rmse']:.4f}  weighted {d['weighted_rmse']:.4f}",
        f"diurnal pearson      macro {d['macro_pearson']:.4f}  weighted {d['weighted_pearson']:.4f}",
        f"residual mar         macro {r['macro_mar']:.3e}",
        f"residual p95         macro {r['macro_p95']:.3e}",
        f"first-event rel fro  {report['first_event_rel_frobenius']:.4f}",
        f"hit rate             {report['hit_rate']:.4f}",
    ]
    for row in report["kernel_distances"]:
        lines.append(f"kernel {row['scope']:<8} cosine {row['cosine']:.4f}  "
                     f"js {row['mean_js']:.2e}")
    return "\n".join(lines)


def cmd_synth(args) -> int:
    spec = io_corpus.SynthSpec.from_json(_read(args.spec)) if args.spec \
        else io_corpus.SynthSpec()
    corpus, inventory, truth = io_corpus.synthesize_corpus(spec)
    os.makedirs(args.outdir, exist_ok=True)
    cp = os.path.join(args.outdir, "corpus.csv")
    ip = os.path.join(args.outdir, "inventory.csv")
    tp = os.path.join(args.outdir, "truth_artifacts.json")
    io_corpus.write_stay_corpus(corpus, cp)
    io_corpus.write_inventory(inventory, ip)
    atomic_write_text(tp, truth.to_json())
    _emit(args, {
        "command": "synth",
        "events": len(corpus),
        "users": spec.n_users,
        "days": spec.n_days,
        "pois": len(inventory),
        "corpus": cp, "inventory": ip, "truth": tp,
    })
    return 0


_COMMANDS = {
    "fit": cmd_fit,
    "simulate": cmd_simulate,
    "scenario": cmd_scenario,
    "validate": cmd_validate,
    "synth": cmd_synth,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageExit:
        return 1
    except SystemExit as e:
        # argparse uses exit code 0 for --help/--version
        return 0 if not e.code else 1
    try:
        return _COMMANDS[args.cmd](args)
    except ValidationError as e:
        print(f"rhythmsim: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"rhythmsim: {e}", file=sys.stderr)
        return 2
    except Exception:
        traceback.print_exc()
        return 3


if __name__ == "__main__":
    sys.exit(main())
