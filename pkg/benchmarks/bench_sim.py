"""Timing comparison of the compiled and interpreted simulation backends.

Runs the same fitted pipeline under RHYTHMSIM_NUMBA=1 and =0 in child
processes, times the Monte Carlo sweep in each, and checks that both logs
hash identically.  Scale flags keep the interpreted run bearable.

    python3 benchmarks/bench_sim.py
    python3 benchmarks/bench_sim.py --users 500 --runs 5 --repeat 3
"""

import argparse
import hashlib
import json
import os
import subprocess
import sys
import tempfile
import time


def _pipeline(args):
    from rhythmsim import (
        SimConfig,
        SynthSpec,
        build_context,
        fit_artifacts,
        run_monte_carlo,
        synthesize_corpus,
        write_simlog,
    )

    spec = SynthSpec(n_users=60, n_days=2, seed=97, poi_total=120,
                     max_events=10, spread_m=1800.0)
    corpus, inventory, _ = synthesize_corpus(spec)
    cfg = SimConfig(sim_users_n=args.users, mc_runs=args.runs,
                    max_events=args.max_events, poi_k_neigh=12,
                    random_seed=31337)
    art = fit_artifacts(corpus, inventory, cfg)
    ctx = build_context(art, inventory)

    # one warm-up sweep so jit compilation stays out of the timings
    log = run_monte_carlo(art, ctx)
    best = float("inf")
    for _ in range(args.repeat):
        t0 = time.perf_counter()
        log = run_monte_carlo(art, ctx)
        best = min(best, time.perf_counter() - t0)

    with tempfile.TemporaryDirectory() as td:
        path = os.path.join(td, "log.csv")
        write_simlog(log, path)
        with open(path, "rb") as fh:
            sha = hashlib.sha256(fh.read()).hexdigest()
    return {
        "numba": __import__("rhythmsim").NUMBA_ENABLED,
        "chains": log.n_chains,
        "events": len(log),
        "best_s": best,
        "sha": sha,
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--users", type=int, default=400)
    ap.add_argument("--runs", type=int, default=5)
    ap.add_argument("--max-events", type=int, default=24)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--inner", action="store_true", help=argparse.SUPPRESS)
    args = ap.parse_args(argv)

    if args.inner:
        print(json.dumps(_pipeline(args)))
        return 0

    results = {}
    for flag in ("1", "0"):
        env = dict(os.environ, RHYTHMSIM_NUMBA=flag)
        child = [sys.executable, os.path.abspath(__file__), "--inner",
                 "--users", str(args.users), "--runs", str(args.runs),
                 "--max-events", str(args.max_events),
                 "--repeat", str(args.repeat)]
        out = subprocess.run(child, env=env, capture_output=True, text=True)
        if out.returncode != 0:
            sys.stderr.write(out.stderr)
            return out.returncode
        results[flag] = json.loads(out.stdout.strip().splitlines()[-1])

    jit, py = results["1"], results["0"]
    if jit["sha"] != py["sha"]:
        print("backend outputs DIVERGE; this platform is not safe for the "
              "fallback parity assumption")
        return 1
    print(f"pipeline: {jit['chains']} chains, {jit['events']} events, "
          f"logs bitwise identical")
    print(f"  compiled    (RHYTHMSIM_NUMBA=1): {jit['best_s']:8.3f} s")
    print(f"  interpreted (RHYTHMSIM_NUMBA=0): {py['best_s']:8.3f} s")
    print(f"  speedup: {py['best_s'] / jit['best_s']:.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
