"""Run every method on the benchmark and print a comparison table.

    python scripts/run_benchmark.py [--config cfg.json] [--seed 0] [--out results/]
"""

import argparse
import time
from pathlib import Path

from cotransport import SimConfig, build_benchmark_scenario, load_config, run_simulation, summarize, write_log_csv

METHODS = ("png_lf", "rrt_lf", "slq_mpc")
COLS = ("completed", "steps", "max_load_dev", "mean_load_dev", "mean_err_leader", "mean_err_follower",
        "follower_converged_frac")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", help="directory for the CSV logs (optional)")
    args = ap.parse_args()

    cfg = load_config(args.config) if args.config else SimConfig()
    scenario = build_benchmark_scenario(cfg.n_d)
    rows = []
    for method in METHODS:
        t0 = time.perf_counter()
        log = run_simulation(scenario, cfg, method, seed=args.seed)
        secs = time.perf_counter() - t0
        if args.out:
            Path(args.out).mkdir(parents=True, exist_ok=True)
            write_log_csv(log, Path(args.out) / f"{method}_seed{args.seed}.csv")
        s = summarize(log, scenario.load_length)
        rows.append([method, *(s.get(c, float("nan")) for c in COLS), secs])

    head = ["method", *COLS, "seconds"]
    cells = [[f"{v:.4g}" if isinstance(v, float) else str(v) for v in r] for r in rows]
    widths = [max(len(h), *(len(r[i]) for r in cells)) for i, h in enumerate(head)]
    print("  ".join(h.ljust(w) for h, w in zip(head, widths)))
    for r in cells:
        print("  ".join(c.ljust(w) for c, w in zip(r, widths)))
    dev = {r[0]: r[1 + COLS.index("max_load_dev")] for r in rows}
    print(f"\nordering png_lf <= rrt_lf <= slq_mpc: {dev['png_lf'] <= dev['rrt_lf'] <= dev['slq_mpc']}")


if __name__ == "__main__":
    main()
