"""Repeat the sampling baseline over many seeds and compare with the PNG run.

The PNG leader-follower run is deterministic, so it is simulated once.
Seeds are spread over worker processes.

    python scripts/seed_sweep.py --seeds 20 [--jobs 4] [--csv sweep.csv]
"""

import argparse
import csv
from concurrent.futures import ProcessPoolExecutor

from cotransport import SimConfig, build_benchmark_scenario, run_simulation, summarize


def _one(seed):
    cfg = SimConfig()
    log = run_simulation(build_benchmark_scenario(cfg.n_d), cfg, "rrt_lf", seed=seed)
    return seed, summarize(log)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=20)
    ap.add_argument("--jobs", type=int, default=None)
    ap.add_argument("--csv")
    args = ap.parse_args()

    cfg = SimConfig()
    png = summarize(run_simulation(build_benchmark_scenario(cfg.n_d), cfg, "png_lf"))
    with ProcessPoolExecutor(args.jobs) as pool:
        results = sorted(pool.map(_one, range(args.seeds)))

    print(f"png_lf   max_load_dev {png['max_load_dev']:.4g}  mean_err_follower {png['mean_err_follower']:.4g}")
    worse = 0
    for seed, s in results:
        worse += s["max_load_dev"] >= png["max_load_dev"]
        print(f"rrt_lf {seed:3d}  max_load_dev {s['max_load_dev']:.4g}  "
              f"mean_err_follower {s['mean_err_follower']:.4g}  completed {s['completed']}")
    print(f"\nseeds with rrt_lf deviation >= png_lf: {worse}/{len(results)}")
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["seed", *results[0][1].keys()])
            for seed, s in results:
                w.writerow([seed, *s.values()])


if __name__ == "__main__":
    main()
