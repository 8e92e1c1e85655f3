"""Plan through the two-block hall and run the PNG leader-follower on the result.

Sharp roadmap corners can ask more of the follower than its joint rate limits
allow, so the summary reports the converged fraction alongside the deviation.

    python scripts/plan_demo.py [--seed 0] [--out demo/]
"""

import argparse
import subprocess
import sys
from pathlib import Path

WORLD = Path(__file__).parent / "worlds" / "two_blocks.world"


def cli(*argv):
    cmd = [sys.executable, "-m", "cotransport.cli", *map(str, argv)]
    print("$", " ".join(["cotransport", *map(str, argv)]), flush=True)
    subprocess.run(cmd, check=True)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="demo")
    args = ap.parse_args()
    out = Path(args.out)
    scenario = out / "two_blocks.json"
    cli("plan", WORLD, "--start", 1, 1, "--goal", 9, 5, "--seed", args.seed, "--out", scenario)
    cli("run", "--scenario", scenario, "--out", out)
    cli("metrics", out / "png_lf_seed0.csv")


if __name__ == "__main__":
    main()
