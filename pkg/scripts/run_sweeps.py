#!/usr/bin/env python3
"""Emit the three sensitivity sweeps of the profit-optimal policy as
plot-ready CSV files: boot time, current fleet size, and charge per job.

Usage:
    python scripts/run_sweeps.py [--out-dir sweeps/]
"""

import argparse
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from cloudprofit.cli import main as cli_main


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out-dir", default="sweeps")
    args = parser.parse_args()
    os.makedirs(args.out_dir, exist_ok=True)

    common = ["--lambda", "300", "--mu", "28.571", "--c", "0.0017",
              "--d", "17"]
    runs = [
        (["sweep", "--axis", "t_up", "--start", "0", "--stop", "50",
          "--step", "1", "--n-current", "15"], "sweep_boot_time.csv"),
        (["sweep", "--axis", "n_current", "--start", "1", "--stop", "40",
          "--step", "1"], "sweep_fleet_size.csv"),
        (["sweep", "--axis", "charge", "--start", "0.000001",
          "--stop", "0.003", "--step", "0.00005", "--n-current", "13",
          "--t-up-minutes", "5"], "sweep_charge.csv"),
    ]
    for argv, name in runs:
        out = os.path.join(args.out_dir, name)
        code = cli_main(argv + common + ["--out", out])
        if code != 0:
            return code
    print(f"wrote 3 sweep CSVs to {args.out_dir}/")
    return 0


if __name__ == "__main__":
    sys.exit(main())
