#!/usr/bin/env python3
"""Replay the bundled synthetic day against all five allocation policies
and print a profit / server-hours / job-loss comparison table.

Usage:
    python scripts/run_comparison.py [--out-dir results/] [--seed 7]

Equivalent to `cloudprofit simulate --policy all`, kept as a script for
quick experimentation with the trace parameters below.
"""

import argparse
import os
import sys
import time

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from cloudprofit.billing import BillingModel
from cloudprofit.simulator import ALL_POLICIES, SimConfig, emit_report, run_simulation
from cloudprofit.workload import ServiceTimeModel, synthesize_diurnal

TRACE = dict(days=1, base_rate=17143.0, amplitude=2800.0,
             noise_scv=0.0004, seed=20240501)
BILLING = dict(c=0.0017, d=17.0, k=1.0, t_up=5.0 / 60.0, t_down=2.0 / 60.0,
               n_max=40)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out-dir", default=None,
                        help="also write per-policy JSON reports here")
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args()

    trace = synthesize_diurnal(**TRACE)
    service = ServiceTimeModel("exponential", mean_s=1.0 / 28.571, scv=1.0)
    billing = BillingModel(**BILLING)

    rows = []
    for policy in ALL_POLICIES:
        config = SimConfig(trace=trace, service=service, billing=billing,
                           policy=policy, n_fixed=20, seed=args.seed)
        started = time.perf_counter()
        report = run_simulation(config)
        elapsed = time.perf_counter() - started
        agg = report.aggregate
        rows.append((policy, agg.total_profit_cents, agg.server_hours,
                     agg.jobs_arrived, agg.jobs_lost, agg.mean_sojourn_s,
                     elapsed))
        if args.out_dir:
            os.makedirs(args.out_dir, exist_ok=True)
            path = os.path.join(args.out_dir, f"report_{policy}.json")
            with open(path, "w") as fh:
                fh.write(emit_report(report, "json"))

    rows.sort(key=lambda r: -r[1])
    print(f"{'policy':<10} {'profit_cents':>13} {'server_h':>9} "
          f"{'arrived':>10} {'lost':>9} {'sojourn_ms':>11} {'runtime_s':>10}")
    for policy, profit, hours, arrived, lost, sojourn, elapsed in rows:
        print(f"{policy:<10} {profit:>13.1f} {hours:>9d} {arrived:>10d} "
              f"{lost:>9d} {sojourn * 1000:>11.2f} {elapsed:>10.1f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
