import json
import os
import sys

import pandas as pd
from tabulate import tabulate

out_dir = sys.argv[1] if len(sys.argv) > 1 else "results/sweep"

provenance_path = os.path.join(out_dir, "provenance.json")
sweep_path = os.path.join(out_dir, "sweep.csv")
scenarios_path = os.path.join(out_dir, "scenarios.csv")

if os.path.exists(provenance_path):
    with open(provenance_path, "r") as f:
        provenance = json.load(f)
    print("📜 RUN PROVENANCE\n")
    print(f"{'Created':<14} | {provenance.get('created_at', 'N/A')}")
    print(f"{'Config hash':<14} | {(provenance.get('config_hash') or 'N/A')[:16]}")
    print(f"{'Master seed':<14} | {provenance['master_seed']}")
    print(f"{'Days':<14} | {provenance['days']}")
    print(f"{'Distribution':<14} | {provenance['distribution']}")
    print(f"{'Load limit':<14} | {provenance['load_limit'] or 'off'}")
    print(f"{'Version':<14} | {provenance['version']}")
    print("-" * 40)

if os.path.exists(sweep_path):
    sweep = pd.read_csv(sweep_path)
    columns = ["alpha", "passenger_wait_mean_min", "plane_wait_mean_min", "plane_wait_std_min", "benefit_pct"]
    print("\n📈 ALPHA SWEEP\n")
    print(tabulate(sweep[columns], headers=["alpha", "pax wait", "plane wait", "wait std", "benefit %"],
                   tablefmt="grid", floatfmt=".2f", showindex=False))
    best = sweep.loc[sweep["benefit_pct"].idxmax()]
    print(f"\n✅ Best benefit {best['benefit_pct']:.2f}% at alpha = {best['alpha']:.2f}")
elif os.path.exists(scenarios_path):
    scenarios = pd.read_csv(scenarios_path)
    print("\n✈️  SCENARIOS\n")
    print(tabulate(scenarios, headers="keys", tablefmt="grid", floatfmt=".2f", showindex=False))
else:
    print(f"No sweep.csv or scenarios.csv in {out_dir}")
    sys.exit(1)
print("\n")
