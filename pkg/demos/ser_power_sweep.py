"""A small SER-versus-power sweep with all five receivers side by side.

This uses the same code path as the command line tool, but at 200 trials per
point so it finishes in well under a minute. For publication-size runs use
``shrinkcomb run --config figs/fig3.json``.

Run:  python3 demos/ser_power_sweep.py [trials]
"""

import sys

from shrinkcomb import Interferer, RunConfig, ScenarioConfig, SweepSpec, run_sweep
from shrinkcomb.harness import METHOD_LABELS, METHODS

trials = int(sys.argv[1]) if len(sys.argv) > 1 else 200
run = RunConfig(
    scenario=ScenarioConfig(interferers=(Interferer(-5.0),), master_seed=2024),
    sweep=SweepSpec("ue_power_dbm", (6.0, 10.0, 14.0, 18.0, 22.0)),
    trials=trials,
)
res = run_sweep(run)
table = {(r.method, r.sweep_value): r for r in res.records}

print(f"{'dBm':>5}" + "".join(f"{METHOD_LABELS[m]:>17}" for m in METHODS))
for p in run.sweep.values:
    print(f"{p:5g}" + "".join(f"{table[m, p].ser:17.3e}" for m in METHODS))

print("\nmean alpha chosen")
for m in ("reg_data", "reg_data_iter", "reg_exh"):
    print(f"{METHOD_LABELS[m]:<16}" + "".join(f"{table[m, p].mean_alpha:9.4f}" for p in run.sweep.values))
