"""How far is the 8-symbol pilot covariance from the truth, and does shrinking help?

With only eight pilot symbols and eight receive antennas the sample covariance
is barely full rank. Pulling it toward a scaled identity trades a little bias
for a lot of conditioning. This script draws one interference-limited channel,
then compares the unshrunk estimate, the oracle-matched shrinkage and the
shrinkage matched to the data-block covariance.

Run:  python3 demos/shrink_pilot_covariance.py
"""

import numpy as np

from shrinkcomb import (
    Interferer,
    ScenarioConfig,
    alpha_from_data,
    alpha_oracle,
    build_prep,
    draw_channels,
    draw_data_symbols,
    make_pilots,
    r_of_alpha,
    synthesize,
    trial_seed,
)

cfg = ScenarioConfig(ue_tx_power_dbm=18.0, interferers=(Interferer(-5.0),))
seed = trial_seed(1, 0)
chan = draw_channels(cfg, seed)

P = make_pilots(cfg.pilot_len, cfg.num_ues)
Yp = synthesize("pilot", cfg, chan, P, seed)
Yd = synthesize("data", cfg, chan, draw_data_symbols(cfg, seed), seed)

prep = build_prep(Yp)
C = chan.true_covariance()
print(f"antennas {cfg.dim}, pilot symbols {cfg.pilot_len}")
print(f"condition number of Q: {np.linalg.cond(prep.Q):.3g}")


def report(label, alpha):
    R = r_of_alpha(prep, alpha)
    err = np.linalg.norm(R - C) / np.linalg.norm(C)
    print(f"{label:<22} alpha={alpha:.4f}  rel. error={err:.3f}  cond={np.linalg.cond(R):.3g}")


report("no shrinkage", 0.0)
report("oracle (true C)", alpha_oracle(prep, chan))
report("data-block covariance", alpha_from_data(prep, Yd))

