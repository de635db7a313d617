"""Energy detector on a Rayleigh uplink against its closed-form flip rate.

Run: python3 demos/detector.py
"""

import numpy as np

from fskmv.analysis import flip_prob_given_split, mc_flip_prob
from fskmv.geometry import CellConfig, lambda_param

cell = CellConfig(num_eds=50).with_snr_db(20)
for a in (0, 2):
    c = cell.with_alpha_eff(a)
    xi = 2 * lambda_param(c) / c.noise_var
    for kp in (25, 30, 40, 50):
        res = mc_flip_prob(50, kp, 20_000, np.random.default_rng(kp), c.noise_var, cell=c)
        print(f"alpha_eff={a} K+={kp}: simulated {res.flip_rate:.4f} +- {res.stderr:.4f}, "
              f"closed form {flip_prob_given_split(50, kp, xi):.4f}")
