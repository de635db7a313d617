"""Peak-to-mean envelope power of FSK-MV symbols with and without randomization.

Run: python3 demos/pmepr.py
"""

import numpy as np

from fskmv.experiments import PMEPR_KINDS, ccdf_quantile_db, pmepr_samples
from fskmv.waveform import DESK_OFDM, to_db

rng = np.random.default_rng(0)
for kind in PMEPR_KINDS:
    vals = pmepr_samples(kind, 2000 if kind != "fsk_mv_unrandomized" else 1, DESK_OFDM, rng, oversampling=8)
    tail = ccdf_quantile_db(vals, 1e-2) if vals.size > 1 else float(to_db(vals[0]))
    print(f"{kind:20s} median {np.median(to_db(vals)):6.2f} dB, 1% tail {tail:6.2f} dB")
# all-equal votes line up M/2 tones in phase; the random QPSK symbol breaks that peak
