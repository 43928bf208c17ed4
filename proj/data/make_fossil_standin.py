"""Generate data/fossil_standin.csv.

Synthetic stand-in for the SemiPar `fossil` data (106 shells, columns age and
strontium.ratio), used when the real file is not available offline.  The
curve is a hand-drawn shape with a plateau, a dip near 105-115 My and a rise
toward the youngest shells; noise is Gaussian with SD 2.5e-5.
"""

import numpy as np

rng = np.random.default_rng(20240607)
n = 106
age = np.sort(rng.uniform(91.5, 122.5, n))
age[0], age[-1] = 91.0, 123.0


def curve(a):
    base = 0.70740 + 0.00002 * np.tanh((a - 100.0) / 3.0)
    dip = -0.00016 * np.exp(-0.5 * ((a - 110.0) / 3.2) ** 2)
    rise = 0.00006 * np.exp(-0.5 * ((a - 119.5) / 2.5) ** 2)
    return base + dip + rise


sr = curve(age) + rng.normal(0.0, 2.5e-5, n)

with open("fossil_standin.csv", "w") as fh:
    fh.write("age,strontium.ratio\n")
    for a, s in zip(age, sr):
        fh.write(f"{a:.2f},{s:.6f}\n")
