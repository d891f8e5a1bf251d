"""Finite-time scaling: extracting the critical exponent nu.

First on synthetic one-parameter-scaling data with a planted exponent, then
(with --physical) on engine curves along the line epsilon = 0.1 + 0.14 (K - 4).
The physical run takes a few minutes with the reduced ensemble below.
"""

import sys

import numpy as np

from kickedrotor import TransportCurve, finite_time_scaling
from kickedrotor.engine import log_times
from kickedrotor.experiments import path_curves

t = log_times(1000)
t = t[t >= 10].astype(float)
curves = []
for d in (-1.7, -1.2, -0.8, -0.5, -0.3, 0.3, 0.5, 0.8, 1.2, 1.7):
    y = abs(d) ** -1.6 * t ** (-1 / 3)
    lam = y**2 / (1 + y**2) if d < 0 else 1 + 1 / y
    curves.append(TransportCurve(4.7 + d, t, lam * t ** (2 / 3)))
for K_c in (None, "fit"):
    r = finite_time_scaling(curves, K_c=K_c, n_bootstrap=0)
    print(f"synthetic, K_c={'crossing' if K_c is None else K_c}: K_c = {r.K_c:.4f}, nu = {r.nu:.4f}, "
          f"branch slopes {r.branch_slopes['localized']:.2f} / {r.branch_slopes['diffusive']:.2f}")

if "--physical" in sys.argv:
    Ks = np.round(np.arange(5.0, 8.01, 0.25), 3)
    phys = path_curves(Ks, seed=0, n_members=100, n_kicks=1000,
                       progress=lambda K: print(f"  curve K={K:g} done", flush=True))
    r = finite_time_scaling(phys, K_c="fit", n_bootstrap=50)
    print(f"path: K_c = {r.K_c:.3f}, nu = {r.nu:.3f} +- {r.nu_err:.3f}, "
          f"skipped K = {[float(r.Ks[i]) for i in r.skipped]}")
