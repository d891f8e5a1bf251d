"""Quantum kicked rotor: diffusion stops and the distribution turns exponential.

An ensemble over quasimomenta at K = 7.2, kbar = 2.89 spreads diffusively for
a few kicks, then freezes. The frozen momentum distribution is fitted with
exp(-|p|^alpha / s); alpha close to 1 is the signature of exponential
(Anderson) localization in momentum space.
"""

import numpy as np

from kickedrotor import EnsembleSpec, SimParams, TransportCurve, fit_distribution_shape, run_ensemble
from kickedrotor.scaling import exponent_at

params = SimParams(K=7.2, kbar=2.89, n_kicks=200, basis_half_width=1024)
s = run_ensemble(params, EnsembleSpec(200, seed=0, sample_phases=False), keep_members=False)

print("  t      <p^2>")
for t in (1, 2, 5, 10, 20, 50, 100, 200):
    i = int(np.searchsorted(s.times, t))
    print(f"{int(s.times[i]):4d} {s.p2[i]:10.2f}")

beta = exponent_at(TransportCurve(params.K, s.times, s.p2), window=1.0)
fit = fit_distribution_shape(s.p_classes, s.distribution, bin_width=params.kbar)
print(f"\nexponent over the last decade: {beta:.3f}")
print(f"shape fit: alpha = {fit.alpha:.3f}, s = {fit.s:.2f}, KL divergence = {fit.goodness:.2e}")
