"""Three regimes of the quasiperiodic rotor and a coarse phase diagram.

Adding two incommensurate modulation frequencies turns the rotor into a
three-dimensional Anderson model. The late-time exponent of <p^2> separates
localized (0), critical (2/3) and diffusive (1) transport.
"""

import numpy as np

from kickedrotor import EnsembleSpec, phase_diagram
from kickedrotor.experiments import quasiperiodic_params

eps = np.linspace(0.1, 0.8, 4)
Ks = np.linspace(4.0, 9.0, 4)
params = quasiperiodic_params(Ks[0], eps[0], 300)
pd = phase_diagram(eps, Ks, params, EnsembleSpec(16, seed=0))

print("beta at t = 300 (rows: epsilon, columns: K)")
print("        " + " ".join(f"{k:6.2f}" for k in Ks))
for e, row in zip(eps, pd.beta):
    print(f"{e:6.3f}  " + " ".join(f"{b:6.3f}" for b in row))
print("\nbeta = 2/3 crossings (epsilon, K):", [(round(e, 3), round(k, 3)) for e, k in pd.critical_line])
