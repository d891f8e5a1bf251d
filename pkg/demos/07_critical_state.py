"""Self-similar critical distribution versus a frozen localized one.

At the transition the momentum distribution keeps its shape while its width
grows as t^(1/3); rescaling p -> p t^(-1/3) collapses distributions taken at
different times. A localized control does not collapse.
"""

from kickedrotor.experiments import CRITICAL_POINT, LOCALIZED_POINT, collapse_runs
from kickedrotor.scaling import critical_collapse

for label, point in (("critical", CRITICAL_POINT), ("localized", LOCALIZED_POINT)):
    _, dists = collapse_runs(point, (100, 300, 1000), seed=0, n_members=100)
    rep = critical_collapse(dists)
    pairs = ", ".join(f"{a}-{b}: {v:.3f}" for (a, b), v in rep.pairwise.items())
    print(f"{label:9s} (K, eps) = {point}: L1 distances {pairs}")
