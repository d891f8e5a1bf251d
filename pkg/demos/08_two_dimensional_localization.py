"""Two-dimensional localization: width grows exponentially with epsilon.

With one extra frequency the rotor maps to a 2D Anderson model, always
localized, with ln <p^2>_sat rising linearly in epsilon at slope close to
2 (pi / sqrt 32) (K / kbar)^2.
"""

from kickedrotor.experiments import fig8

out = fig8(seed=0, n_members=50)
s = out.summary
for e, y, b in zip(s["epsilons"], s["ln_p2_sat"], s["late_beta"]):
    print(f"eps = {e:.1f}: ln <p^2>_sat = {y:.3f} (late exponent {b:.3f})")
print(f"slope {s['slope']:.3f} against predicted {s['predicted_slope']:.3f} (ratio {s['slope_ratio']:.2f}), "
      f"R^2 = {s['r2']:.3f}")
