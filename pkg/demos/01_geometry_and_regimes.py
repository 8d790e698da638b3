"""Geometry of a model manifold and the regime map in the density exponent alpha.

The warping function f(r) fixes volumes V(R); the density rho(r) ~ r^-alpha
turns them into weighted volumes V_rho(R) = rho(R) V(R).  Everything the
solver predicts is read off psi(R) = V_rho(R)^k rho(R) R^p with k = p+m-3.

    python demos/01_geometry_and_regimes.py
"""
import numpy as np

from inhomdiff.config import ProblemSpec
from inhomdiff.theory import classify

spec = ProblemSpec(alpha=1.0)
b = spec.bundle
print("Euclidean R^3 with rho = 1 on [0, e] and (e/r) beyond\n")
print(f"{'R':>8} {'V(R)':>12} {'V_rho(R)':>12} {'psi(R)':>12} {'Z~(psi)':>10}")
for R in (0.5, 1.0, 10.0, 100.0, 1e4):
    psi = b.psi(2, 2, R)
    print(f"{R:8.3g} {b.volume(R):12.5g} {b.vol_rho(R):12.5g} {psi:12.5g} "
          f"{b.z_tilde(2, 2, psi):10.5g}")

# psi grows like R^lambda, so Z~ (its inverse) turns t M^k into a front radius
R = np.geomspace(1e2, 1e5, 10)
slope = np.polyfit(np.log(R), np.log([b.psi(2, 2, x) for x in R]), 1)[0]
print(f"\nlog-slope of psi in the tail: {slope:.4f}  (lambda = 3)")

print("\nRegime flags for p = m = 2 as the density decays faster:")
print(f"{'alpha':>6} {'lambda':>8} {'delta1':>8}  {'sup':6} {'fsp':6} {'universal':10} blow-up")
for alpha in (0.0, 1.0, 2.2, 2.6, 3.0):
    rep = classify(spec.replace(alpha=alpha).bundle, 2.0, 2.0)
    f = rep.flags
    d1 = f"{rep.delta1:8.4f}" if rep.lambda_ > 0 else "     n/a"
    print(f"{alpha:6.2f} {rep.lambda_:8.3f} {d1}  {f['sup_estimate']!s:6} "
          f"{f['fsp']!s:6} {f['universal_bound']!s:10} {f['interface_blowup']}")
print(f"\ncritical exponent alpha* = {rep.alpha_star:g}; lambda changes sign there")
