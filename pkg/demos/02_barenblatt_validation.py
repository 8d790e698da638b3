"""Validate the finite-volume solver against the exact porous-medium profile.

For u_t = div(u grad u) in R^3 the self-similar solution is
u = t^{-3/5} (C - r^2 t^{-2/5} / 10)_+.  We start from its cell averages at
t = 1, evolve to t = 2 and compare, then refine the grid to see the error
shrink.

    python demos/02_barenblatt_validation.py [K]
"""
import sys
import time

from inhomdiff.config import ProblemSpec
from inhomdiff.exact import Barenblatt
from inhomdiff.harness import barenblatt_errors

K = int(sys.argv[1]) if len(sys.argv) > 1 else 1024
sol = Barenblatt.with_mass(3, 2.0, 2.0, 1.0)
print(f"mass-1 profile: C = {sol.C:.6f}, front r(1) = {sol.support_radius(1.0):.4f}, "
      f"r(2) = {sol.support_radius(2.0):.4f}")

spec = ProblemSpec()
prev = None
for k in (K // 4, K // 2, K):
    t0 = time.perf_counter()
    linf, l1, rs = barenblatt_errors(spec, k)
    note = "" if prev is None else f"  error ratio {prev / linf:.2f}"
    print(f"K={k:5d}  Linf={linf:.3e}  L1={l1:.3e}  steps={rs.steps:8d}  "
          f"{time.perf_counter() - t0:5.1f}s{note}")
    prev = linf
print(f"mass drift over the run: {rs.max_mass_drift:.1e}")
