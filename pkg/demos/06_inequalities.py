"""Empirical constants of the functional inequalities on random radial bumps.

One hundred seeded mixtures of one to three bumps are pushed through the
Hardy, weighted Sobolev, Faber-Krahn and interpolation inequalities on flat
R^3 and on a manifold with f(r) ~ r^0.9 at infinity.  Each constant is the
worst ratio LHS/RHS over the family.

    python demos/06_inequalities.py
"""
from inhomdiff.config import ProblemSpec
from inhomdiff.inequalities import bump_family, rearrange, run_suite

for label, spec in (("flat R^3", ProblemSpec(alpha=1.0)),
                    ("beta = 0.9", ProblemSpec(alpha=1.0, beta=0.9))):
    fam = bump_family(spec.bundle, n=100, seed=0, K=1024)
    recs = run_suite(fam, p=2.0, r=1.0, s=2.5)
    print(f"\n{label}, rho ~ r^-1")
    for k, rec in recs.items():
        print(f"  {k:17s} {rec.constant:8.4f}   worst function #{rec.worst_index}")

# rearrangement keeps every integral of phi(u)
fn = fam[0]
us = rearrange(fn)
print(f"\nint u^2 dmu = {fn.moment(2.0):.12g},  int u*(s)^2 ds = {us.moment(2.0):.12g}")
