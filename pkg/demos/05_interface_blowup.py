"""Support escaping to infinity for alpha above the critical exponent.

For alpha = 3 > alpha* = 2.5 the front accelerates: its log-slope rises from
decade to decade instead of settling at a power law, and the mass leaves
every fixed ball.  Unbounded support cannot be seen on a finite grid, so the
result records two proxies.

    python demos/05_interface_blowup.py
"""
from inhomdiff.config import ProblemSpec
from inhomdiff.harness import experiment_blowup

for alpha in (3.0, 1.0):
    res = experiment_blowup(ProblemSpec(alpha=alpha), require_flags=alpha > 2.5)
    run = res.series["run"]
    print(f"\nalpha = {alpha:g} (lambda = {res.extra['lambda']:g})")
    print("        t    support   mass in B_1")
    for i in range(0, len(run["t"]), 5):
        print(f"{run['t'][i]:9.3g} {run['support_radius'][i]:10.4g} {run['mass_in_ball'][i]:13.4g}")
    slopes = ", ".join(f"{s:.3f}" for s in res.extra["decade_slopes"])
    print(f"front log-slope per decade: {slopes}")
    for name, v in res.verdicts.items():
        print(f"  {name:18s} {'pass' if v['passed'] else 'fail'}")
    if res.extra["truncated"]:
        print("  (the support reached the outer wall; later values are truncated)")
