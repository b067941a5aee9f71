"""
Regime survey
=============

Inlet-temperature branches over a grid of residence times, solids flow and
wall conductance.  Each case reports sign-condition violations, the largest
eigenvalue real part and any singular points.  Three points per axis keeps
this quick; the acceptance tests use five.
"""
from collections import Counter

from endex.scenarios import regime_survey

res = regime_survey(axis_points=3)
for k, v in res.metrics.items():
    print(f"{k:28s} {v}")

bad = [c for c in res.tables["cases"] if c["sign_violations"]]
print("cases with violations by tau1:", dict(Counter(c["tau1"] for c in bad)))
print("earliest inlet temperature with a violation:",
      min((c["first_violation_T1_in"] for c in bad), default=None))

low = regime_survey(axis_points=3, capacity_factor=0.01)
print("capacities / 100: Hopf points", low.metrics["hopfs"],
      "largest real part", low.metrics["max_real_part"])
