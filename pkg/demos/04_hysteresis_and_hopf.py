"""
Folds, hysteresis and a Hopf point
==================================

At low sorbent flow and short carboniser residence time the inlet
temperature branch can fold over.  With the printed rate constant it does
not; with the rate scaled up about five-fold it does, and we get ignition
and extinction points, a locus of the ignition point in the solids flow,
and (with artificially small heat capacities) an oscillatory instability.
"""
from endex.continuation import solutions_at, trace_fold_locus
from endex.params import default_params
from endex.scenarios import hysteresis_scan

P = default_params()

# %% The printed rate constant: a single branch
print("kappa 1:", hysteresis_scan(P).metrics)

# %% Scaled kinetics: two folds
res = hysteresis_scan(P.with_values(kappa=6.0))
b = res.runs[0].branch
for sp in b.singular_points:
    print(f"{sp.kind} {sp.label}: T1_in = {sp.param_value:.4f} K, "
          f"T1 = {sp.state[1]:.2f} K, crossing eigenvalue {sp.crossing_eigenvalue:.2e}")
A, B = (sp.param_value for sp in b.folds())
for s in sorted(solutions_at(b, 0.5 * (A + B)), key=lambda r: r.state[1]):
    print(f"  between the folds: T1 = {s.state[1]:7.2f} K  {s.stability.kind}")
m = res.metrics
print(f"just past ignition the state climbs to T1 = {m['jump_final_T1']:.2f} K "
      f"(upper branch {m['upper_branch_T1_past_A']:.2f} K)")

# %% Ignition point against the solids flow
locus = trace_fold_locus(res.runs[0].params, b.folds()[0], "T1_in", "Fs", (5.0, 10.0))
for mu, fs in locus.points[::4]:
    print(f"  Fs = {fs:5.2f} kg/s -> ignition at T1_in = {mu:.3f} K")

# %% Smaller heat capacities: a Hopf point on the upper branch
Q = P.with_values(kappa=6.0, C1=P.get("C1") * 1e-3, C2=P.get("C2") * 1e-3)
b = hysteresis_scan(Q).runs[0].branch
for sp in b.hopfs():
    period = 2 * 3.141592653589793 / abs(sp.crossing_eigenvalue.imag)
    print(f"Hopf at T1_in = {sp.param_value:.3f} K, period about {period:.1f} s")
