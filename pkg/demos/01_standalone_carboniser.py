"""
Standalone carboniser
=====================

The carboniser on its own, fed with fresh sorbent at a fixed temperature.
We look at the rate laws, then trace steady states against the gas
residence time and ask how long the gas must stay to reach 71 % uptake.

Run with ``python demos/01_standalone_carboniser.py``.
"""
import numpy as np

from endex.model import arrhenius_k, carbonation_rate, equilibrium_pressure
from endex.params import default_params
from endex.scenarios import standalone_sweep

P = default_params()
kin = P.kinetics

# %% Rate laws
# The equilibrium CO2 pressure rises steeply with temperature.  Carbonation
# runs only while the gas holds more CO2 than that.
for T in (1000.0, 1060.0, 1123.0, 1170.0):
    pe = equilibrium_pressure(T, kin)
    v = carbonation_rate(T, P.flow.pc_in, kin, P.carboniser)
    print(f"T = {T:6.0f} K   k = {arrhenius_k(T, kin):.3e}   p_eq = {pe / 1e6:.4f} MPa   "
          f"v1(inlet gas) = {v:.3f} mol/m^3/s")

# %% Steady states against residence time
# One branch per solids flow.  Longer residence gives more uptake; more
# sorbent gives more reaction surface.
res = standalone_sweep()
for run in res.runs:
    b = run.branch
    tau = b.param_values()
    conv = b.column("conversion")
    at = [np.interp(t, tau, conv) for t in (1.0, 5.0, 10.0, 20.0)]
    print(f"{run.label:>6}: conversion at tau1 = 1/5/10/20 s: "
          + " ".join(f"{100 * c:5.1f} %" for c in at)
          + f"   all stable: {all(r.stability.stable for r in b.records)}")

print("tau1 where c1 = 7 mol/m^3:",
      {k: v for k, v in res.metrics.items() if k.startswith("tau1_at")})
print("p1 above p1_eq everywhere:", res.metrics["p1_above_p1_eq_everywhere"])

# %% How much faster would the kinetics need to be?
# At the printed rate constant the gas never reaches 71 % uptake within
# 20 s.  Scaling the rate shows the crossing appearing and moving down.
for kappa in (1.0, 3.0, 5.0, 10.0, 20.0):
    m = standalone_sweep(P.with_values(kappa=kappa), Fs_values=(10.0, 20.0)).metrics
    print(f"kappa = {kappa:5.1f}: crossing at Fs 10 = {m['tau1_at_c1_7[Fs_10]']}, "
          f"Fs 20 = {m['tau1_at_c1_7[Fs_20]']}")
