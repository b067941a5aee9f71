"""
Transients
==========

Start-up from CO2-free segments, the loss of sorbent circulation, and a slow
reduction of the inlet CO2 pressure followed as a sequence of steady states.
"""
from endex.params import default_params
from endex.scenarios import shutdown_ramp, solids_interruption, startup

P = default_params()

# %% Start-up
# Both segments begin at their steady temperatures with no CO2.  Distances
# are in the scaled norm (concentrations over the inlet value, temperatures
# over 1000 K).
res = startup()
for key, value in res.metrics.items():
    print(f"{key:32s} {value:.2f}")

# %% Solids interruption
# At 100 s the sorbent stops circulating.  The carboniser loses its heat sink
# and warms; a wall exchanger limits the rise.
res = solids_interruption()
print(f"adiabatic rise bound: {res.metrics['adiabatic_rise_K']:.0f} K")
for run in res.runs:
    lab = run.label
    print(f"{lab:>9}: T1 rises {res.metrics[f'excursion_K[{lab}]']:6.2f} K, peak "
          f"{res.metrics[f'peak_delay_s[{lab}]']:5.0f} s after the switch"
          + ("" if res.metrics[f"peak_is_interior[{lab}]"] else " (still rising at the end)"))

# %% Shutdown
# The inlet CO2 pressure is lowered quasistatically from its nominal value.
res = shutdown_ramp()
b = res.runs[0].branch
pc, p1, p2 = b.param_values(), b.column("p1"), b.column("p2")
for i in range(0, len(b), max(len(b) // 8, 1)):
    print(f"pc_in = {pc[i] / 1e3:8.2f} kPa   p1 = {p1[i] / 1e3:7.3f} kPa   p2 = {p2[i] / 1e3:7.3f} kPa")
print("steepest fall of p1 at pc_in =", res.metrics["knee_pc_in"], "Pa;",
      "singular points on the way:", res.metrics["singular_points"])
