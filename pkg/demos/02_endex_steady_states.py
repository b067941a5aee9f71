"""
Endex steady states
===================

Carboniser and calciner coupled by the circulating sorbent and, optionally,
a wall heat exchanger.  Three observations:

* a longer carboniser residence time lowers the carboniser temperature
  when sorbent circulates, and raises it when it does not;
* more sorbent flow pulls the two segment temperatures together;
* so does a stronger wall exchanger.
"""
import numpy as np

from endex.continuation import solve_steady
from endex.params import default_params
from endex.scenarios import endex_inlet_sweep, sorbent_flow_compare, value_at, wall_coupling_sweep

P = default_params()

# %% One operating point
rec = solve_steady(P)
c1, T1, c2, T2 = rec.state
print(f"nominal: c1 = {c1:.3f} mol/m^3, T1 = {T1:.2f} K, c2 = {c2:.4f} mol/m^3, T2 = {T2:.2f} K")
print("eigenvalues:", " ".join(f"{v.real:.3e}{v.imag:+.3e}j" for v in rec.eigen.values))
print(f"conversion {100 * rec.derived['conversion']:.1f} %, {rec.stability.kind}")

# %% Temperature inversion
for Fs in (20.0, 0.0):
    res = endex_inlet_sweep(Fs=Fs, tau2_values=(30.0,))
    long_b = res.run("tau2_30_tau1_15").branch
    short_b = res.run("tau2_30_tau1_10").branch
    for t in (1023.0, 1060.0, 1123.0):
        d = value_at(long_b, t, "T1") - value_at(short_b, t, "T1")
        print(f"Fs = {Fs:4.0f} kg/s, T1_in = {t:.0f} K: T1(15 s) - T1(10 s) = {d:+.2f} K")
    for note in res.notes:
        print("  note:", note)

# %% Sorbent flow closes the temperature gap
res = sorbent_flow_compare(Fs_values=(10.0, 20.0, 30.0, 40.0))
for run in res.runs:
    b = run.branch
    gap = np.abs(b.column("T1") - b.column("T2"))
    print(f"{run.label:>6}: |T1 - T2| from {gap.max():.2f} to {gap.min():.2f} K over the inlet range,"
          f" p1 at mid-range {res.metrics[f'p1_mid[{run.label}]'] / 1e3:.2f} kPa")

# %% So does the wall exchanger
res = wall_coupling_sweep()
for run in res.runs:
    b = run.branch
    g = [abs(value_at(b, L, "T1") - value_at(b, L, "T2")) for L in (0.0, 1e3, 1e4, 1e5)]
    print(f"{run.label}: gap at Lex = 0, 1, 10, 100 kW/K: " + ", ".join(f"{x:.2f}" for x in g) + " K")
