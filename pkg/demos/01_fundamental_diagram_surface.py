"""How counterflow reshapes a sidewalk's flow-density relation.

A sidewalk direction sharing its segment with an opposing stream sees less of
everything: the density ratio (its share of the total density) scales the jam
density it can use and degrades its free-flow speed, logistically or as a
power law.  This script sweeps the ratio and prints how the triangular
relation's speed, apex and capacity shrink, and checks that at ratio 1.0 the
plain two-dimensional triangle comes back exactly.
"""

import numpy as np

from pedflow import FDParams, FDState, critical_density, density_ratio, effective_speed, flow
from pedflow.fd import capacity_flow, effective_jam_density

params = FDParams(v_f=1.5, omega=0.5, k_jam=5.4)  # demonstration values

print("density ratio sweep (logistic speed law)")
print(f"{'ratio':>6} {'speed m/s':>10} {'jam ped/m2':>11} {'apex ped/m2':>12} {'capacity ped/m/s':>17}")
for rho in (1.0, 0.8, 0.6, 0.4, 0.2):
    v = effective_speed(params, rho)
    kj = effective_jam_density(params, rho)
    kc = critical_density(params, rho)
    print(f"{rho:>6.2f} {v:>10.3f} {kj:>11.2f} {kc:>12.3f} {v * kc:>17.3f}")

print()
print("a balanced two-way state halves both directions' usable diagram:")
state = FDState(k=1.0, k_opp=1.0)
rho = density_ratio(state)
print(f"  k = k_opp = 1.0 ped/m2  ->  ratio {rho:.2f}, flow {flow(params, state):.3f} ped/m/s")

print()
print("at ratio 1.0 the surface is exactly the classic triangle:")
kc = critical_density(params, 1.0)
for k in np.linspace(0.0, params.k_jam, 7):
    q = flow(params, FDState(k=k, k_opp=0.0))
    branch = "hypocritical" if k <= kc else "hypercritical"
    print(f"  k = {k:4.2f} ped/m2  q = {q:.3f} ped/m/s  ({branch})")
print(f"  apex: k_c = {kc:.3f} ped/m2, capacity {capacity_flow(params):.3f} ped/m/s")

print()
print("power-law variant for comparison (gamma = 1.2):")
power = FDParams(v_f=1.5, omega=0.5, k_jam=5.4, variant="power", gamma=1.2)
for rho in (1.0, 0.6, 0.2):
    print(f"  ratio {rho:.1f}: speed {effective_speed(power, rho):.3f} m/s "
          f"(logistic gives {effective_speed(params, rho):.3f})")
