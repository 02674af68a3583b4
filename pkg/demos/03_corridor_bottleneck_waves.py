"""A corridor bottleneck, its growing queue, and the wave that cleans it up.

The corridor preset narrows the final segment, so arrivals outrun what the
exit passes and a dense queue grows backward from the bottleneck.  Once
demand ends, the queue drains from its upstream tail and a recovery wave
runs forward.  This script runs the preset, prints an ASCII time-space
density map, and fits the interface speeds in each regime, comparing the
backward one against the speed implied by the two states it separates.
"""

import numpy as np

from pedflow import run_due
from pedflow.engine import build_time_space, detect_shockwaves
from pedflow.scenarios import generate_corridor_scenario

net, demand, cfg = generate_corridor_scenario(preset=4, bottleneck_width=1.0)
state, report = run_due(net, demand, cfg)
res = state.loading

curves = {lid: (res.U[res.link_index[lid]], res.V[res.link_index[lid]]) for lid in net.links}
ts = build_time_space(net, curves, list(range(1, 11)), cfg.dt)

print("time-space density, walking direction upward, one column per 5 s")
shades = " .:-=+*#%@"
k_max = ts.density.max()
for s in reversed(range(ts.n_segments)):
    row = "".join(
        shades[min(int(ts.density[s, b] / k_max * (len(shades) - 1)), len(shades) - 1)]
        for b in range(0, ts.n_bins, 5)
    )
    print(f"x {ts.x_edges[s]:>4.0f}-{ts.x_edges[s + 1]:<4.0f} m |{row}|")
print(f"{'':>13} 0 s ... {cfg.horizon:.0f} s   (darkest = {k_max:.2f} ped/m2)")

demand_end = max(e.depart_s for e in demand.entries)
print(f"\nfronts while demand loads (t < {demand_end:.0f} s):")
for f in detect_shockwaves(ts.slice_time(0.0, demand_end)):
    print(f"  {f.direction:>10}: {f.speed:+.3f} m/s over x {f.positions.min():.0f}-{f.positions.max():.0f} m")

print(f"fronts after demand ends (t > {demand_end + 5:.0f} s):")
for f in detect_shockwaves(ts.slice_time(demand_end + 5.0, cfg.horizon)):
    print(f"  {f.direction:>10}: {f.speed:+.3f} m/s over x {f.positions.min():.0f}-{f.positions.max():.0f} m")

k1, q1 = ts.density[1, 30:50].mean(), ts.flow[1, 30:50].mean()
k2, q2 = ts.density[7, 60:80].mean(), ts.flow[7, 60:80].mean()
print(f"\nstates around the queue tail: free ({k1:.2f} ped/m2, {q1:.2f} ped/m/s), "
      f"queued ({k2:.2f} ped/m2, {q2:.2f} ped/m/s)")
print(f"implied interface speed (flow jump over density jump): {(q1 - q2) / (k1 - k2):+.3f} m/s")
