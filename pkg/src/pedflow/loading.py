"""Dynamic network loading: multi-destination link transmission over time.

One loading run walks the clock forward once.  Per step it evaluates every
link's counterflow-degraded speed from current occupancies, the sending and
receiving bounds from the cumulative curves, and the counterflow reservation
on every paired link; it then solves a transfer problem at each node that has
something to move and commits the resulting boundary counts.  Origins hold
released demand in vertical (point) queues that compete for downstream supply
like any incoming link; destinations absorb their own trips with unlimited
supply.
"""

from __future__ import annotations

import numpy as np

from . import fd, ltm
from .ltm import CumulativeCurve
from .nodemodel import ORIGIN, SINK, NodeFlowProblem, TurningFractions, solve_node


class LoadingResult:
    """Curves and bookkeeping from one loading run."""

    def __init__(self, network, grid, destinations, link_order):
        self.network = network
        self.grid = grid
        self.destinations = tuple(destinations)
        self.link_order = list(link_order)
        self.link_index = {lid: i for i, lid in enumerate(self.link_order)}
        n_links, n_bins, n_dest = len(link_order), grid.n_bins, len(destinations)
        self.U = np.zeros((n_links, n_bins + 1))
        self.V = np.zeros((n_links, n_bins + 1))
        self.Ud = np.zeros((n_links, n_dest, n_bins + 1))
        self.Vd = np.zeros((n_links, n_dest, n_bins + 1))
        self.demanded = np.zeros(n_dest)
        self.loaded = np.zeros(n_dest)
        self.completed = np.zeros(n_dest)
        self.queued = np.zeros(n_dest)
        self.supply_clamps = 0
        self.unroutable = 0.0
        self.node_trace: list[tuple] = []
        self.fd_variant = "logistic"
        self.fd_gamma: float | None = None

    # -- views ---------------------------------------------------------------

    def curves_for(self, link_id: int) -> CumulativeCurve:
        i = self.link_index[link_id]
        return CumulativeCurve(
            self.grid.n_bins, self.grid.dt, destinations=self.destinations,
            U=self.U[i], V=self.V[i], Ud=self.Ud[i], Vd=self.Vd[i],
        )

    def inflow_rates(self) -> np.ndarray:
        """Link inflow in ped/s per (link, bin)."""
        return np.diff(self.U, axis=1) / self.grid.dt

    def outflow_rates(self) -> np.ndarray:
        return np.diff(self.V, axis=1) / self.grid.dt

    def in_network(self) -> np.ndarray:
        """Pedestrians still on links at the end of the horizon, per destination."""
        return (self.Ud[:, :, -1] - self.Vd[:, :, -1]).sum(axis=0)

    def density_series(self) -> np.ndarray:
        """Occupancy density in ped/m^2 per (link, bin instant)."""
        area = np.array(
            [self.network.links[lid].length * self.network.links[lid].width
             for lid in self.link_order]
        )
        return (self.U - self.V) / area[:, None]

    def fd_travel_time(self, link_id: int, t_s: float) -> float | None:
        """Traversal time of a link entered at instant t_s, from the loaded state.

        The floor is a free-flow pass at the effective speed prevailing at
        entry; on top of that comes whatever delay the curves realized (the
        horizontal gap between the entry rank on U and the same rank on V).
        Returns None when the rank never exits within the horizon.
        """
        i = self.link_index[link_id]
        link = self.network.links[link_id]
        dt = self.grid.dt
        b = min(max(int(t_s / dt), 0), self.grid.n_bins - 1)
        occ = self.U[i, b] - self.V[i, b]
        k = occ / (link.length * link.width)
        if link.opposite is not None:
            j = self.link_index[link.opposite]
            occ_opp = self.U[j, b] - self.V[j, b]
            k_opp = occ_opp / (link.length * link.width)
        else:
            k_opp = 0.0
        rho = fd.density_ratio(fd.FDState(k=k, k_opp=k_opp))
        vhat = fd.effective_speed(self._fd_params(link), rho)
        if vhat <= 0:
            return None
        free = link.length / vhat
        rank = float(ltm.interp_at(self.U[i][None, :], np.array([t_s]), dt)[0])
        exit_t = ltm.crossing_time(self.V[i], rank, dt, self.grid.n_bins)
        if exit_t is None:
            return None
        return max(free, exit_t - t_s)

    def _fd_params(self, link) -> fd.FDParams:
        return fd.FDParams(
            v_f=link.v_f, omega=link.omega, k_jam=link.k_jam,
            variant=self.fd_variant, gamma=self.fd_gamma,
        )

    # -- invariants ----------------------------------------------------------

    def conservation_violations(self) -> list[str]:
        """Every conservation breach in the finished run (empty list = clean)."""
        out = []
        tol = 1e-6
        if (np.diff(self.U, axis=1) < -tol).any() or (np.diff(self.V, axis=1) < -tol).any():
            out.append("a cumulative curve decreases")
        occ = self.U - self.V
        if (occ < -tol).any():
            out.append("negative occupancy (exits overtook entries)")
        storage = np.array([self.network.links[lid].storage for lid in self.link_order])
        if (occ > storage[:, None] + tol).any():
            worst = int(np.argmax((occ - storage[:, None]).max(axis=1)))
            out.append(f"occupancy exceeds storage on link {self.link_order[worst]}")
        if (np.abs(self.Ud.sum(axis=1) - self.U) > tol).any():
            out.append("per-destination entries do not add up to the total curve")
        if (np.abs(self.Vd.sum(axis=1) - self.V) > tol).any():
            out.append("per-destination exits do not add up to the total curve")
        if (self.queued < -tol).any():
            out.append("negative origin queue")
        gap1 = np.abs(self.demanded - self.loaded - self.queued)
        if (gap1 > tol * np.maximum(1.0, self.demanded)).any():
            out.append("released + queued demand does not match demanded trips")
        gap2 = np.abs(self.loaded - self.completed - self.in_network())
        if (gap2 > tol * np.maximum(1.0, self.loaded)).any():
            out.append("loaded trips do not match completed + still-walking trips")
        return out


def load_network(
    network,
    grid,
    demand,
    fractions: TurningFractions,
    fd_variant: str = "logistic",
    fd_gamma: float | None = None,
    effective_storage: bool = False,
    node_trace: bool = False,
) -> LoadingResult:
    """Propagate the demand through the network under the given turning fractions."""
    link_order = network.sorted_link_ids()
    destinations = demand.destinations()
    n_dest = len(destinations)
    d_index = {d: i for i, d in enumerate(destinations)}
    result = LoadingResult(network, grid, destinations, link_order)
    result.fd_variant = fd_variant
    result.fd_gamma = fd_gamma

    n_links = len(link_order)
    n_bins = grid.n_bins
    dt = grid.dt
    idx = result.link_index
    L = np.array([network.links[l].length for l in link_order])
    W = np.array([network.links[l].width for l in link_order])
    VF = np.array([network.links[l].v_f for l in link_order])
    KJ = np.array([network.links[l].k_jam for l in link_order])
    OM = np.array([network.links[l].omega for l in link_order])
    CAP = np.array([network.links[l].capacity for l in link_order])
    OPP = np.array(
        [idx[network.links[l].opposite] if network.links[l].opposite is not None else -1
         for l in link_order],
        dtype=int,
    )
    area = L * W
    storage_phys = KJ * area
    to_node = np.array([network.links[l].to_node for l in link_order], dtype=int)
    paired = np.where(OPP >= 0)[0]
    twin_shift = np.zeros(n_links)
    twin_shift[paired] = L[paired] / VF[OPP[paired]]

    # demand release schedule: bin -> [(origin node, destination column, persons)]
    schedule: dict[int, list[tuple[int, int, float]]] = {}
    for e in demand.entries:
        if e.rate <= 0:
            continue
        b = grid.bin_of(e.depart_s)
        schedule.setdefault(b, []).append((e.origin, d_index[e.destination], e.rate * dt))
        result.demanded[d_index[e.destination]] += e.rate * dt
    queues: dict[int, np.ndarray] = {}

    U, V, Ud, Vd = result.U, result.V, result.Ud, result.Vd
    eps = 1e-12

    for t in range(n_bins):
        for origin, d, amount in schedule.get(t, ()):
            queues.setdefault(origin, np.zeros(n_dest))[d] += amount

        occ = U[:, t] - V[:, t]
        k = occ / area
        k_opp = np.where(OPP >= 0, k[OPP], 0.0)
        total_k = k + k_opp
        with np.errstate(invalid="ignore", divide="ignore"):
            rho = np.where(total_k > 0, k / np.where(total_k > 0, total_k, 1.0), 1.0)
            vhat = fd.effective_speed_profile(VF, rho, fd_variant, fd_gamma)
            S_all = ltm.sending_flows_at(U, V, t, dt, L, np.maximum(vhat, 1e-15), CAP)
        S_all[vhat <= 0] = 0.0
        storage = rho * storage_phys if effective_storage else storage_phys
        R_all = ltm.receiving_flows_at(V, U, t, dt, L, OM, storage, CAP)
        counterflow = np.zeros(n_links)
        if paired.size:
            hi = ltm.interp_at(U, (t + 1) * dt - twin_shift[paired], dt, rows=OPP[paired])
            lo = ltm.interp_at(U, t * dt - twin_shift[paired], dt, rows=OPP[paired])
            counterflow[paired] = np.maximum(hi - lo, 0.0)

        active = set(int(n) for n in to_node[S_all > eps])
        for origin, q in queues.items():
            if q.sum() > eps:
                active.add(origin)

        dU = np.zeros((n_links, n_dest))
        dV = np.zeros((n_links, n_dest))

        for node_id in sorted(active):
            rows = []  # (in_key, [(dest column, out column key, persons), ...])
            for lid in network.in_links.get(node_id, ()):
                li = idx[lid]
                s_i = S_all[li]
                if s_i <= eps:
                    continue
                comp = ltm.split_by_entry_order(U[li], Ud[li], V[li, t], V[li, t] + s_i, t)
                moves = []
                for d in range(n_dest):
                    if comp[d] <= eps:
                        continue
                    fracs = fractions.fractions(destinations[d], node_id, lid, t)
                    if not fracs:
                        result.unroutable += comp[d]
                        continue
                    for out_key, frac in fracs:
                        if frac > 0:
                            moves.append((d, out_key, comp[d] * frac))
                if moves:
                    rows.append((lid, moves))
            queue = queues.get(node_id)
            if queue is not None and queue.sum() > eps:
                moves = []
                for d in range(n_dest):
                    if queue[d] <= eps:
                        continue
                    fracs = fractions.fractions(destinations[d], node_id, ORIGIN, t)
                    if not fracs:
                        continue  # stays queued, not lost
                    for out_key, frac in fracs:
                        if frac > 0:
                            moves.append((d, out_key, queue[d] * frac))
                if moves:
                    rows.append((ORIGIN, moves))
            if not rows:
                continue

            out_keys = sorted({m[1] for _, moves in rows for m in moves if m[1] != SINK})
            has_sink = any(m[1] == SINK for _, moves in rows for m in moves)
            cols = {key: c for c, key in enumerate(out_keys)}
            n_out = len(out_keys) + (1 if has_sink else 0)
            if has_sink:
                cols[SINK] = n_out - 1
            demands = np.zeros((len(rows), n_out))
            for r, (in_key, moves) in enumerate(rows):
                for d, out_key, mass in moves:
                    demands[r, cols[out_key]] += mass
            supplies = np.empty(n_out)
            reserved = np.zeros(n_out)
            for key, c in cols.items():
                if key == SINK:
                    supplies[c] = np.inf
                else:
                    oi = idx[key]
                    supplies[c] = R_all[oi]
                    reserved[c] = counterflow[oi]

            sol = solve_node(NodeFlowProblem(demands, supplies, reserved))
            result.supply_clamps += len(sol.clamped)

            for r, (in_key, moves) in enumerate(rows):
                theta = sol.reductions[r]
                if theta <= 0:
                    continue
                for d, out_key, mass in moves:
                    flow = theta * mass
                    if flow <= 0:
                        continue
                    if out_key == SINK:
                        result.completed[d] += flow
                    else:
                        dU[idx[out_key], d] += flow
                    if in_key == ORIGIN:
                        queues[node_id][d] -= flow
                        result.loaded[d] += flow
                    else:
                        dV[idx[in_key], d] += flow
            if node_trace:
                for r, (in_key, moves) in enumerate(rows):
                    per_out: dict[int, float] = {}
                    for d, out_key, mass in moves:
                        per_out[out_key] = per_out.get(out_key, 0.0) + mass
                    for out_key in sorted(per_out):
                        c = cols[out_key]
                        result.node_trace.append(
                            (node_id, t * dt, in_key, out_key, per_out[out_key],
                             supplies[c], reserved[c], sol.reductions[r] * per_out[out_key])
                        )

        for q in queues.values():
            np.clip(q, 0.0, None, out=q)
        Ud[:, :, t + 1] = Ud[:, :, t] + dU
        Vd[:, :, t + 1] = Vd[:, :, t] + dV
        U[:, t + 1] = U[:, t] + dU.sum(axis=1)
        V[:, t + 1] = V[:, t] + dV.sum(axis=1)

    for q in queues.values():
        result.queued += q
    return result
