"""Route choice toward dynamic user equilibrium.

Each iteration freezes the link cost trajectories, finds the cheapest route
per destination and departure instant (pre-trip, instantaneous costs), blends
the all-or-nothing loading into the running path flows with a 1/n step
(method of successive averages, which preserves feasibility as a convex
combination), converts the path flows into turning fractions, loads the
network, and re-measures costs.  Convergence is tracked by the relative gap:
the excess of the flow-weighted route times over the demand-weighted shortest
route times, normalized by the latter.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from . import pvdf
from .loading import load_network
from .network import Network, Path, TimeGrid, enumerate_paths
from .nodemodel import paths_to_turning_fractions


class CostField:
    """Per-link cost trajectories on the grid; column views act like mappings."""

    def __init__(self, arr: np.ndarray, link_order):
        self.arr = arr
        self.link_order = list(link_order)
        self.index = {lid: i for i, lid in enumerate(self.link_order)}

    @property
    def n_bins(self) -> int:
        return self.arr.shape[1]

    def at(self, link_id: int, k_idx: int) -> float:
        return float(self.arr[self.index[link_id], min(k_idx, self.n_bins - 1)])

    def column(self, k_idx: int) -> "_CostColumn":
        return _CostColumn(self, min(k_idx, self.n_bins - 1))

    def is_finite(self) -> bool:
        return bool(np.isfinite(self.arr).all())


class _CostColumn:
    def __init__(self, field: CostField, k_idx: int):
        self._field = field
        self._k = k_idx

    def __getitem__(self, link_id: int) -> float:
        return float(self._field.arr[self._field.index[link_id], self._k])


def free_flow_costs(network: Network, grid: TimeGrid, penalties=()) -> CostField:
    order = network.sorted_link_ids()
    tau = np.array([network.links[l].free_flow_time for l in order])
    arr = np.tile(tau[:, None], (1, grid.n_bins))
    field = CostField(arr, order)
    _apply_penalties(field, grid, penalties)
    return field


def costs_from_loading(network, grid, result, params, penalties=()) -> CostField:
    """Cost trajectories from a loading's measured directional inflows."""
    order = result.link_order
    tau = np.array([network.links[l].free_flow_time for l in order])
    cap = np.array([network.links[l].capacity for l in order])
    u = result.inflow_rates()
    opp_rows = np.array(
        [result.link_index[network.links[l].opposite] if network.links[l].opposite is not None else -1
         for l in order],
        dtype=int,
    )
    u_opp = np.where((opp_rows >= 0)[:, None], u[opp_rows], 0.0)
    arr = pvdf.link_cost_profile(tau, cap, params, u, u_opp)
    field = CostField(arr, order)
    _apply_penalties(field, grid, penalties)
    return field


def _apply_penalties(field: CostField, grid: TimeGrid, penalties) -> None:
    """penalties: iterable of (link id, start_s, added_cost_s)."""
    for lid, start_s, cost_s in penalties:
        row = field.index[lid]
        start_bin = max(0, int(math.ceil(start_s / grid.dt - 1e-9)))
        field.arr[row, start_bin:] += cost_s


def shortest_paths(network: Network, costs_at_k, destination: int):
    """Minimal instantaneous route times toward one destination at one instant.

    Returns (times, successors): times maps node -> minimal route time to the
    destination (missing means unreachable, i.e. infinite); successors maps
    node -> the outgoing link of the cheapest route, smallest next node id
    first on ties so the implied paths are lexicographically smallest.
    """
    dist: dict[int, float] = {destination: 0.0}
    heap = [(0.0, destination)]
    while heap:
        d, node = heapq.heappop(heap)
        if d > dist.get(node, math.inf):
            continue
        for lid in network.in_links[node]:
            link = network.links[lid]
            c = costs_at_k[lid]
            if c < 0:
                raise ValueError(f"negative cost on link {lid}")
            nd = d + c
            if nd < dist.get(link.from_node, math.inf) - 1e-15:
                dist[link.from_node] = nd
                heapq.heappush(heap, (nd, link.from_node))
    succ: dict[int, int] = {}
    for node, d in dist.items():
        if node == destination:
            continue
        best = None
        for lid in network.out_links[node]:
            link = network.links[lid]
            tail = dist.get(link.to_node)
            if tail is None:
                continue
            cand = costs_at_k[lid] + tail
            if cand <= d + 1e-9 * max(1.0, d):
                key = (link.to_node, lid)
                if best is None or key < best:
                    best = key
        if best is not None:
            succ[node] = best[1]
    return dist, succ


def path_from_successors(network: Network, succ: dict[int, int], origin: int, destination: int) -> Path | None:
    node = origin
    links: list[int] = []
    for _ in range(len(network.nodes) + 1):
        if node == destination:
            return Path(od=(origin, destination), link_ids=tuple(links))
        lid = succ.get(node)
        if lid is None:
            return None
        links.append(lid)
        node = network.links[lid].to_node
    return None  # successor map has a cycle; treat as unreachable


@dataclass
class ConvergenceReport:
    rel_gaps: tuple[float, ...]
    reason: str  # "gap_below_tol" or "max_iters"

    @property
    def iterations(self) -> int:
        return len(self.rel_gaps)


class AssignmentState:
    """Path sets, path flows and measurement trajectories across iterations."""

    def __init__(self, network: Network, grid: TimeGrid, demand):
        self.network = network
        self.grid = grid
        rates: dict[tuple[int, int], dict[int, float]] = {}
        for e in demand.entries:
            if e.rate <= 0:
                continue
            od = (e.origin, e.destination)
            k = grid.bin_of(e.depart_s)
            rates.setdefault(od, {})
            rates[od][k] = rates[od].get(k, 0.0) + e.rate
        self.ods = sorted(rates)
        self.k_bins = {od: sorted(rates[od]) for od in self.ods}
        self.k_pos = {od: {k: i for i, k in enumerate(self.k_bins[od])} for od in self.ods}
        self.rates = {od: np.array([rates[od][k] for k in self.k_bins[od]]) for od in self.ods}
        self.paths: dict[tuple[int, int], list[Path]] = {od: [] for od in self.ods}
        self._path_rows: dict[tuple[int, int], dict[tuple, int]] = {od: {} for od in self.ods}
        self.flows: dict[tuple[int, int], np.ndarray] = {
            od: np.zeros((0, len(self.k_bins[od]))) for od in self.ods
        }
        self.path_times: dict[tuple[int, int], np.ndarray] = {}
        self.shortest_times: dict[tuple[int, int], np.ndarray] = {}
        self.iteration = 0
        self.gap_history: list[float] = []
        self.costs: CostField | None = None
        self.loading = None

    def ensure_path(self, od, path: Path) -> int:
        rows = self._path_rows[od]
        row = rows.get(path.link_ids)
        if row is None:
            row = len(self.paths[od])
            rows[path.link_ids] = row
            self.paths[od].append(path)
            self.flows[od] = np.vstack([self.flows[od], np.zeros((1, self.flows[od].shape[1]))])
        return row

    def path_flow_items(self):
        """Yield (path, departure bin, flow) for every positive path flow."""
        for od in self.ods:
            flows = self.flows[od]
            bins = self.k_bins[od]
            for row, path in enumerate(self.paths[od]):
                for pos, k in enumerate(bins):
                    f = flows[row, pos]
                    if f > 1e-12:
                        yield path, k, float(f)

    def total_demand(self) -> float:
        return float(sum(r.sum() for r in self.rates.values()))


def update_flows(state: AssignmentState, aon_paths: dict, iteration: int) -> dict:
    """Blend the all-or-nothing loading into the path flows with a 1/n step.

    aon_paths maps od -> list of Path aligned with that od's departure bins.
    Iteration 1 therefore loads the shortest paths outright.
    """
    step = 1.0 / iteration
    for od in state.ods:
        state.flows[od] *= 1.0 - step
        for pos, path in enumerate(aon_paths[od]):
            row = state.ensure_path(od, path)
            state.flows[od][row, pos] += step * state.rates[od][pos]
    return state.flows


def relative_gap(state: AssignmentState) -> float:
    """Flow-weighted route time excess over the demand-weighted shortest times."""
    num = 0.0
    den = 0.0
    for od in state.ods:
        flows = state.flows[od]
        if od in state.path_times and flows.size:
            num += float((flows * state.path_times[od]).sum())
        if od in state.shortest_times:
            den_od = float((state.rates[od] * state.shortest_times[od]).sum())
            den += den_od
            num -= den_od
    if den <= 0:
        return 0.0
    return num / den


def run_due(network: Network, demand, cfg, loader=None):
    """Iterate route choice and loading until the relative gap closes.

    Returns (AssignmentState, ConvergenceReport); the state keeps the final
    loading and cost field.  `loader` may be swapped out (e.g. for a static
    assignment in tests); the default is the link-transmission loader.
    """
    grid = TimeGrid(cfg.dt, cfg.horizon)
    penalties = [(p.resolve(network), p.start_s, p.added_cost_s) for p in cfg.penalties]
    if loader is None:
        def loader(network, grid, demand, fractions, state):
            return load_network(
                network, grid, demand, fractions,
                fd_variant=cfg.fd_variant, fd_gamma=cfg.fd_gamma,
                effective_storage=cfg.effective_storage, node_trace=cfg.node_trace,
            )

    state = AssignmentState(network, grid, demand)
    if getattr(cfg, "enumerate_paths", True):
        for od in state.ods:
            for path in enumerate_paths(network, od, cfg.max_paths, cfg.detour):
                state.ensure_path(od, path)
    costs = free_flow_costs(network, grid, penalties)
    destinations = sorted({od[1] for od in state.ods})
    dest_bins = {
        dest: sorted({k for od in state.ods if od[1] == dest for k in state.k_bins[od]})
        for dest in destinations
    }

    def build_trees(cost_field):
        trees = {}
        for dest in destinations:
            trees[dest] = {}
            for k in dest_bins[dest]:
                trees[dest][k] = shortest_paths(network, cost_field.column(k), dest)
        return trees

    trees = build_trees(costs)
    gaps: list[float] = []
    reason = "max_iters"
    result = None
    for n in range(1, cfg.max_iters + 1):
        aon = {}
        for od in state.ods:
            r, s = od
            chosen = []
            for k in state.k_bins[od]:
                dist, succ = trees[s][k]
                path = path_from_successors(network, succ, r, s)
                if path is None:
                    raise RuntimeError(f"destination {s} unreachable from {r} at bin {k}")
                chosen.append(path)
            aon[od] = chosen
        update_flows(state, aon, n)

        successors = {dest: {k: trees[dest][k][1] for k in dest_bins[dest]} for dest in destinations}
        fractions = paths_to_turning_fractions(
            state.path_flow_items(), network, grid, cost_fn=costs.at, successors=successors,
        )
        result = loader(network, grid, demand, fractions, state)
        new_costs = costs_from_loading(network, grid, result, cfg.pvdf, penalties)
        if not new_costs.is_finite():
            raise RuntimeError("loading produced non-finite link costs; aborting assignment")

        trees = build_trees(new_costs)
        for od in state.ods:
            r, s = od
            bins = state.k_bins[od]
            pt = np.zeros((len(state.paths[od]), len(bins)))
            for row, path in enumerate(state.paths[od]):
                for pos, k in enumerate(bins):
                    pt[row, pos] = pvdf.instantaneous_route_time(path, new_costs.column(k))
            state.path_times[od] = pt
            state.shortest_times[od] = np.array(
                [trees[s][k][0].get(r, math.inf) for k in bins]
            )
        state.iteration = n
        state.costs = new_costs
        state.loading = result
        gap = relative_gap(state)
        gaps.append(gap)
        state.gap_history = gaps
        costs = new_costs
        if gap <= cfg.gap_tol:
            reason = "gap_below_tol"
            break
    return state, ConvergenceReport(tuple(gaps), reason)
