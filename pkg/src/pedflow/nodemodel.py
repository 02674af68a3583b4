"""First-order node model with counterflow look-ahead and turning fractions.

A node problem carries oriented demands (what each incoming link would send
to each outgoing link), receiving flows, and a reservation per outgoing link
for the opposing stream already under way on its bidirectional twin.  The
solver maximizes the total transfer subject to non-negativity, demand,
reserved supply, and proportional scaling of each incoming link's movements
(one reduction factor per incoming link, which is what keeps exits
first-in-first-out).

The reservation term is the gridlock valve: pedestrians wanting to enter a
segment yield part of its supply to the counterflow that will reach the node
within one free-flow traversal, which makes opposing streams take turns
instead of wedging solid.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass

import numpy as np

# Virtual row/column keys used when a node problem includes trip ends.
ORIGIN = -1  # incoming side: demand queued at an origin centroid
SINK = -2  # outgoing side: trips ending at a destination centroid


@dataclass
class NodeFlowProblem:
    """Oriented demands, supplies and counterflow reservations at one node.

    demands[i, j] is what incoming link i would send toward outgoing link j
    this step (already turn-fraction weighted); supplies[j] is the receiving
    flow of outgoing link j; counterflow[j] is the portion of that supply
    reserved for the opposing stream.
    """

    demands: np.ndarray
    supplies: np.ndarray
    counterflow: np.ndarray | None = None

    def __post_init__(self):
        self.demands = np.asarray(self.demands, dtype=float)
        self.supplies = np.asarray(self.supplies, dtype=float)
        if self.counterflow is None:
            self.counterflow = np.zeros_like(self.supplies)
        else:
            self.counterflow = np.asarray(self.counterflow, dtype=float)
        n_in, n_out = self.demands.shape
        if self.supplies.shape != (n_out,) or self.counterflow.shape != (n_out,):
            raise ValueError("supplies/counterflow must have one entry per outgoing link")
        if (self.demands < 0).any():
            raise ValueError("oriented demands must be nonnegative")
        if (self.counterflow < 0).any():
            raise ValueError("counterflow reservations must be nonnegative")


@dataclass
class NodeFlowSolution:
    """Transfer flows and the per-incoming-link reduction factors behind them."""

    flows: np.ndarray
    reductions: np.ndarray
    clamped: tuple[int, ...] = ()

    @property
    def total(self) -> float:
        return float(self.flows.sum())


def solve_node(problem: NodeFlowProblem) -> NodeFlowSolution:
    """Maximize the total transfer through a node.

    Flows scale each incoming link's oriented demands by a single factor
    (proportional movements), never exceed demand, and leave every outgoing
    link's reserved supply intact.  Among transfer patterns of maximal total,
    supply is shared at equal priority between competing incoming links, with
    unused shares redistributed.  Negative reserved supply (reservation larger
    than the receiving flow) clamps to zero and is reported in `clamped`.
    """
    S = problem.demands
    n_in, n_out = S.shape
    available = problem.supplies - problem.counterflow
    clamped = tuple(int(j) for j in np.where(available < -1e-12)[0])
    available = np.maximum(available, 0.0)

    col_load = S.sum(axis=0)
    scale = max(1.0, float(col_load.max(initial=0.0)))
    if np.all(col_load <= available + 1e-12 * scale):
        return NodeFlowSolution(S.copy(), np.ones(n_in), clamped)

    q_fair, theta_fair = _equal_priority_shares(S, available)
    q_max, theta_max = _max_total_vertex(S, available)
    if q_fair.sum() >= q_max.sum() - 1e-9 * max(1.0, q_max.sum()):
        return NodeFlowSolution(q_fair, theta_fair, clamped)
    return NodeFlowSolution(q_max, theta_max, clamped)


def _equal_priority_shares(S: np.ndarray, available: np.ndarray):
    """Equal-priority supply sharing with redistribution of unused shares.

    Every pass pins down at least one incoming link: either links whose whole
    demand fits their current shares, or the most constrained link at its
    bottleneck share.  Freed shares then flow back to the remaining
    competitors, so the result is the max-min fair transfer pattern.
    """
    n_in, n_out = S.shape
    row_tot = S.sum(axis=1)
    theta = np.ones(n_in)
    q = np.zeros_like(S)
    remaining = available.astype(float).copy()
    active = [i for i in range(n_in) if row_tot[i] > 0]
    uses = {i: np.where(S[i] > 0)[0] for i in active}
    while active:
        competitors = {j: sum(1 for i in active if S[i, j] > 0) for j in range(n_out)}
        cand = {}
        for i in active:
            t_i = 1.0
            for j in uses[i]:
                share = remaining[j] / competitors[j]
                ratio = share / S[i, j]
                if ratio < t_i:
                    t_i = ratio
            cand[i] = max(t_i, 0.0)
        batch = [i for i in active if cand[i] >= 1.0 - 1e-15]
        if not batch:
            t_min = min(cand.values())
            batch = [i for i in active if cand[i] <= t_min + 1e-15]
        for i in batch:
            theta[i] = min(cand[i], 1.0)
            q[i] = theta[i] * S[i]
            remaining -= q[i]
        np.clip(remaining, 0.0, None, out=remaining)
        active = [i for i in active if i not in batch]
    return q, theta


def _max_total_vertex(S: np.ndarray, available: np.ndarray):
    """Exact maximum-total transfer via a small dense simplex (Bland's rule).

    Variables are the per-incoming-link totals; bounds are the demands and the
    turn-fraction-weighted supply constraints.  Small and deterministic.
    """
    n_in, n_out = S.shape
    row_tot = S.sum(axis=1)
    act = [i for i in range(n_in) if row_tot[i] > 0]
    theta = np.ones(n_in)
    if not act:
        return np.zeros_like(S), theta
    phi = S[act] / row_tot[act][:, None]  # movement fractions of each active row
    sup_rows = [j for j in range(n_out) if math.isfinite(available[j])]
    n = len(act)
    m = n + len(sup_rows)
    T = np.zeros((m + 1, n + m + 1))
    T[:n, :n] = np.eye(n)
    T[:n, -1] = row_tot[act]
    for r, j in enumerate(sup_rows):
        T[n + r, :n] = phi[:, j]
        T[n + r, -1] = available[j]
    T[:m, n : n + m] = np.eye(m)
    T[m, :n] = -1.0
    basis = list(range(n, n + m))
    for _ in range(200 * (m + n)):
        enter = -1
        for col in range(n + m):
            if T[m, col] < -1e-12:
                enter = col
                break
        if enter < 0:
            break
        leave, best, best_bv = -1, math.inf, math.inf
        for row in range(m):
            coef = T[row, enter]
            if coef > 1e-12:
                ratio = T[row, -1] / coef
                if ratio < best - 1e-12 or (ratio < best + 1e-12 and basis[row] < best_bv):
                    leave, best, best_bv = row, ratio, basis[row]
        if leave < 0:
            raise RuntimeError("node transfer program is unbounded")  # cannot happen: demands bound it
        T[leave] /= T[leave, enter]
        for row in range(m + 1):
            if row != leave and T[row, enter] != 0.0:
                T[row] -= T[row, enter] * T[leave]
        basis[leave] = enter
    x = np.zeros(n)
    for row, bv in enumerate(basis):
        if bv < n:
            x[bv] = T[row, -1]
    for pos, i in enumerate(act):
        theta[i] = min(max(x[pos] / row_tot[i], 0.0), 1.0)
    q = theta[:, None] * S
    return q, theta


def look_ahead_term(network, out_link_id: int, curves, t: int) -> float:
    """Counterflow reservation for an outgoing link at step t.

    Counts the pedestrians who entered the opposing twin within the window
    that, at free-flow pace, puts them at this node during the step.  Links
    without a twin (one-way sidewalks) reserve nothing.
    """
    link = network.links[out_link_id]
    if link.opposite is None:
        return 0.0
    twin = network.links[link.opposite]
    curve = curves[twin.id]
    shift = link.length / twin.v_f
    dt = curve.dt
    hi = curve.interp_U((t + 1) * dt - shift)
    lo = curve.interp_U(t * dt - shift)
    return max(hi - lo, 0.0)


class TurningFractions:
    """Per-destination, per-node movement split over time, with fallbacks.

    Movement mass comes from the route flows; where no mass exists for an
    incoming link at some instant, the split falls back to the destination's
    current shortest-path successor so residual pedestrians always route.
    """

    def __init__(self, n_bins: int, successors=None):
        self.n_bins = n_bins
        # movements[(dest, node)][in_key][out_key] -> mass per bin
        self.movements: dict[tuple[int, int], dict[int, dict[int, np.ndarray]]] = {}
        # successors[dest] -> sorted [(k_idx, {node: out link id})]
        self.successors: dict[int, list[tuple[int, dict[int, int]]]] = {}
        self._succ_keys: dict[int, list[int]] = {}
        if successors:
            for dest, by_bin in successors.items():
                self.successors[dest] = sorted(by_bin.items())
                self._succ_keys[dest] = [k for k, _ in self.successors[dest]]

    @property
    def destinations(self) -> list[int]:
        return sorted({dest for dest, _ in self.movements} | set(self.successors))

    def add_mass(self, dest: int, node: int, in_key: int, out_key: int, t_idx: int, mass: float) -> None:
        rows = self.movements.setdefault((dest, node), {})
        outs = rows.setdefault(in_key, {})
        arr = outs.get(out_key)
        if arr is None:
            arr = outs[out_key] = np.zeros(self.n_bins)
        arr[min(t_idx, self.n_bins - 1)] += mass

    def fractions(self, dest: int, node: int, in_key: int, t_idx: int) -> list[tuple[int, float]]:
        """Normalized split [(out_key, fraction), ...] for one incoming link.

        Resolution order: the movement mass at this instant; the shortest-path
        successor (residual pedestrians follow the currently cheapest route);
        as a last resort the row's time-aggregated split, which keeps
        off-schedule pedestrians moving when no successor trees were given.
        """
        if node == dest:
            return [(SINK, 1.0)]
        rows = self.movements.get((dest, node))
        outs = rows.get(in_key) if rows is not None else None
        if outs is not None:
            t = min(t_idx, self.n_bins - 1)
            total = sum(arr[t] for arr in outs.values())
            if total > 1e-15:
                return [(key, arr[t] / total) for key, arr in sorted(outs.items()) if arr[t] > 0]
        succ = self._successor(dest, node, t_idx)
        if succ is not None:
            return [(succ, 1.0)]
        if outs is not None:
            sums = {key: arr.sum() for key, arr in sorted(outs.items())}
            total = sum(sums.values())
            if total > 1e-15:
                return [(key, s / total) for key, s in sums.items() if s > 0]
        return []

    def _successor(self, dest: int, node: int, t_idx: int) -> int | None:
        trees = self.successors.get(dest)
        if not trees:
            return None
        pos = bisect.bisect_right(self._succ_keys[dest], t_idx) - 1
        pos = max(pos, 0)
        return trees[pos][1].get(node)


def paths_to_turning_fractions(
    path_flows,
    network,
    grid,
    cost_fn=None,
    successors=None,
) -> TurningFractions:
    """Convert route flows into per-destination turning fractions over time.

    path_flows is an iterable of (path, departure bin, flow in ped/s).  Each
    path's flow is projected forward through its nodes at the link costs
    frozen at the departure bin (free-flow times when cost_fn is None), and
    accumulated as movement mass per (destination, node, incoming, outgoing).
    One fraction set results per destination.
    """
    tf = TurningFractions(grid.n_bins, successors=successors)
    dt = grid.dt
    for path, k_idx, flow in path_flows:
        if flow <= 0:
            continue
        dest = path.od[1]
        t = k_idx * dt
        in_key = ORIGIN
        for lid in path.link_ids:
            link = network.links[lid]
            tf.add_mass(dest, link.from_node, in_key, lid, int(t / dt + 1e-9), flow)
            c = cost_fn(lid, k_idx) if cost_fn is not None else link.free_flow_time
            t += c
            in_key = lid
        tf.add_mass(dest, dest, in_key, SINK, int(t / dt + 1e-9), flow)
    return tf
