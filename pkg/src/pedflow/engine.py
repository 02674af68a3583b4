"""Run orchestration: validation, assignment + loading, and all file exports.

A run directory holds, after a successful run: snapshots of the inputs
(network.net, demand.dem, config.cfg), the loading state
(cumulative_curves.csv, link_state.csv, node_trace.csv), the assignment state
(path_flows.csv, gap.csv, route_times.csv), and summary.json.  Time-space
matrices for any node path can be rebuilt from the run directory afterwards.
"""

from __future__ import annotations

import hashlib
import json
import math
import time
from dataclasses import dataclass
from pathlib import Path as FsPath

import numpy as np

from . import pvdf
from .assignment import run_due
from .config import ConfigError, ScenarioConfig, write_config
from .fd import effective_speed_profile
from .network import (
    DemandProfile,
    Network,
    load_network,
    validate_demand,
    validate_network,
    validate_time_grid,
    TimeGrid,
    write_demand,
    write_network,
)


class SimulationInputError(Exception):
    """Invalid network, demand, grid or config; the run never started."""


def run_scenario(cfg: ScenarioConfig, network: Network, demand: DemandProfile, out_dir) -> dict:
    """Validate, assign, load, and write every export into out_dir.

    Returns the summary dictionary (also written as summary.json).  Raises
    SimulationInputError for bad inputs; anything raised beyond that point is
    a runtime failure.
    """
    problems = validate_network(network)
    grid = TimeGrid(cfg.dt, cfg.horizon)
    problems += validate_time_grid(network, grid)
    problems += validate_demand(network, demand, grid)
    if problems:
        raise SimulationInputError("invalid inputs:\n" + "\n".join(problems))
    try:
        for p in cfg.penalties:
            p.resolve(network)
    except ConfigError as exc:
        raise SimulationInputError(str(exc)) from exc

    out = FsPath(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    started = time.perf_counter()
    state, report = run_due(network, demand, cfg)
    wall = time.perf_counter() - started
    result = state.loading

    write_network(network, out / "network.net")
    write_demand(demand, out / "demand.dem")
    write_config(cfg, out / "config.cfg")
    _write_curves(result, out / "cumulative_curves.csv")
    _write_link_state(cfg, result, out / "link_state.csv")
    if cfg.node_trace:
        _write_node_trace(result, out / "node_trace.csv")
    _write_path_flows(state, out / "path_flows.csv")
    _write_gap(report, out / "gap.csv")
    _write_route_times(cfg, state, result, out / "route_times.csv")

    conservation = result.conservation_violations()
    summary = {
        "results": {
            "n_nodes": len(network.nodes),
            "n_links": len(network.links),
            "dt_s": cfg.dt,
            "horizon_s": cfg.horizon,
            "iterations": report.iterations,
            "stopping_reason": report.reason,
            "final_rel_gap": report.rel_gaps[-1] if report.rel_gaps else 0.0,
            "rel_gaps": list(report.rel_gaps),
            "trips": {
                "demanded": float(result.demanded.sum()),
                "loaded": float(result.loaded.sum()),
                "completed": float(result.completed.sum()),
                "in_network_at_end": float(result.in_network().sum()),
                "queued_at_origins": float(result.queued.sum()),
                "per_destination": {
                    str(d): {
                        "demanded": float(result.demanded[i]),
                        "loaded": float(result.loaded[i]),
                        "completed": float(result.completed[i]),
                        "in_network_at_end": float(result.in_network()[i]),
                        "queued_at_origins": float(result.queued[i]),
                    }
                    for i, d in enumerate(result.destinations)
                },
            },
            "diagnostics": {
                "supply_clamps": result.supply_clamps,
                "unroutable": result.unroutable,
                "conservation_violations": conservation,
            },
        },
    }
    payload = json.dumps(summary["results"], sort_keys=True)
    summary["results_sha256"] = hashlib.sha256(payload.encode()).hexdigest()
    summary["timing"] = {"wall_clock_s": wall}
    with open(out / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return summary


# ---------------------------------------------------------------------------
# time-space matrices and shockwave detection


@dataclass
class TimeSpaceMatrix:
    """Density and flow of a link chain over time.

    density[s, b] is ped/m^2 on segment s at instant b * dt; flow[s, b] is the
    exit-boundary flux of segment s during [b, b+1) in ped/m/s.
    """

    link_ids: tuple[int, ...]
    x_edges: np.ndarray  # cumulative segment boundaries, meters, length n_seg + 1
    dt: float
    density: np.ndarray
    flow: np.ndarray

    @property
    def n_segments(self) -> int:
        return len(self.link_ids)

    @property
    def n_bins(self) -> int:
        return self.density.shape[1]

    def cell_length(self) -> float:
        return float(np.diff(self.x_edges).mean())

    def slice_time(self, t0: float, t1: float) -> "TimeSpaceMatrix":
        """Sub-matrix covering instants in [t0, t1); bins keep absolute times
        via the offset recorded in t_offset."""
        b0 = max(int(t0 / self.dt), 0)
        b1 = min(int(math.ceil(t1 / self.dt)), self.n_bins)
        sub = TimeSpaceMatrix(
            link_ids=self.link_ids,
            x_edges=self.x_edges,
            dt=self.dt,
            density=self.density[:, b0:b1],
            flow=self.flow[:, b0:b1],
        )
        sub.t_offset = b0 * self.dt + getattr(self, "t_offset", 0.0)
        return sub


def build_time_space(network: Network, curves: dict[int, tuple[np.ndarray, np.ndarray]],
                     node_path, dt: float) -> TimeSpaceMatrix:
    """Assemble the matrix for consecutive nodes; curves maps link id -> (U, V)."""
    node_path = list(node_path)
    path = network.path_from_nodes(node_path)
    lengths, density_rows, flow_rows = [], [], []
    for lid in path.link_ids:
        link = network.links[lid]
        U, V = curves[lid]
        occ = (U - V)[:-1]
        density_rows.append(occ / (link.length * link.width))
        flow_rows.append(np.diff(V) / dt / link.width)
        lengths.append(link.length)
    x_edges = np.concatenate([[0.0], np.cumsum(lengths)])
    return TimeSpaceMatrix(
        link_ids=path.link_ids,
        x_edges=x_edges,
        dt=dt,
        density=np.array(density_rows),
        flow=np.array(flow_rows),
    )


@dataclass
class ShockFront:
    """One detected density interface: where it sat over time and how fast it moved."""

    times: np.ndarray
    positions: np.ndarray
    speed: float  # m/s; positive moves with the walking direction
    direction: str  # "forward", "backward" or "stationary"


def detect_shockwaves(ts: TimeSpaceMatrix, min_jump: float | None = None,
                      min_points: int = 3) -> list[ShockFront]:
    """Density-jump interfaces between adjacent cells, with fitted speeds.

    Per time column, boundaries whose density jump reaches min_jump (default:
    30% of the matrix's density range) are clustered into interface points
    (jump-weighted centroids); points are then chained over consecutive steps
    by spatial proximity and each chain's speed is the least squares slope of
    position over time.  Distinct co-existing interfaces stay separate; a
    front that reverses direction is reported with its net fitted speed, so
    analyze regimes separately (slice_time) when that matters.
    """
    k = ts.density
    span = float(k.max() - k.min())
    if min_jump is None:
        min_jump = max(0.3 * span, 0.05)
    if span <= 1e-12 or k.shape[0] < 2:
        return []
    jump = np.abs(np.diff(k, axis=0))  # (n_seg - 1, n_bins)
    mask = jump >= min_jump
    if not mask.any():
        return []

    t_offset = getattr(ts, "t_offset", 0.0)
    cell = ts.cell_length()
    tracks: list[dict] = []
    for b in range(mask.shape[1]):
        idxs = np.where(mask[:, b])[0]
        if idxs.size == 0:
            continue
        # split non-consecutive boundary indices into separate interface points
        splits = np.where(np.diff(idxs) > 1)[0] + 1
        points = []
        for cluster in np.split(idxs, splits):
            w = jump[cluster, b]
            x = float((ts.x_edges[cluster + 1] * w).sum() / w.sum())
            points.append(x)
        t = b * ts.dt + t_offset
        open_tracks = [tr for tr in tracks if t - tr["times"][-1] <= 2.0 * ts.dt + 1e-9]
        for x in points:
            best, best_d = None, 1.6 * cell
            for tr in open_tracks:
                if tr["times"][-1] >= t:
                    continue  # already extended this column
                d = abs(tr["xs"][-1] - x)
                if d < best_d:
                    best, best_d = tr, d
            if best is None:
                tracks.append({"times": [t], "xs": [x]})
            else:
                best["times"].append(t)
                best["xs"].append(x)

    fronts = []
    for tr in tracks:
        times = np.array(tr["times"])
        xs = np.array(tr["xs"])
        if len(times) < min_points:
            continue
        t_mean, x_mean = times.mean(), xs.mean()
        var = ((times - t_mean) ** 2).sum()
        if var <= 0:
            continue
        speed = float(((times - t_mean) * (xs - x_mean)).sum() / var)
        if speed > 1e-9:
            direction = "forward"
        elif speed < -1e-9:
            direction = "backward"
        else:
            direction = "stationary"
        fronts.append(ShockFront(times, xs, speed, direction))
    fronts.sort(key=lambda f: (f.times[0], f.positions[0]))
    return fronts


def export_time_space(run_dir, node_path, out_dir=None) -> tuple[str, str]:
    """Rebuild time-space matrices from a finished run directory and write CSVs.

    node_path is an iterable of node ids along the chain.  Returns the two
    written file paths (density, flow).
    """
    run_dir = FsPath(run_dir)
    network = load_network(run_dir / "network.net")
    dt, curves = read_curves_csv(run_dir / "cumulative_curves.csv")
    ts = build_time_space(network, curves, node_path, dt)
    label = "-".join(str(n) for n in node_path)
    out = FsPath(out_dir) if out_dir is not None else run_dir
    out.mkdir(parents=True, exist_ok=True)
    density_path = out / f"ts_density_{label}.csv"
    flow_path = out / f"ts_flow_{label}.csv"
    _write_matrix(ts, ts.density, density_path, network)
    _write_matrix(ts, ts.flow, flow_path, network)
    return str(density_path), str(flow_path)


def read_curves_csv(path):
    """Parse cumulative_curves.csv back into {link id: (U, V)} plus the dt used."""
    by_link: dict[int, list[tuple[float, float, float]]] = {}
    with open(path) as fh:
        header = fh.readline().strip()
        if header != "link,t,U,V":
            raise SimulationInputError(f"{path}: unexpected header {header!r}")
        for line in fh:
            lid, t, u, v = line.strip().split(",")
            by_link.setdefault(int(lid), []).append((float(t), float(u), float(v)))
    curves = {}
    dt = None
    for lid, rows in by_link.items():
        rows.sort()
        ts = [r[0] for r in rows]
        if dt is None and len(ts) > 1:
            dt = ts[1] - ts[0]
        curves[lid] = (np.array([r[1] for r in rows]), np.array([r[2] for r in rows]))
    if dt is None:
        raise SimulationInputError(f"{path}: not enough samples to infer dt")
    return dt, curves


# ---------------------------------------------------------------------------
# writers


def _fmt(x: float) -> str:
    return f"{x:.10g}"


def _write_matrix(ts: TimeSpaceMatrix, values: np.ndarray, path, network: Network) -> None:
    n_bins = values.shape[1]
    header = "segment,x_start_m,x_end_m," + ",".join(_fmt(b * ts.dt) for b in range(n_bins))
    lines = [header]
    for s, lid in enumerate(ts.link_ids):
        link = network.links[lid]
        row = ",".join(_fmt(v) for v in values[s])
        lines.append(f"{link.from_node}-{link.to_node},{_fmt(ts.x_edges[s])},{_fmt(ts.x_edges[s + 1])},{row}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def _write_curves(result, path) -> None:
    dt = result.grid.dt
    lines = ["link,t,U,V"]
    for i, lid in enumerate(result.link_order):
        U, V = result.U[i], result.V[i]
        for b in range(result.grid.n_bins + 1):
            lines.append(f"{lid},{_fmt(b * dt)},{_fmt(U[b])},{_fmt(V[b])}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def _write_link_state(cfg: ScenarioConfig, result, path) -> None:
    network = result.network
    dt = result.grid.dt
    order = result.link_order
    L = np.array([network.links[l].length for l in order])
    W = np.array([network.links[l].width for l in order])
    VF = np.array([network.links[l].v_f for l in order])
    opp = np.array(
        [result.link_index[network.links[l].opposite] if network.links[l].opposite is not None else -1
         for l in order],
        dtype=int,
    )
    occ = (result.U - result.V)[:, :-1]
    k = occ / (L * W)[:, None]
    k_opp = np.where((opp >= 0)[:, None], k[opp], 0.0)
    total = k + k_opp
    rho = np.where(total > 0, k / np.where(total > 0, total, 1.0), 1.0)
    vhat = effective_speed_profile(VF[:, None], rho, cfg.fd_variant, cfg.fd_gamma)
    q = np.diff(result.V, axis=1) / dt / W[:, None]
    lines = ["link,t,k,q,rho,vhat"]
    for i, lid in enumerate(order):
        for b in range(result.grid.n_bins):
            lines.append(
                f"{lid},{_fmt(b * dt)},{_fmt(k[i, b])},{_fmt(q[i, b])},"
                f"{_fmt(rho[i, b])},{_fmt(vhat[i, b])}"
            )
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def _write_node_trace(result, path) -> None:
    lines = ["node,t,in,out,S_ij,R_j,S_tilde_j,q_ij"]
    for node, t, in_key, out_key, s_ij, r_j, s_tilde, q_ij in result.node_trace:
        in_label = "origin" if in_key < 0 else str(in_key)
        out_label = "sink" if out_key < 0 else str(out_key)
        r_label = "inf" if math.isinf(r_j) else _fmt(r_j)
        lines.append(
            f"{node},{_fmt(t)},{in_label},{out_label},{_fmt(s_ij)},{r_label},"
            f"{_fmt(s_tilde)},{_fmt(q_ij)}"
        )
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def _write_path_flows(state, path) -> None:
    lines = ["origin,destination,path_id,nodes,depart_s,flow_pps"]
    for od in state.ods:
        for row, p in enumerate(state.paths[od]):
            nodes = "-".join(str(n) for n in p.nodes(state.network))
            for pos, k in enumerate(state.k_bins[od]):
                lines.append(
                    f"{od[0]},{od[1]},{row},{nodes},{_fmt(k * state.grid.dt)},"
                    f"{_fmt(state.flows[od][row, pos])}"
                )
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def _write_gap(report, path) -> None:
    lines = ["iteration,rel_gap"]
    for i, g in enumerate(report.rel_gaps, start=1):
        lines.append(f"{i},{_fmt(g)}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def _write_route_times(cfg: ScenarioConfig, state, result, path) -> None:
    lines = ["origin,destination,path_id,depart_s,instantaneous_s,experienced_s"]
    for od in state.ods:
        pt = state.path_times.get(od)
        for row, p in enumerate(state.paths[od]):
            for pos, k in enumerate(state.k_bins[od]):
                inst = pt[row, pos] if pt is not None else float("nan")
                exp = pvdf.experienced_route_time(
                    p, result.fd_travel_time, k * state.grid.dt, horizon=cfg.horizon
                )
                exp_label = "incomplete" if exp is None else _fmt(exp)
                lines.append(
                    f"{od[0]},{od[1]},{row},{_fmt(k * state.grid.dt)},{_fmt(inst)},{exp_label}"
                )
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
