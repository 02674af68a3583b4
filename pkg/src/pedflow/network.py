"""Sidewalk network model: nodes, paired directional links, demand, time grid.

A sidewalk segment is represented by two directed links that point at each
other through the `opposite` field and share the physical attributes of the
segment (length, width, jam density, wave speed).  One-way links simply leave
`opposite` unset.  Networks, demand profiles and time grids are immutable
after loading and safe to share across workers.

File formats (versioned, delimited text):

    pedflow-net v1
    node,<id>,<x>,<y>,<kind>
    link,<id>,<from>,<to>,<length_m>,<width_m>,<vf_mps>,<kjam_pm2>,<omega_mps>,<cap_pps|->,<opposite_id|->

    pedflow-dem v1
    od,<origin>,<destination>,<depart_s>,<rate_pps>
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

NET_HEADER = "pedflow-net v1"
DEM_HEADER = "pedflow-dem v1"

NODE_KINDS = ("plain", "origin-centroid", "destination-centroid")


class NetworkFormatError(ValueError):
    """Raised when a network or demand file cannot be parsed."""


@dataclass(frozen=True)
class Node:
    id: int
    x: float = 0.0
    y: float = 0.0
    kind: str = "plain"

    def __post_init__(self):
        if self.kind not in NODE_KINDS:
            raise ValueError(f"unknown node kind {self.kind!r}")

    @property
    def is_centroid(self) -> bool:
        return self.kind != "plain"


@dataclass(frozen=True)
class Link:
    """Directed walking link with the attributes of its physical segment."""

    id: int
    from_node: int
    to_node: int
    length: float
    width: float
    v_f: float
    k_jam: float
    omega: float
    capacity: float
    opposite: int | None = None

    @property
    def free_flow_time(self) -> float:
        return self.length / self.v_f

    @property
    def storage(self) -> float:
        """Pedestrians the link can hold at jam, in persons."""
        return self.k_jam * self.length * self.width


def default_capacity(length: float, width: float, v_f: float, k_jam: float, omega: float) -> float:
    """Apex flow of the unidirectional triangular relation times width, ped/s."""
    k_c = k_jam * omega / (v_f + omega)
    return v_f * k_c * width


@dataclass(frozen=True)
class TimeGrid:
    """Uniform simulation clock: step dt seconds over a fixed horizon."""

    dt: float
    horizon: float

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.horizon <= 0:
            raise ValueError(f"horizon must be positive, got {self.horizon}")
        n = self.horizon / self.dt
        if abs(n - round(n)) > 1e-9:
            raise ValueError(
                f"horizon {self.horizon} is not an integer multiple of dt {self.dt}"
            )

    @property
    def n_bins(self) -> int:
        return int(round(self.horizon / self.dt))

    def bin_of(self, t: float) -> int:
        """Grid bin containing instant t; t must sit on the grid within 1e-9."""
        b = t / self.dt
        if abs(b - round(b)) > 1e-9:
            raise ValueError(f"instant {t} is not on the {self.dt}-second grid")
        return int(round(b))

    def times(self) -> np.ndarray:
        return np.arange(self.n_bins + 1) * self.dt


@dataclass(frozen=True)
class DemandEntry:
    origin: int
    destination: int
    depart_s: float
    rate: float  # ped/s released during [depart_s, depart_s + dt)


@dataclass
class DemandProfile:
    entries: list[DemandEntry] = field(default_factory=list)

    def add(self, origin: int, destination: int, depart_s: float, rate: float) -> None:
        self.entries.append(DemandEntry(origin, destination, depart_s, rate))

    def od_pairs(self) -> list[tuple[int, int]]:
        seen: dict[tuple[int, int], None] = {}
        for e in self.entries:
            seen.setdefault((e.origin, e.destination), None)
        return list(seen)

    def destinations(self) -> list[int]:
        return sorted({e.destination for e in self.entries})

    def departure_bins(self, grid: TimeGrid) -> list[int]:
        return sorted({grid.bin_of(e.depart_s) for e in self.entries})

    def total_trips(self, grid: TimeGrid) -> float:
        return sum(e.rate for e in self.entries) * grid.dt


@dataclass(frozen=True)
class Path:
    """Loop-free chain of links from an origin to a destination."""

    od: tuple[int, int]
    link_ids: tuple[int, ...]

    def nodes(self, network: "Network") -> tuple[int, ...]:
        seq = [network.links[self.link_ids[0]].from_node]
        for lid in self.link_ids:
            seq.append(network.links[lid].to_node)
        return tuple(seq)

    def free_flow_time(self, network: "Network") -> float:
        return sum(network.links[lid].free_flow_time for lid in self.link_ids)

    def entry_times(self, costs_at_k, k: float) -> list[tuple[int, float]]:
        """(link id, entry instant) along the path for a departure at k.

        Entry instants accumulate the link costs frozen at the departure bin,
        which keeps the incidence consistent with the pre-trip route time.
        """
        t = float(k)
        out = []
        for lid in self.link_ids:
            out.append((lid, t))
            t += costs_at_k[lid]
        return out


class Network:
    """Immutable directed sidewalk graph with bidirectional pairing."""

    def __init__(self, nodes: Iterable[Node], links: Iterable[Link]):
        self.nodes: dict[int, Node] = {}
        for n in nodes:
            if n.id in self.nodes:
                raise ValueError(f"duplicate node id {n.id}")
            self.nodes[n.id] = n
        self.links: dict[int, Link] = {}
        for l in links:
            if l.id in self.links:
                raise ValueError(f"duplicate link id {l.id}")
            self.links[l.id] = l
        self.out_links: dict[int, list[int]] = {nid: [] for nid in self.nodes}
        self.in_links: dict[int, list[int]] = {nid: [] for nid in self.nodes}
        for l in self.links.values():
            if l.from_node in self.out_links:
                self.out_links[l.from_node].append(l.id)
            if l.to_node in self.in_links:
                self.in_links[l.to_node].append(l.id)
        for nid in self.nodes:
            self.out_links[nid].sort()
            self.in_links[nid].sort()

    def sorted_link_ids(self) -> list[int]:
        return sorted(self.links)

    def link_between(self, from_node: int, to_node: int) -> Link | None:
        for lid in self.out_links.get(from_node, []):
            if self.links[lid].to_node == to_node:
                return self.links[lid]
        return None

    def path_from_nodes(self, node_seq: Sequence[int]) -> Path:
        """Resolve a node sequence like (1, 2, 3, 6, 9) into a Path."""
        if len(node_seq) < 2:
            raise ValueError("a path needs at least two nodes")
        link_ids = []
        for a, b in zip(node_seq, node_seq[1:]):
            link = self.link_between(a, b)
            if link is None:
                raise ValueError(f"no link from node {a} to node {b}")
            link_ids.append(link.id)
        return Path(od=(node_seq[0], node_seq[-1]), link_ids=tuple(link_ids))


def validate_network(network: Network) -> list[str]:
    """Every invariant violation found, as human-readable strings.

    An empty list means the network is loadable.
    """
    violations: list[str] = []
    for l in network.links.values():
        if l.from_node not in network.nodes:
            violations.append(f"link {l.id}: unknown from-node {l.from_node}")
        if l.to_node not in network.nodes:
            violations.append(f"link {l.id}: unknown to-node {l.to_node}")
        if l.from_node == l.to_node:
            violations.append(f"link {l.id}: self-loop at node {l.from_node}")
        for attr in ("length", "width", "v_f", "k_jam", "omega", "capacity"):
            if getattr(l, attr) <= 0:
                violations.append(f"link {l.id}: nonpositive {attr} ({getattr(l, attr)})")
        if l.opposite is not None:
            opp = network.links.get(l.opposite)
            if opp is None:
                violations.append(f"link {l.id}: dangling opposite {l.opposite}")
                continue
            if opp.id == l.id:
                violations.append(f"link {l.id}: opposite points to itself")
                continue
            if opp.opposite != l.id:
                violations.append(
                    f"link {l.id}: pairing not symmetric (opposite {opp.id} points to {opp.opposite})"
                )
            if not (opp.from_node == l.to_node and opp.to_node == l.from_node):
                violations.append(f"link {l.id}: opposite {opp.id} does not reverse its endpoints")
            for attr in ("length", "width", "k_jam", "omega"):
                if getattr(l, attr) != getattr(opp, attr):
                    violations.append(
                        f"link {l.id}: {attr} differs from paired link {opp.id} "
                        f"({getattr(l, attr)} vs {getattr(opp, attr)})"
                    )
    return violations


def validate_time_grid(network: Network, grid: TimeGrid) -> list[str]:
    """Step-size violations: dt must not exceed any link's L / max(v_f, omega)."""
    violations = []
    for l in sorted(network.links.values(), key=lambda x: x.id):
        limit = l.length / max(l.v_f, l.omega)
        if grid.dt > limit + 1e-12:
            violations.append(
                f"link {l.id}: dt {grid.dt} exceeds stability limit {limit:.6g} "
                f"(length {l.length}, v_f {l.v_f}, omega {l.omega})"
            )
    return violations


def validate_demand(network: Network, demand: DemandProfile, grid: TimeGrid | None = None) -> list[str]:
    violations = []
    for i, e in enumerate(demand.entries):
        if e.rate < 0:
            violations.append(f"demand entry {i}: negative rate {e.rate}")
        for role, nid in (("origin", e.origin), ("destination", e.destination)):
            node = network.nodes.get(nid)
            if node is None:
                violations.append(f"demand entry {i}: unknown {role} node {nid}")
            elif not node.is_centroid:
                violations.append(f"demand entry {i}: {role} node {nid} is not a centroid")
        if e.origin == e.destination:
            violations.append(f"demand entry {i}: origin equals destination ({e.origin})")
        if grid is not None:
            if e.depart_s < 0 or e.depart_s >= grid.horizon:
                violations.append(f"demand entry {i}: departure {e.depart_s}s outside horizon")
            else:
                try:
                    grid.bin_of(e.depart_s)
                except ValueError:
                    violations.append(f"demand entry {i}: departure {e.depart_s}s is off-grid")
    return violations


def free_flow_times_to(network: Network, destination: int) -> dict[int, float]:
    """Free-flow travel time from every node to the destination (Dijkstra on reversed arcs)."""
    return _dijkstra_to(network, destination, {lid: l.free_flow_time for lid, l in network.links.items()})


def _dijkstra_to(network: Network, destination: int, costs: dict[int, float]) -> dict[int, float]:
    dist = {destination: 0.0}
    heap = [(0.0, destination)]
    while heap:
        d, node = heapq.heappop(heap)
        if d > dist.get(node, math.inf):
            continue
        for lid in network.in_links[node]:
            link = network.links[lid]
            nd = d + costs[lid]
            if nd < dist.get(link.from_node, math.inf) - 1e-15:
                dist[link.from_node] = nd
                heapq.heappush(heap, (nd, link.from_node))
    return dist


def enumerate_paths(
    network: Network,
    od: tuple[int, int],
    max_paths: int,
    detour: float = 1.0,
) -> list[Path]:
    """Loop-free paths for an OD pair, ordered by free-flow travel time.

    With the default detour factor of 1.0 only minimum-free-flow-time paths
    qualify (ties broken by lexicographic node sequence); larger factors admit
    paths up to detour times the minimum.  The list is truncated at max_paths.
    Returns an empty list when the OD pair is not connected.
    """
    r, s = od
    if r == s:
        raise ValueError(f"degenerate OD pair ({r}, {r})")
    if r not in network.nodes or s not in network.nodes:
        raise ValueError(f"OD pair ({r}, {s}) references unknown nodes")
    if max_paths <= 0:
        return []
    dist_to = free_flow_times_to(network, s)
    if r not in dist_to:
        return []
    best = dist_to[r]
    bound = detour * best + 1e-9 * max(1.0, best)
    exact = detour == 1.0

    results: list[Path] = []
    budget = [200_000]  # expansion cap; generous for the sizes this is meant for

    def extend(node: int, time: float, links: list[int], visited: set[int]) -> bool:
        """Depth-first in ascending (next node, link id) order; returns False to stop."""
        if node == s:
            results.append(Path(od=(r, s), link_ids=tuple(links)))
            return not (exact and len(results) >= max_paths)
        branches = sorted(
            (network.links[lid].to_node, lid) for lid in network.out_links[node]
        )
        for to_node, lid in branches:
            if to_node in visited:
                continue
            t2 = time + network.links[lid].free_flow_time
            if t2 + dist_to.get(to_node, math.inf) > bound:
                continue
            budget[0] -= 1
            if budget[0] < 0:
                raise RuntimeError(
                    "path enumeration budget exceeded; lower max_paths or the detour factor"
                )
            visited.add(to_node)
            links.append(lid)
            keep_going = extend(to_node, t2, links, visited)
            links.pop()
            visited.remove(to_node)
            if not keep_going:
                return False
        return True

    extend(r, 0.0, [], {r})
    if not exact:
        results.sort(
            key=lambda p: (round(p.free_flow_time(network) / 1e-9), p.nodes(network))
        )
    return results[:max_paths]


# ---------------------------------------------------------------------------
# file I/O


def write_network(network: Network, path) -> None:
    lines = [NET_HEADER]
    for nid in sorted(network.nodes):
        n = network.nodes[nid]
        lines.append(f"node,{n.id},{n.x:.10g},{n.y:.10g},{n.kind}")
    for lid in sorted(network.links):
        l = network.links[lid]
        opp = l.opposite if l.opposite is not None else "-"
        lines.append(
            f"link,{l.id},{l.from_node},{l.to_node},{l.length:.10g},{l.width:.10g},"
            f"{l.v_f:.10g},{l.k_jam:.10g},{l.omega:.10g},{l.capacity:.10g},{opp}"
        )
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_network(path) -> Network:
    with open(path) as fh:
        raw = [line.strip() for line in fh]
    lines = [line for line in raw if line and not line.startswith("#")]
    if not lines or lines[0] != NET_HEADER:
        raise NetworkFormatError(f"{path}: expected header {NET_HEADER!r}")
    nodes, links = [], []
    for i, line in enumerate(lines[1:], start=2):
        parts = [p.strip() for p in line.split(",")]
        try:
            if parts[0] == "node":
                if len(parts) != 5:
                    raise ValueError("node record needs 5 fields")
                nodes.append(Node(int(parts[1]), float(parts[2]), float(parts[3]), parts[4]))
            elif parts[0] == "link":
                if len(parts) != 11:
                    raise ValueError("link record needs 11 fields")
                length, width = float(parts[4]), float(parts[5])
                v_f, k_jam, omega = float(parts[6]), float(parts[7]), float(parts[8])
                cap = (
                    default_capacity(length, width, v_f, k_jam, omega)
                    if parts[9] == "-"
                    else float(parts[9])
                )
                opp = None if parts[10] == "-" else int(parts[10])
                links.append(
                    Link(int(parts[1]), int(parts[2]), int(parts[3]), length, width,
                         v_f, k_jam, omega, cap, opp)
                )
            else:
                raise ValueError(f"unknown record type {parts[0]!r}")
        except (ValueError, IndexError) as exc:
            raise NetworkFormatError(f"{path}:{i}: {exc}") from exc
    return Network(nodes, links)


def write_demand(demand: DemandProfile, path) -> None:
    lines = [DEM_HEADER]
    for e in demand.entries:
        lines.append(f"od,{e.origin},{e.destination},{e.depart_s:.10g},{e.rate:.10g}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_demand(path) -> DemandProfile:
    with open(path) as fh:
        raw = [line.strip() for line in fh]
    lines = [line for line in raw if line and not line.startswith("#")]
    if not lines or lines[0] != DEM_HEADER:
        raise NetworkFormatError(f"{path}: expected header {DEM_HEADER!r}")
    demand = DemandProfile()
    for i, line in enumerate(lines[1:], start=2):
        parts = [p.strip() for p in line.split(",")]
        try:
            if parts[0] != "od" or len(parts) != 5:
                raise ValueError("demand record must be od,<origin>,<destination>,<depart_s>,<rate_pps>")
            demand.add(int(parts[1]), int(parts[2]), float(parts[3]), float(parts[4]))
        except (ValueError, IndexError) as exc:
            raise NetworkFormatError(f"{path}:{i}: {exc}") from exc
    return demand
