"""Directed network graphs, flows, link utilization and weighted routing.

Everything here is an immutable value: networks, links, requests, flows and
snapshots never change after construction, and all operations are pure
functions. Link weights are positive integers supplied by the caller.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence


class NetworkError(ValueError):
    """Structurally invalid network, flow or routing input."""


class ConfigError(ValueError):
    """Invalid topology-generator or scenario configuration."""


@dataclass(frozen=True)
class Link:
    """A directed link with static bandwidth (Mbps) and delay (ms)."""

    id: int
    src: int
    dst: int
    bw: float
    dl: float

    def __post_init__(self):
        if self.src == self.dst:
            raise NetworkError(f"link {self.id}: self-loop on node {self.src}")
        if self.bw <= 0:
            raise NetworkError(f"link {self.id}: bandwidth must be positive, got {self.bw}")
        if self.dl <= 0:
            raise NetworkError(f"link {self.id}: delay must be positive, got {self.dl}")


@dataclass(frozen=True)
class Request:
    """A data-transmission demand from node s to node d.

    The bandwidth profile is piecewise constant: ``profile`` holds
    (start_time, mbps) segments sorted by start time. Bundled scenarios use
    a single constant segment.
    """

    id: int
    s: int
    d: int
    arrival: float
    profile: tuple[tuple[float, float], ...]

    def __post_init__(self):
        if self.s == self.d:
            raise NetworkError(f"request {self.id}: source equals destination ({self.s})")
        if self.arrival < 0:
            raise NetworkError(f"request {self.id}: negative arrival time")
        if not self.profile:
            raise NetworkError(f"request {self.id}: empty bandwidth profile")
        if any(bd < 0 for _, bd in self.profile):
            raise NetworkError(f"request {self.id}: negative bandwidth")

    @classmethod
    def constant(cls, id: int, s: int, d: int, arrival: float, bd: float) -> "Request":
        return cls(id, s, d, arrival, ((0.0, float(bd)),))

    def bd(self, t: float) -> float:
        """Bandwidth demand at time t (value of the last segment starting <= t)."""
        value = self.profile[0][1]
        for start, bd in self.profile:
            if start <= t:
                value = bd
            else:
                break
        return value


@dataclass(frozen=True)
class Flow:
    """The directed link-path currently serving one request."""

    request: int
    path: tuple[int, ...]


class Network:
    """A directed graph over dense integer node ids with dense link ids."""

    def __init__(self, n_nodes: int, links: Sequence[Link]):
        if n_nodes < 1:
            raise NetworkError("network needs at least one node")
        self.n_nodes = n_nodes
        self.links: tuple[Link, ...] = tuple(links)
        seen_pairs = set()
        for i, link in enumerate(self.links):
            if link.id != i:
                raise NetworkError(f"link ids must be dense 0..L-1, got {link.id} at index {i}")
            if not (0 <= link.src < n_nodes and 0 <= link.dst < n_nodes):
                raise NetworkError(f"link {link.id}: endpoint outside 0..{n_nodes - 1}")
            if (link.src, link.dst) in seen_pairs:
                raise NetworkError(f"duplicate link for node pair {link.src}->{link.dst}")
            seen_pairs.add((link.src, link.dst))
        self._out: list[list[Link]] = [[] for _ in range(n_nodes)]
        for link in self.links:
            self._out[link.src].append(link)

    @property
    def nodes(self) -> range:
        return range(self.n_nodes)

    def link(self, link_id: int) -> Link:
        if not (0 <= link_id < len(self.links)):
            raise NetworkError(f"unknown link id {link_id}")
        return self.links[link_id]

    def out_links(self, node: int) -> list[Link]:
        return self._out[node]

    def validate_flow(self, flow: Flow) -> None:
        """Check that a flow path is a directed simple path in this network."""
        if not flow.path:
            raise NetworkError(f"flow for request {flow.request}: empty path")
        links = [self.link(e) for e in flow.path]
        visited = {links[0].src}
        for prev, cur in zip(links, links[1:]):
            if prev.dst != cur.src:
                raise NetworkError(
                    f"flow for request {flow.request}: links {prev.id} and {cur.id} do not chain"
                )
        for link in links:
            if link.dst in visited:
                raise NetworkError(f"flow for request {flow.request}: node {link.dst} revisited")
            visited.add(link.dst)

    def path_endpoints(self, path: Sequence[int]) -> tuple[int, int]:
        return self.link(path[0]).src, self.link(path[-1]).dst


@dataclass(frozen=True)
class Snapshot:
    """Monitored network state at one instant: live flows and per-link utilization."""

    t: float
    flows: tuple[Flow, ...]
    util: tuple[float, ...]


def throughput(
    network: Network,
    flows: Sequence[Flow],
    bandwidths: Mapping[int, float],
    link_id: int,
) -> float:
    """Total bandwidth (Mbps) of the flows whose path traverses the given link."""
    network.link(link_id)
    return sum(bandwidths[f.request] for f in flows if link_id in f.path)


def link_utilization(thr: float, bw: float) -> float:
    """Utilization fraction throughput/bw; may exceed 1.0 under over-capacity demand."""
    if bw <= 0:
        raise NetworkError(f"bandwidth must be positive, got {bw}")
    return thr / bw


def link_utilizations(
    network: Network, flows: Sequence[Flow], bandwidths: Mapping[int, float]
) -> list[float]:
    """Per-link utilization fractions computed from the given flows."""
    thr = [0.0] * len(network.links)
    for f in flows:
        bd = bandwidths[f.request]
        for e in f.path:
            thr[e] += bd
    return [link_utilization(t, link.bw) for t, link in zip(thr, network.links)]


def make_snapshot(
    network: Network, t: float, flows: Sequence[Flow], bandwidths: Mapping[int, float]
) -> Snapshot:
    return Snapshot(t, tuple(flows), tuple(link_utilizations(network, flows, bandwidths)))


def shortest_weighted_path(
    network: Network, weights: Mapping[int, int], src: int, dst: int
) -> tuple[int, ...] | None:
    """Minimum-total-weight directed path from src to dst as a tuple of link ids.

    Among equal-cost paths, returns the one with the lexicographically
    smallest node-id sequence, which makes routing deterministic. Returns
    None when dst is unreachable.
    """
    if src == dst:
        raise NetworkError("src and dst must differ")
    if not (0 <= src < network.n_nodes and 0 <= dst < network.n_nodes):
        raise NetworkError(f"node out of range: src={src} dst={dst}")
    for link in network.links:
        if link.id not in weights:
            raise NetworkError(f"weight missing for link {link.id}")
        if weights[link.id] < 1:
            raise NetworkError(f"weight for link {link.id} must be >= 1")

    # Heap entries carry the node sequence so that ties in distance resolve
    # to the lexicographically smallest path. Weights >= 1 keep Dijkstra's
    # settle-once property valid for the composite (dist, nodes) order.
    heap: list[tuple[int, tuple[int, ...], tuple[int, ...]]] = [(0, (src,), ())]
    settled: set[int] = set()
    while heap:
        dist, nodes, path = heapq.heappop(heap)
        u = nodes[-1]
        if u in settled:
            continue
        settled.add(u)
        if u == dst:
            return path
        for link in network.out_links(u):
            if link.dst in settled:
                continue
            heapq.heappush(
                heap, (dist + weights[link.id], nodes + (link.dst,), path + (link.id,))
            )
    return None


def full_topology(n: int, bw: float = 100.0, dl: float = 25.0) -> Network:
    """Directed complete graph on n nodes: one link per ordered pair, n(n-1) links."""
    if n < 2:
        raise ConfigError(f"full topology needs at least 2 nodes, got {n}")
    links = []
    for src in range(n):
        for dst in range(n):
            if src != dst:
                links.append(Link(len(links), src, dst, bw, dl))
    return Network(n, links)


def mnp_topology(k: int, bw: float = 100.0, dl: float = 25.0) -> Network:
    """Source node 0 and destination node 1 joined by k node-disjoint paths.

    Path i (i = 1..k) has i links; every undirected edge is emitted as two
    directed links. k=3 reproduces the five-node, six-edge example network.
    """
    if k < 2:
        raise ConfigError(f"mnp topology needs at least 2 paths, got {k}")
    links: list[Link] = []
    next_node = 2

    def add_edge(u: int, v: int) -> None:
        links.append(Link(len(links), u, v, bw, dl))
        links.append(Link(len(links), v, u, bw, dl))

    for length in range(1, k + 1):
        prev = 0
        for _ in range(length - 1):
            add_edge(prev, next_node)
            prev = next_node
            next_node += 1
        add_edge(prev, 1)
    return Network(next_node, links)


def unit_weights(network: Network) -> dict[int, int]:
    return {link.id: 1 for link in network.links}


def save_network(network: Network, path: str) -> None:
    """Write the plain-text edge-list format used by scenario files."""
    with open(path, "w") as fh:
        fh.write(f"nodes {network.n_nodes}\n")
        for link in network.links:
            fh.write(f"link {link.id} {link.src} {link.dst} {link.bw:.6f} {link.dl:.6f}\n")


def load_network(path: str) -> Network:
    n_nodes = None
    links: list[Link] = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if parts[0] == "nodes" and len(parts) == 2:
                n_nodes = int(parts[1])
            elif parts[0] == "link" and len(parts) == 6:
                links.append(
                    Link(int(parts[1]), int(parts[2]), int(parts[3]), float(parts[4]), float(parts[5]))
                )
            else:
                raise NetworkError(f"{path}:{lineno}: unrecognized line {line!r}")
    if n_nodes is None:
        raise NetworkError(f"{path}: missing 'nodes' header")
    return Network(n_nodes, links)
