"""Time-stepped scenario execution: arrivals, routing under the active weight
formula, per-tick monitoring and adaptation, and outcome metrics."""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field, replace
from random import Random
from typing import Mapping, Sequence

from .expr import EvalContext, eval_expr, to_weight
from .loop import AdaptationState, KnowledgeBase, adapt_step, detect, import_kb
from .netmodel import (
    ConfigError,
    Flow,
    Network,
    Request,
    full_topology,
    link_utilizations,
    load_network,
    make_snapshot,
    mnp_topology,
    shortest_weighted_path,
    unit_weights,
)
from .planner import GpConfig

ROUTERS = ("unit-ospf", "inverse-bw-ospf", "genadapt", "genadapt-reuse")

INVERSE_BW_REFERENCE = 1e5  # Mbps; the 100 Gbps reference-bandwidth convention


class ScenarioError(ValueError):
    pass


@dataclass
class Scenario:
    network: Network
    requests: list[Request]
    threshold: float = 0.8
    duration: int | None = None
    router: str = "genadapt"
    gp: GpConfig = field(default_factory=GpConfig)
    seed: int = 0
    kb_path: str | None = None

    def resolved_duration(self) -> int:
        if self.duration is not None:
            return self.duration
        last = max((r.arrival for r in self.requests), default=0.0)
        return int(math.ceil(last)) + 10


@dataclass
class MetricsRecord:
    congestion_occurrences: int = 0
    congestion_duration: int = 0  # seconds (ticks) spent congested
    packet_loss_proxy: float = 0.0
    planner_invocations: int = 0
    wallclock_ms: list[float] = field(default_factory=list)


@dataclass
class TickRow:
    t: int
    max_util: float
    congested: bool
    flow_count: int
    formula_id: int


@dataclass
class RunResult:
    metrics: MetricsRecord
    trace: list[TickRow]
    flows: dict[int, Flow]  # request id -> final flow
    state: AdaptationState
    kb: KnowledgeBase


def inverse_bw_weights(network: Network, reference: float = INVERSE_BW_REFERENCE) -> dict[int, int]:
    """Weights inversely proportional to link bandwidth: max(1, floor(C/bw))."""
    return {link.id: max(1, math.floor(reference / link.bw)) for link in network.links}


def _formula_weights(
    network: Network, util: Sequence[float], expr, threshold: float
) -> dict[int, int]:
    return {
        link.id: to_weight(
            eval_expr(expr, EvalContext(link.bw, link.dl, util[link.id], threshold))
        )
        for link in network.links
    }


def route_request(
    network: Network,
    weights: Mapping[int, int],
    request: Request,
) -> Flow:
    """Create the flow for a newly arrived request under the given weights."""
    path = shortest_weighted_path(network, weights, request.s, request.d)
    if path is None:
        raise ScenarioError(
            f"request {request.id}: destination {request.d} unreachable from {request.s}"
        )
    return Flow(request.id, path)


def packet_loss_proxy(
    excess_total: float, demand_total: float
) -> float:
    """Over-capacity excess summed over ticks divided by total demand."""
    if demand_total <= 0:
        return 0.0
    return excess_total / demand_total


def run_scenario(
    scenario: Scenario,
    seed: int | None = None,
    router: str | None = None,
    kb: KnowledgeBase | None = None,
) -> RunResult:
    """Execute a scenario tick by tick; optional overrides for batch runs."""
    router = router or scenario.router
    if router not in ROUTERS:
        raise ScenarioError(f"router: unknown value {router!r}")
    seed = scenario.seed if seed is None else seed
    network = scenario.network
    duration = scenario.resolved_duration()
    threshold = scenario.threshold
    gp = replace(scenario.gp, threshold=threshold)

    if kb is None:
        if router == "genadapt-reuse":
            if scenario.kb_path is None:
                raise ScenarioError("kb: genadapt-reuse requires a knowledge-base file")
            kb = import_kb(scenario.kb_path, max_depth=gp.max_depth)
        else:
            kb = KnowledgeBase()

    adaptive = router in ("genadapt", "genadapt-reuse")
    baseline = inverse_bw_weights(network) if router == "inverse-bw-ospf" else unit_weights(network)

    rng = Random(seed)
    state = AdaptationState()
    flows: dict[int, Flow] = {}
    pending = sorted(scenario.requests, key=lambda r: (r.arrival, r.id))
    metrics = MetricsRecord()
    trace: list[TickRow] = []
    in_congestion_run = False
    excess_total = 0.0
    demand_total = 0.0

    for t in range(duration):
        bandwidths = {r.id: r.bd(t) for r in scenario.requests if r.arrival <= t}

        # admit arrivals, routing each under the weights of the moment
        while pending and pending[0].arrival <= t:
            req = pending.pop(0)
            if state.active_expr is not None:
                util = link_utilizations(network, list(flows.values()), bandwidths)
                weights = _formula_weights(network, util, state.active_expr, threshold)
            else:
                weights = baseline
            flows[req.id] = route_request(network, weights, req)

        snapshot = make_snapshot(network, t, list(flows.values()), bandwidths)
        congested = detect(snapshot, threshold)

        if congested and adaptive:
            new_flows = adapt_step(network, snapshot, bandwidths, kb, state, gp, rng)
            if new_flows is not None:
                flows = {f.request: f for f in new_flows}

        if congested:
            metrics.congestion_duration += 1
            if not in_congestion_run:
                metrics.congestion_occurrences += 1
            in_congestion_run = True
        else:
            in_congestion_run = False

        # loss proxy accounts the state that persists through this tick
        thr = [0.0] * len(network.links)
        for f in flows.values():
            for e in f.path:
                thr[e] += bandwidths[f.request]
        excess_total += sum(
            max(0.0, thr[link.id] - link.bw) for link in network.links
        )
        demand_total += sum(bandwidths.values())

        trace.append(
            TickRow(
                t=t,
                max_util=max(snapshot.util, default=0.0),
                congested=congested,
                flow_count=len(flows),
                formula_id=state.invocation_count,
            )
        )

    metrics.packet_loss_proxy = packet_loss_proxy(excess_total, demand_total)
    metrics.planner_invocations = state.invocation_count
    metrics.wallclock_ms = [rec.wallclock_ms for rec in state.log]
    return RunResult(metrics, trace, flows, state, kb)


# ---------------------------------------------------------------------------
# scenario files


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ScenarioError(message)


def load_scenario(path: str) -> Scenario:
    """Parse the flat key-value scenario format.

    Directives: ``network full N | mnp K | file PATH``, ``link_bw``,
    ``link_dl``, ``threshold``, ``duration``, ``router``, ``seed``,
    ``kb PATH``, GP keys (``population``, ``max_generations``,
    ``crossover_rate``, ``mutation_rate``, ``tournament``, ``max_depth``,
    ``early_stop``), ``request SRC DST ARRIVAL BD`` and
    ``burst SRC DST PER_BURST BURSTS SPACING BD``.
    """
    if not os.path.exists(path):
        raise ScenarioError(f"scenario file not found: {path}")
    base = os.path.dirname(os.path.abspath(path))
    net_spec: tuple | None = None
    link_bw, link_dl = 100.0, 25.0
    threshold = 0.8
    duration: int | None = None
    router = "genadapt"
    seed = 0
    kb_path: str | None = None
    gp_kwargs: dict = {}
    request_lines: list[tuple] = []

    gp_keys = {
        "population": ("population_size", int),
        "max_generations": ("max_generations", int),
        "crossover_rate": ("crossover_rate", float),
        "mutation_rate": ("mutation_rate", float),
        "tournament": ("tournament_size", int),
        "max_depth": ("max_depth", int),
        "early_stop": ("early_stop_fitness", float),
    }

    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            key, args = parts[0], parts[1:]
            try:
                if key == "network":
                    _require(len(args) == 2, f"line {lineno}: network needs kind and value")
                    kind = args[0]
                    _require(kind in ("full", "mnp", "file"), f"line {lineno}: network kind {kind!r}")
                    net_spec = (kind, args[1])
                elif key == "link_bw":
                    link_bw = float(args[0])
                elif key == "link_dl":
                    link_dl = float(args[0])
                elif key == "threshold":
                    threshold = float(args[0])
                    _require(0 < threshold < 1, f"line {lineno}: threshold must be in (0,1)")
                elif key == "duration":
                    duration = int(args[0])
                elif key == "router":
                    _require(args[0] in ROUTERS, f"line {lineno}: router {args[0]!r}")
                    router = args[0]
                elif key == "seed":
                    seed = int(args[0])
                elif key == "kb":
                    kb_path = os.path.join(base, args[0])
                elif key in gp_keys:
                    name, conv = gp_keys[key]
                    gp_kwargs[name] = conv(args[0])
                elif key == "request":
                    _require(len(args) == 4, f"line {lineno}: request SRC DST ARRIVAL BD")
                    request_lines.append(("request", int(args[0]), int(args[1]), float(args[2]), args[3]))
                elif key == "burst":
                    _require(len(args) == 6, f"line {lineno}: burst SRC DST PER_BURST BURSTS SPACING BD")
                    request_lines.append(
                        ("burst", int(args[0]), int(args[1]), int(args[2]), int(args[3]), float(args[4]), args[5])
                    )
                else:
                    raise ScenarioError(f"line {lineno}: unknown directive {key!r}")
            except (ValueError, IndexError) as exc:
                if isinstance(exc, ScenarioError):
                    raise
                raise ScenarioError(f"{key}: line {lineno}: {exc}") from None

    _require(net_spec is not None, "network: no network directive in scenario")
    kind, value = net_spec
    if kind == "full":
        network = full_topology(int(value), link_bw, link_dl)
    elif kind == "mnp":
        network = mnp_topology(int(value), link_bw, link_dl)
    else:
        network = load_network(os.path.join(base, value))

    def parse_profile(rid: int, s: int, d: int, arrival: float, text: str) -> Request:
        # "30" for constant, "0:30,40:50" for piecewise-constant
        if ":" in text:
            segments = tuple(
                (float(seg.split(":")[0]), float(seg.split(":")[1])) for seg in text.split(",")
            )
            return Request(rid, s, d, arrival, segments)
        return Request.constant(rid, s, d, arrival, float(text))

    requests: list[Request] = []
    for entry in request_lines:
        if entry[0] == "request":
            _, s, d, arrival, bd = entry
            requests.append(parse_profile(len(requests), s, d, arrival, bd))
        else:
            _, s, d, per_burst, bursts, spacing, bd = entry
            _require(spacing > 0, "burst: spacing must be positive")
            for b in range(bursts):
                for _ in range(per_burst):
                    requests.append(parse_profile(len(requests), s, d, b * spacing, bd))
    _require(bool(requests), "request: scenario has no requests")
    for r in requests:
        _require(0 <= r.s < network.n_nodes, f"request {r.id}: source {r.s} out of range")
        _require(0 <= r.d < network.n_nodes, f"request {r.id}: destination {r.d} out of range")

    scenario = Scenario(
        network=network,
        requests=requests,
        threshold=threshold,
        duration=duration,
        router=router,
        gp=GpConfig(**gp_kwargs),
        seed=seed,
        kb_path=kb_path,
    )
    last = max(r.arrival for r in requests)
    _require(
        scenario.resolved_duration() >= last, "duration: must reach the last arrival"
    )
    return scenario


# ---------------------------------------------------------------------------
# CSV emission (fixed 6-decimal formatting keeps outputs diff-stable)


def write_trace_csv(trace: Sequence[TickRow], path: str) -> None:
    with open(path, "w") as fh:
        fh.write("t,max_util,congested_flag,flow_count,active_formula_id\n")
        for row in trace:
            fh.write(
                f"{row.t},{row.max_util:.6f},{int(row.congested)},"
                f"{row.flow_count},{row.formula_id}\n"
            )


def write_metrics_csv(metrics: MetricsRecord, path: str) -> None:
    with open(path, "w") as fh:
        fh.write(
            "congestion_occurrences,congestion_duration_s,packet_loss_proxy,planner_invocations\n"
        )
        fh.write(
            f"{metrics.congestion_occurrences},{metrics.congestion_duration},"
            f"{metrics.packet_loss_proxy:.6f},{metrics.planner_invocations}\n"
        )


def write_invocations_csv(state: AdaptationState, path: str) -> None:
    with open(path, "w") as fh:
        fh.write("tick,max_util,generations,best_fitness,wallclock_ms,formula_text\n")
        for rec in state.log:
            fh.write(
                f"{rec.tick},{rec.max_util:.6f},{rec.generations},"
                f"{rec.best_fitness:.6f},{rec.wallclock_ms:.3f},\"{rec.formula}\"\n"
            )
