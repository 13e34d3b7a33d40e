"""The periodic adaptation loop: congestion detection, planner invocation,
and the knowledge base of retained formulas reused across rounds and
exportable to other networks."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from random import Random
from typing import Mapping

from .expr import depth, format_expr, parse_expr
from .netmodel import Flow, Network, Snapshot
from .planner import GpConfig, Individual, PlanResult, gen_plan


class KbImportError(ValueError):
    pass


@dataclass
class KnowledgeBase:
    """Best formulas from earlier planning rounds, ascending by fitness."""

    retained: list[Individual] = field(default_factory=list)
    provenance: str = "this-run"


@dataclass
class InvocationRecord:
    tick: int
    max_util: float
    generations: int
    best_fitness: float
    wallclock_ms: float
    formula: str


@dataclass
class AdaptationState:
    """What the loop has installed so far and how it got there."""

    active_expr: object = None  # Expr or None (None = baseline unit weights)
    invocation_count: int = 0
    log: list[InvocationRecord] = field(default_factory=list)


def detect(snapshot: Snapshot, threshold: float) -> bool:
    """Congested iff some link utilization strictly exceeds the threshold."""
    return max(snapshot.util, default=0.0) > threshold


def adapt_step(
    network: Network,
    snapshot: Snapshot,
    bandwidths: Mapping[int, float],
    kb: KnowledgeBase,
    state: AdaptationState,
    config: GpConfig,
    rng: Random,
) -> list[Flow] | None:
    """One tick of the loop: plan and install a new formula when congested.

    Returns the re-routed flow set to apply atomically, or None when no
    adaptation was needed. The knowledge base is replaced with the top half
    of the planner's final population.
    """
    if not detect(snapshot, config.threshold):
        return None
    start = time.perf_counter()
    result: PlanResult = gen_plan(
        network, list(snapshot.flows), bandwidths, kb.retained, config, rng
    )
    wall_ms = (time.perf_counter() - start) * 1000.0
    state.active_expr = result.best.expr
    state.invocation_count += 1
    state.log.append(
        InvocationRecord(
            tick=int(snapshot.t),
            max_util=max(snapshot.util, default=0.0),
            generations=result.generations,
            best_fitness=result.best.fitness,
            wallclock_ms=wall_ms,
            formula=format_expr(result.best.expr),
        )
    )
    kb.retained = [ind.copy() for ind in result.retained]
    kb.provenance = "this-run"
    return result.new_flows


def export_kb(kb: KnowledgeBase, path: str) -> None:
    """Write one `<fitness> <formula>` line per retained individual."""
    if not kb.retained:
        raise KbImportError("refusing to export an empty knowledge base")
    with open(path, "w") as fh:
        for ind in kb.retained:
            fitness = ind.fitness if ind.fitness is not None else 0.0
            fh.write(f"{fitness:.6f} {format_expr(ind.expr)}\n")


def import_kb(path: str, max_depth: int = 15) -> KnowledgeBase:
    """Read a formula file; every formula is re-validated against the grammar
    and depth bound, and fitness is treated as unevaluated."""
    retained: list[Individual] = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split(maxsplit=1)
            if len(parts) != 2:
                raise KbImportError(f"line {lineno}: expected '<fitness> <formula>'")
            try:
                float(parts[0])
            except ValueError:
                raise KbImportError(f"line {lineno}: bad fitness value {parts[0]!r}") from None
            try:
                expr = parse_expr(parts[1])
            except ValueError as exc:
                raise KbImportError(f"line {lineno}: {exc}") from None
            if depth(expr) > max_depth:
                raise KbImportError(
                    f"line {lineno}: formula depth {depth(expr)} exceeds bound {max_depth}"
                )
            retained.append(Individual(expr, None))
    return KnowledgeBase(retained=retained, provenance="imported")
