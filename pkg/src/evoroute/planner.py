"""Congestion planner: bad-flow selection, surrogate re-routing, the
three-part fitness, and the generational search over weight formulas."""

from __future__ import annotations

from dataclasses import dataclass, field
from random import Random
from typing import Mapping, Sequence

from .expr import (
    DEFAULT_CONST_MAX,
    DEFAULT_CONST_MIN,
    DEFAULT_MAX_DEPTH,
    EvalContext,
    Expr,
    crossover,
    eval_expr,
    format_expr,
    grow_random,
    mutate,
    to_weight,
)
from .netmodel import (
    Flow,
    Network,
    NetworkError,
    link_utilizations,
    shortest_weighted_path,
)


@dataclass
class GpConfig:
    """Search parameters; the defaults are the evaluated configuration."""

    population_size: int = 10
    max_generations: int = 200
    crossover_rate: float = 0.7
    mutation_rate: float = 0.1
    tournament_size: int = 7
    max_depth: int = DEFAULT_MAX_DEPTH
    threshold: float = 0.8
    const_min: float = DEFAULT_CONST_MIN
    const_max: float = DEFAULT_CONST_MAX
    early_stop_fitness: float = 2.0


@dataclass
class Individual:
    """A weight formula with its cached fitness for the current snapshot."""

    expr: Expr
    fitness: float | None = None

    def copy(self) -> "Individual":
        return Individual(self.expr, self.fitness)


@dataclass
class PlanResult:
    best: Individual
    new_flows: list[Flow]
    retained: list[Individual]
    generations: int
    best_history: list[float]
    initial_formulas: list[str]


def normalize(x: float) -> float:
    """Map a non-negative magnitude into [0, 1) monotonically: x / (x + 1)."""
    if x < 0:
        raise ValueError(f"normalize expects x >= 0, got {x}")
    return x / (x + 1.0)


def lcs_distance(p: Sequence[int], q: Sequence[int]) -> int:
    """Insertions plus deletions to turn one link sequence into the other."""
    n, m = len(p), len(q)
    prev = [0] * (m + 1)
    for i in range(1, n + 1):
        cur = [0] * (m + 1)
        for j in range(1, m + 1):
            if p[i - 1] == q[j - 1]:
                cur[j] = prev[j - 1] + 1
            else:
                cur[j] = max(prev[j], cur[j - 1])
        prev = cur
    return n + m - 2 * prev[m]


def find_flows_causing_congestion(
    network: Network,
    flows: Sequence[Flow],
    bandwidths: Mapping[int, float],
    threshold: float,
    rng: Random,
) -> list[Flow]:
    """Remove flows (uniformly at random through the most loaded link) until
    no link exceeds the threshold. Returns the removed flows in order."""
    remaining = list(flows)
    removed: list[Flow] = []
    while True:
        util = link_utilizations(network, remaining, bandwidths)
        worst = max(range(len(util)), key=lambda e: (util[e], -e), default=None)
        if worst is None or util[worst] <= threshold:
            break
        carriers = [f for f in remaining if worst in f.path]
        assert carriers, "a loaded link must carry at least one flow"
        victim = carriers[rng.randrange(len(carriers))]
        remaining.remove(victim)
        removed.append(victim)
    return removed


def _link_weights(
    network: Network, util: Sequence[float], expr: Expr, threshold: float
) -> dict[int, int]:
    return {
        link.id: to_weight(
            eval_expr(expr, EvalContext(link.bw, link.dl, util[link.id], threshold))
        )
        for link in network.links
    }


def compute_surrogate(
    network: Network,
    keep_flows: Sequence[Flow],
    bad_flows: Sequence[Flow],
    bandwidths: Mapping[int, float],
    expr: Expr,
    threshold: float,
) -> list[Flow]:
    """Re-route the bad flows one by one under the candidate formula.

    Utilization starts from the kept flows only; after each placement the
    weights of the links on the new path are refreshed. A flow whose
    destination is unreachable keeps its original path.
    """
    util = list(link_utilizations(network, keep_flows, bandwidths))
    weights = _link_weights(network, util, expr, threshold)
    rerouted: list[Flow] = []
    for f in bad_flows:
        src, dst = network.path_endpoints(f.path)
        path = shortest_weighted_path(network, weights, src, dst)
        if path is None:
            path = f.path
        bd = bandwidths[f.request]
        for e in path:
            link = network.link(e)
            util[e] += bd / link.bw
            weights[e] = to_weight(
                eval_expr(expr, EvalContext(link.bw, link.dl, util[e], threshold))
            )
        rerouted.append(Flow(f.request, tuple(path)))
    return rerouted + list(keep_flows)


def evaluate_plan(
    network: Network,
    new_flows: Sequence[Flow],
    old_flows: Sequence[Flow],
    bandwidths: Mapping[int, float],
    threshold: float,
) -> float:
    """Two-regime fitness in [0, 3).

    While the worst link stays at or above the threshold the value is
    norm(max utilization) + 2; below it, the value is norm(re-routing edit
    distance) + norm(total path delay summed per flow).
    """
    new_by_req = {f.request: f for f in new_flows}
    old_by_req = {f.request: f for f in old_flows}
    if set(new_by_req) != set(old_by_req) or len(new_by_req) != len(new_flows):
        raise NetworkError("new and old flows must cover the same request set")

    util = link_utilizations(network, new_flows, bandwidths)
    fit1 = max(util, default=0.0)
    if fit1 >= threshold:
        return normalize(fit1) + 2.0
    fit2 = sum(
        lcs_distance(old_by_req[r].path, new_by_req[r].path) for r in old_by_req
    )
    fit3 = sum(network.link(e).dl for f in new_flows for e in f.path)
    return normalize(fit2) + normalize(fit3)


def tournament_select(population: Sequence[Individual], k: int, rng: Random) -> Individual:
    """Draw k individuals with replacement; return the lowest-fitness one."""
    if not population:
        raise ValueError("tournament over an empty population")
    if k < 1 or k > len(population):
        raise ValueError(f"tournament size {k} invalid for population {len(population)}")
    best = population[rng.randrange(len(population))]
    for _ in range(k - 1):
        challenger = population[rng.randrange(len(population))]
        if challenger.fitness < best.fitness:
            best = challenger
    return best


def _breed(population: list[Individual], config: GpConfig, rng: Random) -> list[Individual]:
    offspring: list[Individual] = []
    while len(offspring) < config.population_size:
        p1 = tournament_select(population, config.tournament_size, rng)
        p2 = tournament_select(population, config.tournament_size, rng)
        if rng.random() < config.crossover_rate:
            c1, c2 = crossover(p1.expr, p2.expr, rng, config.max_depth)
        else:
            c1, c2 = p1.expr, p2.expr
        for child in (c1, c2):
            if rng.random() < config.mutation_rate:
                child = mutate(child, rng, config.max_depth, config.const_min, config.const_max)
            offspring.append(Individual(child))
    return offspring[: config.population_size]


def gen_plan(
    network: Network,
    old_flows: Sequence[Flow],
    bandwidths: Mapping[int, float],
    best_sol: Sequence[Individual],
    config: GpConfig,
    rng: Random,
) -> PlanResult:
    """Evolve a weight formula that re-routes a minimal flow set congestion-free.

    The initial population takes up to half its members from best_sol (their
    fitness is recomputed for this snapshot) and fills the rest with random
    trees. The search stops once the best fitness drops below
    early_stop_fitness or the generation cap is reached; the best individual
    across all generations is returned together with its flows and the top
    half of the final population.
    """
    bad_flows = find_flows_causing_congestion(network, old_flows, bandwidths, config.threshold, rng)
    bad_ids = {f.request for f in bad_flows}
    keep_flows = [f for f in old_flows if f.request not in bad_ids]

    seeds = [Individual(ind.expr) for ind in best_sol[: config.population_size // 2]]
    population = seeds + [
        Individual(grow_random(config.max_depth, rng, config.const_min, config.const_max))
        for _ in range(config.population_size - len(seeds))
    ]
    initial_formulas = [format_expr(ind.expr) for ind in population]

    def assess(ind: Individual) -> None:
        flows = compute_surrogate(
            network, keep_flows, bad_flows, bandwidths, ind.expr, config.threshold
        )
        ind.fitness = evaluate_plan(network, flows, old_flows, bandwidths, config.threshold)

    best: Individual | None = None
    for ind in population:
        assess(ind)
        if best is None or ind.fitness < best.fitness:
            best = ind.copy()
    history = [best.fitness]

    generations = 0
    while best.fitness >= config.early_stop_fitness and generations < config.max_generations:
        population = _breed(population, config, rng)
        for ind in population:
            assess(ind)
            if ind.fitness < best.fitness:
                best = ind.copy()
        generations += 1
        history.append(best.fitness)

    retained = [
        ind.copy() for ind in sorted(population, key=lambda i: i.fitness)
    ][: config.population_size // 2]
    best_flows = compute_surrogate(
        network, keep_flows, bad_flows, bandwidths, best.expr, config.threshold
    )
    return PlanResult(best, best_flows, retained, generations, history, initial_formulas)
