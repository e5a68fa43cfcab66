"""Shared builders for tests: small named graphs and random DAGs."""

from __future__ import annotations

import itertools
import random
from typing import Iterable, Sequence

from jcikit.graphs import CausalGraph, DetRelationSet, Kind, Variable


def graph_from_edges(
    names: Sequence[str],
    edges: Iterable[tuple[str, str]],
    kinds: dict[str, Kind] | None = None,
    jci: bool = False,
) -> CausalGraph:
    """Build a graph from variable names and name-pair edges."""
    kinds = kinds or {}
    variables = [
        Variable(i, name, kinds.get(name, Kind.SYSTEM))
        for i, name in enumerate(names)
    ]
    index = {name: i for i, name in enumerate(names)}
    return CausalGraph(
        variables, [(index[p], index[c]) for p, c in edges], jci=jci
    )


def ids_by_name(graph: CausalGraph) -> dict[str, int]:
    """Inverse of the graph's id-to-name mapping."""
    return {v.name: v.id for v in graph.variables}


def random_dag(rng: random.Random, n: int, edge_prob: float = 0.5) -> CausalGraph:
    """A random DAG on ``n`` system variables.

    A random permutation serves as the topological order, and each
    forward pair becomes an edge independently with ``edge_prob``.
    """
    order = list(range(n))
    rng.shuffle(order)
    edges = [
        (order[i], order[j])
        for i, j in itertools.combinations(range(n), 2)
        if rng.random() < edge_prob
    ]
    variables = [Variable(i, f"X{i + 1}") for i in range(n)]
    return CausalGraph(variables, edges)


def random_jci_graph(
    rng: random.Random,
    p: int,
    i: int,
    edge_prob: float = 0.5,
) -> tuple[CausalGraph, DetRelationSet]:
    """A random pooled-model graph with regime, interventions, and system.

    The regime node (id 0) points to every intervention node (ids 1..i);
    each intervention node gets one random system target; system variables
    (ids i+1..i+p) form a random DAG among themselves. Returns the graph
    together with the deterministic relations that declare each
    intervention variable a function of the regime.
    """
    regime = Variable(0, "R", Kind.REGIME)
    interventions = [
        Variable(k + 1, f"I{k + 1}", Kind.INTERVENTION) for k in range(i)
    ]
    systems = [Variable(i + 1 + j, f"X{j + 1}") for j in range(p)]
    edges: list[tuple[int, int]] = [(0, v.id) for v in interventions]
    for v in interventions:
        target = rng.choice(systems).id
        edges.append((v.id, target))
    order = [v.id for v in systems]
    rng.shuffle(order)
    for a, b in itertools.combinations(range(p), 2):
        if rng.random() < edge_prob:
            edges.append((order[a], order[b]))
    graph = CausalGraph([regime] + interventions + systems, edges, jci=True)
    det = DetRelationSet([((0,), v.id) for v in interventions])
    return graph, det


def all_separation_instances(graph: CausalGraph, max_order: int):
    """Yield every (x, y, w) triple over the graph up to the given order."""
    nodes = sorted(graph.node_ids)
    for x, y in itertools.combinations(nodes, 2):
        rest = [v for v in nodes if v != x and v != y]
        for size in range(min(max_order, len(rest)) + 1):
            for w in itertools.combinations(rest, size):
                yield x, y, set(w)
