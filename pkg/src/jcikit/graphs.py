"""Causal graphs, separation criteria, and deterministic-relation closures.

This module provides the graphical layer of the toolkit:

* :class:`CausalGraph` — an acyclic directed graph whose nodes are typed
  (system, regime, intervention, latent). Graphs that pool observational
  and experimental regimes use a single regime node whose only children
  are intervention nodes; that shape can be enforced with ``jci=True``.
* d-separation (:func:`is_d_separated`) via a reachability search, with an
  independent all-simple-paths checker (:func:`is_d_separated_by_paths`)
  kept as a cross-validation oracle.
* Deterministic relations (:class:`DetRelationSet`) and their closure
  (:func:`det_closure`), which extend d-separation to the stronger
  separation test :func:`is_D_separated`: conditioning sets are enlarged
  with every variable they determine, and end nodes of a path count as
  non-colliders, so a path whose endpoint is determined by the
  conditioning set is blocked.
* Latent projection onto an acyclic directed mixed graph (:class:`Admg`)
  and exhaustive enumeration of separation statements for oracle use.

All operations are pure functions over immutable inputs.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Iterator, Mapping, Sequence

from .statements import DStatement, SeparationKind


class Kind(Enum):
    """Role of a variable in a pooled observational/experimental model."""

    SYSTEM = "system"
    REGIME = "regime"
    INTERVENTION = "intervention"
    LATENT = "latent"


@dataclass(frozen=True, order=True)
class Variable:
    """A typed graph node."""

    id: int
    name: str
    kind: Kind = field(default=Kind.SYSTEM)


class CycleError(ValueError):
    """Raised when edges contain a directed cycle."""


class GraphStructureError(ValueError):
    """Raised when a graph violates a declared structural constraint."""


class CausalGraph:
    """An acyclic directed graph over typed variables.

    Parameters
    ----------
    variables : iterable of Variable
        The nodes; ids must be unique, and at most one node may have kind
        ``Kind.REGIME``.
    edges : iterable of (int, int)
        Directed edges as ``(parent, child)`` id pairs.
    jci : bool, optional
        When true, enforce the pooled-model shape: the regime node has no
        parents, its children are all intervention nodes, and intervention
        nodes have no parent other than the regime node.

    Raises
    ------
    CycleError
        If the edges contain a directed cycle.
    GraphStructureError
        If ids are invalid or a structural constraint is violated.
    """

    def __init__(
        self,
        variables: Iterable[Variable],
        edges: Iterable[tuple[int, int]],
        jci: bool = False,
    ) -> None:
        self.variables: tuple[Variable, ...] = tuple(variables)
        self.edges: frozenset[tuple[int, int]] = frozenset(
            (int(p), int(c)) for p, c in edges
        )
        self.jci = jci

        ids = [v.id for v in self.variables]
        if len(set(ids)) != len(ids):
            raise GraphStructureError("variable ids must be unique")
        self._by_id: dict[int, Variable] = {v.id: v for v in self.variables}
        regimes = [v for v in self.variables if v.kind is Kind.REGIME]
        if len(regimes) > 1:
            raise GraphStructureError("at most one regime variable is allowed")

        self._parents: dict[int, frozenset[int]] = {}
        self._children: dict[int, frozenset[int]] = {}
        parents: dict[int, set[int]] = {v.id: set() for v in self.variables}
        children: dict[int, set[int]] = {v.id: set() for v in self.variables}
        for p, c in self.edges:
            if p not in parents or c not in parents:
                raise GraphStructureError(f"edge ({p}, {c}) uses an unknown id")
            if p == c:
                raise CycleError(f"self-loop at {p}")
            parents[c].add(p)
            children[p].add(c)
        for v in self.variables:
            self._parents[v.id] = frozenset(parents[v.id])
            self._children[v.id] = frozenset(children[v.id])

        self._topological = self._sort_topologically()
        if jci:
            self._check_jci_shape()

    def _sort_topologically(self) -> tuple[int, ...]:
        in_degree = {v.id: len(self._parents[v.id]) for v in self.variables}
        frontier = sorted(i for i, d in in_degree.items() if d == 0)
        order: list[int] = []
        while frontier:
            node = frontier.pop()
            order.append(node)
            for child in self._children[node]:
                in_degree[child] -= 1
                if in_degree[child] == 0:
                    frontier.append(child)
        if len(order) != len(self.variables):
            raise CycleError("edges contain a directed cycle")
        return tuple(order)

    def _check_jci_shape(self) -> None:
        for p, c in self.edges:
            pk = self._by_id[p].kind
            ck = self._by_id[c].kind
            if ck is Kind.REGIME:
                raise GraphStructureError("the regime variable cannot have parents")
            if pk is Kind.REGIME and ck is not Kind.INTERVENTION:
                raise GraphStructureError(
                    "regime edges must target intervention variables"
                )
            if ck is Kind.INTERVENTION and pk is not Kind.REGIME:
                raise GraphStructureError(
                    "intervention variables accept edges only from the regime"
                )

    # -- basic accessors -------------------------------------------------

    def variable(self, node: int) -> Variable:
        """Return the variable with the given id."""
        return self._by_id[node]

    def parents(self, node: int) -> frozenset[int]:
        """Ids of the direct causes of ``node``."""
        return self._parents[node]

    def children(self, node: int) -> frozenset[int]:
        """Ids of the direct effects of ``node``."""
        return self._children[node]

    @property
    def node_ids(self) -> frozenset[int]:
        """All variable ids in the graph."""
        return frozenset(self._by_id)

    @property
    def names(self) -> dict[int, str]:
        """Mapping from id to variable name."""
        return {v.id: v.name for v in self.variables}

    def ids_of_kind(self, kind: Kind) -> tuple[int, ...]:
        """Ids of all variables of the given kind, in declaration order."""
        return tuple(v.id for v in self.variables if v.kind is kind)

    def topological_order(self) -> tuple[int, ...]:
        """A topological order of the node ids (parents before children)."""
        return self._topological

    def is_adjacent(self, a: int, b: int) -> bool:
        """Whether an edge connects ``a`` and ``b`` in either direction."""
        return (a, b) in self.edges or (b, a) in self.edges

    def _check_ids(self, nodes: Iterable[int]) -> None:
        for node in nodes:
            if node not in self._by_id:
                raise GraphStructureError(f"unknown variable id {node}")


@dataclass(frozen=True)
class Path:
    """A sequence of unique, consecutively adjacent nodes in a graph.

    The collider status of each interior node is derived from the edge
    orientations: an interior node is a collider when both neighboring
    edges point into it. End nodes are treated as non-colliders.
    """

    nodes: tuple[int, ...]
    interior_colliders: frozenset[int]

    @staticmethod
    def from_nodes(graph: CausalGraph, nodes: Sequence[int]) -> "Path":
        """Build a path, validating adjacency and uniqueness."""
        nodes = tuple(nodes)
        if len(set(nodes)) != len(nodes):
            raise ValueError("path nodes must be unique")
        if len(nodes) < 2:
            raise ValueError("a path needs at least two nodes")
        colliders: set[int] = set()
        for i in range(1, len(nodes) - 1):
            left, mid, right = nodes[i - 1], nodes[i], nodes[i + 1]
            into_from_left = (left, mid) in graph.edges
            into_from_right = (right, mid) in graph.edges
            if not into_from_left and (mid, left) not in graph.edges:
                raise ValueError(f"nodes {left} and {mid} are not adjacent")
            if not into_from_right and (mid, right) not in graph.edges:
                raise ValueError(f"nodes {mid} and {right} are not adjacent")
            if into_from_left and into_from_right:
                colliders.add(mid)
        if len(nodes) == 2 and not graph.is_adjacent(nodes[0], nodes[1]):
            raise ValueError(f"nodes {nodes[0]} and {nodes[1]} are not adjacent")
        return Path(nodes, frozenset(colliders))

    @property
    def non_colliders(self) -> frozenset[int]:
        """All nodes on the path that are not interior colliders.

        End nodes are included, since they count as non-colliders.
        """
        return frozenset(self.nodes) - self.interior_colliders


class DetRelationSet:
    """A minimal set of deterministic relations between variables.

    Each relation ``(determiners, determined)`` states that the determined
    variable is a function of the determiner set, but of no strict subset
    of it. Minimality is validated at construction: declaring both
    ``({A, B}, C)`` and ``({A}, C)`` is rejected, because the former would
    not be minimal.
    """

    def __init__(self, relations: Iterable[tuple[Iterable[int], int]] = ()) -> None:
        entries: set[tuple[frozenset[int], int]] = set()
        for determiners, determined in relations:
            determiners = frozenset(int(d) for d in determiners)
            determined = int(determined)
            if determined in determiners:
                raise ValueError(
                    f"variable {determined} cannot determine itself"
                )
            entries.add((determiners, determined))
        for (s1, t1), (s2, t2) in itertools.permutations(entries, 2):
            if t1 == t2 and s1 < s2:
                raise ValueError(
                    f"relation ({sorted(s2)} -> {t2}) is not minimal: "
                    f"{sorted(s1)} already determines {t2}"
                )
        self.relations: frozenset[tuple[frozenset[int], int]] = frozenset(entries)

    def __len__(self) -> int:
        return len(self.relations)

    def __iter__(self) -> Iterator[tuple[frozenset[int], int]]:
        return iter(self.relations)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DetRelationSet):
            return NotImplemented
        return self.relations == other.relations

    def __hash__(self) -> int:
        return hash(self.relations)

    def __repr__(self) -> str:
        parts = ", ".join(
            f"({sorted(s)} -> {t})" for s, t in sorted(self.relations, key=str)
        )
        return f"DetRelationSet({parts})"

    def without(self, determiners: Iterable[int], determined: int) -> "DetRelationSet":
        """A copy with one relation removed (no error if absent)."""
        key = (frozenset(determiners), determined)
        return DetRelationSet(
            (s, t) for s, t in self.relations if (s, t) != key
        )


def ancestors(graph: CausalGraph, targets: Iterable[int]) -> frozenset[int]:
    """All variables with a directed path to some target.

    Targets are included in the result (every variable is an ancestor of
    itself). An empty target set yields an empty result.
    """
    targets = set(targets)
    graph._check_ids(targets)
    found = set(targets)
    frontier = list(targets)
    while frontier:
        node = frontier.pop()
        for parent in graph.parents(node):
            if parent not in found:
                found.add(parent)
                frontier.append(parent)
    return frozenset(found)


def descendants(graph: CausalGraph, sources: Iterable[int]) -> frozenset[int]:
    """All variables reachable from some source by a directed path.

    Sources are included in the result.
    """
    sources = set(sources)
    graph._check_ids(sources)
    found = set(sources)
    frontier = list(sources)
    while frontier:
        node = frontier.pop()
        for child in graph.children(node):
            if child not in found:
                found.add(child)
                frontier.append(child)
    return frozenset(found)


def _check_disjoint(
    graph: CausalGraph, x: set[int], y: set[int], w: set[int]
) -> None:
    graph._check_ids(x | y | w)
    if not x or not y:
        raise ValueError("both endpoint sets must be nonempty")
    if x & y or x & w or y & w:
        raise ValueError("endpoint and conditioning sets must be pairwise disjoint")


def _separated_by_reachability(
    graph: CausalGraph,
    x: set[int],
    y: set[int],
    blockers: frozenset[int],
    collider_openers: frozenset[int],
) -> bool:
    """Core separation test: is there no active path from ``x`` to ``y``?

    A path is active when every interior non-collider avoids ``blockers``,
    every interior collider lies in ``collider_openers``, and neither end
    node lies in ``blockers`` (end nodes count as non-colliders). The
    search runs over walk states ``(node, arrived_from_parent)``; an
    active walk exists exactly when an active path does.
    """
    targets = {t for t in y if t not in blockers}
    if not targets:
        return True

    # True in the state means the walk arrived at the node along an edge
    # out of a parent (so continuing to a parent makes the node a collider).
    visited: set[tuple[int, bool]] = set()
    frontier: list[tuple[int, bool]] = []
    for source in x:
        if source in blockers:
            continue
        if source in targets:
            # Cannot happen for disjoint sets, but keep the check local.
            return False
        for child in graph.children(source):
            frontier.append((child, True))
        for parent in graph.parents(source):
            frontier.append((parent, False))

    while frontier:
        state = frontier.pop()
        if state in visited:
            continue
        visited.add(state)
        node, from_parent = state
        if node in targets:
            return False
        if node not in blockers:
            # Passing straight through keeps the node a non-collider.
            for child in graph.children(node):
                frontier.append((child, True))
            if not from_parent:
                for parent in graph.parents(node):
                    frontier.append((parent, False))
        if from_parent and node in collider_openers:
            # Turning back toward a parent makes the node a collider.
            for parent in graph.parents(node):
                frontier.append((parent, False))
    return True


def is_d_separated(
    graph: CausalGraph,
    x: Iterable[int],
    y: Iterable[int],
    w: Iterable[int],
) -> bool:
    """Whether ``w`` d-separates the sets ``x`` and ``y``.

    True iff every path between the sets contains a collider outside
    ``ancestors(w)`` or a non-collider in ``w``.

    Raises
    ------
    ValueError
        If the three sets overlap or an endpoint set is empty.
    """
    x, y, w = set(x), set(y), set(w)
    _check_disjoint(graph, x, y, w)
    blockers = frozenset(w)
    return _separated_by_reachability(graph, x, y, blockers, ancestors(graph, w))


def det_closure(det: DetRelationSet, w: Iterable[int]) -> frozenset[int]:
    """The set of variables determined by ``w`` under the given relations.

    Least fixpoint containing ``w``: repeatedly add the determined variable
    of any relation whose determiners all lie in the current set. Relations
    with an empty determiner set (constants) are always added.
    """
    closed = set(w)
    pending = list(det.relations)
    changed = True
    while changed:
        changed = False
        remaining = []
        for determiners, determined in pending:
            if determiners <= closed:
                if determined not in closed:
                    closed.add(determined)
                    changed = True
            else:
                remaining.append((determiners, determined))
        pending = remaining
    return frozenset(closed)


def is_D_separated(
    graph: CausalGraph,
    det: DetRelationSet,
    x: Iterable[int],
    y: Iterable[int],
    w: Iterable[int],
) -> bool:
    """Separation test extended to deterministic relations.

    True iff every path between ``x`` and ``y`` contains a collider outside
    ``ancestors(w)`` or a non-collider in ``det_closure(det, w)``. End
    nodes count as non-colliders, so a path whose endpoint is determined
    by ``w`` is blocked. With an empty relation set this reduces exactly
    to :func:`is_d_separated`.
    """
    x, y, w = set(x), set(y), set(w)
    _check_disjoint(graph, x, y, w)
    blockers = det_closure(det, w) & graph.node_ids
    return _separated_by_reachability(graph, x, y, blockers, ancestors(graph, w))


def _all_simple_paths(
    graph: CausalGraph, source: int, target: int
) -> Iterator[Path]:
    """Yield every simple path between two nodes over the skeleton."""
    neighbors: dict[int, frozenset[int]] = {
        node: graph.parents(node) | graph.children(node)
        for node in graph.node_ids
    }
    stack: list[int] = [source]
    on_path: set[int] = {source}
    iterators: list[Iterator[int]] = [iter(sorted(neighbors[source]))]
    while iterators:
        try:
            step = next(iterators[-1])
        except StopIteration:
            iterators.pop()
            on_path.discard(stack.pop())
            continue
        if step in on_path:
            continue
        if step == target:
            yield Path.from_nodes(graph, stack + [target])
            continue
        stack.append(step)
        on_path.add(step)
        iterators.append(iter(sorted(neighbors[step])))


def _separated_by_paths(
    graph: CausalGraph,
    x: set[int],
    y: set[int],
    blockers: frozenset[int],
    collider_openers: frozenset[int],
) -> bool:
    """Naive separation test by exhaustive path enumeration.

    Kept deliberately independent of the reachability implementation so
    the two can cross-validate each other.
    """
    for source in sorted(x):
        for target in sorted(y):
            for path in _all_simple_paths(graph, source, target):
                blocked = False
                for node in path.interior_colliders:
                    if node not in collider_openers:
                        blocked = True
                        break
                if not blocked:
                    for node in path.non_colliders:
                        if node in blockers:
                            blocked = True
                            break
                if not blocked:
                    return False
    return True


def is_d_separated_by_paths(
    graph: CausalGraph,
    x: Iterable[int],
    y: Iterable[int],
    w: Iterable[int],
) -> bool:
    """Path-enumeration implementation of :func:`is_d_separated`."""
    x, y, w = set(x), set(y), set(w)
    _check_disjoint(graph, x, y, w)
    return _separated_by_paths(graph, x, y, frozenset(w), ancestors(graph, w))


def is_D_separated_by_paths(
    graph: CausalGraph,
    det: DetRelationSet,
    x: Iterable[int],
    y: Iterable[int],
    w: Iterable[int],
) -> bool:
    """Path-enumeration implementation of :func:`is_D_separated`."""
    x, y, w = set(x), set(y), set(w)
    _check_disjoint(graph, x, y, w)
    blockers = det_closure(det, w) & graph.node_ids
    return _separated_by_paths(graph, x, y, blockers, ancestors(graph, w))


def functionally_determined(
    graph: CausalGraph,
    x: int,
    w: Iterable[int],
    noiseless: Iterable[int],
) -> bool:
    """Whether ``x`` is a deterministic consequence of conditioning on ``w``.

    True iff ``x`` is in ``w``, or the structural equation of ``x`` has no
    exogenous term (``x`` in ``noiseless``) and every parent of ``x`` is
    itself functionally determined by ``w``. A noiseless root variable is
    a constant and is determined by any set.
    """
    w = frozenset(w)
    noiseless = frozenset(noiseless)
    graph._check_ids({x} | w | noiseless)
    memo: dict[int, bool] = {}

    def determined(node: int) -> bool:
        if node in memo:
            return memo[node]
        if node in w:
            result = True
        elif node in noiseless:
            result = all(determined(parent) for parent in graph.parents(node))
        else:
            result = False
        memo[node] = result
        return result

    return determined(x)


@dataclass(frozen=True)
class Admg:
    """An acyclic directed mixed graph: directed plus bidirected edges."""

    variables: tuple[Variable, ...]
    directed: frozenset[tuple[int, int]]
    bidirected: frozenset[frozenset[int]]

    @property
    def names(self) -> dict[int, str]:
        """Mapping from id to variable name."""
        return {v.id: v.name for v in self.variables}

    def edge_strings(self) -> list[str]:
        """Human-readable edge list, sorted, e.g. ``['A -> B', 'B <-> C']``."""
        names = self.names
        lines = [f"{names[p]} -> {names[c]}" for p, c in self.directed]
        for pair in self.bidirected:
            a, b = sorted(pair)
            lines.append(f"{names[a]} <-> {names[b]}")
        return sorted(lines)


def latent_project(graph: CausalGraph) -> Admg:
    """Project out the latent variables, keeping their induced structure.

    The result has a directed edge ``a -> b`` whenever the graph has a
    directed path from ``a`` to ``b`` whose interior nodes are all latent,
    and a bidirected edge ``a <-> b`` whenever some latent variable reaches
    both ``a`` and ``b`` through directed paths with all-latent interiors.
    """
    latent = frozenset(graph.ids_of_kind(Kind.LATENT))
    observed = [v for v in graph.variables if v.kind is not Kind.LATENT]

    def observed_reachable(start: int) -> frozenset[int]:
        # Observed nodes reachable from `start` by directed paths whose
        # interior nodes are all latent.
        found: set[int] = set()
        seen_latent: set[int] = set()
        frontier = [start]
        while frontier:
            node = frontier.pop()
            for child in graph.children(node):
                if child in latent:
                    if child not in seen_latent:
                        seen_latent.add(child)
                        frontier.append(child)
                else:
                    found.add(child)
        return frozenset(found)

    directed: set[tuple[int, int]] = set()
    for v in observed:
        for target in observed_reachable(v.id):
            directed.add((v.id, target))

    reached_from_latent: dict[int, frozenset[int]] = {
        l: observed_reachable(l) for l in latent
    }
    bidirected: set[frozenset[int]] = set()
    for reached in reached_from_latent.values():
        for a, b in itertools.combinations(sorted(reached), 2):
            bidirected.add(frozenset((a, b)))

    return Admg(tuple(observed), frozenset(directed), frozenset(bidirected))


def enumerate_d_statements(
    graph: CausalGraph,
    det: DetRelationSet,
    scope: Iterable[int],
    max_order: int,
) -> list[DStatement]:
    """Every separation statement over ``scope`` up to the given order.

    For each unordered pair in ``scope`` and each conditioning set drawn
    from the remaining scope variables with size at most ``max_order``,
    emits a separation or connection statement per :func:`is_D_separated`,
    with infinite (oracle) weight.
    """
    scope = sorted(set(scope))
    graph._check_ids(scope)
    statements: list[DStatement] = []
    for x, y in itertools.combinations(scope, 2):
        rest = [v for v in scope if v != x and v != y]
        for size in range(min(max_order, len(rest)) + 1):
            for w in itertools.combinations(rest, size):
                separated = is_D_separated(graph, det, {x}, {y}, set(w))
                kind = (
                    SeparationKind.D_SEPARATED
                    if separated
                    else SeparationKind.D_CONNECTED
                )
                statements.append(DStatement(kind, x, y, frozenset(w), math.inf))
    return statements


# -- file format ---------------------------------------------------------


def graph_to_json(graph: CausalGraph, det: DetRelationSet | None = None) -> dict:
    """Serialize a graph (and optional deterministic relations) to a dict."""
    payload: dict = {
        "variables": [
            {"id": v.id, "name": v.name, "kind": v.kind.value}
            for v in graph.variables
        ],
        "edges": [[p, c] for p, c in sorted(graph.edges)],
        "det": [],
    }
    if det is not None:
        payload["det"] = [
            {"from": sorted(s), "to": t}
            for s, t in sorted(det.relations, key=lambda e: (e[1], sorted(e[0])))
        ]
    return payload


def graph_from_json(payload: Mapping) -> tuple[CausalGraph, DetRelationSet]:
    """Inverse of :func:`graph_to_json`."""
    variables = [
        Variable(int(v["id"]), str(v["name"]), Kind(str(v["kind"]).lower()))
        for v in payload["variables"]
    ]
    edges = [(int(p), int(c)) for p, c in payload.get("edges", [])]
    det = DetRelationSet(
        (entry["from"], entry["to"]) for entry in payload.get("det", [])
    )
    return CausalGraph(variables, edges), det


def save_graph(
    path: str, graph: CausalGraph, det: DetRelationSet | None = None
) -> None:
    """Write a graph to a JSON file."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(graph_to_json(graph, det), fh, indent=2)
        fh.write("\n")


def load_graph(path: str) -> tuple[CausalGraph, DetRelationSet]:
    """Read a graph from a JSON file."""
    with open(path, "r", encoding="utf-8") as fh:
        return graph_from_json(json.load(fh))
