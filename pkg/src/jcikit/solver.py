"""Exact weighted-loss discovery of ancestral causal structure.

Separation statements — possibly conflicting, each carrying a confidence
weight — are compiled into a clause system over two families of boolean
atoms: ancestry atoms ``X causes Y`` and separation atoms ``X and Y are
d-separated given W``. Hard clauses encode the partial-order axioms of
ancestral structures, five sound reasoning rules connecting separations
with ancestry, and (for pooled data) the background knowledge that the
regime and intervention variables are exogenous context. Soft unit
clauses carry the input statements and their weights.

The solver finds an assignment satisfying every hard clause while
minimizing the total weight of violated inputs, by exact depth-first
branch and bound with unit propagation. Predictions are scored by the
loss gap between forcing a feature false and forcing it true.

The reasoning rules, for disjoint variables X, Y, Z, U and a set W
(writing ``sep``/``con`` for d-separation/d-connection given a set and
``causes`` for ancestry):

1. sep(X,Y|W) and X causes no member of W  =>  X does not cause Y.
2. sep(X,Y|W) and con(X,Y|W+Z)  =>  con(X,Z|W), and Z causes none of
   {X,Y} or W.
3. con(X,Y|W) and sep(X,Y|W+Z)  =>  con(X,Z|W), and Z causes at least
   one of {X,Y} or W.
4. con(X,Y|W), sep(X,Y|W+Z) and sep(X,Z|W+U)  =>  sep(X,Y|W+U).
5. con(Z,X|W), con(Z,Y|W) and sep(X,Y|W)  =>  con(X,Y|W+Z).

The pooled-data background knowledge, with regime variable R,
intervention variables I and system variables X:

1. R causes every I_i, and is d-connected to it given any W.
2. If R causes X_j, some I_i causes X_j.
3. R is d-separated from X_j given all intervention variables plus any
   system set W.
4. No X_j causes R or any I_i.
5. con(R,X_j)  =>  R causes X_j  (no confounding between R and the
   system).
6. con(I_i,X_j|R)  =>  I_i causes X_j  (no confounding besides R).
7. Adding R to a separating set preserves separation.
8. Adding any I_i to a separating set preserves separation.

When the variable set has a regime but no separate intervention
variables, the regime is read as the merged context variable of a
two-regime study (the regime and its single intervention indicator
coincide), so items 1-3 and 6 degenerate away and items 4, 5, 7 keep
their meaning for the merged variable.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Sequence

from .graphs import CausalGraph, Kind, Variable, ancestors
from .statements import DStatement, SeparationKind

# an atom is ("anc", a, b) or ("dsep", x, y, frozenset) with x < y;
# a literal is (atom_index, satisfying_value)

_DEFAULT_VARIABLE_LIMIT = 9


class GroundingError(ValueError):
    """Raised when the rule system cannot be grounded as requested."""


class InfeasibleProblemError(ValueError):
    """Raised when the hard clauses admit no assignment at all."""

    def __init__(self, message: str, core: tuple[str, ...] = ()) -> None:
        super().__init__(message)
        self.core = core


class ContradictionError(ValueError):
    """Raised when a feature is infeasible both ways."""


class RefinementError(ValueError):
    """Raised when statements are too contradictory to refine a graph."""


class FeatureKind(Enum):
    ANCESTRAL = "ancestral"
    NONANCESTRAL = "nonancestral"


class AncestralStructure:
    """A reflexive, transitive, antisymmetric causes-relation.

    Parameters
    ----------
    ids : sequence of int
        The variable ids the relation is over, in display order.
    causes : mapping or iterable of (int, int)
        The ordered pairs (a, b) with a distinct from b for which
        "a causes b" holds. Reflexive pairs are implicit.
    """

    def __init__(self, ids: Sequence[int], causes: Iterable[tuple[int, int]]):
        self.ids: tuple[int, ...] = tuple(sorted(set(int(v) for v in ids)))
        id_set = set(self.ids)
        pairs = set()
        for a, b in causes:
            a, b = int(a), int(b)
            if a not in id_set or b not in id_set:
                raise ValueError(f"pair ({a}, {b}) is out of scope")
            if a != b:
                pairs.add((a, b))
        for a, b in pairs:
            if (b, a) in pairs:
                raise ValueError(f"antisymmetry violated on ({a}, {b})")
        for (a, b), (c, d) in itertools.product(pairs, repeat=2):
            if b == c and (a, d) not in pairs and a != d:
                raise ValueError(
                    f"transitivity violated: ({a},{b}) and ({c},{d}) "
                    f"without ({a},{d})"
                )
        self.pairs: frozenset[tuple[int, int]] = frozenset(pairs)

    @staticmethod
    def from_graph(graph: CausalGraph, scope: Iterable[int]) -> "AncestralStructure":
        """The ancestral relation a graph induces on a variable subset.

        Ancestry may pass through out-of-scope (latent) variables.
        """
        scope = sorted(set(scope))
        pairs = []
        for b in scope:
            for a in ancestors(graph, [b]):
                if a != b and a in scope:
                    pairs.append((a, b))
        return AncestralStructure(scope, pairs)

    def causes(self, a: int, b: int) -> bool:
        """Whether ``a`` is an ancestor of ``b`` (reflexively)."""
        return a == b or (a, b) in self.pairs

    def lex_key(self) -> tuple[bool, ...]:
        """Deterministic encoding: truth values over sorted ordered pairs."""
        return tuple(
            (a, b) in self.pairs
            for a, b in itertools.permutations(self.ids, 2)
        )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, AncestralStructure):
            return NotImplemented
        return self.ids == other.ids and self.pairs == other.pairs

    def __hash__(self) -> int:
        return hash((self.ids, self.pairs))

    def __repr__(self) -> str:
        inner = ", ".join(f"{a}->{b}" for a, b in sorted(self.pairs))
        return f"AncestralStructure({inner})"


@dataclass(frozen=True)
class GroundedProblem:
    """A clause system over ancestry and separation atoms.

    ``hard`` clauses must all be satisfied; each is a tuple of
    (atom_index, satisfying_value) literals. ``soft`` entries are
    (atom_index, claimed_value, weight, statement) records whose weight
    is lost when the assignment contradicts the claim.
    """

    variables: tuple[Variable, ...]
    regime_id: int | None
    intervention_ids: tuple[int, ...]
    max_order: int
    atoms: tuple[tuple, ...]
    atom_index: Mapping[tuple, int]
    hard: tuple[tuple[tuple[int, bool], ...], ...]
    hard_origins: tuple[str, ...]
    soft: tuple[tuple[int, bool, float, DStatement], ...]
    statements: tuple[DStatement, ...]

    @property
    def scope(self) -> tuple[int, ...]:
        return tuple(v.id for v in self.variables)

    @property
    def anc_atom_indices(self) -> list[int]:
        return [
            i for i, atom in enumerate(self.atoms) if atom[0] == "anc"
        ]

    def clause_counts(self) -> dict[str, int]:
        """Number of hard clauses per rule of origin."""
        counts: dict[str, int] = {}
        for origin in self.hard_origins:
            counts[origin] = counts.get(origin, 0) + 1
        return counts


@dataclass(frozen=True)
class Solution:
    """An optimal assignment: structure, separation truths, and loss."""

    structure: AncestralStructure
    dstatement_assignment: Mapping[tuple[int, int, frozenset[int]], bool]
    loss: float
    optimum_count: int | None = None
    optima: tuple[AncestralStructure, ...] | None = None


@dataclass(frozen=True)
class ScoredPrediction:
    """A causal feature with the solver's confidence in it."""

    x: int
    y: int
    feature: FeatureKind
    confidence: float


def parse_background(
    text: str, name_to_id: Mapping[str, int]
) -> list[tuple]:
    """Parse background-knowledge lines into fact tuples.

    Recognized forms, one per line (``#`` comments and blanks allowed):
    ``cause X Y`` (X is an ancestor of Y), ``noncause X Y`` (it is not),
    and ``oneof X: Y1 Y2 ...`` (X is an ancestor of at least one Y).
    """
    facts: list[tuple] = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        head, _, rest = line.partition(" ")
        if head in ("cause", "noncause"):
            names = rest.split()
            if len(names) != 2:
                raise ValueError(f"expected two names in line: {raw!r}")
            facts.append((head, name_to_id[names[0]], name_to_id[names[1]]))
        elif head == "oneof":
            if ":" not in rest:
                raise ValueError(f"expected 'oneof X: Y1 Y2 ...' in {raw!r}")
            x_name, _, y_part = rest.partition(":")
            ys = y_part.split()
            if not x_name.strip() or not ys:
                raise ValueError(f"expected 'oneof X: Y1 Y2 ...' in {raw!r}")
            facts.append(
                (
                    "oneof",
                    name_to_id[x_name.strip()],
                    tuple(name_to_id[y] for y in ys),
                )
            )
        else:
            raise ValueError(f"unknown background fact: {raw!r}")
    return facts


class _Grounder:
    """Builds the atom universe and clause system for one problem."""

    def __init__(
        self,
        variables: Sequence[Variable],
        max_order: int,
        jci: bool,
        background: Iterable[tuple],
        statements: Iterable[DStatement],
    ) -> None:
        self.variables = tuple(variables)
        ids = [v.id for v in self.variables]
        if len(set(ids)) != len(ids):
            raise GroundingError("duplicate variable ids")
        self.scope = sorted(ids)
        self.id_set = set(self.scope)
        if any(v.kind is Kind.LATENT for v in self.variables):
            raise GroundingError("latent variables cannot be in scope")
        regimes = [v.id for v in self.variables if v.kind is Kind.REGIME]
        self.interventions = sorted(
            v.id for v in self.variables if v.kind is Kind.INTERVENTION
        )
        self.systems = sorted(
            v.id for v in self.variables if v.kind is Kind.SYSTEM
        )
        if jci:
            if len(regimes) != 1:
                raise GroundingError(
                    "pooled-data rules need exactly one regime variable"
                )
            self.regime: int | None = regimes[0]
        else:
            self.regime = None
        self.jci = jci
        self.max_order = max_order
        self.background = list(background)
        self.statements = tuple(statements)
        for stmt in self.statements:
            bad = ({stmt.x, stmt.y} | stmt.w) - self.id_set
            if bad:
                raise GroundingError(
                    f"statement references out-of-scope ids {sorted(bad)}"
                )

        self.atoms: list[tuple] = []
        self.index: dict[tuple, int] = {}
        self.clauses: list[tuple[tuple[int, bool], ...]] = []
        self.origins: list[str] = []
        self._seen: set[tuple] = set()

    # -- atoms --------------------------------------------------------

    def _anc(self, a: int, b: int) -> int:
        return self.index[("anc", a, b)]

    def _dsep_key(self, x: int, y: int, w: Iterable[int]) -> tuple:
        x, y = (x, y) if x < y else (y, x)
        return ("dsep", x, y, frozenset(w))

    def _get_dsep(self, x: int, y: int, w: Iterable[int]) -> int | None:
        return self.index.get(self._dsep_key(x, y, w))

    def _add_atom(self, atom: tuple) -> int:
        if atom not in self.index:
            self.index[atom] = len(self.atoms)
            self.atoms.append(atom)
        return self.index[atom]

    def _build_atoms(self) -> None:
        for a, b in itertools.permutations(self.scope, 2):
            self._add_atom(("anc", a, b))
        for x, y in itertools.combinations(self.scope, 2):
            rest = [v for v in self.scope if v != x and v != y]
            for size in range(min(self.max_order, len(rest)) + 1):
                for w in itertools.combinations(rest, size):
                    self._add_atom(self._dsep_key(x, y, w))
        for stmt in self.statements:
            self._add_atom(self._dsep_key(stmt.x, stmt.y, stmt.w))
        if self.jci and self.interventions:
            # separations pinned by the context variables (item 3)
            for j in self.systems:
                others = [v for v in self.systems if v != j]
                for size in range(min(self.max_order, len(others)) + 1):
                    for w in itertools.combinations(others, size):
                        self._add_atom(
                            self._dsep_key(
                                self.regime, j, set(w) | set(self.interventions)
                            )
                        )
            for i, j in itertools.product(self.interventions, self.systems):
                self._add_atom(self._dsep_key(i, j, {self.regime}))
        if self.jci:
            # ladder of separating sets growing by context variables, so
            # that closure-expanded statements connect back to low-order
            # atoms through items 7 and 8
            for j, k in itertools.combinations(self.systems, 2):
                rest = [
                    v for v in self.scope if v not in (j, k, self.regime)
                ]
                for size in range(min(self.max_order, len(rest)) + 1):
                    for base in itertools.combinations(rest, size):
                        current = set(base) | {self.regime}
                        self._add_atom(self._dsep_key(j, k, current))
                        for i in self.interventions:
                            if i in current:
                                continue
                            current = current | {i}
                            self._add_atom(self._dsep_key(j, k, current))

    # -- clauses ------------------------------------------------------

    def _emit(self, clause: Iterable[tuple[int, bool]], origin: str) -> None:
        by_atom: dict[int, bool] = {}
        for atom, value in clause:
            if atom in by_atom:
                if by_atom[atom] != value:
                    return  # tautology
            by_atom[atom] = value
        normal = tuple(sorted(by_atom.items()))
        if normal in self._seen:
            return
        self._seen.add(normal)
        self.clauses.append(normal)
        self.origins.append(origin)

    def _ancestral_axioms(self) -> None:
        for a, b in itertools.combinations(self.scope, 2):
            self._emit(
                [(self._anc(a, b), False), (self._anc(b, a), False)],
                "antisymmetry",
            )
        for a, b, c in itertools.permutations(self.scope, 3):
            self._emit(
                [
                    (self._anc(a, b), False),
                    (self._anc(b, c), False),
                    (self._anc(a, c), True),
                ],
                "transitivity",
            )

    def _separation_rules(self) -> None:
        for atom_id, atom in enumerate(self.atoms):
            if atom[0] != "dsep":
                continue
            _, px, py, w = atom
            rest = [
                v for v in self.scope if v != px and v != py and v not in w
            ]
            for x, y in ((px, py), (py, px)):
                # rule 1
                self._emit(
                    [(atom_id, False)]
                    + [(self._anc(x, v), True) for v in sorted(w)]
                    + [(self._anc(x, y), False)],
                    "rule-1",
                )
                for z in rest:
                    ext = self._get_dsep(x, y, w | {z})
                    if ext is None:
                        continue
                    xz = self._get_dsep(x, z, w)
                    members = [x, y] + sorted(w)
                    # rule 2: sep(X,Y|W) & con(X,Y|W+Z) => ...
                    premise2 = [(atom_id, False), (ext, True)]
                    if xz is not None:
                        self._emit(premise2 + [(xz, False)], "rule-2")
                    for v in members:
                        self._emit(
                            premise2 + [(self._anc(z, v), False)], "rule-2"
                        )
                    # rule 3: con(X,Y|W) & sep(X,Y|W+Z) => ...
                    premise3 = [(atom_id, True), (ext, False)]
                    if xz is not None:
                        self._emit(premise3 + [(xz, False)], "rule-3")
                    self._emit(
                        premise3
                        + [(self._anc(z, v), True) for v in members],
                        "rule-3",
                    )
                    # rule 4
                    for u in rest:
                        if u == z:
                            continue
                        xz_u = self._get_dsep(x, z, w | {u})
                        ext_u = self._get_dsep(x, y, w | {u})
                        if xz_u is None or ext_u is None:
                            continue
                        self._emit(
                            [
                                (atom_id, True),
                                (ext, False),
                                (xz_u, False),
                                (ext_u, True),
                            ],
                            "rule-4",
                        )
            # rule 5 (symmetric in the endpoint pair)
            for z in rest:
                zx = self._get_dsep(z, px, w)
                zy = self._get_dsep(z, py, w)
                ext = self._get_dsep(px, py, w | {z})
                if zx is None or zy is None or ext is None:
                    continue
                self._emit(
                    [(zx, True), (zy, True), (atom_id, False), (ext, False)],
                    "rule-5",
                )

    def _jci_items(self) -> None:
        regime = self.regime
        merged = not self.interventions
        if not merged:
            for i in self.interventions:
                self._emit([(self._anc(regime, i), True)], "item-1")
            for atom_id, atom in enumerate(self.atoms):
                if atom[0] != "dsep":
                    continue
                _, x, y, w = atom
                if {x, y} & set(self.interventions) and regime in (x, y):
                    self._emit([(atom_id, False)], "item-1")
            for j in self.systems:
                self._emit(
                    [(self._anc(regime, j), False)]
                    + [
                        (self._anc(i, j), True)
                        for i in self.interventions
                    ],
                    "item-2",
                )
            for j in self.systems:
                others = [v for v in self.systems if v != j]
                for size in range(min(self.max_order, len(others)) + 1):
                    for w in itertools.combinations(others, size):
                        atom = self._get_dsep(
                            regime, j, set(w) | set(self.interventions)
                        )
                        self._emit([(atom, True)], "item-3")
            for i, j in itertools.product(self.interventions, self.systems):
                self._emit(
                    [
                        (self._get_dsep(i, j, {regime}), True),
                        (self._anc(i, j), True),
                    ],
                    "item-6",
                )
        for j in self.systems:
            self._emit([(self._anc(j, regime), False)], "item-4")
            for i in self.interventions:
                self._emit([(self._anc(j, i), False)], "item-4")
            self._emit(
                [
                    (self._get_dsep(regime, j, ()), True),
                    (self._anc(regime, j), True),
                ],
                "item-5",
            )
        # items 7 and 8: context variables never open a separating set
        context = [regime] + list(self.interventions)
        for atom_id, atom in enumerate(self.atoms):
            if atom[0] != "dsep":
                continue
            _, x, y, w = atom
            if x not in self.systems or y not in self.systems:
                continue
            for c in context:
                if c in w:
                    continue
                target = self._get_dsep(x, y, w | {c})
                if target is None:
                    continue
                origin = "item-7" if c == regime else "item-8"
                self._emit([(atom_id, False), (target, True)], origin)

    def _background_clauses(self) -> None:
        for fact in self.background:
            kind = fact[0]
            if kind == "cause":
                self._emit([(self._anc(fact[1], fact[2]), True)], "background")
            elif kind == "noncause":
                self._emit(
                    [(self._anc(fact[1], fact[2]), False)], "background"
                )
            elif kind == "oneof":
                self._emit(
                    [(self._anc(fact[1], y), True) for y in fact[2]],
                    "background",
                )
            else:
                raise GroundingError(f"unknown background fact kind {kind!r}")

    def build(self) -> GroundedProblem:
        self._build_atoms()
        self._ancestral_axioms()
        self._separation_rules()
        if self.jci:
            self._jci_items()
        self._background_clauses()

        soft = []
        for stmt in self.statements:
            atom = self.index[self._dsep_key(stmt.x, stmt.y, stmt.w)]
            value = stmt.kind is SeparationKind.D_SEPARATED
            if math.isinf(stmt.weight):
                self._emit([(atom, value)], "hard-input")
            else:
                soft.append((atom, value, stmt.weight, stmt))
        return GroundedProblem(
            variables=self.variables,
            regime_id=self.regime,
            intervention_ids=tuple(self.interventions),
            max_order=self.max_order,
            atoms=tuple(self.atoms),
            atom_index=dict(self.index),
            hard=tuple(self.clauses),
            hard_origins=tuple(self.origins),
            soft=tuple(soft),
            statements=self.statements,
        )


def ground_rules(
    variables: Sequence[Variable],
    max_order: int,
    jci: bool = False,
    background: Iterable[tuple] = (),
    statements: Iterable[DStatement] = (),
) -> GroundedProblem:
    """Ground the rule system over a variable set.

    Separation atoms are enumerated for every pair and every conditioning
    set up to ``max_order``, plus the atoms appearing in the given
    statements (whatever their order) and, in pooled mode, the atoms the
    context-variable background items need. Rule instances are emitted
    whenever all their atoms exist; instances needing absent higher-order
    atoms are omitted, which keeps the system sound but not complete.

    Parameters
    ----------
    variables : sequence of Variable
        The in-scope variables with their kinds.
    max_order : int
        Conditioning-set size up to which separation atoms are enumerated.
    jci : bool
        Add the pooled-data background items (requires a regime variable).
    background : iterable of tuple
        Facts from :func:`parse_background`.
    statements : iterable of DStatement
        Weighted inputs; infinite weights become hard clauses.
    """
    return _Grounder(variables, max_order, jci, background, statements).build()


_WEIGHT_SCALE = 1 << 20


class _Searcher:
    """Branch-and-bound over a grounded problem, optionally constrained.

    Soft weights are scaled to integers (granularity ``2**-20``) so that
    loss bookkeeping is exact: accumulated costs never drift, optima
    compare reliably, and ties are genuine ties. Atoms carrying cost are
    branched first, heaviest first, so that violations surface early;
    cost-free separation atoms and ancestry atoms follow, where unit
    propagation does most of the work.

    Pruning combines three admissible ingredients: the weight already
    violated plus the per-atom slack of claims conflicting on the same
    atom; disjoint subsets of claims that unit propagation proves
    jointly unsatisfiable at the node (``_up_extra``); and clauses
    learned from conflicts (``_learn``), which let propagation recognise
    dead ends instead of rediscovering them subtree by subtree.
    """

    def __init__(
        self,
        problem: GroundedProblem,
        extra_hard: Iterable[tuple[tuple[int, bool], ...]] = (),
        guide: Sequence[int] | None = None,
        learned: Iterable[tuple[tuple[int, bool], ...]] = (),
    ) -> None:
        self.problem = problem
        self.guide = guide
        self.n = len(problem.atoms)
        # clauses implied by the problem's own hard set are clean and may
        # be shared with sibling solves; per-solve constraints are tainted
        # and so is anything derived from them
        self.clauses = list(problem.hard)
        self.tainted = [False] * len(self.clauses)
        for lits in learned:
            self.clauses.append(tuple(lits))
            self.tainted.append(False)
        for lits in extra_hard:
            self.clauses.append(tuple(lits))
            self.tainted.append(True)
        self.occ_true: list[list[int]] = [[] for _ in range(self.n)]
        self.occ_false: list[list[int]] = [[] for _ in range(self.n)]
        for ci, clause in enumerate(self.clauses):
            for atom, value in clause:
                (self.occ_true if value else self.occ_false)[atom].append(ci)
        self.cost = [[0, 0] for _ in range(self.n)]
        for atom, value, weight, _ in problem.soft:
            # violating the claim costs its weight
            scaled = round(weight * _WEIGHT_SCALE)
            self.cost[atom][0 if value else 1] += scaled
        self.slack0 = sum(min(c[0], c[1]) for c in self.cost)

        def atom_key(i: int) -> tuple:
            atom = self.problem.atoms[i]
            if atom[0] == "anc":
                return (0, atom[1], atom[2], 0, ())
            return (1, atom[1], atom[2], len(atom[3]), tuple(sorted(atom[3])))

        self.anc_atoms = sorted(
            (i for i, a in enumerate(problem.atoms) if a[0] == "anc"),
            key=lambda i: problem.atoms[i][1:],
        )
        costly = [i for i in range(self.n) if max(self.cost[i]) > 0]
        costly.sort(key=lambda i: (-max(self.cost[i]), atom_key(i)))
        free_dsep = [
            i
            for i, a in enumerate(problem.atoms)
            if a[0] == "dsep" and max(self.cost[i]) == 0
        ]
        free_dsep.sort(key=atom_key)
        free_anc = [i for i in self.anc_atoms if max(self.cost[i]) == 0]
        self.order = costly + free_dsep + free_anc

        self.assign = [-1] * self.n
        self.n_free = [len(c) for c in self.clauses]
        self.n_sat = [0] * len(self.clauses)
        self.violated = 0
        self.slack = self.slack0
        self.trail: list[int] = []
        # conflict-driven learning state
        self.reason = [-1] * self.n
        self.tpos = [0] * self.n
        self.decision_marks: list[int] = []
        self.conflict_clause = -1
        self.clean_learned: list[tuple[tuple[int, bool], ...]] = []
        self._learned_seen: set[tuple[tuple[int, bool], ...]] = set()
        self.learn_cap = len(self.clauses) + 30_000
        # one-sided claims, heaviest first, for the propagation bound
        self.claim_list: list[tuple[int, bool, int]] = []
        for i in range(self.n):
            c0, c1 = self.cost[i]
            if min(c0, c1) == 0 and max(c0, c1) > 0:
                self.claim_list.append((i, c0 > 0, max(c0, c1)))
        self.claim_list.sort(key=lambda t: -t[2])
        self.claim_w = {atom: w for atom, _, w in self.claim_list}
        self.claim_weight_of = [0] * self.n
        for atom, _, w in self.claim_list:
            self.claim_weight_of[atom] = w
        # upper bound on what _up_extra could still collect here
        self.potential = sum(w for _, _, w in self.claim_list)
        self.n_costly = sum(1 for i in range(self.n) if max(self.cost[i]) > 0)
        # the propagation bound only pays for itself on searches that
        # thrash; easy ones finish on propagation and static pruning alone
        self.nodes = 0
        self.up_after = 300
        # snapshots of subsets found by bound computations, reusable at
        # descendant nodes until one of their members is assigned its
        # costly side (its weight would then be double-counted)
        self.claim_val = {atom: val for atom, val, _ in self.claim_list}
        self.up_stack: list[
            tuple[int, list[tuple[int, tuple[int, ...]]]]
        ] = []

    # -- assignment machinery ------------------------------------------

    def _set(self, atom: int, value: bool, reason: int = -1) -> list[int] | None:
        """Assign one atom; return newly unit clauses or None on conflict.

        Counter updates always run to completion so that a later
        ``_unset`` restores them exactly, even after a conflict.
        """
        cost = self.cost[atom]
        if value:
            self.assign[atom] = 1
            self.violated += cost[1]
            sat_list = self.occ_true[atom]
            unsat_list = self.occ_false[atom]
        else:
            self.assign[atom] = 0
            self.violated += cost[0]
            sat_list = self.occ_false[atom]
            unsat_list = self.occ_true[atom]
        self.reason[atom] = reason
        self.tpos[atom] = len(self.trail)
        self.trail.append(atom)
        self.slack -= cost[0] if cost[0] < cost[1] else cost[1]
        self.potential -= self.claim_weight_of[atom]
        n_sat = self.n_sat
        n_free = self.n_free
        for ci in sat_list:
            n_sat[ci] += 1
        units: list[int] = []
        conflict = False
        for ci in unsat_list:
            left = n_free[ci] - 1
            n_free[ci] = left
            if n_sat[ci] == 0:
                if left == 0:
                    if not conflict:
                        conflict = True
                        self.conflict_clause = ci
                elif left == 1:
                    units.append(ci)
        return None if conflict else units

    def _unset(self, atom: int) -> None:
        value = self.assign[atom] == 1
        self.assign[atom] = -1
        cost = self.cost[atom]
        self.violated -= cost[1] if value else cost[0]
        self.slack += cost[0] if cost[0] < cost[1] else cost[1]
        self.potential += self.claim_weight_of[atom]
        if value:
            sat_list = self.occ_true[atom]
            unsat_list = self.occ_false[atom]
        else:
            sat_list = self.occ_false[atom]
            unsat_list = self.occ_true[atom]
        n_sat = self.n_sat
        n_free = self.n_free
        for ci in sat_list:
            n_sat[ci] -= 1
        for ci in unsat_list:
            n_free[ci] += 1

    def _undo_to(self, mark: int) -> None:
        while len(self.trail) > mark:
            self._unset(self.trail.pop())
        while self.decision_marks and self.decision_marks[-1] >= mark:
            self.decision_marks.pop()
        while self.up_stack and self.up_stack[-1][0] > mark:
            self.up_stack.pop()

    def _assign_propagate(
        self, atom: int, value: bool, reason: int = -1, decision: bool = False
    ) -> bool:
        """Assign and run unit propagation; True on success.

        A failure first records a conflict clause (see ``_learn``) so the
        contradiction is recognised by propagation instead of being
        rediscovered across sibling subtrees.
        """
        if decision:
            self.decision_marks.append(len(self.trail))
        queue = self._set(atom, value, reason)
        if queue is None:
            self._learn()
            return False
        while queue:
            ci = queue.pop()
            if self.n_sat[ci] > 0 or self.n_free[ci] != 1:
                continue
            unit_atom = unit_value = None
            for a, v in self.clauses[ci]:
                if self.assign[a] == -1:
                    unit_atom, unit_value = a, v
                    break
            if unit_atom is None:
                continue
            more = self._set(unit_atom, unit_value, ci)
            if more is None:
                self._learn()
                return False
            queue.extend(more)
        return True

    def _learn(self) -> None:
        """Record the first-unique-implication-point clause of a conflict.

        Resolving the conflicting clause backwards along propagation
        reasons until a single literal of the current decision level
        remains yields a clause implied by the clauses it was derived
        from; it is added to the database so unit propagation recognises
        the same dead end elsewhere in the tree. Clauses derived without
        touching per-solve constraints are collected for reuse by sibling
        solves over the same grounded problem.
        """
        if not self.decision_marks or len(self.clauses) >= self.learn_cap:
            return
        level_start = self.decision_marks[-1]
        pos = {a: i for i, a in enumerate(self.trail)}
        pending: set[int] = set()
        lower: dict[int, bool] = {}
        taint = self.tainted[self.conflict_clause]

        def absorb(a: int, v: bool) -> None:
            if pos[a] >= level_start:
                pending.add(a)
            else:
                lower[a] = v

        for a, v in self.clauses[self.conflict_clause]:
            absorb(a, v)
        learned: list[tuple[int, bool]] | None = None
        for i in range(len(self.trail) - 1, level_start - 1, -1):
            a = self.trail[i]
            if a not in pending:
                continue
            pending.discard(a)
            if not pending:
                flipped = self.assign[a] == 0
                learned = [(a, flipped)] + sorted(lower.items())
                break
            r = self.reason[a]
            if r < 0:
                return
            taint = taint or self.tainted[r]
            for b, v in self.clauses[r]:
                if b != a:
                    absorb(b, v)
        if learned is None:
            return
        clause = tuple(learned)
        if clause in self._learned_seen:
            return
        self._learned_seen.add(clause)
        ci = len(self.clauses)
        self.clauses.append(clause)
        self.tainted.append(taint)
        n_sat = 0
        n_free = 0
        for a, v in clause:
            (self.occ_true if v else self.occ_false)[a].append(ci)
            s = self.assign[a]
            if s == -1:
                n_free += 1
            elif s == (1 if v else 0):
                n_sat += 1
        self.n_sat.append(n_sat)
        self.n_free.append(n_free)
        if not taint:
            self.clean_learned.append(clause)

    def _claim_cone(self, mark0: int, seeds: Iterable[int]) -> set[int]:
        """Simulated-claim decisions in the reason ancestry of ``seeds``."""
        cone: set[int] = set()
        seen: set[int] = set()
        stack = list(seeds)
        while stack:
            a = stack.pop()
            if a in seen:
                continue
            seen.add(a)
            if self.assign[a] == -1 or self.tpos[a] < mark0:
                continue
            r = self.reason[a]
            if r < 0:
                cone.add(a)
            else:
                for b, _ in self.clauses[r]:
                    if b != a:
                        stack.append(b)
        return cone

    def _up_extra(self, need: int) -> int:
        """Admissible bound addition from jointly-unsatisfiable claims.

        Asserting the still-open claims one by one (heaviest first) under
        the current assignment and propagating exposes subsets of claims
        that cannot all hold here: every completion violates at least one
        claim per subset, paying no less than the subset's lightest
        weight. Each conflict's subset is read off the propagation
        reasons and consumed; the trail is unwound only past the
        subset's earliest claim, and the unconsumed claims that fell
        with it are re-queued. Consumed claims are all unwound and never
        re-asserted, so the counted subsets are pairwise disjoint and
        the weights add. Stops once ``need`` is reached.

        Subsets inherited from the nearest ancestor computation are kept
        without re-deriving them — a contradiction survives extra
        assignments — unless a member was assigned its costly side
        (already counted in the violated total); the scan then only has
        to top the bound up from the remaining claims.
        """
        mark0 = len(self.trail)
        assign = self.assign
        tpos = self.tpos
        claim_w = self.claim_w
        claim_val = self.claim_val
        consumed: set[int] = set()
        asserted: list[tuple[int, bool]] = []
        subsets: list[tuple[int, tuple[int, ...]]] = []
        extra = 0
        if self.up_stack:
            for gain, atoms in self.up_stack[-1][1]:
                for a in atoms:
                    if assign[a] == (0 if claim_val[a] else 1):
                        break
                else:
                    subsets.append((gain, atoms))
                    consumed.update(atoms)
                    extra += gain
        # every future subset pays only its lightest member, so claims
        # still in play bound the collectable remainder from above
        avail = self.potential
        for a in consumed:
            if assign[a] == -1:
                avail -= claim_w[a]
        work = [(atom, val) for atom, val, _ in self.claim_list]
        wi = 0
        while wi < len(work) and extra < need and extra + avail >= need:
            atom, val = work[wi]
            wi += 1
            if atom in consumed:
                continue
            s = assign[atom]
            if s != -1:
                if tpos[atom] < mark0:
                    continue
                if s == (1 if val else 0):
                    # holds only through other claims' implications; track
                    # it so an unwind past its implier re-queues it
                    asserted.append((atom, val))
                    continue
                # forced against its claim by other claims' implications
                cone = self._claim_cone(mark0, (atom,))
            elif self._assign_propagate(atom, val, decision=True):
                asserted.append((atom, val))
                continue
            else:
                cone = self._claim_cone(
                    mark0,
                    [b for b, _ in self.clauses[self.conflict_clause]],
                )
            cone.add(atom)
            gain = min(claim_w[a] for a in cone)
            subsets.append((gain, tuple(cone)))
            extra += gain
            avail -= sum(claim_w[a] for a in cone)
            consumed |= cone
            self._undo_to(min(tpos[a] for a in cone))
            replay: list[tuple[int, bool]] = []
            kept: list[tuple[int, bool]] = []
            for pair in asserted:
                if assign[pair[0]] == -1:
                    if pair[0] not in consumed:
                        replay.append(pair)
                else:
                    kept.append(pair)
            asserted = kept
            work[wi:wi] = replay
        self._undo_to(mark0)
        self.up_stack.append((mark0, subsets))
        return extra

    def _up_cached(self, need: int) -> bool:
        """True if subsets from an ancestor's bound still cover ``need``.

        Each remembered subset stays contradictory under the extended
        assignment; it keeps paying its weight unless some member was
        meanwhile assigned its costly side, which moved that weight into
        the violated total.
        """
        if not self.up_stack:
            return False
        assign = self.assign
        claim_val = self.claim_val
        total = 0
        for gain, atoms in self.up_stack[-1][1]:
            for a in atoms:
                if assign[a] == (0 if claim_val[a] else 1):
                    break
            else:
                total += gain
                if total >= need:
                    return True
        return False

    def _propagate_roots(self) -> bool:
        """Propagate initially-unit clauses; True on success."""
        for ci, clause in enumerate(self.clauses):
            if self.n_sat[ci] > 0 or self.n_free[ci] != 1:
                continue
            for a, v in clause:
                if self.assign[a] == -1:
                    if not self._assign_propagate(a, v, ci):
                        return False
                    break
            if self.n_sat[ci] == 0 and self.n_free[ci] == 0:
                return False
        return True

    def _next_unassigned(self, pos: int) -> int:
        while pos < self.n and self.assign[self.order[pos]] != -1:
            pos += 1
        return pos

    def _value_order(self, atom: int) -> tuple[bool, bool]:
        if self.guide is not None and self.guide[atom] != -1:
            first = self.guide[atom] == 1
            return (first, not first)
        if self.problem.atoms[atom][0] == "anc":
            return (False, True)
        c0, c1 = self.cost[atom]
        # try the cheaper side first; ties pick False
        return (False, True) if c0 <= c1 else (True, False)

    # -- search modes ---------------------------------------------------

    def minimum(self, initial_best: float = math.inf) -> float:
        """Exact minimal loss, or infinity if no assignment exists.

        ``initial_best`` may carry the loss of an assignment already
        known to satisfy this solve's constraints; the search then only
        looks for strictly better ones, and the returned minimum is
        exact either way. ``best_assign`` holds the best full assignment
        the search itself visited, if any.
        """
        self.best_assign: list[int] | None = None
        if not self._propagate_roots():
            return math.inf
        best = initial_best
        if best < math.inf:
            # a known assignment attains ``best``; if the root bound
            # already reaches it, the constrained minimum is settled
            need = best - self.violated - self.slack
            if need <= 0:
                return best
            if need <= self.potential and self._up_extra(need) >= need:
                self._undo_to(0)
                return best

        def walk(pos: int) -> None:
            nonlocal best
            if self.violated + self.slack >= best:
                return
            pos = self._next_unassigned(pos)
            if pos == self.n:
                best = self.violated
                self.best_assign = list(self.assign)
                return
            self.nodes += 1
            if (
                best < math.inf
                and pos < self.n_costly
                and self.nodes > self.up_after
            ):
                need = best - self.violated - self.slack
                if need <= self.potential and (
                    self._up_cached(need) or self._up_extra(need) >= need
                ):
                    return
            atom = self.order[pos]
            for value in self._value_order(atom):
                mark = len(self.trail)
                if self._assign_propagate(atom, value, decision=True):
                    walk(pos + 1)
                self._undo_to(mark)

        walk(0)
        self._undo_to(0)
        return best

    def any_leaf(self, target: int) -> list[int]:
        """First full assignment whose loss equals ``target`` exactly."""
        if not self._propagate_roots():
            raise InfeasibleProblemError("hard clauses are unsatisfiable")
        result: list[int] | None = None

        def walk(pos: int) -> bool:
            nonlocal result
            if self.violated + self.slack > target:
                return False
            pos = self._next_unassigned(pos)
            if pos == self.n:
                if self.violated == target:
                    result = list(self.assign)
                    return True
                return False
            self.nodes += 1
            if pos < self.n_costly and self.nodes > self.up_after:
                need = target - self.violated - self.slack + 1
                if need <= self.potential and (
                    self._up_cached(need) or self._up_extra(need) >= need
                ):
                    return False
            atom = self.order[pos]
            for value in self._value_order(atom):
                mark = len(self.trail)
                if self._assign_propagate(atom, value, decision=True) and walk(
                    pos + 1
                ):
                    return True
                self._undo_to(mark)
            return False

        found = walk(0)
        self._undo_to(0)
        if not found or result is None:
            raise InfeasibleProblemError(
                "no assignment attains the computed optimum"
            )
        return result

    def optimal_structures(self, target: int) -> list[tuple[int, ...]]:
        """All ancestry-atom projections of optimal assignments."""
        if not self._propagate_roots():
            raise InfeasibleProblemError("hard clauses are unsatisfiable")
        n_anc = len(self.anc_atoms)
        found: set[tuple[int, ...]] = set()

        def complete_min(ceiling: int) -> float:
            best = math.inf

            def walk(pos: int) -> None:
                nonlocal best
                bound = self.violated + self.slack
                if bound >= best or bound > ceiling:
                    return
                p = self._next_unassigned(pos)
                if p == self.n:
                    best = self.violated
                    return
                self.nodes += 1
                if p < self.n_costly and self.nodes > self.up_after:
                    limit = ceiling + 1 if math.isinf(best) else min(
                        ceiling + 1, best
                    )
                    need = limit - self.violated - self.slack
                    if need <= self.potential and (
                        self._up_cached(need) or self._up_extra(need) >= need
                    ):
                        return
                atom = self.order[p]
                for value in self._value_order(atom):
                    mark = len(self.trail)
                    if self._assign_propagate(atom, value, decision=True):
                        walk(p + 1)
                    self._undo_to(mark)

            walk(0)
            return best

        def walk_anc(pos: int) -> None:
            if self.violated + self.slack > target:
                return
            self.nodes += 1
            if self.nodes > self.up_after:
                need = target - self.violated - self.slack + 1
                if need <= self.potential and (
                    self._up_cached(need) or self._up_extra(need) >= need
                ):
                    return
            while pos < n_anc and self.assign[self.anc_atoms[pos]] != -1:
                pos += 1
            if pos == n_anc:
                if complete_min(target) <= target:
                    found.add(
                        tuple(self.assign[a] for a in self.anc_atoms)
                    )
                return
            atom = self.anc_atoms[pos]
            for value in (False, True):
                mark = len(self.trail)
                if self._assign_propagate(atom, value, decision=True):
                    walk_anc(pos + 1)
                self._undo_to(mark)

        walk_anc(0)
        self._undo_to(0)
        return sorted(found)


def _structure_from_assignment(
    problem: GroundedProblem, assign: Sequence[int]
) -> AncestralStructure:
    pairs = [
        (atom[1], atom[2])
        for i, atom in enumerate(problem.atoms)
        if atom[0] == "anc" and assign[i] == 1
    ]
    return AncestralStructure(problem.scope, pairs)


def _unsat_core(problem: GroundedProblem) -> tuple[str, ...]:
    """A prefix of hard clauses that is already unsatisfiable."""
    clauses = list(zip(problem.hard, problem.hard_origins))
    if len(clauses) > 400:
        return tuple(sorted(set(problem.hard_origins)))

    def unsat(k: int) -> bool:
        sub = _Searcher(
            _replace_hard(problem, [c for c, _ in clauses[:k]])
        )
        return math.isinf(sub.minimum())

    lo, hi = 1, len(clauses)
    while lo < hi:
        mid = (lo + hi) // 2
        if unsat(mid):
            hi = mid
        else:
            lo = mid + 1
    described = [
        f"{origin}: {_show_clause(problem, clause)}"
        for clause, origin in clauses[max(0, lo - 5) : lo]
    ]
    return tuple(described)


def _replace_hard(problem: GroundedProblem, hard) -> GroundedProblem:
    return GroundedProblem(
        variables=problem.variables,
        regime_id=problem.regime_id,
        intervention_ids=problem.intervention_ids,
        max_order=problem.max_order,
        atoms=problem.atoms,
        atom_index=problem.atom_index,
        hard=tuple(hard),
        hard_origins=tuple("?" for _ in hard),
        soft=(),
        statements=(),
    )


def _show_clause(problem: GroundedProblem, clause) -> str:
    parts = []
    names = {v.id: v.name for v in problem.variables}

    def show_atom(atom):
        if atom[0] == "anc":
            return f"{names[atom[1]]}~>{names[atom[2]]}"
        cond = ",".join(names[v] for v in sorted(atom[3]))
        return f"sep({names[atom[1]]},{names[atom[2]]}|{cond})"

    for idx, value in clause:
        atom = problem.atoms[idx]
        parts.append(("" if value else "not ") + show_atom(atom))
    return " or ".join(parts)


class _LearnedPool:
    """Deduplicated clauses learned from one grounded problem's hard set.

    Such clauses are implied by the problem itself, so every solve over
    the same problem may start from them regardless of its per-solve
    constraints.
    """

    def __init__(self, cap: int = 40_000) -> None:
        self.clauses: list[tuple[tuple[int, bool], ...]] = []
        self._seen: set[tuple[tuple[int, bool], ...]] = set()
        self.cap = cap

    def absorb(self, searcher: _Searcher) -> None:
        for clause in searcher.clean_learned:
            if len(self.clauses) >= self.cap:
                return
            if clause not in self._seen:
                self._seen.add(clause)
                self.clauses.append(clause)


def minimize_loss(
    problem: GroundedProblem,
    count_optima: bool = False,
    variable_limit: int = _DEFAULT_VARIABLE_LIMIT,
) -> Solution:
    """Exact minimization of violated-input weight over all assignments.

    Returns the optimum with the lexicographically least ancestral
    structure. With ``count_optima`` the distinct optimal structures are
    enumerated as well.

    Raises
    ------
    InfeasibleProblemError
        If the hard clauses are unsatisfiable (naming a conflicting
        clause subset).
    GroundingError
        If the problem exceeds the exact-search variable limit.
    """
    if len(problem.scope) > variable_limit:
        raise GroundingError(
            f"{len(problem.scope)} variables exceed the exact-search "
            f"limit of {variable_limit}"
        )
    pool = _LearnedPool()
    first = _Searcher(problem)
    target = first.minimum()
    pool.absorb(first)
    if math.isinf(target):
        raise InfeasibleProblemError(
            "hard clauses are unsatisfiable", core=_unsat_core(problem)
        )
    finder = _Searcher(problem, learned=pool.clauses)
    guide = finder.any_leaf(target)
    pool.absorb(finder)
    # every cache entry is a full assignment satisfying the hard clauses,
    # paired with its exact loss; any entry matching a solve's forced
    # atoms bounds that solve from above
    cache: list[tuple[float, list[int]]] = [(target, guide)]
    # fix the lexicographically least optimal structure by deciding each
    # ancestry atom in order, keeping False whenever some optimum allows it
    forced: list[tuple[tuple[int, bool], ...]] = []
    anc_indices = sorted(
        (i for i, a in enumerate(problem.atoms) if a[0] == "anc"),
        key=lambda i: problem.atoms[i][1:],
    )

    def matches_forced(assign: list[int]) -> bool:
        return all(assign[j] == (1 if v else 0) for ((j, v),) in forced)

    for idx in anc_indices:
        if guide[idx] == 0:
            forced.append(((idx, False),))
            continue
        hit = next(
            (
                assign
                for loss, assign in cache
                if loss == target and assign[idx] == 0 and matches_forced(assign)
            ),
            None,
        )
        if hit is not None:
            forced.append(((idx, False),))
            guide = hit
            continue
        seed = min(
            (
                loss
                for loss, assign in cache
                if assign[idx] == 0 and matches_forced(assign)
            ),
            default=math.inf,
        )
        trial = _Searcher(
            problem, forced + [((idx, False),)], guide, learned=pool.clauses
        )
        loss = trial.minimum(initial_best=seed)
        pool.absorb(trial)
        if trial.best_assign is not None:
            cache.append((loss, trial.best_assign))
        value = loss != target
        forced.append(((idx, value),))
        if not value:
            guide = trial.best_assign
    assign = guide
    structure = _structure_from_assignment(problem, assign)
    dsep_assignment = {
        (atom[1], atom[2], atom[3]): assign[i] == 1
        for i, atom in enumerate(problem.atoms)
        if atom[0] == "dsep"
    }
    count = optima = None
    if count_optima:
        counter = _Searcher(problem, learned=pool.clauses)
        projections = counter.optimal_structures(target)
        anc_atoms = sorted(
            (a for a in problem.atoms if a[0] == "anc"),
            key=lambda atom: atom[1:],
        )
        structures = []
        for proj in projections:
            pairs = [
                (atom[1], atom[2])
                for atom, bit in zip(anc_atoms, proj)
                if bit == 1
            ]
            structures.append(AncestralStructure(problem.scope, pairs))
        structures.sort(key=lambda s: s.lex_key())
        count = len(structures)
        optima = tuple(structures)
    return Solution(
        structure, dsep_assignment, target / _WEIGHT_SCALE, count, optima
    )


def score_predictions(
    problem: GroundedProblem,
    pairs: Iterable[tuple[int, int]] | None = None,
    variable_limit: int = _DEFAULT_VARIABLE_LIMIT,
) -> list[ScoredPrediction]:
    """Score ancestral features by constrained-loss differences.

    For each ordered pair, the confidence in "X causes Y" is the minimal
    loss with the feature forced false minus the minimal loss with it
    forced true; the non-ancestral feature gets the negated confidence.
    One-sided infeasibility yields an infinite confidence.

    Raises
    ------
    ContradictionError
        If a feature is infeasible in both directions.
    """
    if len(problem.scope) > variable_limit:
        raise GroundingError(
            f"{len(problem.scope)} variables exceed the exact-search "
            f"limit of {variable_limit}"
        )
    if pairs is None:
        pairs = list(itertools.permutations(problem.scope, 2))
    pool = _LearnedPool()
    first = _Searcher(problem)
    base = first.minimum()
    pool.absorb(first)
    # full hard-satisfying assignments with exact losses; one matching a
    # solve's forced atom bounds that solve from above, and one matching
    # at the unconstrained optimum settles it outright
    cache: list[tuple[float, list[int]]] = []
    if math.isinf(base):
        guide = None
    else:
        finder = _Searcher(problem, learned=pool.clauses)
        guide = finder.any_leaf(base)
        pool.absorb(finder)
        cache.append((base, guide))

    def constrained_minimum(atom: int, value: bool) -> float:
        want = 1 if value else 0
        seed = math.inf
        for loss, assign in cache:
            if assign[atom] == want and loss < seed:
                seed = loss
        if seed == base:
            return base
        searcher = _Searcher(
            problem, [((atom, value),)], guide, learned=pool.clauses
        )
        loss = searcher.minimum(initial_best=seed)
        pool.absorb(searcher)
        if searcher.best_assign is not None:
            cache.append((loss, searcher.best_assign))
        return loss

    pairs = list(pairs)
    constrained: dict[tuple[int, int], float] = {}
    if guide is not None:
        # settle the cheap solves first: each finished solve caches an
        # optimal assignment that tightens the seeds of those remaining,
        # and a seed meeting the base loss settles its pair outright
        pending = [
            (x, y, problem.atom_index[("anc", x, y)]) for x, y in pairs
        ]
        while pending:
            scored = []
            for x, y, atom in pending:
                want = 0 if guide[atom] == 1 else 1
                seed = math.inf
                for loss, assign in cache:
                    if assign[atom] == want and loss < seed:
                        seed = loss
                if seed == base:
                    constrained[(x, y)] = base
                else:
                    scored.append((seed, x, y, atom))
            if not scored:
                break
            scored.sort(key=lambda t: t[0])
            seed, x, y, atom = scored[0]
            value = guide[atom] != 1
            searcher = _Searcher(
                problem, [((atom, value),)], guide, learned=pool.clauses
            )
            loss = searcher.minimum(initial_best=seed)
            pool.absorb(searcher)
            if searcher.best_assign is not None:
                cache.append((loss, searcher.best_assign))
            constrained[(x, y)] = loss
            pending = [(x, y, atom) for _, x, y, atom in scored[1:]]

    predictions = []
    for x, y in pairs:
        atom = problem.atom_index[("anc", x, y)]
        # the unconstrained optimum already settles the side it agrees with
        if guide is not None and guide[atom] == 1:
            loss_true = base
            loss_false = constrained[(x, y)]
        elif guide is not None:
            loss_false = base
            loss_true = constrained[(x, y)]
        else:
            loss_true = constrained_minimum(atom, True)
            loss_false = constrained_minimum(atom, False)
        if math.isinf(loss_true) and math.isinf(loss_false):
            raise ContradictionError(
                f"feature {x}~>{y} is infeasible both ways"
            )
        if math.isinf(loss_false):
            confidence = math.inf
        elif math.isinf(loss_true):
            confidence = -math.inf
        else:
            confidence = (loss_false - loss_true) / _WEIGHT_SCALE
        predictions.append(
            ScoredPrediction(x, y, FeatureKind.ANCESTRAL, confidence)
        )
        predictions.append(
            ScoredPrediction(x, y, FeatureKind.NONANCESTRAL, -confidence)
        )
    return predictions


def lcd_scan(
    dstmts: Iterable[DStatement],
    regime: int,
    scope: Iterable[int] | None = None,
) -> list[tuple[int, int]]:
    """Find causal pairs by the exogenous-trigger pattern.

    Reports (X, Y) whenever the statements contain a d-connection of the
    regime with X, a d-connection of X with Y, and a d-separation of the
    regime from Y given X alone. Missing statements never match.
    """
    connected: set[tuple[int, int]] = set()
    separated: set[tuple[int, int, frozenset[int]]] = set()
    seen_ids: set[int] = set()
    for stmt in dstmts:
        seen_ids |= {stmt.x, stmt.y} | stmt.w
        if stmt.kind is SeparationKind.D_CONNECTED and not stmt.w:
            connected.add((stmt.x, stmt.y))
            connected.add((stmt.y, stmt.x))
        elif stmt.kind is SeparationKind.D_SEPARATED:
            separated.add((stmt.x, stmt.y, stmt.w))
            separated.add((stmt.y, stmt.x, stmt.w))
    if scope is None:
        scope = seen_ids - {regime}
    findings = []
    for x, y in itertools.permutations(sorted(scope), 2):
        if regime in (x, y):
            continue
        if (
            (regime, x) in connected
            and (x, y) in connected
            and (regime, y, frozenset({x})) in separated
        ):
            findings.append((x, y))
    return findings


@dataclass(frozen=True)
class IcpResult:
    """Outcome of the invariant-set intersection.

    ``invariant_set`` is None exactly when no separating set exists, in
    which case the intersection is undefined rather than trivially full.
    """

    invariant_set: frozenset[int] | None
    n_separating_sets: int

    @property
    def found(self) -> bool:
        return self.invariant_set is not None


def icp_intersection(
    dstmts: Iterable[DStatement],
    regime: int,
    target: int,
    scope: Iterable[int] | None = None,
) -> IcpResult:
    """Intersect all sets that separate the regime from the target.

    Every d-separation statement between the regime and the target
    contributes its conditioning set; the result is their intersection.
    When no such statement exists the intersection is undefined and a
    distinguished empty result is returned instead of the full set.
    """
    if target == regime:
        raise ValueError("target must differ from the regime variable")
    scope_set = set(scope) if scope is not None else None
    sets = []
    for stmt in dstmts:
        if stmt.kind is not SeparationKind.D_SEPARATED:
            continue
        if {stmt.x, stmt.y} != {regime, target}:
            continue
        if scope_set is not None and not stmt.w <= scope_set:
            continue
        sets.append(stmt.w)
    if not sets:
        return IcpResult(None, 0)
    meet = frozenset.intersection(*sets)
    return IcpResult(meet, len(sets))


def refine_to_admg(
    structure: AncestralStructure,
    dstmts: Iterable[DStatement],
    context_ids: Iterable[int] = (),
    variables: Sequence[Variable] | None = None,
) -> "Admg":
    """Refine an ancestral structure into a directed mixed graph.

    Two variables are adjacent iff no statement separates them under any
    conditioning set. An adjacent pair with ancestry one way becomes a
    directed edge; with ancestry neither way it becomes a bidirected
    (confounded) edge — except that pairs touching a context variable
    are never confounded, so those bidirected edges are dropped.

    Raises
    ------
    RefinementError
        If the statements contradict each other on some pair and
        conditioning set.
    """
    from .graphs import Admg

    judged: dict[tuple[int, int, frozenset[int]], SeparationKind] = {}
    for stmt in dstmts:
        key = (stmt.x, stmt.y, stmt.w) if stmt.x < stmt.y else (
            stmt.y, stmt.x, stmt.w
        )
        if key in judged and judged[key] is not stmt.kind:
            raise RefinementError(
                f"contradictory statements for pair ({key[0]}, {key[1]}) "
                f"given {sorted(stmt.w)}"
            )
        judged[key] = stmt.kind
    separated_pairs = {
        (x, y)
        for (x, y, _), kind in judged.items()
        if kind is SeparationKind.D_SEPARATED
    }
    context = set(context_ids)
    ids = structure.ids
    directed = []
    bidirected = []
    for x, y in itertools.combinations(ids, 2):
        if (x, y) in separated_pairs:
            continue
        if structure.causes(x, y) and x != y:
            directed.append((x, y))
        elif structure.causes(y, x):
            directed.append((y, x))
        elif not {x, y} & context:
            bidirected.append(frozenset({x, y}))
    if variables is None:
        variables = [Variable(i, f"V{i}") for i in ids]
    else:
        variables = [v for v in variables if v.id in set(ids)]
    return Admg(tuple(variables), frozenset(directed), frozenset(bidirected))
