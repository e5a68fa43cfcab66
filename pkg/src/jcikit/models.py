"""Pooled structural causal models over observational and experimental data.

A pooled model couples three ingredients:

* an :class:`ExperimentalDesignMatrix` describing the regimes (datasets):
  the value every intervention variable takes in every regime, and the
  regime probabilities (proportional to dataset sizes);
* a typed :class:`~jcikit.graphs.CausalGraph` with one regime node, one
  node per intervention variable, and system/latent nodes;
* linear-Gaussian mechanisms for the system and latent variables, where
  intervention variables enter their targets' equations as additive shift
  terms (soft interventions -- no edges are removed).

The module also provides exact value-table validation and normalization
of design matrices, a reproducible random-model generator, pooled-data
sampling, population-level moments, and the oracle separation statements
implied by a model.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .graphs import (
    CausalGraph,
    DetRelationSet,
    Kind,
    Variable,
    enumerate_d_statements,
)
from .statements import DStatement

_PROB_TOL = 1e-12


class DesignError(ValueError):
    """Raised for malformed experimental design matrices."""


class ExperimentalDesignMatrix:
    """Regime-indexed values of the intervention variables.

    Parameters
    ----------
    intervention_values : array-like, shape (n_regimes, m)
        Row ``r`` holds the value of each intervention variable in
        regime ``r``; every intervention variable is a deterministic
        function of the regime by construction.
    regime_probs : array-like, shape (n_regimes,)
        Probability of each regime; nonnegative, summing to one.
    column_names : sequence of str, optional
        Names of the intervention variables; defaults to I1..Im.
    """

    def __init__(
        self,
        intervention_values,
        regime_probs,
        column_names: Sequence[str] | None = None,
    ) -> None:
        values = np.asarray(intervention_values, dtype=float)
        if values.ndim != 2:
            raise DesignError("intervention_values must be a 2-d matrix")
        if values.shape[0] == 0:
            raise DesignError("a design needs at least one regime")
        probs = np.asarray(regime_probs, dtype=float)
        if probs.shape != (values.shape[0],):
            raise DesignError("regime_probs length must match the regime count")
        if np.any(probs < 0):
            raise DesignError("regime probabilities must be nonnegative")
        if abs(probs.sum() - 1.0) > _PROB_TOL:
            raise DesignError("regime probabilities must sum to one")
        self.intervention_values = values
        self.regime_probs = probs
        if column_names is None:
            column_names = [f"I{k + 1}" for k in range(values.shape[1])]
        if len(column_names) != values.shape[1]:
            raise DesignError("column_names length must match the column count")
        self.column_names = list(column_names)

    @property
    def n_regimes(self) -> int:
        """Number of regimes (rows)."""
        return self.intervention_values.shape[0]

    @property
    def n_interventions(self) -> int:
        """Number of intervention variables (columns)."""
        return self.intervention_values.shape[1]

    @staticmethod
    def from_counts(
        intervention_values, counts, column_names: Sequence[str] | None = None
    ) -> "ExperimentalDesignMatrix":
        """Build a design with regime probabilities from dataset sizes."""
        counts = np.asarray(counts, dtype=float)
        if np.any(counts < 0) or counts.sum() <= 0:
            raise DesignError("dataset sizes must be nonnegative with positive sum")
        return ExperimentalDesignMatrix(
            intervention_values, counts / counts.sum(), column_names
        )

    @staticmethod
    def indicator(n_interventions: int) -> "ExperimentalDesignMatrix":
        """The indicator design: regime 0 observational, one per intervention.

        Regime ``k >= 1`` sets intervention variable ``k`` to one and all
        others to zero; regime probabilities are uniform.
        """
        n_regimes = n_interventions + 1
        values = np.zeros((n_regimes, n_interventions))
        for k in range(n_interventions):
            values[k + 1, k] = 1.0
        return ExperimentalDesignMatrix(values, np.full(n_regimes, 1.0 / n_regimes))

    def positive_rows(self) -> np.ndarray:
        """Indices of regimes with positive probability."""
        return np.flatnonzero(self.regime_probs > 0)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ExperimentalDesignMatrix):
            return NotImplemented
        return (
            self.column_names == other.column_names
            and np.array_equal(self.intervention_values, other.intervention_values)
            and np.array_equal(self.regime_probs, other.regime_probs)
        )

    def save_csv(self, path: str) -> None:
        """Write the design as CSV with a trailing probability column."""
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(self.column_names + ["p"])
            for row, prob in zip(self.intervention_values, self.regime_probs):
                writer.writerow(
                    [_format_number(v) for v in row] + [repr(float(prob))]
                )

    @staticmethod
    def load_csv(path: str) -> "ExperimentalDesignMatrix":
        """Read a design written by :meth:`save_csv`."""
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if not header or header[-1] != "p":
                raise DesignError("design CSV must end with a 'p' column")
            rows = [[float(v) for v in row] for row in reader if row]
        values = [row[:-1] for row in rows]
        probs = [row[-1] for row in rows]
        return ExperimentalDesignMatrix(values, probs, header[:-1])


def _format_number(v: float) -> str:
    if float(v).is_integer():
        return str(int(v))
    return repr(float(v))


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of the exact value-table analysis of a design matrix.

    Attributes
    ----------
    determined_columns : tuple of (int, frozenset)
        Pairs ``(column, determiners)`` where the column's values over
        positive-probability regimes are a function of a strict subset of
        the other columns (empty set = constant column, singleton =
        duplicate); only subset-minimal determiner sets are listed. Any
        entry makes the design invalid: the only deterministic relations
        allowed are the ones through the regime.
    independence_violations : tuple of (int, int, frozenset)
        Triples ``(i, j, conditioning)`` of intervention columns that are
        (conditionally) independent under the regime probabilities.
        Intervention variables must be pairwise dependent, also
        conditionally on any subset of the remaining ones, for the
        dependence structure of the pooled data to reflect the graph.
    interventions_determine_regime : bool
        Whether the positive-probability rows are pairwise distinct, so
        the intervention values jointly pin down the regime.
    """

    determined_columns: tuple[tuple[int, frozenset[int]], ...]
    independence_violations: tuple[tuple[int, int, frozenset[int]], ...]
    interventions_determine_regime: bool

    @property
    def ok(self) -> bool:
        """True when no deterministic or independence violations exist."""
        return not self.determined_columns and not self.independence_violations


def _column_determined(
    values: np.ndarray, column: int, determiners: Iterable[int]
) -> bool:
    """Whether rows agreeing on the determiner columns agree on ``column``."""
    determiners = sorted(determiners)
    seen: dict[tuple[float, ...], float] = {}
    for row in values:
        key = tuple(row[d] for d in determiners)
        if key in seen:
            if seen[key] != row[column]:
                return False
        else:
            seen[key] = row[column]
    return True


def _minimal_determiner_sets(
    values: np.ndarray, column: int, others: Sequence[int]
) -> list[frozenset[int]]:
    """Subset-minimal sets of other columns that determine ``column``."""
    minimal: list[frozenset[int]] = []
    for size in range(len(others) + 1):
        for subset in itertools.combinations(others, size):
            candidate = frozenset(subset)
            if any(found <= candidate for found in minimal):
                continue
            if _column_determined(values, column, candidate):
                minimal.append(candidate)
    return minimal


def _conditionally_independent(
    values: np.ndarray,
    probs: np.ndarray,
    i: int,
    j: int,
    conditioning: Iterable[int],
) -> bool:
    """Exact test of I_i independent of I_j given the conditioning columns.

    Independence requires the joint conditional distribution to factorize
    for every positive-probability value of the conditioning columns.
    """
    conditioning = sorted(conditioning)
    groups: dict[tuple[float, ...], list[int]] = {}
    for r in range(values.shape[0]):
        key = tuple(values[r, c] for c in conditioning)
        groups.setdefault(key, []).append(r)
    for rows in groups.values():
        total = probs[rows].sum()
        if total <= 0:
            continue
        joint: dict[tuple[float, float], float] = {}
        marg_i: dict[float, float] = {}
        marg_j: dict[float, float] = {}
        for r in rows:
            pr = probs[r] / total
            vi, vj = values[r, i], values[r, j]
            joint[(vi, vj)] = joint.get((vi, vj), 0.0) + pr
            marg_i[vi] = marg_i.get(vi, 0.0) + pr
            marg_j[vj] = marg_j.get(vj, 0.0) + pr
        for vi in marg_i:
            for vj in marg_j:
                expected = marg_i[vi] * marg_j[vj]
                if abs(joint.get((vi, vj), 0.0) - expected) > 1e-12:
                    return False
    return True


def validate_design(design: ExperimentalDesignMatrix) -> ValidationReport:
    """Check a design for forbidden determinism and independence patterns.

    Only regimes with positive probability enter the analysis. See
    :class:`ValidationReport` for the meaning of each flag.
    """
    positive = design.positive_rows()
    values = design.intervention_values[positive]
    probs = design.regime_probs[positive]
    m = design.n_interventions

    determined: list[tuple[int, frozenset[int]]] = []
    for column in range(m):
        others = [c for c in range(m) if c != column]
        for subset in _minimal_determiner_sets(values, column, others):
            determined.append((column, subset))

    violations: list[tuple[int, int, frozenset[int]]] = []
    for i, j in itertools.combinations(range(m), 2):
        rest = [c for c in range(m) if c != i and c != j]
        for size in range(len(rest) + 1):
            for conditioning in itertools.combinations(rest, size):
                if _conditionally_independent(
                    values, probs, i, j, conditioning
                ):
                    violations.append((i, j, frozenset(conditioning)))

    distinct_rows = len({tuple(row) for row in values}) == len(values)
    return ValidationReport(
        tuple(determined), tuple(violations), distinct_rows
    )


def normalize_design(
    design: ExperimentalDesignMatrix,
) -> tuple[ExperimentalDesignMatrix, list[tuple[str, list[str]]]]:
    """Merge determined columns until no forbidden determinism remains.

    Constant columns are dropped. Whenever some column is a function of a
    set of other columns, the whole group is replaced by one multi-valued
    column whose values index the distinct joint tuples in order of first
    appearance. Returns the normalized design and a mapping from each
    output column name to the original column names it absorbed.

    An already-normalized design is returned unchanged (with an identity
    mapping).
    """
    values = design.intervention_values.copy()
    names = list(design.column_names)
    origins: list[list[str]] = [[n] for n in names]
    positive = design.positive_rows()

    while True:
        m = values.shape[1]
        # Drop constant columns first.
        constant = [
            c
            for c in range(m)
            if np.all(values[positive, c] == values[positive[0], c])
        ] if len(positive) else []
        if constant:
            keep = [c for c in range(m) if c not in constant]
            values = values[:, keep]
            names = [names[c] for c in keep]
            origins = [origins[c] for c in keep]
            continue

        merge_group: frozenset[int] | None = None
        for size in range(1, m):
            for column in range(m):
                others = [c for c in range(m) if c != column]
                for subset in itertools.combinations(others, size):
                    if _column_determined(values[positive], column, subset):
                        merge_group = frozenset(subset) | {column}
                        break
                if merge_group:
                    break
            if merge_group:
                break
        if merge_group is None:
            break

        group = sorted(merge_group)
        codes: dict[tuple[float, ...], int] = {}
        merged = np.zeros(values.shape[0])
        for r in range(values.shape[0]):
            key = tuple(values[r, c] for c in group)
            if key not in codes:
                codes[key] = len(codes)
            merged[r] = codes[key]
        keep = [c for c in range(values.shape[1]) if c not in merge_group]
        new_origin = [orig for c in group for orig in origins[c]]
        insert_at = sum(1 for c in keep if c < group[0])
        kept_values = values[:, keep]
        values = np.insert(kept_values, insert_at, merged, axis=1)
        kept_names = [names[c] for c in keep]
        kept_origins = [origins[c] for c in keep]
        names = (
            kept_names[:insert_at]
            + ["+".join(new_origin)]
            + kept_names[insert_at:]
        )
        origins = (
            kept_origins[:insert_at] + [new_origin] + kept_origins[insert_at:]
        )

    normalized = ExperimentalDesignMatrix(values, design.regime_probs, names)
    mapping = [(name, orig) for name, orig in zip(names, origins)]
    return normalized, mapping


def design_det_relations(
    design: ExperimentalDesignMatrix,
    regime_id: int,
    intervention_ids: Sequence[int],
) -> DetRelationSet:
    """The deterministic relations a design induces among the dummy nodes.

    Every intervention variable is a function of the regime. When the
    positive-probability rows are pairwise distinct, the intervention
    variables jointly determine the regime as well; with zero intervention
    variables and a single regime this degenerates to the regime being a
    constant.
    """
    relations: list[tuple[Iterable[int], int]] = [
        ((regime_id,), i) for i in intervention_ids
    ]
    if validate_design(design).interventions_determine_regime:
        relations.append((tuple(intervention_ids), regime_id))
    return DetRelationSet(relations)


@dataclass(frozen=True)
class LinearMechanism:
    """The linear structural equation of one system or latent variable.

    ``coefficients`` maps each graph parent (system, latent, or
    intervention) to its coefficient; the exogenous term is Gaussian with
    the given variance.
    """

    target: int
    coefficients: Mapping[int, float]
    noise_var: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "coefficients", dict(self.coefficients))
        if self.noise_var < 0:
            raise ValueError("noise variance must be nonnegative")


@dataclass(frozen=True)
class GeneratorConfig:
    """Tunable knobs of the random-model generator.

    Coefficient and shift magnitudes are drawn uniformly from the given
    ranges with random signs; noise variances are drawn uniformly.
    """

    edge_prob: float = 0.5
    coeff_range: tuple[float, float] = (0.5, 1.5)
    shift_range: tuple[float, float] = (0.5, 2.0)
    noise_var_range: tuple[float, float] = (0.5, 1.5)
    targets_per_intervention: int = 1


class JciScm:
    """A linear-Gaussian structural model over pooled regimes.

    Parameters
    ----------
    graph : CausalGraph
        Typed graph containing one regime node, the intervention nodes,
        and system/latent nodes; must satisfy the pooled shape (regime ->
        interventions -> system).
    design : ExperimentalDesignMatrix
        One column per intervention node, in the order given by
        ``intervention_ids``.
    mechanisms : mapping of int to LinearMechanism
        One mechanism per system and latent node; parents must match the
        graph exactly. Regime and intervention nodes have no mechanism —
        their values come from the design matrix.
    """

    def __init__(
        self,
        graph: CausalGraph,
        design: ExperimentalDesignMatrix,
        mechanisms: Mapping[int, LinearMechanism],
    ) -> None:
        self.graph = graph
        self.design = design
        self.mechanisms = dict(mechanisms)

        regimes = graph.ids_of_kind(Kind.REGIME)
        if len(regimes) != 1:
            raise ValueError("the model graph needs exactly one regime node")
        self.regime_id = regimes[0]
        self.intervention_ids = graph.ids_of_kind(Kind.INTERVENTION)
        self.system_ids = graph.ids_of_kind(Kind.SYSTEM)
        self.latent_ids = graph.ids_of_kind(Kind.LATENT)
        if len(self.intervention_ids) != design.n_interventions:
            raise ValueError(
                "design columns must match the intervention nodes one to one"
            )
        expected = set(self.system_ids) | set(self.latent_ids)
        if set(self.mechanisms) != expected:
            raise ValueError(
                "mechanisms must cover exactly the system and latent nodes"
            )
        for node, mech in self.mechanisms.items():
            if mech.target != node:
                raise ValueError(f"mechanism for {node} targets {mech.target}")
            if set(mech.coefficients) != set(graph.parents(node)):
                raise ValueError(
                    f"mechanism parents of node {node} must match graph edges"
                )

    # -- structural views -------------------------------------------------

    @property
    def observed_ids(self) -> tuple[int, ...]:
        """Ids of the pooled-data columns: regime, interventions, system."""
        return (self.regime_id,) + self.intervention_ids + self.system_ids

    @property
    def column_names(self) -> list[str]:
        """Names of the pooled-data columns."""
        names = self.graph.names
        return [names[i] for i in self.observed_ids]

    def det_relations(self) -> DetRelationSet:
        """Deterministic relations among the dummy variables."""
        return design_det_relations(
            self.design, self.regime_id, self.intervention_ids
        )

    def _mechanism_nodes(self) -> list[int]:
        """System and latent nodes in topological order."""
        inner = set(self.system_ids) | set(self.latent_ids)
        return [v for v in self.graph.topological_order() if v in inner]

    def _linear_system(self) -> tuple[list[int], np.ndarray, np.ndarray, np.ndarray]:
        """Matrices (nodes, B, C, noise_vars) of the mechanism equations.

        ``B[j, k]`` is the coefficient of mechanism node ``k`` in the
        equation of mechanism node ``j``; ``C[j, i]`` the coefficient of
        intervention column ``i``.
        """
        nodes = self._mechanism_nodes()
        index = {node: j for j, node in enumerate(nodes)}
        icol = {node: i for i, node in enumerate(self.intervention_ids)}
        n = len(nodes)
        b = np.zeros((n, n))
        c = np.zeros((n, self.design.n_interventions))
        noise = np.zeros(n)
        for node in nodes:
            mech = self.mechanisms[node]
            noise[index[node]] = mech.noise_var
            for parent, coeff in mech.coefficients.items():
                if parent in index:
                    b[index[node], index[parent]] = coeff
                else:
                    c[index[node], icol[parent]] = coeff
        return nodes, b, c, noise

    # -- population moments -----------------------------------------------

    def regime_means(self) -> np.ndarray:
        """Per-regime means of the pooled columns, shape (n_regimes, cols).

        The regime column's mean is the regime index itself and the
        intervention columns' means are the design values; both are exact
        (the columns are deterministic within a regime).
        """
        nodes, b, c, _ = self._linear_system()
        identity = np.eye(len(nodes))
        means = []
        for r in range(self.design.n_regimes):
            iv = self.design.intervention_values[r]
            mech_means = np.linalg.solve(identity - b, c @ iv)
            by_node = dict(zip(nodes, mech_means))
            row = [float(r)]
            row.extend(iv)
            row.extend(by_node[s] for s in self.system_ids)
            means.append(row)
        return np.array(means)

    def within_regime_cov(self) -> np.ndarray:
        """Covariance of the pooled columns within any single regime.

        Identical across regimes: interventions shift means only. The
        regime and intervention columns are constant within a regime, so
        their rows and columns are zero.
        """
        nodes, b, _, noise = self._linear_system()
        identity = np.eye(len(nodes))
        a = np.linalg.solve(identity - b, identity)
        full = a @ np.diag(noise) @ a.T
        index = {node: j for j, node in enumerate(nodes)}
        cols = self.observed_ids
        out = np.zeros((len(cols), len(cols)))
        for i, ci in enumerate(cols):
            for j, cj in enumerate(cols):
                if ci in index and cj in index:
                    out[i, j] = full[index[ci], index[cj]]
        return out

    def pooled_moments(self) -> tuple[np.ndarray, np.ndarray]:
        """Mean vector and covariance matrix of the pooled columns."""
        probs = self.design.regime_probs
        means = self.regime_means()
        mean = probs @ means
        centered = means - mean
        between = (centered.T * probs) @ centered
        return mean, self.within_regime_cov() + between


def population_partial_correlation(
    model: JciScm,
    x: int,
    y: int,
    w: Iterable[int],
    regime: int | None = None,
) -> float:
    """Exact partial correlation of two pooled columns given a set.

    Parameters
    ----------
    model : JciScm
        The model whose population moments are used.
    x, y : int
        Variable ids (pooled-column ids) of the endpoints.
    w : iterable of int
        Conditioning variable ids. When the regime variable appears here,
        it is expanded into one indicator column per regime, so that
        conditioning captures every function of the regime — partial
        correlation given the numeric regime label alone would not.
    regime : int, optional
        When given, moments of that single regime are used instead of the
        pooled mixture (only system columns vary within a regime).

    Returns
    -------
    float
        The partial correlation, or 0.0 when either endpoint has no
        residual variance left (the degenerate case).
    """
    w = sorted(set(w))
    cols = list(model.observed_ids)
    col_of = {c: i for i, c in enumerate(cols)}

    if regime is not None:
        cov = model.within_regime_cov()
        idx = [col_of[x], col_of[y]] + [col_of[v] for v in w]
        return _partial_correlation_from_cov(cov[np.ix_(idx, idx)])

    probs = model.design.regime_probs
    means = model.regime_means()
    within = model.within_regime_cov()

    # Column values per regime (deterministic part) for every requested
    # column; the regime variable expands to one indicator per regime.
    det_parts: list[np.ndarray] = []
    stoch_index: list[int | None] = []

    def add_column(col: int) -> None:
        det_parts.append(means[:, col_of[col]])
        stoch_index.append(col_of[col])

    add_column(x)
    add_column(y)
    for v in w:
        if v == model.regime_id:
            for r in range(model.design.n_regimes):
                det_parts.append((np.arange(model.design.n_regimes) == r) * 1.0)
                stoch_index.append(None)
        else:
            add_column(v)

    k = len(det_parts)
    det = np.array(det_parts)  # shape (k, n_regimes)
    det_mean = det @ probs
    centered = det - det_mean[:, None]
    cov = (centered * probs) @ centered.T
    for a in range(k):
        for b in range(k):
            if stoch_index[a] is not None and stoch_index[b] is not None:
                cov[a, b] += within[stoch_index[a], stoch_index[b]]
    return _partial_correlation_from_cov(cov)


def _partial_correlation_from_cov(cov: np.ndarray) -> float:
    """Partial correlation of the first two coordinates given the rest."""
    if cov.shape[0] < 2:
        raise ValueError("need at least two columns")
    head = cov[:2, :2]
    if cov.shape[0] > 2:
        cross = cov[:2, 2:]
        rest = cov[2:, 2:]
        head = head - cross @ np.linalg.pinv(rest) @ cross.T
    s00, s11, s01 = head[0, 0], head[1, 1], head[0, 1]
    if s00 <= 1e-12 or s11 <= 1e-12:
        return 0.0
    return float(s01 / math.sqrt(s00 * s11))


def random_jci_model(
    p: int,
    i: int,
    latent_count: int | None = None,
    seed: int = 0,
    params: GeneratorConfig | None = None,
) -> JciScm:
    """Generate a random pooled linear-Gaussian model.

    Parameters
    ----------
    p : int
        Number of observed system variables (at least 1).
    i : int
        Number of experimental regimes; the design has ``i + 1`` regimes
        (regime 0 is observational) and one binary indicator intervention
        variable per experimental regime.
    latent_count : int, optional
        Number of latent confounders, each an independent source with two
        distinct observed children; defaults to ``p // 2`` (0 when p < 2).
    seed : int
        Seed for full reproducibility.
    params : GeneratorConfig, optional
        Distributional knobs; see :class:`GeneratorConfig`.

    Returns
    -------
    JciScm
        Ids are assigned as regime 0, interventions 1..i, system
        i+1..i+p, latents last.
    """
    if p < 1 or i < 0:
        raise ValueError("need p >= 1 system variables and i >= 0 interventions")
    params = params or GeneratorConfig()
    if latent_count is None:
        latent_count = p // 2
    if p < 2:
        latent_count = 0
    rng = np.random.default_rng(seed)

    regime = Variable(0, "R", Kind.REGIME)
    interventions = [
        Variable(k + 1, f"I{k + 1}", Kind.INTERVENTION) for k in range(i)
    ]
    systems = [Variable(i + 1 + j, f"X{j + 1}", Kind.SYSTEM) for j in range(p)]
    latents = [
        Variable(i + p + 1 + h, f"L{h + 1}", Kind.LATENT)
        for h in range(latent_count)
    ]

    def draw_signed(low: float, high: float) -> float:
        magnitude = rng.uniform(low, high)
        sign = 1.0 if rng.random() < 0.5 else -1.0
        return sign * magnitude

    edges: list[tuple[int, int]] = [(0, v.id) for v in interventions]
    coeffs: dict[int, dict[int, float]] = {v.id: {} for v in systems + latents}

    order = [v.id for v in systems]
    rng.shuffle(order)
    for a, b in itertools.combinations(range(p), 2):
        if rng.random() < params.edge_prob:
            parent, child = order[a], order[b]
            edges.append((parent, child))
            coeffs[child][parent] = draw_signed(*params.coeff_range)

    for latent in latents:
        pair = rng.choice(p, size=2, replace=False)
        for j in pair:
            child = systems[j].id
            edges.append((latent.id, child))
            coeffs[child][latent.id] = draw_signed(*params.coeff_range)

    n_targets = min(params.targets_per_intervention, p)
    for v in interventions:
        picked = rng.choice(p, size=n_targets, replace=False)
        for j in picked:
            child = systems[j].id
            edges.append((v.id, child))
            coeffs[child][v.id] = draw_signed(*params.shift_range)

    mechanisms = {}
    for v in systems + latents:
        noise_var = rng.uniform(*params.noise_var_range)
        mechanisms[v.id] = LinearMechanism(v.id, coeffs[v.id], noise_var)

    graph = CausalGraph(
        [regime] + interventions + systems + latents, edges, jci=True
    )
    return JciScm(graph, ExperimentalDesignMatrix.indicator(i), mechanisms)


class PooledDataset:
    """Samples from all regimes stacked into one table.

    Columns are the regime label, the intervention variables, and the
    observed system variables, in that order; the column index equals
    the variable id of a model-generated dataset.
    """

    def __init__(
        self,
        column_names: Sequence[str],
        data: np.ndarray,
        design: ExperimentalDesignMatrix,
        warnings: Sequence[str] = (),
    ) -> None:
        data = np.asarray(data, dtype=float)
        if data.ndim != 2 or data.shape[1] != len(column_names):
            raise ValueError("data shape must match the column names")
        self.column_names = list(column_names)
        self.data = data
        self.design = design
        self.warnings = list(warnings)
        m = design.n_interventions
        regimes = data[:, 0].astype(int)
        if np.any(regimes < 0) or np.any(regimes >= design.n_regimes):
            raise ValueError("regime labels must index design rows")
        if m and not np.array_equal(
            data[:, 1 : 1 + m], design.intervention_values[regimes]
        ):
            raise ValueError(
                "intervention columns must equal the design row of each regime"
            )

    @property
    def n_samples(self) -> int:
        """Number of rows."""
        return self.data.shape[0]

    @property
    def regime_labels(self) -> np.ndarray:
        """Integer regime label per row."""
        return self.data[:, 0].astype(int)

    def column(self, index: int) -> np.ndarray:
        """One column by index (variable id)."""
        return self.data[:, index]

    def split_by_regime(self) -> dict[int, np.ndarray]:
        """Rows grouped by regime label."""
        labels = self.regime_labels
        return {
            int(r): self.data[labels == r]
            for r in np.unique(labels)
        }

    def save_csv(self, path: str) -> None:
        """Write the pooled table as CSV."""
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(self.column_names)
            for row in self.data:
                writer.writerow(
                    [str(int(row[0]))]
                    + [_format_number(v) for v in row[1 : 1 + self.design.n_interventions]]
                    + [repr(float(v)) for v in row[1 + self.design.n_interventions :]]
                )

    @staticmethod
    def load_csv(
        path: str, design: ExperimentalDesignMatrix | None = None
    ) -> "PooledDataset":
        """Read a pooled table; infer the design from the data if absent.

        Without an explicit design, regime probabilities are estimated
        from row counts and intervention values from the first row of
        each regime.
        """
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            rows = [[float(v) for v in row] for row in reader if row]
        data = np.array(rows)
        if design is None:
            m = sum(1 for name in header if name.startswith("I"))
            if header[0] != "R":
                raise ValueError("pooled CSV must start with the regime column R")
            labels = data[:, 0].astype(int)
            n_regimes = int(labels.max()) + 1 if len(labels) else 0
            values = np.zeros((n_regimes, m))
            counts = np.zeros(n_regimes)
            for r in range(n_regimes):
                mask = labels == r
                counts[r] = mask.sum()
                if counts[r]:
                    values[r] = data[mask][0, 1 : 1 + m]
            design = ExperimentalDesignMatrix.from_counts(
                values, counts, header[1 : 1 + m]
            )
        return PooledDataset(header, data, design)


def sample(
    model: JciScm,
    n_total: int,
    allocation: Sequence[int] | str = "random",
    seed: int = 0,
) -> PooledDataset:
    """Draw a pooled dataset from the model.

    Parameters
    ----------
    model : JciScm
        The generating model.
    n_total : int
        Total number of rows across all regimes.
    allocation : sequence of int or "random"
        Per-regime row counts, or "random" to distribute rows according
        to the regime probabilities (every positive-probability regime is
        guaranteed at least one row, requiring ``n_total`` at least the
        number of such regimes).
    seed : int
        Sampling seed.

    Returns
    -------
    PooledDataset
        Latent variables are marginalized out (their columns dropped). A
        warning is recorded when an explicit allocation leaves a
        positive-probability regime without rows.
    """
    rng = np.random.default_rng(seed)
    design = model.design
    positive = design.positive_rows()
    warnings: list[str] = []

    if isinstance(allocation, str):
        if allocation != "random":
            raise ValueError(f"unknown allocation mode {allocation!r}")
        if n_total < len(positive):
            raise ValueError(
                "n_total must cover at least one row per positive-probability regime"
            )
        counts = np.zeros(design.n_regimes, dtype=int)
        counts[positive] = 1
        extra = rng.multinomial(
            n_total - len(positive),
            design.regime_probs[positive] / design.regime_probs[positive].sum(),
        )
        counts[positive] += extra
    else:
        counts = np.asarray(allocation, dtype=int)
        if counts.shape != (design.n_regimes,) or np.any(counts < 0):
            raise ValueError("allocation must give one nonnegative count per regime")
        if counts.sum() != n_total:
            raise ValueError("allocation must sum to n_total")
        for r in positive:
            if counts[r] == 0:
                warnings.append(
                    f"regime {r} has positive probability but no rows"
                )

    nodes, b, c, noise = model._linear_system()
    index = {node: j for j, node in enumerate(nodes)}
    identity = np.eye(len(nodes))
    system_cols = [index[s] for s in model.system_ids]

    blocks: list[np.ndarray] = []
    for r in range(design.n_regimes):
        n_rows = int(counts[r])
        if n_rows == 0:
            continue
        iv = design.intervention_values[r]
        shift = c @ iv
        noise_draw = rng.normal(0.0, np.sqrt(noise), size=(n_rows, len(nodes)))
        values = np.zeros((n_rows, len(nodes)))
        for node in nodes:
            j = index[node]
            values[:, j] = noise_draw[:, j] + shift[j]
            for parent, coeff in model.mechanisms[node].coefficients.items():
                if parent in index:
                    values[:, j] += coeff * values[:, index[parent]]
        block = np.zeros((n_rows, 1 + design.n_interventions + len(system_cols)))
        block[:, 0] = r
        block[:, 1 : 1 + design.n_interventions] = iv
        block[:, 1 + design.n_interventions :] = values[:, system_cols]
        blocks.append(block)

    data = (
        np.vstack(blocks)
        if blocks
        else np.zeros((0, 1 + design.n_interventions + len(system_cols)))
    )
    return PooledDataset(model.column_names, data, design, warnings)


def oracle_independences(
    model: JciScm, max_order: int | None = None
) -> list[DStatement]:
    """All population separation statements over the observed variables.

    Uses the extended separation criterion with the deterministic
    relations induced by the design matrix; latent variables stay in the
    graph but never appear in statements. The default order cap is the
    number of observed variables minus 2 (every statement).
    """
    scope = set(model.observed_ids)
    if max_order is None:
        max_order = max(len(scope) - 2, 0)
    return enumerate_d_statements(
        model.graph, model.det_relations(), scope, max_order
    )


# -- model serialization ---------------------------------------------------


def model_to_json(model: JciScm) -> dict:
    """Serialize a model to a JSON-compatible dict."""
    return {
        "variables": [
            {"id": v.id, "name": v.name, "kind": v.kind.value}
            for v in model.graph.variables
        ],
        "edges": [[p, c] for p, c in sorted(model.graph.edges)],
        "design": {
            "intervention_values": model.design.intervention_values.tolist(),
            "regime_probs": model.design.regime_probs.tolist(),
            "column_names": model.design.column_names,
        },
        "mechanisms": [
            {
                "target": mech.target,
                "coefficients": {
                    str(parent): coeff
                    for parent, coeff in sorted(mech.coefficients.items())
                },
                "noise_var": mech.noise_var,
            }
            for _, mech in sorted(model.mechanisms.items())
        ],
    }


def model_from_json(payload: Mapping) -> JciScm:
    """Inverse of :func:`model_to_json`."""
    variables = [
        Variable(int(v["id"]), str(v["name"]), Kind(str(v["kind"]).lower()))
        for v in payload["variables"]
    ]
    edges = [(int(p), int(c)) for p, c in payload["edges"]]
    graph = CausalGraph(variables, edges, jci=True)
    design = ExperimentalDesignMatrix(
        payload["design"]["intervention_values"],
        payload["design"]["regime_probs"],
        payload["design"].get("column_names"),
    )
    mechanisms = {}
    for entry in payload["mechanisms"]:
        mechanisms[int(entry["target"])] = LinearMechanism(
            int(entry["target"]),
            {int(k): float(v) for k, v in entry["coefficients"].items()},
            float(entry["noise_var"]),
        )
    return JciScm(graph, design, mechanisms)


def save_model(path: str, model: JciScm) -> None:
    """Write a model to a JSON file."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_json(model), fh, indent=2)
        fh.write("\n")


def load_model(path: str) -> JciScm:
    """Read a model from a JSON file."""
    with open(path, "r", encoding="utf-8") as fh:
        return model_from_json(json.load(fh))
