"""Independence testing on pooled data and sound statement conversion.

The pipeline runs partial-correlation tests with the Fisher z transform
over every variable pair and conditioning set up to a maximum order,
weights each (in)dependence by how decisively its p-value clears the
significance threshold, and converts the results into separation
statements that remain sound under the deterministic relations between
the regime and intervention variables:

* a dependence always witnesses a d-connection with the same
  conditioning set;
* an independence witnesses a d-separation only after enlarging the
  conditioning set to everything it determines — and only when neither
  endpoint is itself determined, since an independence with a determined
  endpoint is an artifact of determinism and carries no graphical
  information. Such statements are dropped and reported.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy import stats

from .graphs import DetRelationSet, det_closure
from .models import PooledDataset
from .statements import (
    DStatement,
    IndependenceKind,
    SeparationKind,
    WeightedStatement,
)

_COND_LIMIT = 1e12
_MIN_P = 1e-300
_DEFAULT_WEIGHT_CAP = 1e6


class DegenerateDataError(ValueError):
    """Raised when a test's covariance submatrix is singular."""


class NotTestableError(ValueError):
    """Raised when the sample is too small for the requested test."""


def _pcor_from_cov(cov: np.ndarray, x: int, y: int, w: Sequence[int]) -> float:
    """Partial correlation from a covariance matrix, clamped to (-1, 1)."""
    idx = [x, y] + list(w)
    sub = cov[np.ix_(idx, idx)]
    head = sub[:2, :2]
    if len(w):
        rest = sub[2:, 2:]
        if np.linalg.cond(rest) > _COND_LIMIT:
            raise DegenerateDataError(
                "conditioning-set covariance is singular"
            )
        cross = sub[:2, 2:]
        head = head - cross @ np.linalg.solve(rest, cross.T)
    s00, s11 = head[0, 0], head[1, 1]
    if s00 <= 1e-15 or s11 <= 1e-15:
        raise DegenerateDataError("an endpoint has no residual variance")
    r = head[0, 1] / math.sqrt(s00 * s11)
    return float(np.clip(r, -1 + 1e-12, 1 - 1e-12))


def partial_correlation(
    data: PooledDataset, x: int, y: int, w: Iterable[int]
) -> float:
    """Sample partial correlation of two columns given a column set.

    Computed from the sample covariance matrix by Schur complement and
    clamped to ``[-1 + 1e-12, 1 - 1e-12]`` so downstream transforms stay
    finite.

    Raises
    ------
    NotTestableError
        If the sample size is not larger than ``|w| + 3``.
    DegenerateDataError
        If the covariance submatrix is singular (constant or collinear
        columns).
    """
    w = sorted(set(w))
    if x == y or x in w or y in w:
        raise ValueError("columns of a test must be distinct")
    if data.n_samples <= len(w) + 3:
        raise NotTestableError(
            f"need more than {len(w) + 3} samples, have {data.n_samples}"
        )
    cov = np.cov(data.data, rowvar=False)
    cov = np.atleast_2d(cov)
    return _pcor_from_cov(cov, x, y, w)


def fisher_z_test(
    r: float, n: int, order: int, alpha: float = 0.05
) -> tuple[float, IndependenceKind]:
    """Two-sided test of zero partial correlation.

    Transforms ``r`` with ``z = sqrt(n - order - 3) * atanh(r)`` and
    returns the two-sided normal p-value together with the decision:
    independent exactly when ``p > alpha``.

    Raises
    ------
    NotTestableError
        If ``n - order - 3`` is not positive.
    """
    dof = n - order - 3
    if dof <= 0:
        raise NotTestableError(f"need n > order + 3, have n={n}, order={order}")
    z = math.sqrt(dof) * math.atanh(r)
    p_value = float(2.0 * stats.norm.sf(abs(z)))
    decision = (
        IndependenceKind.INDEPENDENT
        if p_value > alpha
        else IndependenceKind.DEPENDENT
    )
    return p_value, decision


def weight_frequentist(
    p_value: float,
    alpha: float,
    cap: float = _DEFAULT_WEIGHT_CAP,
) -> float:
    """Confidence weight of a test outcome.

    The weight ``|log p - log alpha|`` is zero exactly at the decision
    boundary and grows the further the p-value sits from the threshold on
    either side. A p-value of zero yields the cap; values below 1e-300
    are clamped before taking logs.
    """
    if not (0.0 <= p_value <= 1.0):
        raise ValueError(f"p_value must lie in [0, 1], got {p_value}")
    if not (0.0 < alpha < 1.0):
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    if p_value == 0.0:
        return cap
    p_value = max(p_value, _MIN_P)
    return min(abs(math.log(p_value) - math.log(alpha)), cap)


@dataclass(frozen=True)
class SkippedTest:
    """A (pair, conditioning set) combination that could not be tested."""

    x: int
    y: int
    w: frozenset[int]
    reason: str


@dataclass(frozen=True)
class IndependenceRun:
    """All weighted statements produced from one dataset, plus skips."""

    statements: tuple[WeightedStatement, ...]
    skipped: tuple[SkippedTest, ...]
    alpha: float
    max_order: int


def run_all_tests(
    data: PooledDataset,
    scope: Iterable[int] | None = None,
    max_order: int | None = None,
    alpha: float = 0.05,
) -> IndependenceRun:
    """Test every pair in scope against every conditioning subset.

    The regime and intervention columns participate as ordinary numeric
    columns — that is the point of pooling. Tests that fail on degenerate
    input are recorded as skips rather than raising.

    Parameters
    ----------
    data : PooledDataset
        The pooled table.
    scope : iterable of int, optional
        Column indices to test; defaults to all columns.
    max_order : int, optional
        Largest conditioning-set size; defaults to ``len(scope) - 2``.
    alpha : float
        Significance threshold of the Fisher z test.
    """
    scope = sorted(set(scope)) if scope is not None else list(
        range(data.data.shape[1])
    )
    if max_order is None:
        max_order = max(len(scope) - 2, 0)
    cov = np.atleast_2d(np.cov(data.data, rowvar=False))
    n = data.n_samples

    statements: list[WeightedStatement] = []
    skipped: list[SkippedTest] = []
    for x, y in itertools.combinations(scope, 2):
        rest = [v for v in scope if v != x and v != y]
        for size in range(min(max_order, len(rest)) + 1):
            for w in itertools.combinations(rest, size):
                try:
                    if n <= size + 3:
                        raise NotTestableError(
                            f"need more than {size + 3} samples, have {n}"
                        )
                    r = _pcor_from_cov(cov, x, y, w)
                    p_value, decision = fisher_z_test(r, n, size, alpha)
                except (DegenerateDataError, NotTestableError) as exc:
                    skipped.append(SkippedTest(x, y, frozenset(w), str(exc)))
                    continue
                weight = weight_frequentist(p_value, alpha)
                statements.append(
                    WeightedStatement(
                        decision, x, y, frozenset(w), weight, p_value
                    )
                )
    return IndependenceRun(tuple(statements), tuple(skipped), alpha, max_order)


@dataclass(frozen=True)
class ConversionResult:
    """Separation statements derived soundly from test results.

    ``dropped`` lists the independence statements whose endpoint was
    determined by the conditioning set; these carry no graphical
    information and were discarded.
    """

    statements: tuple[DStatement, ...]
    dropped: tuple[WeightedStatement, ...]


def statements_to_dstatements(
    stmts: Iterable[WeightedStatement], det: DetRelationSet
) -> ConversionResult:
    """Convert weighted (in)dependences into sound separation statements.

    A dependence between X and Y given W becomes a d-connection given W
    with the same weight. An independence becomes a d-separation given
    the closure of W under the deterministic relations — unless X or Y
    lies in that closure, in which case it is dropped. When several
    inputs map to the same output statement, the maximum weight is kept.
    """
    best: dict[tuple[SeparationKind, tuple], DStatement] = {}
    dropped: list[WeightedStatement] = []
    for stmt in stmts:
        if stmt.kind is IndependenceKind.DEPENDENT:
            out = DStatement(
                SeparationKind.D_CONNECTED, stmt.x, stmt.y, stmt.w, stmt.weight
            )
        else:
            closed = det_closure(det, stmt.w)
            if stmt.x in closed or stmt.y in closed:
                dropped.append(stmt)
                continue
            out = DStatement(
                SeparationKind.D_SEPARATED, stmt.x, stmt.y, closed, stmt.weight
            )
        slot = (out.kind, out.key)
        if slot not in best or best[slot].weight < out.weight:
            best[slot] = out
    ordered = sorted(best.values(), key=lambda s: s.sort_key)
    return ConversionResult(tuple(ordered), tuple(dropped))
