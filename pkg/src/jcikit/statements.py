"""Weighted (in)dependence statements and separation statements.

Two statement vocabularies are used throughout the toolkit:

* :class:`WeightedStatement` records the outcome of a statistical
  independence test (or an oracle independence judgment) together with a
  nonnegative confidence weight.
* :class:`DStatement` records a graphical separation judgment, either a
  d-separation or a d-connection, again with a weight.

Both are immutable and normalized: the variable pair is stored with the
smaller id first and the conditioning set is a frozenset, so that equal
statements compare and hash equal. Statements can be serialized to a simple
line-oriented text format, one statement per line::

    sep X1 X2 | I1 R : inf
    con X1 X2 | : 3.25

where ``sep``/``con`` distinguishes separation from connection, variable
names follow, the conditioning set comes after ``|`` (possibly empty) and
the weight after ``:`` (``inf`` is allowed).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping, Sequence


class IndependenceKind(Enum):
    """Outcome of an independence test."""

    INDEPENDENT = "independent"
    DEPENDENT = "dependent"


class SeparationKind(Enum):
    """Kind of a graphical separation statement."""

    D_SEPARATED = "d-separated"
    D_CONNECTED = "d-connected"


def _normalize_pair(x: int, y: int) -> tuple[int, int]:
    if x == y:
        raise ValueError(f"statement endpoints must differ, got {x} twice")
    return (x, y) if x < y else (y, x)


def _check_statement(x: int, y: int, w: frozenset[int], weight: float) -> None:
    if x in w or y in w:
        raise ValueError(
            f"endpoints {x},{y} must not appear in conditioning set {sorted(w)}"
        )
    if not (weight >= 0.0):
        raise ValueError(f"weight must be nonnegative, got {weight}")


@dataclass(frozen=True)
class WeightedStatement:
    """A weighted conditional (in)dependence between two variables.

    Parameters
    ----------
    kind : IndependenceKind
        Whether the pair tested independent or dependent.
    x, y : int
        Variable ids; stored with the smaller id first.
    w : frozenset of int
        Conditioning set, disjoint from ``{x, y}``.
    weight : float
        Nonnegative confidence weight; ``math.inf`` marks oracle inputs.
    p_value : float or None
        Test p-value when the statement came from data, ``None`` for
        oracle inputs.
    """

    kind: IndependenceKind
    x: int
    y: int
    w: frozenset[int]
    weight: float
    p_value: float | None = None

    def __post_init__(self) -> None:
        x, y = _normalize_pair(self.x, self.y)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "w", frozenset(self.w))
        _check_statement(x, y, self.w, self.weight)
        if self.p_value is not None and not (0.0 <= self.p_value <= 1.0):
            raise ValueError(f"p_value must lie in [0, 1], got {self.p_value}")

    @property
    def order(self) -> int:
        """Size of the conditioning set."""
        return len(self.w)

    @property
    def key(self) -> tuple[int, int, frozenset[int]]:
        """The (pair, conditioning set) identity of the statement."""
        return (self.x, self.y, self.w)

    @property
    def sort_key(self) -> tuple:
        """A total ordering key: pair first, then conditioning set."""
        return (self.x, self.y, len(self.w), sorted(self.w), self.kind.value)


@dataclass(frozen=True)
class DStatement:
    """A weighted d-separation or d-connection statement.

    Same normalization rules as :class:`WeightedStatement`. A
    ``D_SEPARATED`` statement asserts that the pair is separated given
    ``w``; ``D_CONNECTED`` asserts the opposite.
    """

    kind: SeparationKind
    x: int
    y: int
    w: frozenset[int]
    weight: float

    def __post_init__(self) -> None:
        x, y = _normalize_pair(self.x, self.y)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "w", frozenset(self.w))
        _check_statement(x, y, self.w, self.weight)

    @property
    def order(self) -> int:
        """Size of the conditioning set."""
        return len(self.w)

    @property
    def key(self) -> tuple[int, int, frozenset[int]]:
        """The (pair, conditioning set) identity of the statement."""
        return (self.x, self.y, self.w)

    @property
    def sort_key(self) -> tuple:
        """A total ordering key: pair first, then conditioning set."""
        return (self.x, self.y, len(self.w), sorted(self.w), self.kind.value)


def format_statement(stmt: DStatement, names: Mapping[int, str]) -> str:
    """Render one statement in the line format described above."""
    tag = "sep" if stmt.kind is SeparationKind.D_SEPARATED else "con"
    cond = " ".join(names[v] for v in sorted(stmt.w))
    weight = "inf" if math.isinf(stmt.weight) else repr(stmt.weight)
    return f"{tag} {names[stmt.x]} {names[stmt.y]} | {cond} : {weight}"


def parse_statement_line(line: str, name_to_id: Mapping[str, int]) -> DStatement:
    """Parse one non-empty statement line.

    Raises
    ------
    ValueError
        If the line is malformed or mentions an unknown variable name.
    """
    head, sep, weight_part = line.rpartition(":")
    if not sep:
        raise ValueError(f"missing ': weight' in statement line: {line!r}")
    pair_part, sep, cond_part = head.partition("|")
    if not sep:
        raise ValueError(f"missing '|' in statement line: {line!r}")
    tokens = pair_part.split()
    if len(tokens) != 3 or tokens[0] not in ("sep", "con"):
        raise ValueError(f"expected 'sep|con X Y', got: {line!r}")
    kind = (
        SeparationKind.D_SEPARATED
        if tokens[0] == "sep"
        else SeparationKind.D_CONNECTED
    )
    try:
        x = name_to_id[tokens[1]]
        y = name_to_id[tokens[2]]
        w = frozenset(name_to_id[t] for t in cond_part.split())
    except KeyError as exc:
        raise ValueError(f"unknown variable name {exc} in line: {line!r}") from exc
    weight_token = weight_part.strip()
    weight = math.inf if weight_token == "inf" else float(weight_token)
    return DStatement(kind, x, y, w, weight)


def statement_names_in_file(path: str) -> list[str]:
    """Collect all variable names mentioned in a statement file.

    Returns the names in order of first appearance, which lets callers
    build an id table before parsing.
    """
    names: list[str] = []
    seen: set[str] = set()
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            head = line.rpartition(":")[0]
            pair_part, _, cond_part = head.partition("|")
            tokens = pair_part.split()[1:] + cond_part.split()
            for tok in tokens:
                if tok not in seen:
                    seen.add(tok)
                    names.append(tok)
    return names


def save_statements(
    path: str, statements: Iterable[DStatement], names: Mapping[int, str]
) -> None:
    """Write statements to ``path``, one per line, in sorted order."""
    with open(path, "w", encoding="utf-8") as fh:
        for stmt in sorted(statements, key=lambda s: s.sort_key):
            fh.write(format_statement(stmt, names) + "\n")


def load_statements(
    path: str, name_to_id: Mapping[str, int]
) -> list[DStatement]:
    """Read a statement file, resolving names through ``name_to_id``."""
    statements: list[DStatement] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            statements.append(parse_statement_line(line, name_to_id))
    return statements


def as_weighted(statements: Sequence[DStatement]) -> list[WeightedStatement]:
    """Reinterpret separation statements as (in)dependence statements.

    This is the population-level reading: a d-separation corresponds to an
    independence and a d-connection to a dependence. It is used to feed
    oracle separation statements through the same conversion pipeline that
    handles finite-sample test results.
    """
    return [
        WeightedStatement(
            IndependenceKind.INDEPENDENT
            if s.kind is SeparationKind.D_SEPARATED
            else IndependenceKind.DEPENDENT,
            s.x,
            s.y,
            s.w,
            s.weight,
        )
        for s in statements
    ]
