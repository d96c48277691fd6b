"""Schemas, values, rows, and the recovery-fidelity contract.

Values are plain Python objects; the column kind decides which
representation is legal:

  * categorical columns hold 0-based ``int`` indices into a dictionary,
  * numeric columns hold ``float`` (or ``int`` when the column is
    declared integer),
  * string columns hold ``bytes``.

A row is an ordinary tuple with one value per schema column.  Fidelity
of a recovered row is governed per column by a tolerance: numeric values
must land within ``tolerance`` (inclusive) of the original, everything
else must be recovered exactly.  ``tolerance == 0`` is the lossless
contract.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Union


class SchemaError(ValueError):
    """Raised for ill-formed schemas or column kinds."""


@dataclass(frozen=True)
class Categorical:
    """A finite domain of ``size`` values, optionally labelled."""

    size: int
    labels: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        if self.size < 1:
            raise SchemaError("categorical domain must hold at least one value")
        if self.labels is not None and len(self.labels) != self.size:
            raise SchemaError("label count must equal the domain size")


@dataclass(frozen=True)
class Numerical:
    """Real- or integer-valued column, with an optional declared range."""

    integer: bool = False
    lo: float | None = None
    hi: float | None = None

    def __post_init__(self) -> None:
        if (self.lo is None) != (self.hi is None):
            raise SchemaError("declare both range endpoints or neither")
        if self.lo is not None and not self.lo < self.hi:
            raise SchemaError("declared range must satisfy lo < hi")


@dataclass(frozen=True)
class Text:
    """Byte-string column; ``max_length`` bounds the string length."""

    max_length: int | None = None

    def __post_init__(self) -> None:
        if self.max_length is not None and self.max_length < 0:
            raise SchemaError("max_length must be non-negative")


AttributeKind = Union[Categorical, Numerical, Text]


@dataclass(frozen=True)
class Column:
    name: str
    kind: AttributeKind
    tolerance: float = 0.0

    def __post_init__(self) -> None:
        if self.tolerance < 0 or not math.isfinite(self.tolerance):
            raise SchemaError(f"column {self.name!r}: tolerance must be finite and >= 0")
        if not isinstance(self.kind, Numerical) and self.tolerance != 0:
            # Only numeric recovery is allowed to be inexact.
            raise SchemaError(f"column {self.name!r}: non-numeric tolerance must be 0")


@dataclass(frozen=True)
class Schema:
    columns: tuple[Column, ...]

    def __post_init__(self) -> None:
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise SchemaError("column names must be unique")

    def __len__(self) -> int:
        return len(self.columns)

    def __iter__(self) -> Iterator[Column]:
        return iter(self.columns)

    def names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.columns)

    def index_of(self, name: str) -> int:
        for i, c in enumerate(self.columns):
            if c.name == name:
                return i
        raise KeyError(name)


@dataclass(frozen=True)
class Violation:
    """First problem found while validating a row against a schema."""

    column: int
    reason: str

    def __str__(self) -> str:  # pragma: no cover - display helper
        return f"column {self.column}: {self.reason}"


def _check_value(kind: AttributeKind, value: object) -> str | None:
    if isinstance(kind, Categorical):
        if not isinstance(value, int) or isinstance(value, bool):
            return f"expected categorical index, got {type(value).__name__}"
        if not 0 <= value < kind.size:
            return f"index {value} outside domain of size {kind.size}"
        return None
    if isinstance(kind, Numerical):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            return f"expected number, got {type(value).__name__}"
        if kind.integer and not isinstance(value, int):
            return "integer column holds a non-integer"
        if not kind.integer and not math.isfinite(float(value)):
            return "numeric value must be finite"
        if kind.lo is not None and not (kind.lo <= float(value) <= kind.hi):
            return f"value {value} outside declared range [{kind.lo}, {kind.hi}]"
        return None
    if isinstance(kind, Text):
        if not isinstance(value, bytes):
            return f"expected bytes, got {type(value).__name__}"
        if kind.max_length is not None and len(value) > kind.max_length:
            return f"string of length {len(value)} exceeds max_length {kind.max_length}"
        return None
    return f"unknown column kind {kind!r}"  # pragma: no cover


def validate_row(schema: Schema, row: tuple) -> Violation | None:
    """Return the first violation in ``row``, or None when it conforms."""
    if len(row) != len(schema):
        return Violation(-1, f"row has {len(row)} values, schema has {len(schema)}")
    for i, (col, value) in enumerate(zip(schema.columns, row)):
        reason = _check_value(col.kind, value)
        if reason is not None:
            return Violation(i, reason)
    return None


def validate_rows(schema: Schema, rows: list[tuple]) -> Violation | None:
    for row in rows:
        v = validate_row(schema, row)
        if v is not None:
            return v
    return None


def values_close(kind: AttributeKind, tolerance: float, a: object, b: object) -> bool:
    """Single-value fidelity: numeric within tolerance, everything else exact."""
    if isinstance(kind, Numerical):
        return abs(float(a) - float(b)) <= tolerance
    return a == b


def closeness_check(schema: Schema, original: tuple, recovered: tuple) -> bool:
    """True when every recovered value honours its column's tolerance."""
    if len(original) != len(recovered) or len(original) != len(schema):
        return False
    return all(
        values_close(col.kind, col.tolerance, a, b)
        for col, a, b in zip(schema.columns, original, recovered)
    )


@dataclass
class Dataset:
    """An in-memory table: a schema plus its rows."""

    schema: Schema
    rows: list[tuple] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.rows)

    def column_values(self, j: int) -> list:
        return [row[j] for row in self.rows]

    def validate(self) -> Violation | None:
        return validate_rows(self.schema, self.rows)
