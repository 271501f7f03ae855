"""Tabular dataset model, CSV ingestion and stratified fold planning.

A :class:`Table` is column-oriented. Numeric columns store ``float64`` arrays
with ``NaN`` marking a missing cell; non-numeric columns store ``object``
arrays holding ``str`` or ``None`` (missing).
"""
from __future__ import annotations

import csv
import io
import re
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

NUMERIC = "Numeric"
NON_NUMERIC = "NonNumeric"

DEFAULT_MISSING_MARKERS = frozenset({"", "?", "NA", "NaN"})

_NUMBER_RE = re.compile(r"^[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?$")


class TableError(ValueError):
    """Base class for ingestion failures."""


class MissingTarget(TableError):
    pass


class RaggedRows(TableError):
    pass


class DegenerateTarget(TableError):
    pass


class BadK(ValueError):
    pass


class SmallClassWarning(UserWarning):
    pass


def parse_number(text: str) -> float | None:
    """Parse a decimal literal; non-finite results count as missing."""
    if not _NUMBER_RE.match(text):
        return None
    value = float(text)
    if not np.isfinite(value):
        return None
    return value


def format_number(value: float) -> str:
    # repr is the shortest string that round-trips a float64
    return repr(float(value))


def canonical_term(value: float, digits: int = 4) -> str:
    """Quantized string form of a number; used for vocabulary terms and distinctness."""
    return f"{value:.{digits}g}"


@dataclass(frozen=True, eq=False)
class Column:
    name: str
    kind: str
    values: np.ndarray

    @property
    def n_rows(self) -> int:
        return len(self.values)

    @property
    def missing(self) -> np.ndarray:
        if self.kind == NUMERIC:
            return np.isnan(self.values)
        return np.array([v is None for v in self.values], dtype=bool)

    def cells(self) -> list:
        """Cells as plain Python values: ``None`` for missing, float or str otherwise."""
        if self.kind == NUMERIC:
            return [None if np.isnan(v) else float(v) for v in self.values]
        return list(self.values)

    def take(self, rows) -> Column:
        return Column(self.name, self.kind, self.values[rows])

    def __eq__(self, other) -> bool:
        if not isinstance(other, Column):
            return NotImplemented
        if (self.name, self.kind, self.n_rows) != (other.name, other.kind, other.n_rows):
            return False
        if self.kind == NUMERIC:
            return bool(np.array_equal(self.values, other.values, equal_nan=True))
        return list(self.values) == list(other.values)

    __hash__ = None


def make_column(name: str, cells: Sequence) -> Column:
    """Build a column from Python cells (None / number / str), inferring its kind.

    A column is Numeric iff it has at least one non-missing cell and every
    non-missing cell is a number. Anything else (including all-missing) is
    NonNumeric, and numbers in a NonNumeric column become text.
    """
    present = [c for c in cells if c is not None]
    numeric = bool(present) and all(
        isinstance(c, (int, float, np.integer, np.floating)) and not isinstance(c, bool)
        for c in present
    )
    if numeric:
        vals = np.array(
            [np.nan if c is None or not np.isfinite(c) else float(c) for c in cells],
            dtype=np.float64,
        )
        return Column(name, NUMERIC, vals)
    out = np.empty(len(cells), dtype=object)
    for i, c in enumerate(cells):
        if c is None:
            out[i] = None
        elif isinstance(c, str):
            out[i] = c
        else:
            out[i] = format_number(c)
    return Column(name, NON_NUMERIC, out)


@dataclass(frozen=True, eq=False)
class CategoricalColumn:
    """Class-label column: ``classes`` sorted, ``codes`` index into it."""

    name: str
    classes: tuple[str, ...]
    codes: np.ndarray

    @classmethod
    def from_labels(cls, name: str, labels: Sequence[str]) -> CategoricalColumn:
        classes, codes = np.unique(np.asarray(labels, dtype=object).astype(str), return_inverse=True)
        return cls(name, tuple(str(c) for c in classes), codes.astype(np.int64))

    @property
    def labels(self) -> list[str]:
        return [self.classes[c] for c in self.codes]

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    def __eq__(self, other) -> bool:
        if not isinstance(other, CategoricalColumn):
            return NotImplemented
        return self.name == other.name and self.labels == other.labels

    __hash__ = None


@dataclass(frozen=True, eq=False)
class Table:
    columns: tuple[Column, ...]
    target: CategoricalColumn

    def __post_init__(self):
        n = len(self.target.codes)
        for col in self.columns:
            if col.n_rows != n:
                raise RaggedRows(f"column {col.name!r} has {col.n_rows} cells, target has {n}")

    @property
    def n_rows(self) -> int:
        return len(self.target.codes)

    @property
    def n_features(self) -> int:
        return len(self.columns)

    @property
    def feature_names(self) -> list[str]:
        return [c.name for c in self.columns]

    @property
    def y(self) -> np.ndarray:
        return self.target.codes

    def column(self, name: str) -> Column:
        for col in self.columns:
            if col.name == name:
                return col
        raise KeyError(name)

    def missing_count(self) -> int:
        return int(sum(col.missing.sum() for col in self.columns))

    def take_rows(self, rows) -> Table:
        rows = np.asarray(rows)
        return Table(
            tuple(c.take(rows) for c in self.columns),
            CategoricalColumn(self.target.name, self.target.classes, self.target.codes[rows]),
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, Table):
            return NotImplemented
        return self.columns == other.columns and self.target == other.target

    __hash__ = None


@dataclass(frozen=True)
class Profile:
    kind: str
    cardinality: int
    missing_count: int


def column_profile(col: Column, quantize_digits: int = 4) -> Profile:
    miss = col.missing
    present = col.values[~miss]
    if col.kind == NUMERIC:
        distinct = {canonical_term(v, quantize_digits) for v in present}
    else:
        distinct = set(present)
    return Profile(col.kind, len(distinct), int(miss.sum()))


def table_from_rows(
    header: Sequence[str],
    rows: Iterable[Sequence[str]],
    target_name: str,
    missing_markers: Iterable[str] = DEFAULT_MISSING_MARKERS,
) -> Table:
    header = list(header)
    if target_name not in header:
        raise MissingTarget(f"target column {target_name!r} not in header {header}")
    markers = set(missing_markers)
    raw: list[list[str]] = [[] for _ in header]
    for lineno, row in enumerate(rows, start=2):
        if len(row) != len(header):
            raise RaggedRows(f"line {lineno}: expected {len(header)} fields, got {len(row)}")
        for j, cell in enumerate(row):
            raw[j].append(cell)

    t = header.index(target_name)
    labels = raw[t]
    if any(v in markers for v in labels):
        raise DegenerateTarget(f"target column {target_name!r} has missing labels")
    if len(set(labels)) < 2:
        raise DegenerateTarget(f"target column {target_name!r} has fewer than 2 classes")

    columns = []
    for j, name in enumerate(header):
        if j == t:
            continue
        cells: list = []
        for text in raw[j]:
            if text in markers:
                cells.append(None)
            else:
                num = parse_number(text)
                if num is None and _NUMBER_RE.match(text):
                    # overflow to inf: treat as missing
                    cells.append(None)
                else:
                    cells.append(text if num is None else num)
        numeric = any(c is not None for c in cells) and all(
            c is None or isinstance(c, float) for c in cells
        )
        if not numeric:
            # keep the original spelling of numbers inside text columns
            cells = [None if c is None else txt for c, txt in zip(cells, raw[j])]
        columns.append(make_column(name, cells))
    return Table(tuple(columns), CategoricalColumn.from_labels(target_name, labels))


def load_csv(
    path: str | Path,
    target_name: str,
    missing_markers: Iterable[str] = DEFAULT_MISSING_MARKERS,
) -> Table:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise TableError(f"{path}: empty file") from None
        return table_from_rows(header, reader, target_name, missing_markers)


def dump_csv(table: Table, missing_marker: str = "") -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(table.feature_names + [table.target.name])
    cols = [c.cells() for c in table.columns]
    labels = table.target.labels
    for i in range(table.n_rows):
        row = []
        for cells in cols:
            c = cells[i]
            if c is None:
                row.append(missing_marker)
            elif isinstance(c, float):
                row.append(format_number(c))
            else:
                row.append(c)
        row.append(labels[i])
        writer.writerow(row)
    return buf.getvalue()


def write_csv(table: Table, path: str | Path, missing_marker: str = "") -> None:
    Path(path).write_text(dump_csv(table, missing_marker), encoding="utf-8")


@dataclass(frozen=True, eq=False)
class FoldPlan:
    k: int
    assignments: np.ndarray

    def train_rows(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments != fold)

    def test_rows(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments == fold)

    def __iter__(self):
        for f in range(self.k):
            yield self.train_rows(f), self.test_rows(f)


def make_folds(table_or_labels, k: int, seed: int) -> FoldPlan:
    """Stratified k-fold assignment.

    Each class's rows are shuffled and dealt round-robin; the dealing offset
    carries over between classes so fold sizes stay within one of each other.
    """
    y = table_or_labels.y if isinstance(table_or_labels, Table) else np.asarray(table_or_labels)
    n = len(y)
    if k < 2 or k > n:
        raise BadK(f"k={k} must be in [2, {n}]")
    rng = np.random.default_rng(seed)
    assignments = np.empty(n, dtype=np.int64)
    offset = 0
    for cls in np.unique(y):
        rows = np.flatnonzero(y == cls)
        if len(rows) < k:
            warnings.warn(
                f"class {cls!r} has {len(rows)} rows < k={k}; distributed round-robin",
                SmallClassWarning,
                stacklevel=2,
            )
        rows = rows[rng.permutation(len(rows))]
        assignments[rows] = (offset + np.arange(len(rows))) % k
        offset = (offset + len(rows)) % k
    return FoldPlan(k, assignments)
