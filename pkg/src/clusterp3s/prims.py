"""Preprocessing primitives and per-column pipelines.

Every feature is processed by an (imputer, encoder, scaler) triple applied in
that fixed order; any slot may be ``"None"``. There are 4 * 3 * 4 = 48 triples.
"""
from __future__ import annotations

import itertools
import json
import threading
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .tabular import NON_NUMERIC, NUMERIC, Column, Profile, Table, column_profile

IMPUTERS = ("Median", "MostFrequentValue", "Mean", "None")
ENCODERS = ("Ordinal", "OneHot", "None")
SCALERS = ("MinMax", "Standard", "MaxAbs", "None")

DEFAULT_ONEHOT_CAP = 64

# Column classes used as memo keys.
CLASS_NUMERIC = "Numeric"
CLASS_NON_NUMERIC = "NonNumeric"
CLASS_HIGHCARD = "highcard"
CLASS_ALL_MISSING = "AllMissing"


class InvalidPrimitive(Exception):
    """A primitive cannot be applied to a column.

    ``primitive`` is a ``(slot, name)`` pair such as ``("imputer", "Mean")``;
    ``column_class`` is the memo class of the offending column.
    """

    def __init__(self, primitive: tuple[str, str], column_class: str, reason: str = "", feature: str | None = None):
        self.primitive = primitive
        self.column_class = column_class
        self.reason = reason
        self.feature = feature
        where = f" (feature {feature!r})" if feature is not None else ""
        super().__init__(f"{primitive[0]} {primitive[1]} invalid on {column_class}{where}: {reason}")

    @property
    def key(self) -> tuple[tuple[str, str], str]:
        return self.primitive, self.column_class

    def tagged(self, feature: str) -> InvalidPrimitive:
        return InvalidPrimitive(self.primitive, self.column_class, self.reason, feature)


class UnfittedState(RuntimeError):
    pass


class NumericOverflow(ArithmeticError):
    pass


@dataclass(frozen=True, order=True)
class PipelineTriple:
    imputer: str = "None"
    encoder: str = "None"
    scaler: str = "None"

    def __post_init__(self):
        if self.imputer not in IMPUTERS:
            raise ValueError(f"unknown imputer {self.imputer!r}")
        if self.encoder not in ENCODERS:
            raise ValueError(f"unknown encoder {self.encoder!r}")
        if self.scaler not in SCALERS:
            raise ValueError(f"unknown scaler {self.scaler!r}")

    @property
    def primitives(self) -> tuple[tuple[str, str], ...]:
        return (("imputer", self.imputer), ("encoder", self.encoder), ("scaler", self.scaler))

    def to_dict(self) -> dict:
        return {"imputer": self.imputer, "encoder": self.encoder, "scaler": self.scaler}

    @classmethod
    def from_dict(cls, d: dict) -> PipelineTriple:
        return cls(d["imputer"], d["encoder"], d["scaler"])

    def __str__(self) -> str:
        return f"{self.imputer}>{self.encoder}>{self.scaler}"


def enumerate_pipelines() -> list[PipelineTriple]:
    """All 48 triples, imputer-major, in the order of IMPUTERS/ENCODERS/SCALERS."""
    return [PipelineTriple(i, e, s) for i, e, s in itertools.product(IMPUTERS, ENCODERS, SCALERS)]


def column_class(profile: Profile, n_rows: int, onehot_cap: int = DEFAULT_ONEHOT_CAP) -> str:
    """Memo class of a column, e.g. ``"Numeric"``, ``"NonNumeric-highcard-missing"``."""
    if profile.missing_count == n_rows:
        return CLASS_ALL_MISSING
    parts = [CLASS_NUMERIC if profile.kind == NUMERIC else CLASS_NON_NUMERIC]
    if profile.cardinality > onehot_cap:
        parts.append(CLASS_HIGHCARD)
    if profile.missing_count:
        parts.append("missing")
    return "-".join(parts)


def table_column_classes(table: Table, onehot_cap: int = DEFAULT_ONEHOT_CAP) -> list[str]:
    return [column_class(column_profile(c), table.n_rows, onehot_cap) for c in table.columns]


# ---------------------------------------------------------------------------
# fit / transform


@dataclass
class FittedTriple:
    spec: PipelineTriple
    kind: str
    column_class: str
    imputer_stat: float | str | None = None
    # sorted distinct post-imputation values; None marks "missing" as its own category
    encoder_state: list | None = None
    scaler_state: tuple[np.ndarray, np.ndarray] | None = None
    fitted: bool = False

    @property
    def width(self) -> int:
        if self.spec.encoder == "OneHot":
            return len(self.encoder_state)
        return 1


def _most_frequent(values: np.ndarray):
    uniq, counts = np.unique(values, return_counts=True)
    # np.unique sorts, so argmax picks the smallest among ties
    return uniq[int(np.argmax(counts))]


def _impute(fitted: FittedTriple, values: np.ndarray, missing: np.ndarray) -> np.ndarray:
    if fitted.spec.imputer == "None" or not missing.any():
        return values
    out = values.copy()
    out[missing] = fitted.imputer_stat
    return out


def _encode(fitted: FittedTriple, values: np.ndarray, missing: np.ndarray) -> np.ndarray:
    enc = fitted.spec.encoder
    if enc == "None":
        if fitted.kind != NUMERIC:
            raise InvalidPrimitive(("encoder", "None"), fitted.column_class, "learners need numeric input")
        if missing.any():
            raise InvalidPrimitive(("imputer", "None"), fitted.column_class, "missing cells left unimputed")
        return values.astype(np.float64)[:, None]
    cats = fitted.encoder_state
    n_known = len(cats)
    index = {c: i for i, c in enumerate(cats)}
    codes = np.empty(len(values), dtype=np.int64)
    missing_idx = index.get(None, n_known)
    for r in range(len(values)):
        if missing[r]:
            codes[r] = missing_idx
        else:
            v = values[r]
            codes[r] = index.get(float(v) if fitted.kind == NUMERIC else v, n_known)
    if enc == "Ordinal":
        return codes.astype(np.float64)[:, None]
    out = np.zeros((len(values), n_known), dtype=np.float64)
    known = codes < n_known
    out[np.flatnonzero(known), codes[known]] = 1.0
    return out


def _scale(fitted: FittedTriple, x: np.ndarray) -> np.ndarray:
    sc = fitted.spec.scaler
    if sc == "None":
        return x
    a, b = fitted.scaler_state
    with np.errstate(over="ignore", invalid="ignore"):
        if sc == "MinMax":
            span = b - a
            safe = np.where(span > 0, span, 1.0)
            out = np.where(span > 0, (x - a) / safe, 0.0)
        elif sc == "Standard":
            safe = np.where(b > 0, b, 1.0)
            out = np.where(b > 0, (x - a) / safe, 0.0)
        else:  # MaxAbs
            safe = np.where(b > 0, b, 1.0)
            out = x / safe
    if not np.all(np.isfinite(out)):
        raise NumericOverflow(f"scaler {sc} produced non-finite values")
    return out


# spread below this fraction of the column magnitude is rounding noise, not signal
DEGENERATE_RTOL = 1e-12


def _fit_scaler(scaler: str, x: np.ndarray) -> tuple[np.ndarray, np.ndarray] | None:
    tol = DEGENERATE_RTOL * np.maximum(np.abs(x).max(axis=0), 1.0) if len(x) else 0.0
    if scaler == "MinMax":
        lo, hi = x.min(axis=0), x.max(axis=0)
        return lo, np.where(hi - lo > tol, hi, lo)
    if scaler == "Standard":
        sd = x.std(axis=0)  # population std
        return x.mean(axis=0), np.where(sd > tol, sd, 0.0)
    if scaler == "MaxAbs":
        return np.zeros(x.shape[1]), np.abs(x).max(axis=0)
    return None


def fit_triple(
    spec: PipelineTriple,
    col: Column,
    fit_rows: Sequence[int] | np.ndarray | None = None,
    onehot_cap: int = DEFAULT_ONEHOT_CAP,
    col_class: str | None = None,
) -> FittedTriple:
    """Fit the imputer, encoder and scaler of ``spec`` on ``col[fit_rows]``.

    Raises :class:`InvalidPrimitive` carrying the (primitive, column class)
    key when the triple cannot be applied to this column.
    """
    rows = np.arange(col.n_rows) if fit_rows is None else np.asarray(fit_rows)
    if len(rows) == 0:
        raise ValueError("fit_rows must be nonempty")
    if col_class is None:
        col_class = column_class(column_profile(col), col.n_rows, onehot_cap)
    fitted = FittedTriple(spec, col.kind, col_class)
    values = col.values[rows]
    missing = col.missing[rows]
    present = values[~missing]

    if spec.imputer != "None":
        if len(present) == 0:
            raise InvalidPrimitive(("imputer", spec.imputer), col_class, "no observed values to impute from")
        if spec.imputer in ("Mean", "Median") and col.kind != NUMERIC:
            raise InvalidPrimitive(("imputer", spec.imputer), col_class, "non-numeric values")
        if spec.imputer == "Mean":
            fitted.imputer_stat = float(np.mean(present))
        elif spec.imputer == "Median":
            fitted.imputer_stat = float(np.median(present))
        else:
            stat = _most_frequent(present.astype(np.float64) if col.kind == NUMERIC else present.astype(str))
            fitted.imputer_stat = float(stat) if col.kind == NUMERIC else str(stat)
        values = _impute(fitted, values, missing)
        missing = np.zeros(len(values), dtype=bool)

    if spec.encoder == "None":
        if col.kind != NUMERIC:
            # blamed on the encoder whatever the scaler: raw text never reaches a learner
            raise InvalidPrimitive(("encoder", "None"), col_class, "non-numeric column left unencoded")
        if missing.any():
            raise InvalidPrimitive(("imputer", "None"), col_class, "missing cells left unimputed")
    else:
        observed = values[~missing]
        if col.kind == NUMERIC:
            cats: list = sorted({float(v) for v in observed})
        else:
            cats = sorted(set(observed))
        if missing.any():
            cats.append(None)
        if spec.encoder == "OneHot" and len(cats) > onehot_cap:
            raise InvalidPrimitive(
                ("encoder", "OneHot"), col_class, f"{len(cats)} categories exceed cap {onehot_cap}"
            )
        fitted.encoder_state = cats

    fitted.fitted = True
    if spec.scaler != "None":
        encoded = _encode(fitted, values, missing)
        fitted.scaler_state = _fit_scaler(spec.scaler, encoded)
    return fitted


def transform_column(fitted: FittedTriple, col: Column | np.ndarray, rows=None) -> np.ndarray:
    """Apply a fitted triple; returns an ``(n_rows, width)`` float matrix."""
    if not fitted.fitted:
        raise UnfittedState("transform before fit")
    if isinstance(col, Column):
        values = col.values if rows is None else col.values[rows]
        kind = col.kind
    else:
        values = np.asarray(col, dtype=object if fitted.kind != NUMERIC else np.float64)
        kind = fitted.kind
    if kind == NUMERIC:
        values = np.asarray(values, dtype=np.float64)
        missing = np.isnan(values)
    else:
        missing = np.array([v is None for v in values], dtype=bool)
    values = _impute(fitted, values, missing)
    if fitted.spec.imputer != "None":
        missing = np.zeros(len(values), dtype=bool)
    x = _encode(fitted, values, missing)
    return _scale(fitted, x)


@dataclass
class DesignMatrix:
    matrix: np.ndarray
    column_map: dict[str, tuple[int, int]]


def assemble_design_matrix(
    table: Table,
    spec_per_feature: Sequence[PipelineTriple],
    fit_rows,
    transform_rows,
    onehot_cap: int = DEFAULT_ONEHOT_CAP,
) -> DesignMatrix:
    """Fit each feature's triple on ``fit_rows`` and stack the transforms of ``transform_rows``.

    Fails fast: the first invalid feature aborts assembly with its tagged error.
    """
    if len(spec_per_feature) != table.n_features:
        raise ValueError(f"need {table.n_features} triples, got {len(spec_per_feature)}")
    classes = table_column_classes(table, onehot_cap)
    blocks = []
    column_map = {}
    start = 0
    for col, spec, cls in zip(table.columns, spec_per_feature, classes):
        try:
            fitted = fit_triple(spec, col, fit_rows, onehot_cap, cls)
            block = transform_column(fitted, col, np.asarray(transform_rows))
        except InvalidPrimitive as err:
            raise err.tagged(col.name) from None
        blocks.append(block)
        column_map[col.name] = (start, start + block.shape[1])
        start += block.shape[1]
    matrix = np.hstack(blocks) if blocks else np.zeros((len(transform_rows), 0))
    return DesignMatrix(matrix, column_map)


# ---------------------------------------------------------------------------
# invalid-primitive memo


@dataclass
class SearchSpace:
    triples: list[PipelineTriple] = field(default_factory=enumerate_pipelines)
    invalid_memo: set = field(default_factory=set)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    def __post_init__(self):
        if len(set(self.triples)) != len(self.triples):
            raise ValueError("duplicate triples in search space")

    def record(self, primitive: tuple[str, str], column_class: str) -> SearchSpace:
        with self._lock:
            self.invalid_memo.add((tuple(primitive), column_class))
        return self

    def allows(self, spec: PipelineTriple, column_class: str) -> bool:
        memo = self.invalid_memo
        return not any((p, column_class) in memo for p in spec.primitives)

    def candidates(self, column_classes) -> list[PipelineTriple]:
        """Triples the memo allows for every class in ``column_classes``."""
        classes = set(column_classes)
        return [t for t in self.triples if all(self.allows(t, c) for c in classes)]


def memo_record(space: SearchSpace, primitive: tuple[str, str], column_class: str) -> SearchSpace:
    return space.record(primitive, column_class)


def memo_allows(space: SearchSpace, spec: PipelineTriple, profile_or_class, n_rows: int | None = None,
                onehot_cap: int = DEFAULT_ONEHOT_CAP) -> bool:
    if isinstance(profile_or_class, Profile):
        if n_rows is None:
            raise ValueError("n_rows is required with a Profile")
        profile_or_class = column_class(profile_or_class, n_rows, onehot_cap)
    return space.allows(spec, profile_or_class)


def dumps_triple(spec: PipelineTriple) -> str:
    return json.dumps(spec.to_dict())
