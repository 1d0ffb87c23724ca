"""Datasets: CSV ingestion, standardisation, quadratic expansion and folds."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import DegenerateColumnError, ParseError, SchemaError

INTERCEPT = "intercept"


def _frozen(a, ndim):
    arr = np.array(a, dtype=float)
    if ndim == 2 and arr.ndim == 1:
        arr = arr.reshape(-1, 1) if arr.size else arr.reshape(0, 0)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Dataset:
    """Binary outcome with focus covariates (x0, x_tilde) and auxiliary covariates z.

    ``column_names`` lists x0, then the x_tilde columns, then the z columns.
    ``intercept`` names the x_tilde columns that are constant ones; they are
    skipped by :func:`standardize` and :func:`quadratic_expand`.
    """

    y: np.ndarray
    x0: np.ndarray
    x_tilde: np.ndarray
    z: np.ndarray
    column_names: tuple
    outcome_name: str = "y"
    intercept: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        y = np.array(self.y, dtype=float).reshape(-1)
        n = y.shape[0]
        if n < 1:
            raise ValueError("dataset needs at least one observation")
        if not np.all((y == 0) | (y == 1)):
            raise ValueError("outcomes must be 0 or 1")
        x0 = np.array(self.x0, dtype=float).reshape(-1)
        xt = np.array(self.x_tilde, dtype=float)
        z = np.array(self.z, dtype=float)
        xt = xt.reshape(n, -1) if xt.size else np.zeros((n, 0))
        z = z.reshape(n, -1) if z.size else np.zeros((n, 0))
        if x0.shape[0] != n or xt.shape[0] != n or z.shape[0] != n:
            raise ValueError("all covariate blocks must have n rows")
        names = tuple(self.column_names)
        if len(names) != 1 + xt.shape[1] + z.shape[1]:
            raise ValueError("column_names must cover x0, x_tilde and z")
        if len(set(names) | {self.outcome_name}) != len(names) + 1:
            raise ValueError("column names must be unique")
        for arr in (y, x0, xt, z):
            arr.setflags(write=False)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "x0", x0)
        object.__setattr__(self, "x_tilde", xt)
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "column_names", names)
        object.__setattr__(self, "intercept", frozenset(self.intercept))

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def k(self) -> int:
        return self.x_tilde.shape[1]

    @property
    def p(self) -> int:
        return self.z.shape[1]

    @property
    def x0_name(self) -> str:
        return self.column_names[0]

    @property
    def focus_names(self) -> tuple:
        return self.column_names[1:1 + self.k]

    @property
    def aux_names(self) -> tuple:
        return self.column_names[1 + self.k:]

    def subset(self, rows) -> "Dataset":
        rows = np.asarray(rows)
        return replace(self, y=self.y[rows], x0=self.x0[rows],
                       x_tilde=self.x_tilde[rows], z=self.z[rows])

    def with_x0(self, x0) -> "Dataset":
        return replace(self, x0=x0)


@dataclass(frozen=True)
class Schema:
    """Column roles for :func:`load_csv`.

    ``add_intercept`` appends an all-ones focus column named ``intercept``.
    ``intercept_columns`` flags focus columns already present in the file as
    intercepts.
    """

    outcome: str
    x0: str
    focus: tuple = ()
    auxiliary: tuple = ()
    add_intercept: bool = False
    intercept_columns: tuple = ()


def load_csv(path, schema: Schema) -> Dataset:
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SchemaError(f"{path}: missing header row") from None
        rows = [r for r in reader if r and any(c.strip() for c in r)]
    wanted = [schema.outcome, schema.x0, *schema.focus, *schema.auxiliary]
    if len(set(wanted)) != len(wanted):
        raise SchemaError("schema names a column more than once")
    pos = {}
    for name in wanted:
        if name not in header:
            raise SchemaError(f"{path}: column {name!r} not found in header")
        pos[name] = header.index(name)

    def column(name):
        j = pos[name]
        out = np.empty(len(rows))
        for i, r in enumerate(rows):
            # line numbers are 1-based and count the header
            try:
                out[i] = float(r[j])
            except (ValueError, IndexError):
                cell = r[j] if j < len(r) else ""
                raise ParseError(f"{path}:{i + 2}: non-numeric value {cell!r} in column {name!r}",
                                 row=i + 2, column=name) from None
            if not math.isfinite(out[i]):
                raise ParseError(f"{path}:{i + 2}: non-finite value in column {name!r}",
                                 row=i + 2, column=name)
        return out

    y = column(schema.outcome)
    bad = np.flatnonzero((y != 0) & (y != 1))
    if bad.size:
        i = int(bad[0])
        raise ParseError(f"{path}:{i + 2}: outcome {y[i]:g} is not 0 or 1",
                         row=i + 2, column=schema.outcome)
    if not rows:
        raise ParseError(f"{path}: no data rows")
    x0 = column(schema.x0)
    focus = [column(c) for c in schema.focus]
    names = list(schema.focus)
    intercept = set(schema.intercept_columns)
    if not intercept <= set(schema.focus):
        raise SchemaError(f"intercept columns {sorted(intercept - set(schema.focus))} are not focus columns")
    if schema.add_intercept:
        if INTERCEPT in names or INTERCEPT in wanted:
            raise SchemaError(f"column name {INTERCEPT!r} is reserved for the added intercept")
        focus.append(np.ones(len(rows)))
        names.append(INTERCEPT)
        intercept.add(INTERCEPT)
    n = len(rows)
    xt = np.column_stack(focus) if focus else np.zeros((n, 0))
    z = np.column_stack([column(c) for c in schema.auxiliary]) if schema.auxiliary else np.zeros((n, 0))
    return Dataset(y=y, x0=x0, x_tilde=xt, z=z,
                   column_names=(schema.x0, *names, *schema.auxiliary),
                   outcome_name=schema.outcome, intercept=frozenset(intercept))


def write_csv(d: Dataset, path) -> None:
    """Write ``d`` with a header; floats use ``repr`` so a reload is exact."""
    path = Path(path)
    header = [d.outcome_name, *d.column_names]
    data = np.column_stack([d.y, d.x0, d.x_tilde, d.z])
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i, row in enumerate(data):
            w.writerow([str(int(d.y[i]))] + [repr(float(v)) for v in row[1:]])


def schema_for(d: Dataset) -> Schema:
    """Schema that reloads a file produced by :func:`write_csv`."""
    return Schema(outcome=d.outcome_name, x0=d.x0_name, focus=d.focus_names,
                  auxiliary=d.aux_names, intercept_columns=tuple(sorted(d.intercept)))


def _standardize_vec(v, name):
    sd = v.std(ddof=1) if v.shape[0] > 1 else 0.0
    if not sd > 0.0:
        raise DegenerateColumnError(name)
    return (v - v.mean()) / sd


def standardize(d: Dataset, columns: Optional[Iterable[str]] = None) -> Dataset:
    """Centre and scale the named covariates (all non-intercept ones by default)."""
    if columns is None:
        columns = [c for c in d.column_names if c not in d.intercept]
    columns = list(columns)
    unknown = set(columns) - set(d.column_names)
    if unknown:
        raise SchemaError(f"unknown columns {sorted(unknown)}")
    x0 = d.x0
    xt = d.x_tilde.copy()
    z = d.z.copy()
    for name in columns:
        if name in d.intercept:
            continue
        j = d.column_names.index(name)
        if j == 0:
            x0 = _standardize_vec(d.x0, name)
        elif j <= d.k:
            xt[:, j - 1] = _standardize_vec(d.x_tilde[:, j - 1], name)
        else:
            z[:, j - 1 - d.k] = _standardize_vec(d.z[:, j - 1 - d.k], name)
    return replace(d, x0=x0, x_tilde=xt, z=z)


def product_pairs(m: int):
    """Index pairs for the expansion: cross products by increasing column
    distance (adjacent pairs first), then squares.  For three columns a, b, c
    this gives ab, bc, ac, aa, bb, cc."""
    cross = [(i, i + off) for off in range(1, m) for i in range(m - off)]
    squares = [(i, i) for i in range(m)]
    return cross + squares


def quadratic_expand(d: Dataset, base: Sequence[str]) -> Dataset:
    """Replace the auxiliary block by ``base`` plus all pairwise products.

    Auxiliary columns not listed in ``base`` are kept after the expansion.
    """
    base = list(base)
    if not base:
        raise ValueError("quadratic_expand needs at least one base column")
    aux = list(d.aux_names)
    missing = [b for b in base if b not in aux]
    if missing:
        raise SchemaError(f"base columns {missing} are not auxiliary columns")
    cols = [d.z[:, aux.index(b)] for b in base]
    names = list(base)
    for i, j in product_pairs(len(base)):
        cols.append(cols[i] * cols[j])
        names.append(f"{base[i]}*{base[j]}")
    rest = [a for a in aux if a not in base]
    cols.extend(d.z[:, aux.index(a)] for a in rest)
    names.extend(rest)
    z = np.column_stack(cols)
    return replace(d, z=z, column_names=(d.x0_name, *d.focus_names, *names))


@dataclass(frozen=True)
class FoldAssignment:
    fold_index: np.ndarray
    K: int
    seed: int

    def train_test(self, fold: int):
        test = np.flatnonzero(self.fold_index == fold)
        train = np.flatnonzero(self.fold_index != fold)
        return train, test


def split_folds(n: int, K: int, seed: int) -> FoldAssignment:
    """Balanced random fold labels from a seeded permutation."""
    if K < 2:
        raise ValueError("K must be at least 2")
    if n < K:
        raise ValueError(f"cannot split {n} observations into {K} folds")
    perm = np.random.Generator(np.random.PCG64(seed)).permutation(n)
    idx = np.empty(n, dtype=np.int64)
    idx[perm] = np.arange(n) % K
    idx.setflags(write=False)
    return FoldAssignment(fold_index=idx, K=K, seed=seed)
