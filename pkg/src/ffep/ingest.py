"""Dataset loading and preparation for linear classifier training.

The pipeline is: load a delimited text file under a column schema
(``load_csv``), then ``preprocess`` into the numeric form the trainer
consumes: every feature column is centered across examples and scaled to
unit Euclidean norm, a constant baseline column of ones is appended as the
last coordinate (never normalized), and labels are mapped to {-1, +1}.
``partition`` finally splits example indices into mini-batches.

Conventions:

* categorical columns are one-hot expanded, one indicator per observed
  level, levels ordered lexicographically so the expanded dimension is
  reproducible across runs;
* the token "?" (or an empty field) marks a missing value: in a categorical
  column it becomes a level of its own, in a numeric column the whole row is
  dropped and the drop count logged;
* a constant raw column is all zeros after centering and is retained as-is
  (norm left at 0), preserving column indexing; a zero feature is inert in
  every loss.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ColumnSchema",
    "RawTable",
    "Dataset",
    "MiniBatchPartition",
    "DataLoadError",
    "load_csv",
    "preprocess",
    "partition",
    "bundled_synthetic_path",
]

logger = logging.getLogger(__name__)

MISSING_TOKENS = ("?", "")


class DataLoadError(ValueError):
    """A file could not be turned into a usable example table."""


@dataclass(frozen=True)
class ColumnSchema:
    """Column roles for a delimited example file.

    Columns are addressed by header name when ``has_header`` is true,
    otherwise by 0-based integer position.  ``label_map`` sends raw label
    tokens to +1 or -1.
    """

    label: str | int
    label_map: dict
    numeric: tuple = ()
    categorical: tuple = ()
    has_header: bool = True

    def __post_init__(self):
        object.__setattr__(self, "numeric", tuple(self.numeric))
        object.__setattr__(self, "categorical", tuple(self.categorical))
        if not self.numeric and not self.categorical:
            raise ValueError("schema names no feature columns")
        if not all(v in (-1, 1) for v in self.label_map.values()):
            raise ValueError("label_map values must be +1 or -1")


@dataclass(frozen=True)
class RawTable:
    """Numeric feature columns (categoricals already one-hot) plus labels."""

    columns: np.ndarray  # (N, n_cols) float
    column_names: tuple
    labels: np.ndarray  # (N,) values in {-1, +1}
    n_dropped: int = 0


@dataclass(frozen=True)
class Dataset:
    """Preprocessed examples; the last feature column is the baseline of ones."""

    features: np.ndarray  # (N, d)
    labels: np.ndarray  # (N,) in {-1, +1}
    feature_names: tuple = ()
    name: str = "dataset"

    def __post_init__(self):
        X = np.asarray(self.features, dtype=float)
        y = np.asarray(self.labels, dtype=float).reshape(-1)
        if X.ndim != 2 or X.shape[0] != y.size:
            raise ValueError("features must be (N, d) with one label per row")
        if not np.all(np.isin(y, (-1.0, 1.0))):
            raise ValueError("labels must be -1 or +1")
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)

    @property
    def n_examples(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]


@dataclass(frozen=True)
class MiniBatchPartition:
    """Ordered disjoint index batches covering all examples."""

    batch_size: int
    batches: list = field(default_factory=list)

    @property
    def n_batches(self) -> int:
        return len(self.batches)


def _resolve(col, names, row_len, where):
    if isinstance(col, int):
        if not 0 <= col < row_len:
            raise DataLoadError(f"{where}: column index {col} out of range")
        return col
    if names is None:
        raise DataLoadError(
            f"{where}: column {col!r} addressed by name but file has no header"
        )
    try:
        return names.index(col)
    except ValueError:
        raise DataLoadError(f"{where}: no column named {col!r} in header {names}")


def load_csv(path, schema: ColumnSchema) -> RawTable:
    """Read a comma-delimited example file into a numeric table.

    Raises DataLoadError naming the offending row on unparseable numeric
    tokens or unmapped label values.
    """
    try:
        with open(path, newline="") as fh:
            rows = [row for row in csv.reader(fh) if row]
    except OSError as exc:
        raise DataLoadError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise DataLoadError(f"{path}: file contains no rows")

    names = None
    if schema.has_header:
        names = [c.strip() for c in rows[0]]
        rows = rows[1:]
    if not rows:
        raise DataLoadError(f"{path}: no data rows after header")

    width = len(rows[0])
    label_i = _resolve(schema.label, names, width, str(path))
    numeric_i = [(_resolve(c, names, width, str(path)), c) for c in schema.numeric]
    categ_i = [(_resolve(c, names, width, str(path)), c) for c in schema.categorical]

    labels, numeric_vals, categ_vals = [], [], []
    n_dropped = 0
    for r, row in enumerate(rows):
        rowno = r + (2 if schema.has_header else 1)  # 1-based file line
        if len(row) != width:
            raise DataLoadError(f"{path}: row {rowno} has {len(row)} fields, expected {width}")
        tok = row[label_i].strip()
        if tok not in schema.label_map:
            raise DataLoadError(f"{path}: row {rowno} has unknown label value {tok!r}")
        nums = []
        drop = False
        for i, cname in numeric_i:
            t = row[i].strip()
            if t in MISSING_TOKENS:
                drop = True
                break
            try:
                nums.append(float(t))
            except ValueError:
                raise DataLoadError(
                    f"{path}: row {rowno} has non-numeric value {t!r} in column {cname!r}"
                )
        if drop:
            n_dropped += 1
            continue
        labels.append(schema.label_map[tok])
        numeric_vals.append(nums)
        categ_vals.append([row[i].strip() or "?" for i, _ in categ_i])

    if n_dropped:
        logger.info("%s: dropped %d rows with missing numeric values", path, n_dropped)
    if not labels:
        raise DataLoadError(f"{path}: no usable rows")

    columns = []
    col_names = []
    if numeric_i:
        arr = np.asarray(numeric_vals, dtype=float)
        for j, (_, cname) in enumerate(numeric_i):
            columns.append(arr[:, j])
            col_names.append(str(cname))
    for j, (_, cname) in enumerate(categ_i):
        toks = [v[j] for v in categ_vals]
        levels = sorted(set(toks))
        for lev in levels:
            columns.append(np.asarray([1.0 if t == lev else 0.0 for t in toks]))
            col_names.append(f"{cname}={lev}")

    return RawTable(
        columns=np.column_stack(columns),
        column_names=tuple(col_names),
        labels=np.asarray(labels, dtype=float),
        n_dropped=n_dropped,
    )


def preprocess(table: RawTable, name: str = "dataset") -> Dataset:
    """Center and unit-norm every feature column, then append the baseline."""
    X = np.asarray(table.columns, dtype=float)
    if X.shape[0] < 2 or X.shape[1] < 1:
        raise ValueError("need at least 2 examples and 1 feature")
    X = X - X.mean(axis=0)
    norms = np.linalg.norm(X, axis=0)
    nonzero = norms > 0
    X[:, nonzero] /= norms[nonzero]
    X = np.column_stack([X, np.ones(X.shape[0])])
    return Dataset(
        features=X,
        labels=table.labels,
        feature_names=tuple(table.column_names) + ("baseline",),
        name=name,
    )


def partition(dataset: Dataset, s: int, seed=None) -> MiniBatchPartition:
    """Split example indices into mini-batches of size ``s``.

    Batches are contiguous ranges in dataset order; the remainder batch is
    kept.  A seed pre-shuffles the example order before cutting.
    """
    n = dataset.n_examples
    if not 1 <= s <= n:
        raise ValueError(f"batch size {s} out of range [1, {n}]")
    order = np.arange(n)
    if seed is not None:
        order = np.random.default_rng(seed).permutation(n)
    batches = [order[i : i + s] for i in range(0, n, s)]
    return MiniBatchPartition(batch_size=s, batches=batches)


def bundled_synthetic_path():
    """Path to the bundled synthetic survival-study file (N=306, 3 features).

    A stand-in with the size and flavor of a small clinical dataset: integer
    age/year/node-count features and a noisy binary outcome, for running the
    training benchmarks without external downloads.
    """
    from importlib.resources import files

    return files("ffep").joinpath("data/synthetic306.csv")


def bundled_synthetic_schema() -> ColumnSchema:
    """Schema matching the bundled synthetic survival file."""
    return ColumnSchema(
        label="status",
        label_map={"1": 1, "2": -1},
        numeric=("age", "year", "nodes"),
        has_header=True,
    )
