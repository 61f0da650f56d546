"""Instance keys, feature and performance tables, and their CSV formats.

features.csv::

    suite,problem_id,instance_id,dimension,<feature...>

performance.csv::

    suite,problem_id,instance_id,dimension,algorithm,run,value

Floats are written with 17 significant digits so that a save/load cycle is
bit-exact.
"""

from __future__ import annotations

import csv
import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from selector.errors import (
    AlignmentError,
    FormatError,
    IntegrityError,
    ParseError,
)

KEY_COLUMNS = ("suite", "problem_id", "instance_id", "dimension")
PERF_COLUMNS = KEY_COLUMNS + ("algorithm", "run", "value")


def format_float(x: float) -> str:
    return f"{float(x):.17g}"


@dataclass(frozen=True, order=True)
class InstanceKey:
    suite: str
    problem_id: int
    instance_id: int
    dimension: int

    def __post_init__(self):
        if not self.suite or "," in self.suite or " " in self.suite:
            raise ValueError(f"invalid suite identifier {self.suite!r}")
        for name in ("problem_id", "instance_id", "dimension"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ValueError(f"{name} must be a positive integer, got {v!r}")

    def __str__(self) -> str:
        return f"{self.suite}_{self.problem_id}_{self.instance_id}"

    def as_row(self) -> list[str]:
        return [self.suite, str(self.problem_id), str(self.instance_id), str(self.dimension)]


def _parse_key(cells: Sequence[str], line: int) -> InstanceKey:
    suite = cells[0].strip()
    ints = []
    for name, cell in zip(KEY_COLUMNS[1:], cells[1:4]):
        try:
            ints.append(int(cell))
        except ValueError:
            raise ParseError(f"line {line}, column {name!r}: not an integer: {cell!r}") from None
    try:
        return InstanceKey(suite, *ints)
    except ValueError as exc:
        raise ParseError(f"line {line}: {exc}") from None


@dataclass(frozen=True)
class FeatureTable:
    """Instance-keyed matrix of landscape feature values."""

    keys: tuple[InstanceKey, ...]
    feature_names: tuple[str, ...]
    values: np.ndarray
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        keys = tuple(self.keys)
        names = tuple(self.feature_names)
        values = np.array(self.values, dtype=float, copy=True).reshape(len(keys), len(names))
        values.setflags(write=False)
        object.__setattr__(self, "keys", keys)
        object.__setattr__(self, "feature_names", names)
        object.__setattr__(self, "values", values)
        index = {k: i for i, k in enumerate(keys)}
        if len(index) != len(keys):
            dup = next(k for k in keys if keys.count(k) > 1)
            raise IntegrityError(f"duplicate instance key {dup}")
        if len(set(names)) != len(names):
            raise IntegrityError("duplicate feature names")
        if not np.all(np.isfinite(values)):
            r, c = np.argwhere(~np.isfinite(values))[0]
            raise IntegrityError(
                f"non-finite value for {keys[r]} in column {names[c]!r}; "
                "drop the row or column explicitly"
            )
        object.__setattr__(self, "_index", index)

    def __len__(self):
        return len(self.keys)

    def __eq__(self, other):
        if not isinstance(other, FeatureTable):
            return NotImplemented
        return (
            self.keys == other.keys
            and self.feature_names == other.feature_names
            and self.values.shape == other.values.shape
            and bool(np.array_equal(self.values, other.values))
        )

    def index_of(self, key: InstanceKey) -> int:
        return self._index[key]

    def row(self, key: InstanceKey) -> np.ndarray:
        return self.values[self._index[key]]

    def drop_columns(self, columns: Iterable[str]) -> FeatureTable:
        columns = list(columns)
        missing = [c for c in columns if c not in self.feature_names]
        if missing:
            raise FormatError(f"cannot drop unknown column(s): {', '.join(missing)}")
        keep = [j for j, n in enumerate(self.feature_names) if n not in columns]
        return FeatureTable(
            self.keys, [self.feature_names[j] for j in keep], self.values[:, keep]
        )

    def subset(self, keys: Iterable[InstanceKey]) -> FeatureTable:
        keys = list(keys)
        rows = [self._index[k] for k in keys]
        return FeatureTable(keys, self.feature_names, self.values[rows])


def load_feature_table(path, drop_columns: Sequence[str] = ()) -> FeatureTable:
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header[:4]) != KEY_COLUMNS:
            raise FormatError(f"{path}: missing header starting with {','.join(KEY_COLUMNS)}")
        header = [h.strip() for h in header]
        feature_names = header[4:]
        missing = [c for c in drop_columns if c not in feature_names]
        if missing:
            raise FormatError(f"{path}: drop column(s) not in header: {', '.join(missing)}")
        keep = [j for j, n in enumerate(feature_names) if n not in set(drop_columns)]
        keys, rows = [], []
        for line, cells in enumerate(reader, start=2):
            if not cells:
                continue
            if len(cells) != len(header):
                raise FormatError(
                    f"{path}, line {line}: expected {len(header)} cells, got {len(cells)}"
                )
            key = _parse_key(cells, line)
            row = []
            for j in keep:
                cell = cells[4 + j]
                try:
                    v = float(cell)
                except ValueError:
                    raise ParseError(
                        f"{path}, line {line}, column {feature_names[j]!r}: "
                        f"not a number: {cell!r}"
                    ) from None
                if not math.isfinite(v):
                    raise IntegrityError(
                        f"{path}, line {line}, column {feature_names[j]!r}: non-finite "
                        f"value {cell!r}; drop the column explicitly"
                    )
                row.append(v)
            keys.append(key)
            rows.append(row)
    names = [feature_names[j] for j in keep]
    if len(set(keys)) != len(keys):
        seen = set()
        dup = next(k for k in keys if k in seen or seen.add(k))
        raise IntegrityError(f"{path}: duplicate instance key {dup}")
    values = np.array(rows, dtype=float).reshape(len(keys), len(names))
    return FeatureTable(keys, names, values)


def save_feature_table(table: FeatureTable, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(KEY_COLUMNS) + list(table.feature_names))
        for key, row in zip(table.keys, table.values):
            w.writerow(key.as_row() + [format_float(v) for v in row])


def median_aggregate(tables: Sequence[FeatureTable]) -> FeatureTable:
    """Cell-wise median across repetition tables.

    With an even number of tables the two central values are averaged.
    """
    if not tables:
        raise AlignmentError("median_aggregate needs at least one table")
    first = tables[0]
    for t in tables[1:]:
        if t.keys != first.keys:
            raise AlignmentError("tables disagree on instance keys or their order")
        if t.feature_names != first.feature_names:
            raise AlignmentError("tables disagree on feature columns or their order")
    stacked = np.stack([t.values for t in tables])
    return FeatureTable(first.keys, first.feature_names, np.median(stacked, axis=0))


@dataclass(frozen=True)
class PerfRecord:
    key: InstanceKey
    algorithm: str
    run_index: int
    value: float


@dataclass(frozen=True)
class PerformanceTable:
    """Raw run outcomes, grouped by (instance, algorithm) with runs 0..R-1."""

    records: tuple[PerfRecord, ...]
    _runs: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        groups: dict[tuple[InstanceKey, str], dict[int, float]] = {}
        for r in self.records:
            if r.run_index < 0:
                raise ParseError(f"negative run index for {r.key} / {r.algorithm}")
            if not math.isfinite(r.value):
                raise IntegrityError(f"non-finite value for {r.key} / {r.algorithm}")
            if r.value < 0:
                raise IntegrityError(
                    f"negative target precision {r.value!r} for {r.key} / {r.algorithm}"
                )
            runs = groups.setdefault((r.key, r.algorithm), {})
            if r.run_index in runs:
                raise IntegrityError(
                    f"duplicate run {r.run_index} for {r.key} / {r.algorithm}"
                )
            runs[r.run_index] = r.value
        ordered = []
        arrays = {}
        for (key, alg), runs in groups.items():
            if set(runs) != set(range(len(runs))):
                raise IntegrityError(
                    f"run indices for {key} / {alg} are {sorted(runs)}, "
                    f"expected 0..{len(runs) - 1}"
                )
            vals = np.array([runs[i] for i in range(len(runs))])
            vals.setflags(write=False)
            arrays[(key, alg)] = vals
            ordered.extend(PerfRecord(key, alg, i, runs[i]) for i in range(len(runs)))
        object.__setattr__(self, "records", tuple(ordered))
        object.__setattr__(self, "_runs", arrays)

    def __len__(self):
        return len(self.records)

    @property
    def keys(self) -> list[InstanceKey]:
        return list(dict.fromkeys(k for k, _ in self._runs))

    @property
    def algorithms(self) -> list[str]:
        return list(dict.fromkeys(a for _, a in self._runs))

    def has(self, key: InstanceKey, algorithm: str) -> bool:
        return (key, algorithm) in self._runs

    def runs(self, key: InstanceKey, algorithm: str) -> np.ndarray:
        return self._runs[(key, algorithm)]


def load_performance_table(path) -> PerformanceTable:
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != PERF_COLUMNS:
            raise FormatError(f"{path}: header must be {','.join(PERF_COLUMNS)}")
        records = []
        for line, cells in enumerate(reader, start=2):
            if not cells:
                continue
            if len(cells) != len(PERF_COLUMNS):
                raise FormatError(f"{path}, line {line}: expected 7 cells, got {len(cells)}")
            key = _parse_key(cells, line)
            try:
                run = int(cells[5])
            except ValueError:
                raise ParseError(f"{path}, line {line}, column 'run': {cells[5]!r}") from None
            if run < 0:
                raise ParseError(f"{path}, line {line}: negative run index {run}")
            try:
                value = float(cells[6])
            except ValueError:
                raise ParseError(f"{path}, line {line}, column 'value': {cells[6]!r}") from None
            records.append(PerfRecord(key, cells[4].strip(), run, value))
    return PerformanceTable(tuple(records))


def save_performance_table(table: PerformanceTable, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PERF_COLUMNS)
        for r in table.records:
            w.writerow(r.key.as_row() + [r.algorithm, str(r.run_index), format_float(r.value)])
