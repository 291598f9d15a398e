"""CSV loading, return transforms, calendar alignment, and dummy regressors.

Data-interchange contract: UTF-8 comma-delimited CSV with a header row,
first column ``date`` in YYYY-MM-DD, remaining columns numeric, missing
cell = empty field.
"""

from __future__ import annotations

import csv
import datetime
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DataError

__all__ = [
    "ReturnMethod",
    "ReturnSeries",
    "RawTable",
    "Panel",
    "load_csv",
    "write_csv",
    "to_returns",
    "align",
    "build_dummies",
]

DUMMY_COLUMNS = ("monday", "april_2000", "september_2001")


class ReturnMethod(Enum):
    SIMPLE = "simple"
    LOG = "log"


def _as_dates(dates) -> np.ndarray:
    arr = np.asarray(dates, dtype="datetime64[D]")
    if arr.ndim != 1:
        raise DataError("dates must be one-dimensional")
    return arr


@dataclass(frozen=True)
class ReturnSeries:
    """Date-indexed percent returns (% per day) for one asset."""

    dates: np.ndarray
    values: np.ndarray
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "dates", _as_dates(self.dates))
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        if len(self.dates) != len(self.values):
            raise DataError("dates and values must have equal length")
        if len(self.values) < 1:
            raise DataError("return series needs at least 1 observation")
        if not np.all(np.isfinite(self.values)):
            raise DataError("return series contains non-finite values")
        if np.any(np.diff(self.dates.astype("int64")) <= 0):
            raise DataError("dates must be strictly increasing")

    def __len__(self) -> int:
        return len(self.values)


@dataclass
class RawTable:
    """Parsed CSV contents: dates in file order, NaN marks a missing cell."""

    dates: np.ndarray
    names: list[str]
    data: np.ndarray  # shape (rows, len(names))

    def __len__(self) -> int:
        return len(self.dates)

    def column(self, name: str) -> np.ndarray:
        try:
            return self.data[:, self.names.index(name)]
        except ValueError:
            raise DataError(f"no column named {name!r}") from None


@dataclass
class Panel:
    """Date-aligned matrix of named series; no missing cells."""

    dates: np.ndarray
    columns: dict[str, np.ndarray]
    dropped_rows: int = 0

    def __post_init__(self):
        self.dates = _as_dates(self.dates)
        n = len(self.dates)
        for name, col in self.columns.items():
            col = np.asarray(col, dtype=float)
            if len(col) != n:
                raise DataError(f"column {name!r} length {len(col)} != {n} dates")
            if not np.all(np.isfinite(col)):
                raise DataError(f"column {name!r} contains missing or non-finite cells")
            self.columns[name] = col

    def __len__(self) -> int:
        return len(self.dates)

    @property
    def names(self) -> list[str]:
        return list(self.columns)

    def column(self, name: str) -> np.ndarray:
        try:
            return self.columns[name]
        except KeyError:
            raise DataError(f"no column named {name!r}") from None

    def series(self, name: str) -> ReturnSeries:
        return ReturnSeries(self.dates, self.column(name), name=name)

    def with_columns(self, extra: dict[str, np.ndarray]) -> "Panel":
        merged = dict(self.columns)
        for name, col in extra.items():
            if name in merged:
                raise DataError(f"duplicate column name {name!r}")
            merged[name] = np.asarray(col, dtype=float)
        return Panel(self.dates, merged, dropped_rows=self.dropped_rows)


def load_csv(path, schema: Sequence[str] | None = None) -> RawTable:
    """Parse a CSV file into a RawTable, preserving row and column order.

    ``schema``, when given, lists column names that must be present.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"file not found: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        if len(header) < 2:
            raise DataError(f"{path}: header must contain a date column and data columns")
        if header[0].strip().lower() != "date":
            raise DataError(f"{path}: first column must be 'date', got {header[0]!r}")
        names = [h.strip() for h in header[1:]]
        if len(set(names)) != len(names):
            raise DataError(f"{path}: duplicate column names in header")

        dates: list[datetime.date] = []
        rows: list[list[float]] = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(names) + 1:
                raise DataError(f"{path}:{lineno}: expected {len(names) + 1} cells, got {len(row)}")
            try:
                dates.append(datetime.date.fromisoformat(row[0].strip()))
            except ValueError:
                raise DataError(f"{path}:{lineno}: malformed date {row[0]!r}") from None
            parsed = []
            for name, cell in zip(names, row[1:]):
                cell = cell.strip()
                if not cell:
                    parsed.append(np.nan)  # missing cell, row retained
                    continue
                try:
                    parsed.append(float(cell))
                except ValueError:
                    raise DataError(
                        f"{path}:{lineno}: non-numeric cell {cell!r} in column {name!r}"
                    ) from None
            rows.append(parsed)

    if not rows:
        raise DataError(f"{path}: no data rows")
    if schema is not None:
        missing = [c for c in schema if c not in names]
        if missing:
            raise DataError(f"{path}: missing required columns {missing}")
    return RawTable(
        dates=np.array(dates, dtype="datetime64[D]"),
        names=names,
        data=np.array(rows, dtype=float),
    )


def write_csv(path, table: RawTable) -> None:
    """Inverse of load_csv for numeric tables; NaN cells become empty fields."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["date"] + table.names)
        for i, d in enumerate(table.dates):
            cells = [str(d)]
            for v in table.data[i]:
                cells.append("" if np.isnan(v) else repr(float(v)))
            writer.writerow(cells)


def to_returns(prices, method: ReturnMethod = ReturnMethod.SIMPLE,
               dates=None, name: str = "") -> ReturnSeries:
    """Percent returns from a strictly positive level series; output length T-1.

    SIMPLE: 100*(P_t/P_{t-1} - 1).  LOG: 100*ln(P_t/P_{t-1}).
    """
    values = np.asarray(prices, dtype=float)
    if values.ndim != 1 or len(values) < 2:
        raise DataError("need at least 2 prices")
    if not np.all(np.isfinite(values)):
        raise DataError("price series contains non-finite values")
    if np.any(values <= 0):
        raise DataError("price series must be strictly positive")
    ratio = values[1:] / values[:-1]
    if method == ReturnMethod.SIMPLE:
        rets = 100.0 * (ratio - 1.0)
    elif method == ReturnMethod.LOG:
        rets = 100.0 * np.log(ratio)
    else:
        raise DataError(f"unknown return method {method!r}")
    if dates is None:
        # synthetic weekday calendar for callers that work off raw arrays
        dates = np.busday_offset(np.datetime64("1999-01-04"), np.arange(len(values)))
    dates = _as_dates(dates)
    if len(dates) != len(values):
        raise DataError("dates must match the price series length")
    return ReturnSeries(dates[1:], rets, name=name)


def align(*tables: RawTable | Panel) -> Panel:
    """Inner-join tables on dates; drop any row with a missing cell.

    The drop count (rows in the common calendar lost to missing cells) is
    reported on the returned Panel.
    """
    if not tables:
        raise DataError("align needs at least one table")

    names: list[str] = []
    prepared = []  # (sorted dates, {name: sorted column})
    for table in tables:
        if isinstance(table, Panel):
            t_dates, t_cols = table.dates, table.columns
        else:
            t_dates = table.dates
            t_cols = {n: table.data[:, j] for j, n in enumerate(table.names)}
        order = np.argsort(t_dates, kind="stable")
        sorted_dates = t_dates[order]
        if np.any(np.diff(sorted_dates.astype("int64")) == 0):
            raise DataError("duplicate dates within one table")
        for name in t_cols:
            if name in names:
                raise DataError(f"duplicate column name {name!r} across tables")
            names.append(name)
        prepared.append((sorted_dates, {n: np.asarray(c, dtype=float)[order] for n, c in t_cols.items()}))

    common = prepared[0][0]
    for sorted_dates, _ in prepared[1:]:
        common = np.intersect1d(common, sorted_dates)
    if len(common) == 0:
        raise DataError("no common dates across tables")

    columns: dict[str, np.ndarray] = {}
    for sorted_dates, cols in prepared:
        idx = np.searchsorted(sorted_dates, common)
        for name, col in cols.items():
            columns[name] = col[idx]

    stacked = np.column_stack(list(columns.values()))
    keep = ~np.isnan(stacked).any(axis=1)
    dropped = int((~keep).sum())
    if not keep.any():
        raise DataError("every common row has a missing cell")
    return Panel(
        dates=common[keep],
        columns={n: c[keep] for n, c in columns.items()},
        dropped_rows=dropped,
    )


def build_dummies(dates) -> dict[str, np.ndarray]:
    """Monday, April-2000 and September-2001 {0,1} indicator columns.

    The crash dummies mark every trading day inside the named calendar month.
    """
    dates = _as_dates(dates)
    days = dates.astype("int64")
    monday = ((days + 3) % 7 == 0).astype(float)  # 1970-01-01 was a Thursday
    months = dates.astype("datetime64[M]")
    april = (months == np.datetime64("2000-04")).astype(float)
    september = (months == np.datetime64("2001-09")).astype(float)
    return {
        "monday": monday,
        "april_2000": april,
        "september_2001": september,
    }
