"""Loading, validation, splitting and summary of the monthly yield/macro panel.

On-disk format: UTF-8 CSV, '.' decimal separator, ISO month stamps (YYYY-MM).
Lines starting with '#' are treated as comments so that files written by the
CLI (which carry a provenance header) load back unchanged.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError

MISSING_TOKENS = {"", "na", "nan", "null", "."}
MISSING_POLICIES = ("reject", "interpolate")


def _month_index(stamp: str) -> int:
    """'YYYY-MM' -> months since year 0; raises ValueError on bad format."""
    parts = stamp.strip().split("-")
    if len(parts) != 2:
        raise ValueError(f"not a YYYY-MM month stamp: {stamp!r}")
    year, month = int(parts[0]), int(parts[1])
    if not 1 <= month <= 12:
        raise ValueError(f"month out of range in {stamp!r}")
    return year * 12 + (month - 1)


def month_range(start: str, periods: int) -> tuple[str, ...]:
    """Consecutive month stamps beginning at `start`."""
    base = _month_index(start)
    out = []
    for i in range(periods):
        ym = base + i
        out.append(f"{ym // 12:04d}-{ym % 12 + 1:02d}")
    return tuple(out)


@dataclass(frozen=True)
class YieldPanel:
    """Dated matrix of yields by maturity plus optional macro columns.

    dates: consecutive calendar months, strictly increasing.
    maturities: months, strictly increasing, all >= 1.
    yields: T x M, percent per annum, no missing values.
    macro: T x n_macro aligned to dates (empty when no macro columns).
    """

    dates: tuple[str, ...]
    maturities: tuple[int, ...]
    yields: np.ndarray
    macro_names: tuple[str, ...] = ()
    macro: np.ndarray = field(default_factory=lambda: np.empty((0, 0)))

    def __post_init__(self):
        yields = np.asarray(self.yields, dtype=float)
        object.__setattr__(self, "yields", yields)
        macro = np.asarray(self.macro, dtype=float)
        if macro.size == 0 and not self.macro_names:
            macro = np.empty((len(self.dates), 0))
        object.__setattr__(self, "macro", macro)

        idx = [_month_index(d) for d in self.dates]
        for a, b, d in zip(idx, idx[1:], self.dates[1:]):
            if b == a:
                raise DataError(f"duplicate month {d}")
            if b != a + 1:
                raise DataError(f"non-consecutive month {d}")
        mats = self.maturities
        if any(m < 1 for m in mats):
            raise DataError("maturities must all be >= 1 month")
        if any(b <= a for a, b in zip(mats, mats[1:])):
            raise DataError("maturities must be strictly increasing")
        if yields.shape != (len(self.dates), len(mats)):
            raise DataError(
                f"yields shape {yields.shape} does not match "
                f"{len(self.dates)} dates x {len(mats)} maturities"
            )
        if self.macro.shape != (len(self.dates), len(self.macro_names)):
            raise DataError("macro shape does not match dates x macro_names")
        if not np.all(np.isfinite(yields)) or not np.all(np.isfinite(self.macro)):
            raise DataError("panel contains non-finite values after load")
        yields.flags.writeable = False
        self.macro.flags.writeable = False

    @property
    def n_dates(self) -> int:
        return len(self.dates)

    @property
    def column_names(self) -> tuple[str, ...]:
        return tuple(str(m) for m in self.maturities) + self.macro_names

    def values(self) -> np.ndarray:
        """All numeric columns, yields first then macro."""
        return np.hstack([self.yields, self.macro])

    def yield_at(self, maturity: int) -> np.ndarray:
        if maturity not in self.maturities:
            raise ValueError(f"maturity {maturity} months not in panel")
        return self.yields[:, self.maturities.index(maturity)]

    def slice_rows(self, start: int, stop: int) -> "YieldPanel":
        return YieldPanel(
            dates=self.dates[start:stop],
            maturities=self.maturities,
            yields=self.yields[start:stop].copy(),
            macro_names=self.macro_names,
            macro=self.macro[start:stop].copy(),
        )


@dataclass(frozen=True)
class SplitPanel:
    train: YieldPanel
    test: YieldPanel


@dataclass(frozen=True)
class DescriptiveStats:
    columns: tuple[str, ...]
    minimum: np.ndarray
    median: np.ndarray
    mean: np.ndarray
    maximum: np.ndarray
    sd: np.ndarray


@dataclass(frozen=True)
class PanelSchema:
    """Mapping of logical roles to CSV column names.

    Config keys: `date`, `maturity.<months>`, `macro.<name>`, optional
    `missing` policy (reject | interpolate).
    """

    date_column: str
    maturity_columns: dict[int, str]
    macro_columns: dict[str, str] = field(default_factory=dict)
    missing: str = "reject"

    def __post_init__(self):
        if not self.maturity_columns:
            raise ConfigError("schema needs at least one maturity column")
        if self.missing not in MISSING_POLICIES:
            raise ConfigError(
                f"missing policy {self.missing!r} not one of {MISSING_POLICIES}"
            )

    @classmethod
    def from_mapping(cls, mapping: dict[str, str]) -> "PanelSchema":
        date_col = None
        maturities: dict[int, str] = {}
        macro: dict[str, str] = {}
        missing = "reject"
        for key, value in mapping.items():
            if key == "date":
                date_col = value
            elif key == "missing":
                missing = value
            elif key.startswith("maturity."):
                try:
                    months = int(key.split(".", 1)[1])
                except ValueError:
                    raise ConfigError(f"bad maturity key {key!r}")
                maturities[months] = value
            elif key.startswith("macro."):
                macro[key.split(".", 1)[1]] = value
            else:
                raise ConfigError(f"unknown schema key {key!r}")
        if date_col is None:
            raise ConfigError("schema is missing the 'date' entry")
        return cls(date_col, maturities, macro, missing)

    @classmethod
    def default_for(cls, panel: YieldPanel) -> "PanelSchema":
        """Schema matching the canonical column layout written by save_panel."""
        return cls(
            date_column="date",
            maturity_columns={m: str(m) for m in panel.maturities},
            macro_columns={name: name for name in panel.macro_names},
        )


def _read_rows(path: Path) -> tuple[list[str], list[tuple[int, list[str]]]]:
    header: list[str] | None = None
    rows: list[tuple[int, list[str]]] = []
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or (row[0].lstrip().startswith("#")):
                continue
            if header is None:
                header = [c.strip() for c in row]
            else:
                rows.append((lineno, row))
    if header is None:
        raise DataError(f"{path}: no header row found")
    return header, rows


def _interpolate_column(values: list[float | None], name: str) -> list[float]:
    """Linear interpolation across time within a column; edge gaps rejected."""
    n = len(values)
    known = [i for i, v in enumerate(values) if v is not None]
    if not known:
        raise DataError(f"column {name!r} has no observed values to interpolate")
    if known[0] != 0 or known[-1] != n - 1:
        raise DataError(
            f"column {name!r} has missing values at the panel edge; "
            "cannot interpolate"
        )
    out = list(values)
    for lo, hi in zip(known, known[1:]):
        for i in range(lo + 1, hi):
            frac = (i - lo) / (hi - lo)
            out[i] = values[lo] * (1 - frac) + values[hi] * frac
    return [float(v) for v in out]


def load_panel(path: str | Path, schema: PanelSchema) -> YieldPanel:
    """Load and validate a yield/macro panel from CSV.

    Raises ConfigError for schema problems, DataError (with row/column
    location) for unparseable or missing cells under the reject policy.
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"input file does not exist: {path}")
    header, rows = _read_rows(path)
    col_index = {name: i for i, name in enumerate(header)}

    wanted = [schema.date_column]
    wanted += [schema.maturity_columns[m] for m in sorted(schema.maturity_columns)]
    wanted += list(schema.macro_columns.values())
    for name in wanted:
        if name not in col_index:
            raise ConfigError(f"{path}: column {name!r} not found in header")

    maturities = tuple(sorted(schema.maturity_columns))
    value_cols = [schema.maturity_columns[m] for m in maturities]
    macro_names = tuple(schema.macro_columns)
    value_cols += [schema.macro_columns[n] for n in macro_names]

    dates: list[str] = []
    raw: dict[str, list[float | None]] = {c: [] for c in value_cols}
    seen: dict[int, str] = {}
    for lineno, row in rows:
        cell = row[col_index[schema.date_column]].strip()
        try:
            idx = _month_index(cell)
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: bad date {cell!r}: {exc}")
        if idx in seen:
            raise DataError(f"{path}:{lineno}: duplicate month {cell}")
        seen[idx] = cell
        dates.append(cell)
        for col in value_cols:
            text = row[col_index[col]].strip() if col_index[col] < len(row) else ""
            if text.lower() in MISSING_TOKENS:
                if schema.missing == "reject":
                    raise DataError(
                        f"{path}:{lineno}: missing value in column {col!r}"
                    )
                raw[col].append(None)
                continue
            try:
                raw[col].append(float(text))
            except ValueError:
                raise DataError(
                    f"{path}:{lineno}: unparseable value {text!r} in column {col!r}"
                )

    if not dates:
        raise DataError(f"{path}: no data rows")
    order = np.argsort([_month_index(d) for d in dates])
    dates = [dates[i] for i in order]

    columns: dict[str, np.ndarray] = {}
    for col in value_cols:
        vals = [raw[col][i] for i in order]
        if any(v is None for v in vals):
            vals = _interpolate_column(vals, col)
        columns[col] = np.asarray(vals, dtype=float)

    n_mat = len(maturities)
    yields = np.column_stack([columns[c] for c in value_cols[:n_mat]])
    macro = (
        np.column_stack([columns[c] for c in value_cols[n_mat:]])
        if macro_names
        else np.empty((len(dates), 0))
    )
    return YieldPanel(tuple(dates), maturities, yields, macro_names, macro)


def save_panel(panel: YieldPanel, path: str | Path, header_comment: str = "") -> None:
    """Write a panel in the canonical CSV layout (date, maturities, macro)."""
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        writer = csv.writer(fh)
        writer.writerow(["date", *[str(m) for m in panel.maturities], *panel.macro_names])
        values = panel.values()
        for i, date in enumerate(panel.dates):
            writer.writerow([date, *[repr(v) for v in values[i]]])


def split_panel(panel: YieldPanel, train_fraction: float = 0.85) -> SplitPanel:
    """First floor(train_fraction * T) rows to train, remainder to test."""
    if not 0.0 < train_fraction < 1.0:
        raise ValueError(f"train_fraction must lie in (0, 1), got {train_fraction}")
    t = panel.n_dates
    if t < 4:
        raise ValueError(f"panel too short to split (T={t} < 4)")
    n_train = math.floor(train_fraction * t)
    if n_train < 2:
        raise ValueError(f"train split would have {n_train} < 2 rows")
    return SplitPanel(panel.slice_rows(0, n_train), panel.slice_rows(n_train, t))


def describe(panel: YieldPanel) -> DescriptiveStats:
    """Per-column min/median/mean/max and sample (T-1) standard deviation."""
    values = panel.values()
    if values.shape[0] < 1:
        raise ValueError("cannot describe an empty panel")
    sd = (
        values.std(axis=0, ddof=1)
        if values.shape[0] > 1
        else np.zeros(values.shape[1])
    )
    return DescriptiveStats(
        columns=panel.column_names,
        minimum=values.min(axis=0),
        median=np.median(values, axis=0),
        mean=values.mean(axis=0),
        maximum=values.max(axis=0),
        sd=sd,
    )


def save_stats(stats: DescriptiveStats, path: str | Path, header_comment: str = "") -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        writer = csv.writer(fh)
        writer.writerow(["column", "min", "median", "mean", "max", "sd"])
        for i, name in enumerate(stats.columns):
            writer.writerow(
                [
                    name,
                    repr(float(stats.minimum[i])),
                    repr(float(stats.median[i])),
                    repr(float(stats.mean[i])),
                    repr(float(stats.maximum[i])),
                    repr(float(stats.sd[i])),
                ]
            )
