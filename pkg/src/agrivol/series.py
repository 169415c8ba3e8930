"""Monthly time-series containers and the basic transforms built on them.

A :class:`MonthlySeries` is the carrier used everywhere in this package:
prices (INR/quintal), log returns, conditional volatility, precipitation
(mm), and maximum temperature (degrees C) are all date-indexed monthly
sequences distinguished only by their label. Values are stored densely;
a gap must be an explicit NaN, and the analysis transforms below refuse
series that still contain one (gap filling happens at ingestion).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError

__all__ = [
    "Month",
    "MonthlySeries",
    "DistrictPanel",
    "SummaryStats",
    "as_series",
    "aggregate_districts",
    "log_returns",
    "squared_log_returns",
    "summary_stats",
    "mape",
]


@dataclass(frozen=True, order=True)
class Month:
    """A calendar month (year, month), with simple integer arithmetic."""

    year: int
    month: int

    def __post_init__(self) -> None:
        if not 1 <= self.month <= 12:
            raise DataError(f"month must be in 1..12, got {self.month}")

    @property
    def index(self) -> int:
        """Months since 0000-01; contiguous months differ by exactly 1."""
        return self.year * 12 + (self.month - 1)

    @classmethod
    def from_index(cls, idx: int) -> "Month":
        return cls(idx // 12, idx % 12 + 1)

    @classmethod
    def parse(cls, text: str) -> "Month":
        """Parse 'YYYY-MM'."""
        try:
            y, m = text.strip().split("-")
            return cls(int(y), int(m))
        except (ValueError, AttributeError) as exc:
            raise DataError(f"cannot parse month {text!r}, expected YYYY-MM") from exc

    def shift(self, n: int) -> "Month":
        return Month.from_index(self.index + n)

    def __str__(self) -> str:
        return f"{self.year:04d}-{self.month:02d}"


@dataclass(frozen=True)
class MonthlySeries:
    """A contiguous monthly sequence of real values starting at ``start``."""

    start: Month
    values: np.ndarray
    label: str = ""

    def __post_init__(self) -> None:
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 1:
            raise DataError(f"values must be 1-d, got shape {vals.shape}")
        object.__setattr__(self, "values", vals)

    def __len__(self) -> int:
        return self.values.size

    @property
    def end(self) -> Month:
        if len(self) == 0:
            raise DataError("empty series has no end month")
        return self.start.shift(len(self) - 1)

    def months(self) -> list[Month]:
        return [self.start.shift(i) for i in range(len(self))]

    def has_missing(self) -> bool:
        return bool(np.isnan(self.values).any())

    def require_complete(self, context: str = "") -> None:
        if self.has_missing():
            where = f" in {context}" if context else ""
            raise DataError(f"series {self.label!r} contains unfilled gaps{where}")

    def slice_range(self, first: Month, last: Month) -> "MonthlySeries":
        """Restrict to [first, last]; both endpoints must lie inside the series."""
        i = first.index - self.start.index
        j = last.index - self.start.index
        if i < 0 or j >= len(self) or i > j:
            raise DataError(
                f"range {first}..{last} not covered by series {self.label!r} "
                f"({self.start}..{self.end})"
            )
        return MonthlySeries(first, self.values[i : j + 1], self.label)

    def with_values(self, values: np.ndarray, label: str | None = None) -> "MonthlySeries":
        return MonthlySeries(self.start, values, self.label if label is None else label)


def as_series(x, label: str = "") -> MonthlySeries:
    """Wrap a bare 1-d array as a MonthlySeries (start 2000-01) or pass one through."""
    if isinstance(x, MonthlySeries):
        return x
    return MonthlySeries(Month(2000, 1), np.asarray(x, dtype=float), label)


def _values(x) -> np.ndarray:
    return x.values if isinstance(x, MonthlySeries) else np.asarray(x, dtype=float)


@dataclass
class DistrictPanel:
    """Per-district monthly series over one region, with site coordinates.

    All member series must share start month and length once aligned;
    coordinates (lat, lon in degrees) are required for every district
    because the spatial stage consumes them.
    """

    region: str
    series: dict[str, MonthlySeries] = field(default_factory=dict)
    coords: dict[str, tuple[float, float]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        missing = sorted(set(self.series) - set(self.coords))
        if missing:
            raise DataError(f"districts without coordinates: {missing}")

    @property
    def districts(self) -> list[str]:
        return sorted(self.series)

    def is_aligned(self) -> bool:
        starts = {s.start for s in self.series.values()}
        lengths = {len(s) for s in self.series.values()}
        return len(starts) <= 1 and len(lengths) <= 1

    def require_aligned(self) -> None:
        if not self.series:
            raise DataError(f"panel {self.region!r} is empty")
        if not self.is_aligned():
            raise DataError(f"panel {self.region!r} contains misaligned series")


@dataclass(frozen=True)
class SummaryStats:
    """Moment summary of one series.

    ``std`` is the sample standard deviation (n-1 denominator); skewness and
    excess kurtosis use 1/n central moments, the usual econometrics mix, so a
    normal sample has excess kurtosis near 0.
    """

    n: int
    mean: float
    std: float
    min: float
    max: float
    skewness: float
    excess_kurtosis: float

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "mean": self.mean,
            "std": self.std,
            "min": self.min,
            "max": self.max,
            "skewness": self.skewness,
            "excess_kurtosis": self.excess_kurtosis,
            "conventions": "std: sample (n-1); skew/kurtosis: 1/n central moments, excess",
        }


def aggregate_districts(
    panel: DistrictPanel,
) -> tuple[MonthlySeries, MonthlySeries, MonthlySeries]:
    """Average the panel across districts into one state-level series.

    Returns (mean, lower, upper) where the band is mean +/- 2 cross-district
    sample standard deviations per month (zero width for a single district).
    """
    panel.require_aligned()
    names = panel.districts
    for name in names:
        panel.series[name].require_complete("aggregate_districts")
        if len(panel.series[name]) == 0:
            raise DataError(f"district {name!r} has an empty series")
    mat = np.vstack([panel.series[name].values for name in names])
    start = panel.series[names[0]].start
    mean = mat.mean(axis=0)
    if mat.shape[0] > 1:
        s = mat.std(axis=0, ddof=1)
    else:
        s = np.zeros(mat.shape[1])
    label = f"{panel.region} mean"
    return (
        MonthlySeries(start, mean, label),
        MonthlySeries(start, mean - 2.0 * s, f"{panel.region} mean-2sd"),
        MonthlySeries(start, mean + 2.0 * s, f"{panel.region} mean+2sd"),
    )


def log_returns(prices: MonthlySeries) -> MonthlySeries:
    """r_t = ln(P_t) - ln(P_{t-1}); output is one month shorter than the input."""
    prices.require_complete("log_returns")
    if len(prices) < 2:
        raise DataError("log_returns needs at least two prices")
    if np.any(prices.values <= 0):
        raise DataError(f"nonpositive price in series {prices.label!r}")
    r = np.diff(np.log(prices.values))
    return MonthlySeries(prices.start.shift(1), r, f"{prices.label} log returns".strip())


def squared_log_returns(prices: MonthlySeries) -> MonthlySeries:
    r = log_returns(prices)
    return r.with_values(r.values**2, f"{prices.label} squared log returns".strip())


def summary_stats(series) -> SummaryStats:
    """Count, mean, sample std, extrema, skewness and excess kurtosis.

    Raises on zero variance (skew/kurtosis undefined) rather than emitting NaN.
    """
    x = _values(series)
    if np.isnan(x).any():
        raise DataError("summary_stats requires a gap-free series")
    n = x.size
    if n < 4:
        raise DataError(f"summary_stats needs at least 4 observations, got {n}")
    mean = float(x.mean())
    d = x - mean
    m2 = float(np.mean(d**2))
    if m2 <= 0.0:
        raise DataError("zero variance: skewness and kurtosis are undefined")
    m3 = float(np.mean(d**3))
    m4 = float(np.mean(d**4))
    return SummaryStats(
        n=n,
        mean=mean,
        std=float(x.std(ddof=1)),
        min=float(x.min()),
        max=float(x.max()),
        skewness=m3 / m2**1.5,
        excess_kurtosis=m4 / m2**2 - 3.0,
    )


def mape(actual, predicted) -> float:
    """Mean absolute percentage error as a fraction: (1/n) sum |(a-p)/a|."""
    a = _values(actual)
    p = _values(predicted)
    if a.size != p.size:
        raise DataError(f"length mismatch: actual {a.size}, predicted {p.size}")
    if a.size == 0:
        raise DataError("mape needs at least one observation")
    if np.any(a == 0.0):
        raise DataError("mape is undefined when an actual value is 0")
    return float(np.mean(np.abs((a - p) / a)))
