"""Price-panel ingestion: CSV parsing, panel assembly, alignment, imputation.

The price CSV schema is strict and documented:

    state,district,commodity,year,month,modal_price

AGMARKNET-style exports vary wildly, so normalization to this schema happens
outside the package boundary; see the README for a converter example. Rows
that fail to parse are collected into an error report, never silently
dropped: row count in == records out + error rows, always.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError
from .series import DistrictPanel, Month, MonthlySeries

__all__ = [
    "RawPriceRecord",
    "IngestResult",
    "read_price_csv",
    "read_coords_csv",
    "build_panel",
    "linear_fill",
    "align_and_impute",
]

log = logging.getLogger(__name__)

PRICE_COLUMNS = ["state", "district", "commodity", "year", "month", "modal_price"]


@dataclass(frozen=True)
class RawPriceRecord:
    state: str
    district: str
    commodity: str
    month: Month
    modal_price: float

    def __post_init__(self) -> None:
        if not self.modal_price > 0.0:
            raise DataError(f"modal price must be positive, got {self.modal_price}")


@dataclass
class IngestResult:
    records: list[RawPriceRecord]
    errors: list[dict]
    n_rows: int

    def write_error_report(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["row", "reason", "raw"])
            for err in self.errors:
                writer.writerow([err["row"], err["reason"], err["raw"]])


def read_price_csv(path: str | Path) -> IngestResult:
    """Parse the documented price schema; malformed rows go to the error report."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"price file not found: {path}")
    records: list[RawPriceRecord] = []
    errors: list[dict] = []
    n_rows = 0
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path} is empty") from None
        header = [h.strip().lower() for h in header]
        missing = [c for c in PRICE_COLUMNS if c not in header]
        if missing:
            raise DataError(f"{path} is missing required columns: {missing}")
        idx = {c: header.index(c) for c in PRICE_COLUMNS}
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            n_rows += 1
            try:
                month = Month(int(row[idx["year"]]), int(row[idx["month"]]))
                price = float(row[idx["modal_price"]])
                records.append(
                    RawPriceRecord(
                        state=row[idx["state"]].strip(),
                        district=row[idx["district"]].strip(),
                        commodity=row[idx["commodity"]].strip(),
                        month=month,
                        modal_price=price,
                    )
                )
            except (ValueError, IndexError, DataError) as exc:
                errors.append({"row": line_no, "reason": str(exc), "raw": ",".join(row)})
    return IngestResult(records=records, errors=errors, n_rows=n_rows)


def read_coords_csv(path: str | Path) -> dict[str, tuple[float, float]]:
    """district_id,lat,lon rows into a coordinate map."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"coordinates file not found: {path}")
    coords: dict[str, tuple[float, float]] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        fields = [f.strip().lower() for f in reader.fieldnames or []]
        if not {"district_id", "lat", "lon"}.issubset(fields):
            raise DataError(f"{path} must have columns district_id,lat,lon")
        for row in reader:
            row = {k.strip().lower(): v for k, v in row.items()}
            try:
                coords[row["district_id"].strip()] = (float(row["lat"]), float(row["lon"]))
            except (ValueError, AttributeError) as exc:
                raise DataError(f"bad coordinate row {row}: {exc}") from exc
    if not coords:
        raise DataError(f"{path} contains no coordinate rows")
    return coords


def build_panel(
    records: list[RawPriceRecord],
    coords: dict[str, tuple[float, float]],
    state: str | None = None,
    commodity: str | None = None,
    monthly_stat: str = "close",
) -> DistrictPanel:
    """Group records into per-district monthly series with explicit gaps.

    Several quotes may land in one month; ``monthly_stat`` picks the last one
    in file order ("close") or their mean ("mean"). Months with no quote
    inside a district's observed span become NaN markers for the imputation
    stage.
    """
    if monthly_stat not in ("close", "mean"):
        raise DataError(f"monthly_stat must be 'close' or 'mean', got {monthly_stat!r}")
    chosen = [
        r for r in records
        if (state is None or r.state == state) and (commodity is None or r.commodity == commodity)
    ]
    if not chosen:
        raise DataError(f"no records match state={state!r} commodity={commodity!r}")
    by_district: dict[str, dict[int, list[float]]] = {}
    for rec in chosen:
        by_district.setdefault(rec.district, {}).setdefault(rec.month.index, []).append(rec.modal_price)

    series: dict[str, MonthlySeries] = {}
    for district, quotes in sorted(by_district.items()):
        lo = min(quotes)
        hi = max(quotes)
        values = np.full(hi - lo + 1, np.nan)
        for m_idx, prices in quotes.items():
            values[m_idx - lo] = prices[-1] if monthly_stat == "close" else float(np.mean(prices))
        series[district] = MonthlySeries(Month.from_index(lo), values, district)
    region = state if state is not None else (chosen[0].state or "region")
    missing_coords = sorted(set(series) - set(coords))
    if missing_coords:
        raise DataError(f"no coordinates for districts: {missing_coords}")
    panel_coords = {d: coords[d] for d in series}
    return DistrictPanel(region, series, panel_coords)


def linear_fill(series: MonthlySeries, max_gap: int = 2) -> MonthlySeries | None:
    """Fill interior NaN runs of length <= max_gap by linear interpolation.

    Leading/trailing gaps are never filled (no extrapolation); a longer
    interior run makes the series unusable, signalled by returning None.
    """
    vals = series.values.copy()
    isnan = np.isnan(vals)
    if not isnan.any():
        return series
    finite = np.flatnonzero(~isnan)
    if finite.size == 0:
        return None
    first, last = finite[0], finite[-1]
    run_start = None
    for t in range(first, last + 1):
        if isnan[t] and run_start is None:
            run_start = t
        elif not isnan[t] and run_start is not None:
            run_len = t - run_start
            if run_len > max_gap:
                return None
            left = vals[run_start - 1]
            right = vals[t]
            for j in range(run_len):
                frac = (j + 1) / (run_len + 1)
                vals[run_start + j] = left + frac * (right - left)
            run_start = None
    trimmed = MonthlySeries(series.start.shift(int(first)), vals[first : last + 1], series.label)
    return trimmed


def align_and_impute(
    panel: DistrictPanel,
    weather: dict[str, MonthlySeries],
    date_range: tuple[Month, Month] | None = None,
    max_gap: int = 2,
) -> tuple[DistrictPanel, dict[str, MonthlySeries]]:
    """Trim everything to the common monthly range and fill small gaps.

    The common range intersects the requested range, every weather series,
    and every district's observed span. Districts with an unfillable gap
    (interior run > max_gap, or missing at the range edge) are excluded with
    a logged reason.
    """
    filled: dict[str, MonthlySeries] = {}
    for name in panel.districts:
        result = linear_fill(panel.series[name], max_gap=max_gap)
        if result is None:
            log.warning("excluding district %s: interior gap longer than %d months", name, max_gap)
            continue
        filled[name] = result
    if not filled:
        raise DataError("no district survived gap filling")

    lo = max(s.start.index for s in filled.values())
    hi = min(s.end.index for s in filled.values())
    for wseries in weather.values():
        lo = max(lo, wseries.start.index)
        hi = min(hi, wseries.end.index)
    if date_range is not None:
        lo = max(lo, date_range[0].index)
        hi = min(hi, date_range[1].index)
    if lo > hi:
        raise DataError("empty overlap between prices, weather, and the requested range")
    first, last = Month.from_index(lo), Month.from_index(hi)

    out_series: dict[str, MonthlySeries] = {}
    for name, s in filled.items():
        cut = s.slice_range(first, last)
        if cut.has_missing():
            log.warning("excluding district %s: missing months inside the common range", name)
            continue
        out_series[name] = cut
    if not out_series:
        raise DataError("no district covers the common range")
    out_weather = {}
    for key, wseries in weather.items():
        cut = wseries.slice_range(first, last)
        filled_w = linear_fill(cut, max_gap=max_gap)
        if filled_w is None or filled_w.has_missing() or len(filled_w) != len(cut):
            raise DataError(f"weather series {key!r} has unfillable gaps in the common range")
        out_weather[key] = filled_w
    coords = {d: panel.coords[d] for d in out_series}
    return DistrictPanel(panel.region, out_series, coords), out_weather
