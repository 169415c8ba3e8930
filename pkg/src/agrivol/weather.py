"""Monthly-point weather retrieval with an on-disk response cache.

Targets the NASA POWER monthly point API shape: one GET per (point, range)
returning JSON with per-variable month maps keyed ``YYYYMM``. Key ``13`` is
the annual aggregate and is skipped; the provider's -999 sentinel becomes an
explicit missing marker. Responses are cached on disk keyed by
(lat, lon, range, variables); a cache hit never touches the network, and
cache writes are atomic (write-temp-then-rename).
"""
from __future__ import annotations

import csv
import hashlib
import json
import logging
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError
from .series import Month, MonthlySeries

__all__ = [
    "WeatherRecord",
    "fetch_weather",
    "weather_to_series",
    "read_weather_csv",
    "write_weather_csv",
    "POWER_ENDPOINT",
    "PRECIPITATION_VAR",
    "TASMAX_VAR",
]

log = logging.getLogger(__name__)

POWER_ENDPOINT = "https://power.larc.nasa.gov/api/temporal/monthly/point"
# precipitation (mm) and maximum temperature at 2 meters above ground (deg C)
PRECIPITATION_VAR = "PRECTOTCORR"
TASMAX_VAR = "T2M_MAX"
MISSING_SENTINEL = -999.0


@dataclass(frozen=True)
class WeatherRecord:
    lat: float
    lon: float
    month: Month
    precipitation: float | None  # mm; None = provider missing marker
    tasmax: float | None  # deg C

    def __post_init__(self) -> None:
        if self.precipitation is not None and self.precipitation < 0.0:
            raise DataError(f"negative precipitation {self.precipitation} at {self.month}")
        if self.tasmax is not None and not -60.0 < self.tasmax < 60.0:
            raise DataError(f"implausible maximum temperature {self.tasmax} at {self.month}")


def _cache_path(cache_dir: Path, lat: float, lon: float, start: Month, end: Month,
                variables: tuple[str, ...]) -> Path:
    key = f"{lat:.4f},{lon:.4f},{start},{end},{','.join(variables)}"
    digest = hashlib.sha256(key.encode()).hexdigest()
    return cache_dir / f"power_{digest}.json"


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_suffix(".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def _sentinel_to_none(value: float) -> float | None:
    return None if value <= MISSING_SENTINEL else float(value)


def _parse_power_body(body: dict, lat: float, lon: float) -> list[WeatherRecord]:
    try:
        params = body["properties"]["parameter"]
        pr_map = params[PRECIPITATION_VAR]
        tx_map = params[TASMAX_VAR]
    except (KeyError, TypeError) as exc:
        raise DataError(f"malformed weather response body: missing {exc}") from exc
    records = []
    for key in sorted(pr_map):
        year, mon = int(key[:4]), int(key[4:])
        if mon == 13:  # provider's annual aggregate pseudo-month
            continue
        month = Month(year, mon)
        records.append(
            WeatherRecord(
                lat=lat,
                lon=lon,
                month=month,
                precipitation=_sentinel_to_none(float(pr_map[key])),
                tasmax=_sentinel_to_none(float(tx_map.get(key, MISSING_SENTINEL))),
            )
        )
    if not records:
        raise DataError("weather response contains no monthly values")
    return records


def fetch_weather(
    lat: float,
    lon: float,
    start: Month,
    end: Month,
    cache_dir: str | Path,
    session=None,
    endpoint: str = POWER_ENDPOINT,
) -> list[WeatherRecord]:
    """Fetch monthly precipitation and 2-meter maximum temperature for a point.

    ``session`` only needs a ``get(url, params=..., timeout=...)`` method, so
    tests can substitute a stub; by default a requests session is created.
    """
    cache_dir = Path(cache_dir)
    cache_dir.mkdir(parents=True, exist_ok=True)
    variables = (PRECIPITATION_VAR, TASMAX_VAR)
    path = _cache_path(cache_dir, lat, lon, start, end, variables)
    if path.exists():
        body = json.loads(path.read_text())
        return _parse_power_body(body, lat, lon)

    if session is None:
        import requests

        session = requests.Session()
    params = {
        "parameters": ",".join(variables),
        "community": "AG",
        "latitude": f"{lat:.4f}",
        "longitude": f"{lon:.4f}",
        "start": str(start.year),
        "end": str(end.year),
        "format": "JSON",
    }
    try:
        response = session.get(endpoint, params=params, timeout=60)
    except Exception as exc:
        raise DataError(f"weather fetch failed with no cache available: {exc}") from exc
    status = getattr(response, "status_code", 200)
    if status != 200:
        raise DataError(f"weather endpoint returned HTTP {status}")
    try:
        body = response.json()
    except ValueError as exc:
        raise DataError(f"weather response is not JSON: {exc}") from exc
    records = _parse_power_body(body, lat, lon)  # validate before caching
    _atomic_write(path, json.dumps(body, sort_keys=True))
    log.info("cached weather for (%.4f, %.4f) %s..%s", lat, lon, start, end)
    wanted = [r for r in records if start.index <= r.month.index <= end.index]
    return wanted if wanted else records


def weather_to_series(records: list[WeatherRecord]) -> tuple[MonthlySeries, MonthlySeries]:
    """Record list into (precipitation, tasmax) series with NaN gap markers."""
    if not records:
        raise DataError("no weather records")
    ordered = sorted(records, key=lambda r: r.month.index)
    lo = ordered[0].month.index
    hi = ordered[-1].month.index
    pr = np.full(hi - lo + 1, np.nan)
    tx = np.full(hi - lo + 1, np.nan)
    for rec in ordered:
        if rec.precipitation is not None:
            pr[rec.month.index - lo] = rec.precipitation
        if rec.tasmax is not None:
            tx[rec.month.index - lo] = rec.tasmax
    start = Month.from_index(lo)
    return (
        MonthlySeries(start, pr, "precipitation"),
        MonthlySeries(start, tx, "tasmax"),
    )


def read_weather_csv(path: str | Path) -> tuple[MonthlySeries, MonthlySeries]:
    """Offline weather input: month,precipitation,tasmax rows ('' = missing)."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"weather file not found: {path}")
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        fields = [f.strip().lower() for f in reader.fieldnames or []]
        if not {"month", "precipitation", "tasmax"}.issubset(fields):
            raise DataError(f"{path} must have columns month,precipitation,tasmax")
        for row in reader:
            row = {k.strip().lower(): v for k, v in row.items()}
            month = Month.parse(row["month"])
            pr = float(row["precipitation"]) if row["precipitation"].strip() else None
            tx = float(row["tasmax"]) if row["tasmax"].strip() else None
            rows.append(WeatherRecord(lat=np.nan, lon=np.nan, month=month,
                                      precipitation=pr, tasmax=tx))
    return weather_to_series(rows)


def write_weather_csv(path: str | Path, precip: MonthlySeries, tasmax: MonthlySeries) -> None:
    if len(precip) != len(tasmax) or precip.start != tasmax.start:
        raise DataError("precipitation and tasmax series are not aligned")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["month", "precipitation", "tasmax"])
        for i, month in enumerate(precip.months()):
            pr = "" if np.isnan(precip.values[i]) else repr(float(precip.values[i]))
            tx = "" if np.isnan(tasmax.values[i]) else repr(float(tasmax.values[i]))
            writer.writerow([str(month), pr, tx])
