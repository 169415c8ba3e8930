"""Pipeline configuration: a plain-text key/value file with sections.

The format is INI-style (configparser); every key has a default, so a
minimal config only names its input files. Paths are resolved relative to
the config file's directory. CLI flags override config keys.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

from .errors import DataError
from .series import Month

__all__ = [
    "DataSettings",
    "EgarchSettings",
    "TestSettings",
    "SarimaxSettings",
    "LstmSettings",
    "SpatialSettings",
    "PipelineConfig",
    "load_config",
]


@dataclass
class DataSettings:
    price_csv: Path = Path("prices.csv")
    coords_csv: Path = Path("coords.csv")
    weather_csv: Path | None = None
    weather_lat: float | None = None
    weather_lon: float | None = None
    cache_dir: Path = Path("weather_cache")
    state: str | None = None
    commodity: str | None = None
    start: Month = Month(2012, 1)
    end: Month = Month(2024, 10)
    monthly_stat: str = "close"

    def __post_init__(self) -> None:
        if self.start > self.end:
            raise DataError(f"empty date range {self.start}..{self.end}")
        if self.weather_csv is None and (self.weather_lat is None or self.weather_lon is None):
            raise DataError("either weather_csv or weather_lat/weather_lon is required")


@dataclass
class EgarchSettings:
    p: int = 1
    o: int = 1
    q: int = 1


@dataclass
class TestSettings:
    ccf_max_lag: int = 24
    granger_max_lag: int = 12


@dataclass
class SarimaxSettings:
    # "default" runs the standard AIC grid; "p,d,q,P,D,Q[,s]" pins one order
    grid: str = "default"


@dataclass
class LstmSettings:
    hidden_dim: int = 16
    lookback: int = 12
    epochs: int = 500
    learning_rate: float = 0.01


@dataclass
class SpatialSettings:
    rho: float = 0.9
    n_iter: int = 10_000
    burn_in: int = 2_000
    thin: int = 10
    knn: int = 2
    cell_size: float = 0.01
    padding: float = 0.25
    idw_power: float = 2.0
    write_json: bool = False


@dataclass
class PipelineConfig:
    data: DataSettings
    egarch: EgarchSettings = field(default_factory=EgarchSettings)
    tests: TestSettings = field(default_factory=TestSettings)
    sarimax: SarimaxSettings = field(default_factory=SarimaxSettings)
    lstm: LstmSettings = field(default_factory=LstmSettings)
    spatial: SpatialSettings = field(default_factory=SpatialSettings)
    test_months: int = 62
    seed: int = 0
    out_dir: Path = Path("out")


def _get(parser: configparser.ConfigParser, section: str, key: str, cast, default):
    if not parser.has_option(section, key):
        return default
    raw = parser.get(section, key).strip()
    if raw == "":
        return default
    try:
        return cast(raw)
    except (ValueError, DataError) as exc:
        raise DataError(f"config [{section}] {key} = {raw!r}: {exc}") from exc


def _bool(raw: str) -> bool:
    lowered = raw.lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


def load_config(
    path: str | Path,
    seed: int | None = None,
    out_dir: str | Path | None = None,
) -> PipelineConfig:
    """Read the config file; ``seed``/``out_dir`` arguments override its keys."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"config file not found: {path}")
    parser = configparser.ConfigParser()
    try:
        parser.read(path)
    except configparser.Error as exc:
        raise DataError(f"cannot parse config {path}: {exc}") from exc
    base = path.parent

    def respath(raw: str) -> Path:
        p = Path(raw)
        return p if p.is_absolute() else base / p

    data = DataSettings(
        price_csv=_get(parser, "data", "price_csv", respath, base / "prices.csv"),
        coords_csv=_get(parser, "data", "coords_csv", respath, base / "coords.csv"),
        weather_csv=_get(parser, "data", "weather_csv", respath, None),
        weather_lat=_get(parser, "data", "weather_lat", float, None),
        weather_lon=_get(parser, "data", "weather_lon", float, None),
        cache_dir=_get(parser, "data", "cache_dir", respath, base / "weather_cache"),
        state=_get(parser, "data", "state", str, None),
        commodity=_get(parser, "data", "commodity", str, None),
        start=_get(parser, "data", "start", Month.parse, Month(2012, 1)),
        end=_get(parser, "data", "end", Month.parse, Month(2024, 10)),
        monthly_stat=_get(parser, "data", "monthly_stat", str, "close"),
    )
    egarch = EgarchSettings(
        p=_get(parser, "egarch", "p", int, 1),
        o=_get(parser, "egarch", "o", int, 1),
        q=_get(parser, "egarch", "q", int, 1),
    )
    tests = TestSettings(
        ccf_max_lag=_get(parser, "tests", "ccf_max_lag", int, 24),
        granger_max_lag=_get(parser, "tests", "granger_max_lag", int, 12),
    )
    sarimax = SarimaxSettings(grid=_get(parser, "sarimax", "grid", str, "default"))
    lstm = LstmSettings(
        hidden_dim=_get(parser, "lstm", "hidden_dim", int, 16),
        lookback=_get(parser, "lstm", "lookback", int, 12),
        epochs=_get(parser, "lstm", "epochs", int, 500),
        learning_rate=_get(parser, "lstm", "learning_rate", float, 0.01),
    )
    spatial = SpatialSettings(
        rho=_get(parser, "spatial", "rho", float, 0.9),
        n_iter=_get(parser, "spatial", "n_iter", int, 10_000),
        burn_in=_get(parser, "spatial", "burn_in", int, 2_000),
        thin=_get(parser, "spatial", "thin", int, 10),
        knn=_get(parser, "spatial", "knn", int, 2),
        cell_size=_get(parser, "spatial", "cell_size", float, 0.01),
        padding=_get(parser, "spatial", "padding", float, 0.25),
        idw_power=_get(parser, "spatial", "idw_power", float, 2.0),
        write_json=_get(parser, "spatial", "write_json", _bool, False),
    )
    cfg = PipelineConfig(
        data=data,
        egarch=egarch,
        tests=tests,
        sarimax=sarimax,
        lstm=lstm,
        spatial=spatial,
        test_months=_get(parser, "forecast", "test_months", int, 62),
        seed=_get(parser, "pipeline", "seed", int, 0),
        out_dir=_get(parser, "pipeline", "out_dir", respath, base / "out"),
    )
    if seed is not None:
        cfg.seed = int(seed)
    if out_dir is not None:
        cfg.out_dir = Path(out_dir)
    return cfg
