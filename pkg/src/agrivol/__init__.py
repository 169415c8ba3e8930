"""Climate-linked agricultural price volatility toolkit.

Turns district-level commodity prices into conditional-volatility series
(EGARCH), tests their linkage to precipitation and temperature (CCF, KPSS,
Granger), forecasts volatility with SARIMAX and LSTM models driven by weather
covariates, and builds monthly spatial volatility surfaces (k-NN adjacency,
Leroux CAR smoothing, IDW interpolation).
"""

from .errors import DataError, NumericalError
from .series import (
    DistrictPanel,
    Month,
    MonthlySeries,
    SummaryStats,
    aggregate_districts,
    as_series,
    log_returns,
    mape,
    squared_log_returns,
    summary_stats,
)
from .egarch import (
    EgarchFit,
    EgarchParams,
    EgarchSpec,
    egarch_filter,
    egarch_fit,
    egarch_simulate,
)
from .stats_tests import (
    CcfResult,
    GrangerResult,
    KpssResult,
    ccf,
    difference,
    granger_causality,
    kpss_test,
)
from .sarimax import (
    SarimaxFit,
    SarimaxOrder,
    SarimaxParams,
    aic_grid_search,
    default_order_grid,
    sarimax_fit,
    sarimax_forecast,
    sarimax_rolling_forecast,
    seasonal_difference,
)
from .lstm import (
    CellState,
    LstmConfig,
    LstmWeights,
    lstm_cell,
    lstm_forecast,
    lstm_forward,
    lstm_train,
)
from .spatial import (
    Adjacency,
    CarConfig,
    CarResult,
    SiteSet,
    SurfaceSpec,
    VolatilitySurface,
    haversine_km,
    idw_at_points,
    idw_interpolate,
    knn_adjacency,
    leroux_car_smooth,
    monthly_surfaces,
)
from .ingest import (
    IngestResult,
    RawPriceRecord,
    align_and_impute,
    build_panel,
    linear_fill,
    read_coords_csv,
    read_price_csv,
)
from .weather import WeatherRecord, fetch_weather, read_weather_csv, weather_to_series
from .config import PipelineConfig, load_config
from .pipeline import Pipeline, run_pipeline

__version__ = "0.1.0"
