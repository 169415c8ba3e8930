"""End-to-end orchestration: ingest through spatial surfaces, with reports.

Stages run in a fixed order, each tagged so failures carry their origin:
ingest -> aggregate -> returns -> egarch -> tests -> forecast -> spatial.
Every output lands under ``config.out_dir``; the run is deterministic for a
fixed seed and warm weather cache (byte-identical report bundles).
"""
from __future__ import annotations

import csv
import json
import logging
from contextlib import contextmanager
from pathlib import Path

from .config import PipelineConfig
from .egarch import EgarchFit, EgarchSpec, egarch_fit
from .errors import DataError, NumericalError
from .ingest import align_and_impute, build_panel, read_coords_csv, read_price_csv
from .lstm import LstmConfig, lstm_forecast, lstm_train
from .sarimax import (
    SarimaxOrder,
    aic_grid_search,
    default_order_grid,
    sarimax_fit,
    sarimax_rolling_forecast,
)
from .series import DistrictPanel, MonthlySeries, aggregate_districts, log_returns, mape, \
    squared_log_returns, summary_stats
from .spatial import CarConfig, SurfaceSpec, monthly_surfaces
from .stats_tests import ccf, difference, granger_causality, kpss_test
from .weather import fetch_weather, read_weather_csv, weather_to_series

__all__ = ["Pipeline", "run_pipeline"]

log = logging.getLogger(__name__)


@contextmanager
def _stage(name: str):
    """Re-raise stage failures with a stage tag, preserving the error type."""
    try:
        yield
    except (DataError, NumericalError) as exc:
        raise type(exc)(f"[{name}] {exc}") from exc


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _series_rows(columns: dict[str, MonthlySeries]):
    series = list(columns.values())
    first = series[0]
    for s in series[1:]:
        if s.start != first.start or len(s) != len(first):
            raise DataError("cannot export misaligned series into one CSV")
    for i, month in enumerate(first.months()):
        yield [str(month)] + [repr(float(s.values[i])) for s in series]


def _parse_order(text: str) -> SarimaxOrder:
    parts = [int(tok) for tok in text.replace("(", " ").replace(")", " ").replace(",", " ").split()]
    if len(parts) == 6:
        parts.append(12)
    if len(parts) != 7:
        raise DataError(f"cannot parse SARIMAX order {text!r}; expected p,d,q,P,D,Q[,s]")
    return SarimaxOrder(*parts)


class Pipeline:
    """Stage-by-stage runner; each stage caches its products on the instance."""

    def __init__(self, config: PipelineConfig):
        self.config = config
        self.out_dir = Path(config.out_dir)
        self.outputs: list[str] = []
        self._loaded = False

    # ------------------------------------------------------------ ingest

    def load(self) -> dict:
        if self._loaded:
            return self.report_ingest
        cfg = self.config.data
        with _stage("ingest"):
            ingest = read_price_csv(cfg.price_csv)
            coords = read_coords_csv(cfg.coords_csv)
            panel = build_panel(
                ingest.records, coords,
                state=cfg.state, commodity=cfg.commodity, monthly_stat=cfg.monthly_stat,
            )
            if cfg.weather_csv is not None:
                precip, tasmax = read_weather_csv(cfg.weather_csv)
            else:
                records = fetch_weather(
                    cfg.weather_lat, cfg.weather_lon, cfg.start, cfg.end, cfg.cache_dir
                )
                precip, tasmax = weather_to_series(records)
            weather = {"precipitation": precip, "tasmax": tasmax}
            self.panel, self.weather = align_and_impute(panel, weather, (cfg.start, cfg.end))
        self.out_dir.mkdir(parents=True, exist_ok=True)
        if ingest.errors:
            path = self.out_dir / "ingest_errors.csv"
            ingest.write_error_report(path)
            self.outputs.append(path.name)
        panel_path = self.out_dir / "panel.csv"
        _write_csv(
            panel_path,
            ["month"] + self.panel.districts,
            _series_rows({name: self.panel.series[name] for name in self.panel.districts}),
        )
        self.outputs.append(panel_path.name)
        first = self.panel.series[self.panel.districts[0]]
        self.report_ingest = {
            "rows": ingest.n_rows,
            "parsed": len(ingest.records),
            "error_rows": len(ingest.errors),
            "districts": self.panel.districts,
            "months": {"start": str(first.start), "end": str(first.end), "count": len(first)},
        }
        self._loaded = True
        return self.report_ingest

    # --------------------------------------------------------- aggregate

    def aggregate(self):
        self.load()
        if hasattr(self, "state_mean"):
            return self.state_mean
        with _stage("aggregate"):
            self.state_mean, self.state_lo, self.state_hi = aggregate_districts(self.panel)
        path = self.out_dir / "state_prices.csv"
        _write_csv(
            path,
            ["month", "mean", "lower", "upper"],
            _series_rows({"m": self.state_mean, "lo": self.state_lo, "hi": self.state_hi}),
        )
        self.outputs.append(path.name)
        return self.state_mean

    # ----------------------------------------------------------- returns

    def returns(self) -> dict:
        self.aggregate()
        if hasattr(self, "report_stats"):
            return self.report_stats
        with _stage("returns"):
            self.log_ret = log_returns(self.state_mean)
            self.sq_ret = squared_log_returns(self.state_mean)
            stats = {
                "price": summary_stats(self.state_mean).to_dict(),
                "log_returns": summary_stats(self.log_ret).to_dict(),
            }
        path = self.out_dir / "returns.csv"
        _write_csv(
            path,
            ["month", "log_return", "squared_log_return"],
            _series_rows({"r": self.log_ret, "s": self.sq_ret}),
        )
        self.outputs.append(path.name)
        self.report_stats = stats
        return stats

    # ------------------------------------------------------------ egarch

    def egarch(self) -> dict:
        self.returns()
        if hasattr(self, "report_egarch"):
            return self.report_egarch
        spec = EgarchSpec(self.config.egarch.p, self.config.egarch.o, self.config.egarch.q)
        with _stage("egarch"):
            self.state_fit: EgarchFit = egarch_fit(self.log_ret, spec)
            self.district_fits: dict[str, EgarchFit] = {}
            for name in self.panel.districts:
                try:
                    district_returns = log_returns(self.panel.series[name])
                    self.district_fits[name] = egarch_fit(district_returns, spec)
                except (DataError, NumericalError) as exc:
                    log.warning("district %s EGARCH fit skipped: %s", name, exc)
        self.cond_vol = self.state_fit.cond_vol
        path = self.out_dir / "cond_vol.csv"
        cols = {"state": self.cond_vol}
        cols.update({name: fit.cond_vol for name, fit in self.district_fits.items()})
        _write_csv(
            path,
            ["month", "state"] + list(self.district_fits),
            _series_rows(cols),
        )
        self.outputs.append(path.name)
        fit_path = self.out_dir / "egarch.json"
        fit_path.write_text(json.dumps(self.state_fit.to_dict(), indent=2, sort_keys=True))
        self.outputs.append(fit_path.name)
        self.report_egarch = {
            "state": self.state_fit.to_dict(),
            "districts": {name: fit.to_dict() for name, fit in self.district_fits.items()},
        }
        return self.report_egarch

    # ------------------------------------------------------------- tests

    def _vol_window(self, series: MonthlySeries) -> MonthlySeries:
        return series.slice_range(self.cond_vol.start, self.cond_vol.end)

    def tests(self) -> dict:
        self.egarch()
        if hasattr(self, "report_tests"):
            return self.report_tests
        cfg = self.config.tests
        with _stage("tests"):
            precip = self._vol_window(self.weather["precipitation"])
            tasmax = self._vol_window(self.weather["tasmax"])
            kpss_vol = kpss_test(self.cond_vol)
            if kpss_vol.stationary_at_5pct:
                analysis_vol = self.cond_vol
                differenced = False
            else:
                analysis_vol = difference(self.cond_vol, 1)
                differenced = True
            kpss_after = kpss_test(analysis_vol) if differenced else kpss_vol

            ccf_results = {}
            for label, series in (("precipitation", precip), ("tasmax", tasmax)):
                result = ccf(self.cond_vol, series, cfg.ccf_max_lag)
                ccf_results[label] = result
                path = self.out_dir / f"ccf_{label}.csv"
                result.write_csv(path)
                self.outputs.append(path.name)

            granger_results: dict[str, list[dict]] = {}
            for label, series in (("precipitation", precip), ("tasmax", tasmax)):
                aligned = series.slice_range(analysis_vol.start, analysis_vol.end)
                rows = []
                for k in range(1, cfg.granger_max_lag + 1):
                    try:
                        res = granger_causality(analysis_vol, aligned, k)
                    except DataError:
                        break
                    rows.append(res.to_dict())
                granger_results[label] = rows
        self.report_tests = {
            "volatility_kpss": kpss_vol.to_dict(),
            "differenced_for_granger": differenced,
            "analysis_kpss": kpss_after.to_dict(),
            "ccf": {label: res.to_dict() for label, res in ccf_results.items()},
            "granger": granger_results,
        }
        path = self.out_dir / "tests.json"
        path.write_text(json.dumps(self.report_tests, indent=2, sort_keys=True))
        self.outputs.append(path.name)
        return self.report_tests

    # ---------------------------------------------------------- forecast

    def _forecast_setup(self):
        if hasattr(self, "_split"):
            return self._split
        self.egarch()
        h = self.config.test_months
        n = len(self.cond_vol)
        lookback = self.config.lstm.lookback
        with _stage("forecast"):
            if not 1 <= h < n:
                raise DataError(f"test window {h} must lie in [1, {n - 1}]")
            n_train = n - h
            if n_train < lookback + 10:
                raise DataError(f"training window {n_train} too short for lookback {lookback}")
            precip = self._vol_window(self.weather["precipitation"])
            tasmax = self._vol_window(self.weather["tasmax"])
            train_end = self.cond_vol.start.shift(n_train - 1)
            vol_train = self.cond_vol.slice_range(self.cond_vol.start, train_end)
            exog_train = [
                precip.slice_range(precip.start, train_end),
                tasmax.slice_range(tasmax.start, train_end),
            ]
            actual_test = self.cond_vol.slice_range(train_end.shift(1), self.cond_vol.end)
        self._split = (n_train, vol_train, exog_train, [precip, tasmax], actual_test)
        return self._split

    def _mape_row(self, model: str, value: float) -> dict:
        return {
            "state": self.config.data.state or self.panel.region,
            "crop": self.config.data.commodity or "commodity",
            "model": model,
            "mape": value,
        }

    def forecast_sarimax(self) -> dict:
        _, vol_train, exog_train, exog_full, actual_test = self._forecast_setup()
        if hasattr(self, "report_sarimax"):
            return self.report_sarimax
        with _stage("forecast"):
            if self.config.sarimax.grid == "default":
                sar_fit = aic_grid_search(vol_train, exog_train, default_order_grid())
            else:
                sar_fit = sarimax_fit(vol_train, exog_train, _parse_order(self.config.sarimax.grid))
            sar_pred = sarimax_rolling_forecast(sar_fit, self.cond_vol, exog_full)
            sar_mape = mape(actual_test, sar_pred)
        sar_path = self.out_dir / "sarimax.json"
        sar_path.write_text(json.dumps(sar_fit.to_dict(), indent=2, sort_keys=True))
        self.outputs.append(sar_path.name)
        self.sarimax_pred = sar_pred
        self.report_sarimax = {
            "test_window": {"start": str(actual_test.start), "months": len(actual_test)},
            "order": str(sar_fit.order),
            "aic": sar_fit.aic,
            "loglik": sar_fit.loglik,
            "mape": sar_mape,
        }
        return self.report_sarimax

    def forecast_lstm(self) -> dict:
        n_train, _, _, exog_full, actual_test = self._forecast_setup()
        if hasattr(self, "report_lstm"):
            return self.report_lstm
        n = len(self.cond_vol)
        with _stage("forecast"):
            lcfg = LstmConfig(
                input_dim=3,
                hidden_dim=self.config.lstm.hidden_dim,
                lookback=self.config.lstm.lookback,
                epochs=self.config.lstm.epochs,
                learning_rate=self.config.lstm.learning_rate,
                seed=self.config.seed,
                train_fraction=n_train / n,
            )
            weights = lstm_train(self.cond_vol, exog_full, lcfg)
            lstm_pred = lstm_forecast(weights, self.cond_vol, exog_full, horizon=len(actual_test))
            lstm_mape = mape(actual_test, lstm_pred)
        weights_path = self.out_dir / "lstm_weights.json"
        weights_path.write_text(json.dumps(weights.to_dict(), indent=2, sort_keys=True))
        self.outputs.append(weights_path.name)
        self.lstm_pred = lstm_pred
        self.report_lstm = {
            "test_window": {"start": str(actual_test.start), "months": len(actual_test)},
            "final_training_loss": float(weights.loss_history[-1]),
            "mape": lstm_mape,
        }
        return self.report_lstm

    def forecast(self) -> dict:
        sar = self.forecast_sarimax()
        lstm_rep = self.forecast_lstm()
        _, _, _, _, actual_test = self._forecast_setup()
        path = self.out_dir / "forecasts.csv"
        _write_csv(
            path,
            ["month", "actual", "sarimax", "lstm"],
            _series_rows({"a": actual_test, "s": self.sarimax_pred, "l": self.lstm_pred}),
        )
        self.outputs.append(path.name)
        self.report_forecast = {
            "test_window": sar["test_window"],
            "sarimax": {"order": sar["order"], "aic": sar["aic"], "loglik": sar["loglik"]},
            "lstm": {"final_training_loss": lstm_rep["final_training_loss"]},
            "mape_table": [
                self._mape_row("SARIMAX", sar["mape"]),
                self._mape_row("LSTM", lstm_rep["mape"]),
            ],
        }
        return self.report_forecast

    # ----------------------------------------------------------- spatial

    def spatial(self) -> dict:
        self.egarch()
        if hasattr(self, "report_spatial"):
            return self.report_spatial
        cfg = self.config.spatial
        with _stage("spatial"):
            vol_panel = DistrictPanel(
                self.panel.region,
                {name: fit.cond_vol for name, fit in self.district_fits.items()},
                {name: self.panel.coords[name] for name in self.district_fits},
            )
            car = CarConfig(
                rho=cfg.rho,
                n_iter=cfg.n_iter,
                burn_in=cfg.burn_in,
                thin=cfg.thin,
                seed=self.config.seed,
            )
            spec = SurfaceSpec(cell_size=cfg.cell_size, padding=cfg.padding, power=cfg.idw_power)
            surfaces_dir = self.out_dir / "surfaces"
            bundles = monthly_surfaces(
                vol_panel, car, spec, k=cfg.knn, out_dir=surfaces_dir,
                write_json=cfg.write_json,
            )
        files = sorted(p.name for p in surfaces_dir.iterdir())
        self.outputs.extend(f"surfaces/{name}" for name in files)
        self.report_spatial = {
            "months": [str(b.month) for b in bundles],
            "districts": bundles[0].site_ids if bundles else [],
            "grid_cell_size": cfg.cell_size,
            "files": files,
        }
        return self.report_spatial

    # --------------------------------------------------------------- run

    def run(self) -> dict:
        report = {
            "ingest": self.load(),
            "summary_stats": self.returns(),
            "egarch": self.egarch(),
            "tests": self.tests(),
            "forecast": self.forecast(),
            "spatial": self.spatial(),
            "seed": self.config.seed,
        }
        report["outputs"] = sorted(self.outputs) + ["report.json"]
        path = self.out_dir / "report.json"
        path.write_text(json.dumps(report, indent=2, sort_keys=True))
        return report


def run_pipeline(config: PipelineConfig) -> dict:
    """Execute every stage and write the report bundle; returns the report."""
    return Pipeline(config).run()
