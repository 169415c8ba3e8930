import json

import numpy as np
import pytest

from agrivol import DataError
from agrivol.config import load_config
from agrivol.fixture import make_synthetic_dataset
from agrivol.pipeline import Pipeline, run_pipeline


def fast_config(cfg):
    """Trim the sampler/optimizer budgets so orchestration tests stay quick."""
    cfg.sarimax.grid = "1,0,0,0,0,0"
    cfg.lstm.epochs = 100
    cfg.spatial.n_iter = 400
    cfg.spatial.burn_in = 100
    cfg.spatial.thin = 2
    cfg.spatial.cell_size = 0.1
    return cfg


@pytest.fixture(scope="module")
def fixture_dir(tmp_path_factory):
    target = tmp_path_factory.mktemp("synthetic")
    make_synthetic_dataset(target)
    return target


@pytest.fixture(scope="module")
def report_and_outdir(fixture_dir):
    out = fixture_dir / "out_full"
    cfg = fast_config(load_config(fixture_dir / "config.ini", out_dir=out))
    return run_pipeline(cfg), out


class TestRun:
    def test_report_sections(self, report_and_outdir):
        report, _ = report_and_outdir
        for key in ("ingest", "summary_stats", "egarch", "tests", "forecast", "spatial", "outputs"):
            assert key in report

    def test_ingest_lossless(self, report_and_outdir):
        report, _ = report_and_outdir
        ing = report["ingest"]
        assert ing["rows"] == ing["parsed"] + ing["error_rows"]
        assert len(ing["districts"]) == 6
        assert ing["months"]["count"] == 60

    def test_written_files(self, report_and_outdir):
        _, out = report_and_outdir
        for name in (
            "panel.csv", "state_prices.csv", "returns.csv", "cond_vol.csv",
            "egarch.json", "tests.json", "ccf_precipitation.csv", "ccf_tasmax.csv",
            "forecasts.csv", "sarimax.json", "lstm_weights.json", "report.json",
        ):
            assert (out / name).exists(), name
        surfaces = sorted((out / "surfaces").glob("surface_*.csv"))
        sites = sorted((out / "surfaces").glob("sites_*.csv"))
        assert len(surfaces) == 59
        assert len(sites) == 59

    def test_mape_table_layout(self, report_and_outdir):
        report, _ = report_and_outdir
        table = report["forecast"]["mape_table"]
        assert [row["model"] for row in table] == ["SARIMAX", "LSTM"]
        for row in table:
            assert set(row) == {"state", "crop", "model", "mape"}
            assert row["state"] == "Synthania"
            assert row["crop"] == "Soybean"
            assert 0.0 <= row["mape"] < 1.0

    def test_planted_beta_recovered(self, report_and_outdir):
        report, _ = report_and_outdir
        names = report["egarch"]["state"]["param_names"]
        params = report["egarch"]["state"]["params"]
        beta1 = params[names.index("beta1")]
        assert abs(beta1 - 0.9) <= 0.1

    def test_report_json_round_trips(self, report_and_outdir):
        report, out = report_and_outdir
        on_disk = json.loads((out / "report.json").read_text())
        assert on_disk["egarch"]["state"]["params"] == report["egarch"]["state"]["params"]

    def test_volatility_positive(self, report_and_outdir):
        _, out = report_and_outdir
        rows = (out / "cond_vol.csv").read_text().strip().splitlines()[1:]
        values = np.array([[float(v) for v in row.split(",")[1:]] for row in rows])
        assert np.all(values > 0)


class TestStageErrors:
    def test_missing_price_file_tagged(self, tmp_path):
        cfg_path = make_synthetic_dataset(tmp_path)
        cfg = load_config(cfg_path)
        cfg.data.price_csv = tmp_path / "no_such_file.csv"
        with pytest.raises(DataError, match=r"^\[ingest\]"):
            Pipeline(cfg).load()

    def test_bad_test_window_tagged(self, tmp_path):
        cfg_path = make_synthetic_dataset(tmp_path)
        cfg = fast_config(load_config(cfg_path))
        cfg.test_months = 1000
        with pytest.raises(DataError, match=r"^\[forecast\]"):
            Pipeline(cfg).forecast()

    def test_malformed_rows_produce_error_report(self, tmp_path):
        cfg_path = make_synthetic_dataset(tmp_path)
        prices = tmp_path / "prices.csv"
        with open(prices, "a") as fh:
            fh.write("Synthania,Ambar,Soybean,2012,XX,100\n")
        cfg = load_config(cfg_path, out_dir=tmp_path / "out")
        pipe = Pipeline(cfg)
        ing = pipe.load()
        assert ing["error_rows"] == 1
        assert ing["rows"] == ing["parsed"] + 1
        assert (tmp_path / "out" / "ingest_errors.csv").exists()
