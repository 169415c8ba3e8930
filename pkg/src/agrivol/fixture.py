"""Bundled synthetic dataset: planted volatility dynamics, no network needed.

Builds a small end-to-end input set (price panel CSV, coordinates CSV,
weather CSV, pipeline config) whose state-level returns follow a known
volatility recursion (beta_1 = 0.9), so a full pipeline run can check
parameter recovery against the planted truth. District prices share the
common return stream plus a small idiosyncratic component, which keeps the
state aggregate on the planted dynamics while giving the spatial stage
cross-district variation.
"""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .egarch import EgarchParams, EgarchSpec, egarch_simulate
from .series import Month

__all__ = ["PLANTED_PARAMS", "PLANTED_SPEC", "make_synthetic_dataset"]

PLANTED_SPEC = EgarchSpec(1, 1, 1)
PLANTED_PARAMS = EgarchParams(mu=0.004, omega=-0.505, alpha=[0.15], gamma=[-0.05], beta=[0.9])

_DISTRICTS = [
    ("Ambar", 22.4, 76.8, 3100.0),
    ("Bhind", 23.1, 78.2, 2950.0),
    ("Chand", 23.9, 77.1, 3300.0),
    ("Dewas", 22.8, 77.9, 3050.0),
    ("Eron", 23.5, 76.4, 3200.0),
    ("Falna", 22.2, 77.3, 3150.0),
]


def make_synthetic_dataset(
    target_dir: str | Path,
    seed: int = 8,
    n_months: int = 60,
    start: Month = Month(2012, 1),
    config_name: str = "config.ini",
) -> Path:
    """Write prices.csv, coords.csv, weather.csv, and a config; returns the config path."""
    target = Path(target_dir)
    target.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)

    state_returns = egarch_simulate(
        PLANTED_SPEC, PLANTED_PARAMS, n_months - 1, seed=seed, start=start.shift(1)
    ).values

    months = [start.shift(i) for i in range(n_months)]
    with open(target / "prices.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["state", "district", "commodity", "year", "month", "modal_price"])
        for name, _lat, _lon, p0 in _DISTRICTS:
            idio = 0.01 * rng.standard_normal(n_months - 1)
            log_prices = np.log(p0) + np.concatenate([[0.0], np.cumsum(state_returns + idio)])
            for month, lp in zip(months, log_prices):
                writer.writerow([
                    "Synthania", name, "Soybean", month.year, month.month, f"{np.exp(lp):.2f}",
                ])

    with open(target / "coords.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["district_id", "lat", "lon"])
        for name, lat, lon, _p0 in _DISTRICTS:
            writer.writerow([name, lat, lon])

    t = np.arange(n_months)
    monsoon = np.clip(np.sin(2.0 * np.pi * (t - 5) / 12.0), 0.0, None)
    precip = 20.0 + 230.0 * monsoon + 10.0 * rng.random(n_months)
    tasmax = 31.0 + 7.0 * np.sin(2.0 * np.pi * (t - 3) / 12.0) + rng.standard_normal(n_months)
    with open(target / "weather.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["month", "precipitation", "tasmax"])
        for i, month in enumerate(months):
            writer.writerow([str(month), f"{precip[i]:.3f}", f"{tasmax[i]:.3f}"])

    end = months[-1]
    config_text = f"""[data]
price_csv = prices.csv
coords_csv = coords.csv
weather_csv = weather.csv
state = Synthania
commodity = Soybean
start = {start}
end = {end}
monthly_stat = close

[egarch]
p = 1
o = 1
q = 1

[tests]
ccf_max_lag = 12
granger_max_lag = 6

[sarimax]
grid = default

[lstm]
hidden_dim = 8
lookback = 12
epochs = 300
learning_rate = 0.01

[forecast]
test_months = 12

[spatial]
rho = 0.9
n_iter = 2000
burn_in = 500
thin = 5
knn = 2
cell_size = 0.05
padding = 0.25

[pipeline]
seed = 0
out_dir = out
"""
    config_path = target / config_name
    config_path.write_text(config_text)
    return config_path


if __name__ == "__main__":
    import sys

    dest = sys.argv[1] if len(sys.argv) > 1 else "synthetic_data"
    path = make_synthetic_dataset(dest)
    print(f"wrote synthetic dataset; config at {path}")
