"""Forecast volatility with weather covariates: seasonal ARMA vs LSTM.

Both models see the same chronological split and are scored the same way:
rolling one-step predictions over the held-out window against realized
values, summarized by MAPE.
"""
import numpy as np

from agrivol import (
    LstmConfig,
    Month,
    MonthlySeries,
    aic_grid_search,
    lstm_forecast,
    lstm_train,
    mape,
    sarimax_rolling_forecast,
)

rng = np.random.default_rng(21)
n, test_months = 180, 36
t = np.arange(n)

precip = 20.0 + 230.0 * np.clip(np.sin(2 * np.pi * (t - 5) / 12), 0, None) + 5 * rng.random(n)
tasmax = 31.0 + 7.0 * np.sin(2 * np.pi * (t - 3) / 12) + rng.standard_normal(n)
vol_vals = np.zeros(n)
for i in range(3, n):
    vol_vals[i] = (0.02 + 0.55 * vol_vals[i - 1]
                   + 0.0003 * precip[i - 3] + 0.003 * rng.standard_normal())
vol_vals += 0.05

start = Month(2010, 1)
vol = MonthlySeries(start, vol_vals, "volatility")
exog = [MonthlySeries(start, precip, "precipitation"), MonthlySeries(start, tasmax, "tasmax")]

n_train = n - test_months
train_end = start.shift(n_train - 1)
vol_train = vol.slice_range(start, train_end)
exog_train = [e.slice_range(start, train_end) for e in exog]
actual = vol.slice_range(train_end.shift(1), vol.end)
print(f"{n_train} training months, {test_months} held out")

# ------------------------------------------------------------------
# seasonal ARMA with exogenous weather, order picked by AIC
# ------------------------------------------------------------------
fit = aic_grid_search(vol_train, exog_train)
print(f"\nAIC grid selected {fit.order}  (AIC {fit.aic:.1f})")
print(f"weather coefficients: precip {fit.params.beta_exog[0]:+.2e}, "
      f"tasmax {fit.params.beta_exog[1]:+.2e}")
sar_pred = sarimax_rolling_forecast(fit, vol, exog)
sar_mape = mape(actual, sar_pred)

# ------------------------------------------------------------------
# from-scratch LSTM on the same features
# ------------------------------------------------------------------
cfg = LstmConfig(input_dim=3, hidden_dim=12, lookback=12, epochs=400,
                 learning_rate=0.01, seed=3, train_fraction=n_train / n)
weights = lstm_train(vol, exog, cfg)
print(f"\nLSTM training loss: {weights.loss_history[0]:.4f} -> {weights.loss_history[-1]:.4f}")
lstm_pred = lstm_forecast(weights, vol, exog, horizon=test_months)
lstm_mape = mape(actual, lstm_pred)

# ------------------------------------------------------------------
# score both the way the pipeline does
# ------------------------------------------------------------------
print("\nmodel comparison (rolling one-step, test window):")
print(f"  {'model':<10} {'MAPE':>6}")
print(f"  {'SARIMAX':<10} {sar_mape:>6.3f}")
print(f"  {'LSTM':<10} {lstm_mape:>6.3f}")
worst = int(np.argmax(np.abs(actual.values - sar_pred.values) / actual.values))
print(f"\nhardest month for the ARMA: {actual.months()[worst]} "
      f"(actual {actual.values[worst]:.3f}, predicted {sar_pred.values[worst]:.3f})")
