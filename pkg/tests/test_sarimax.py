import numpy as np
import pytest

from agrivol import DataError, Month, MonthlySeries, NumericalError
from agrivol.sarimax import (
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


def ms(values, start=Month(2010, 1), label="y"):
    return MonthlySeries(start, values, label)


def simulate_ar1(phi, n, seed, intercept=0.0):
    rng = np.random.default_rng(seed)
    y = np.zeros(n)
    for t in range(1, n):
        y[t] = intercept + phi * y[t - 1] + rng.standard_normal()
    return y


class TestOrder:
    def test_validation(self):
        SarimaxOrder(2, 1, 2, 1, 1, 1, 12)
        with pytest.raises(DataError):
            SarimaxOrder(-1, 0, 0)
        with pytest.raises(DataError):
            SarimaxOrder(0, 0, 0, P=1, s=1)

    def test_diff_span(self):
        assert SarimaxOrder(1, 1, 1, 0, 1, 0, 12).diff_span == 13


class TestSeasonalDifference:
    def test_identity(self):
        s = ms(np.arange(20.0))
        assert seasonal_difference(s, 0, 0) is s

    def test_seasonality_annihilation(self):
        pattern = np.array([3.0, -1.0, 4.0, 1.0, -5.0, 9.0, 2.0, -6.0, 5.0, 3.0, -5.0, 8.0])
        s = ms(np.tile(pattern, 5))
        out = seasonal_difference(s, 0, 1, 12)
        np.testing.assert_array_equal(out.values, np.zeros(48))

    def test_hand_differencing(self):
        s = ms([1.0, 2.0, 4.0, 7.0])
        once = seasonal_difference(s, 1, 0)
        np.testing.assert_array_equal(once.values, [1.0, 2.0, 3.0])
        twice = seasonal_difference(once, 1, 0)
        np.testing.assert_array_equal(twice.values, [1.0, 1.0])
        assert twice.start == Month(2010, 3)

    def test_composition_commutes(self):
        # exact equality needs exactly-representable values; every subtraction
        # of moderate integers is exact in doubles
        rng = np.random.default_rng(0)
        s = ms(rng.integers(0, 10_000, size=60).astype(float))
        a = seasonal_difference(seasonal_difference(s, 1, 0), 0, 1, 12)
        b = seasonal_difference(seasonal_difference(s, 0, 1, 12), 1, 0)
        np.testing.assert_array_equal(a.values, b.values)
        assert a.start == b.start
        real = ms(rng.standard_normal(60) * 100.0)
        a = seasonal_difference(seasonal_difference(real, 1, 0), 0, 1, 12)
        b = seasonal_difference(seasonal_difference(real, 0, 1, 12), 1, 0)
        np.testing.assert_allclose(a.values, b.values, atol=1e-10)

    def test_too_short(self):
        with pytest.raises(DataError):
            seasonal_difference(ms(np.arange(12.0)), 0, 1, 12)


class TestFit:
    def test_ar1_recovery(self):
        y = simulate_ar1(0.7, 2000, seed=0)
        fit = sarimax_fit(y, order=SarimaxOrder(1, 0, 0))
        assert 0.65 <= fit.params.phi[0] <= 0.75

    def test_aic_identity_exact(self):
        rng = np.random.default_rng(1)
        for order in (SarimaxOrder(0, 0, 0), SarimaxOrder(1, 0, 1), SarimaxOrder(1, 1, 0, 1, 0, 0)):
            fit = sarimax_fit(rng.standard_normal(150), order=order)
            assert fit.aic == 2.0 * fit.n_free_params - 2.0 * fit.loglik

    def test_exog_beta_recovery_within_3_se(self):
        rng = np.random.default_rng(2)
        x = rng.standard_normal(300)
        noise = 0.5 * rng.standard_normal(300)
        y = 2.0 * x + noise
        fit = sarimax_fit(y, exog=[x], order=SarimaxOrder(0, 0, 0))
        # OLS oracle standard error for the slope
        design = np.column_stack([np.ones(300), x])
        coef, ssr_arr, *_ = np.linalg.lstsq(design, y, rcond=None)
        resid = y - design @ coef
        sigma2 = (resid @ resid) / (300 - 2)
        se = np.sqrt(sigma2 * np.linalg.inv(design.T @ design)[1, 1])
        assert abs(fit.params.beta_exog[0] - 2.0) <= 3.0 * se
        assert fit.params.beta_exog[0] == pytest.approx(coef[1], rel=1e-10)

    def test_degenerate_target_rejected(self):
        with pytest.raises(NumericalError):
            sarimax_fit(np.zeros(100), order=SarimaxOrder(0, 0, 0))

    def test_collinear_exog_rejected(self):
        rng = np.random.default_rng(3)
        y = rng.standard_normal(100)
        x = rng.standard_normal(100)
        with pytest.raises(DataError):
            sarimax_fit(y, exog=[x, 2.0 * x], order=SarimaxOrder(0, 0, 0))

    def test_exog_scale_consistency(self):
        rng = np.random.default_rng(4)
        x = rng.standard_normal(200)
        y = 1.5 * x + simulate_ar1(0.5, 200, seed=5)
        base = sarimax_fit(y, exog=[x], order=SarimaxOrder(1, 0, 0))
        scaled = sarimax_fit(y, exog=[100.0 * x], order=SarimaxOrder(1, 0, 0))
        assert scaled.params.beta_exog[0] == pytest.approx(base.params.beta_exog[0] / 100.0, rel=1e-6)
        np.testing.assert_allclose(scaled.fitted.values, base.fitted.values, atol=1e-6)

    def test_misaligned_exog_rejected(self):
        y = ms(np.arange(30.0))
        bad = MonthlySeries(Month(2011, 1), np.arange(30.0))
        with pytest.raises(DataError):
            sarimax_fit(y, exog=[bad], order=SarimaxOrder(0, 0, 0))

    def test_residuals_plus_fitted_reconstruct(self):
        rng = np.random.default_rng(6)
        y = ms(np.cumsum(rng.standard_normal(100)) + 50.0)
        fit = sarimax_fit(y, order=SarimaxOrder(1, 1, 0))
        window = y.values[fit.order.diff_span :]
        np.testing.assert_allclose(fit.fitted.values + fit.residuals.values, window, atol=1e-10)
        assert fit.residuals.start == Month(2010, 2)


class TestGridSearch:
    def test_single_element_grid(self):
        y = simulate_ar1(0.4, 150, seed=7)
        order = SarimaxOrder(1, 0, 0)
        direct = sarimax_fit(y, order=order)
        via_grid = aic_grid_search(y, grid=[order])
        assert via_grid.aic == direct.aic
        np.testing.assert_array_equal(via_grid.params.phi, direct.params.phi)

    def test_planted_seasonality_detected(self):
        rng = np.random.default_rng(8)
        n = 240
        y = np.zeros(n)
        for t in range(12, n):
            y[t] = 0.85 * y[t - 12] + rng.standard_normal()
        grid = [
            SarimaxOrder(p, 0, q, P, D, 0)
            for p in range(2) for q in range(2) for P in range(2) for D in range(2)
        ]
        best = aic_grid_search(y, grid=grid)
        assert best.order.P >= 1 or best.order.D == 1

    def test_white_noise_close_to_null(self):
        wn = np.random.default_rng(0).standard_normal(200)
        grid = [
            SarimaxOrder(p, d, q)
            for p in range(3) for d in range(2) for q in range(3)
        ]
        best = aic_grid_search(wn, grid=grid)
        null = sarimax_fit(wn, order=SarimaxOrder(0, 0, 0))
        assert best.aic <= null.aic + 1e-12
        assert abs(best.aic - null.aic) <= 2.0

    def test_default_grid_shape(self):
        grid = default_order_grid()
        assert len(grid) == 3 * 2 * 3 * 2 * 2 * 2
        assert all(o.s == 12 for o in grid)

    def test_empty_grid(self):
        with pytest.raises(DataError):
            aic_grid_search(np.arange(50.0), grid=[])


def manual_ar1_fit(phi, history):
    """Hand-built fit object for exercising the forecast recursions."""
    history = np.asarray(history, dtype=float)
    n = history.size
    zero = MonthlySeries(Month(2010, 1), np.zeros(n))
    return SarimaxFit(
        order=SarimaxOrder(1, 0, 0),
        params=SarimaxParams(
            phi=[phi], Phi=[], theta=[], Theta=[], beta_exog=[], intercept=0.0, sigma2=1.0
        ),
        aic=0.0,
        loglik=0.0,
        residuals=zero,
        fitted=zero,
        n_obs=n,
        n_free_params=3,
        _y=history,
        _exog=np.empty((n, 0)),
        _w=history.copy(),
        _eps=np.zeros(n),
        _ar=np.array([phi]),
        _ma=np.empty(0),
        _start=Month(2010, 1),
    )


class TestForecast:
    def test_intercept_only_model(self):
        rng = np.random.default_rng(9)
        y = 5.0 + 0.1 * rng.standard_normal(60)
        fit = sarimax_fit(y, order=SarimaxOrder(0, 0, 0))
        fc = sarimax_forecast(fit, 4)
        np.testing.assert_allclose(fc.values, np.full(4, fit.params.intercept), atol=1e-12)

    def test_ar1_closed_form(self):
        fit = manual_ar1_fit(0.5, [0.0] * 30 + [1.0])
        fc = sarimax_forecast(fit, 3)
        np.testing.assert_allclose(fc.values, [0.5, 0.25, 0.125], atol=1e-14)
        assert fc.start == Month(2010, 1).shift(31)

    def test_ar1_geometric_decay_toward_mean(self):
        y = simulate_ar1(0.6, 1000, seed=10, intercept=2.0)
        fit = sarimax_fit(y, order=SarimaxOrder(1, 0, 0))
        fc = sarimax_forecast(fit, 8)
        mean = fit.params.intercept
        dev = fc.values - mean
        ratios = dev[1:] / dev[:-1]
        np.testing.assert_allclose(ratios, fit.params.phi[0], atol=1e-10)

    def test_seasonal_differencing_inversion(self):
        # a near-periodic 12-month profile forecast by the seasonal-difference model
        rng = np.random.default_rng(20)
        pattern = np.array([10.0, 12, 9, 14, 20, 25, 30, 28, 22, 18, 13, 11])
        y = np.tile(pattern, 6) + 1e-3 * rng.standard_normal(72)
        fit = sarimax_fit(y, order=SarimaxOrder(0, 0, 0, 0, 1, 0, 12))
        fc = sarimax_forecast(fit, 12)
        np.testing.assert_allclose(fc.values, pattern, atol=0.05)

    def test_future_exog_required(self):
        rng = np.random.default_rng(11)
        x = rng.standard_normal(100)
        y = x + 0.1 * rng.standard_normal(100)
        fit = sarimax_fit(y, exog=[x], order=SarimaxOrder(0, 0, 0))
        with pytest.raises(DataError):
            sarimax_forecast(fit, 3)
        with pytest.raises(DataError):
            sarimax_forecast(fit, 3, future_exog=[np.zeros(2)])
        fc = sarimax_forecast(fit, 3, future_exog=[np.array([1.0, 2.0, 3.0])])
        assert len(fc) == 3

    def test_exog_forecast_tracks_regression(self):
        rng = np.random.default_rng(12)
        x = rng.standard_normal(200)
        y = 3.0 + 2.0 * x + 0.01 * rng.standard_normal(200)
        fit = sarimax_fit(y, exog=[x], order=SarimaxOrder(0, 0, 0))
        fut = np.array([0.5, -1.0])
        fc = sarimax_forecast(fit, 2, future_exog=[fut])
        np.testing.assert_allclose(fc.values, 3.0 + 2.0 * fut, atol=0.05)


class TestRollingForecast:
    def test_one_step_matches_ar_recursion(self):
        y = simulate_ar1(0.7, 300, seed=13)
        fit = sarimax_fit(y[:250], order=SarimaxOrder(1, 0, 0))
        rolled = sarimax_rolling_forecast(fit, y)
        assert len(rolled) == 50
        phi = fit.params.phi[0]
        c = fit.params.intercept
        expected = c + phi * (y[249:299] - c)
        np.testing.assert_allclose(rolled.values, expected, atol=1e-10)

    def test_prefix_mismatch_rejected(self):
        y = simulate_ar1(0.5, 100, seed=14)
        fit = sarimax_fit(y[:80], order=SarimaxOrder(1, 0, 0))
        tampered = y.copy()
        tampered[0] += 1.0
        with pytest.raises(DataError):
            sarimax_rolling_forecast(fit, tampered)
        with pytest.raises(DataError):
            sarimax_rolling_forecast(fit, y[:80])
