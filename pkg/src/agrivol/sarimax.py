"""Seasonal ARIMA with exogenous regressors, AIC selection, and forecasting.

Estimation is two-stage: OLS of the differenced target on the differenced
exogenous columns plus an intercept, then a conditional-sum-of-squares
Gaussian likelihood of the seasonal ARMA fitted numerically to the regression
residuals. This trades the full state-space likelihood for simplicity, which
is adequate at monthly sample sizes (~150 observations).

One-step evaluation against realized history is what
:func:`sarimax_rolling_forecast` provides; :func:`sarimax_forecast` is the
iterated multi-step path.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product

import numpy as np
from scipy.optimize import minimize

from ._jit import njit
from .errors import DataError, NumericalError
from .series import Month, MonthlySeries, as_series

__all__ = [
    "SarimaxOrder",
    "SarimaxParams",
    "SarimaxFit",
    "seasonal_difference",
    "sarimax_fit",
    "aic_grid_search",
    "default_order_grid",
    "sarimax_forecast",
    "sarimax_rolling_forecast",
]

LOG_2PI = math.log(2.0 * math.pi)
_ROOT_MARGIN = 1.0 + 1e-6


@dataclass(frozen=True)
class SarimaxOrder:
    """(p, d, q) x (P, D, Q)_s orders."""

    p: int
    d: int
    q: int
    P: int = 0
    D: int = 0
    Q: int = 0
    s: int = 12

    def __post_init__(self) -> None:
        if min(self.p, self.d, self.q, self.P, self.D, self.Q, self.s) < 0:
            raise DataError(f"orders must be non-negative, got {self}")
        if (self.P, self.D, self.Q) != (0, 0, 0) and self.s < 2:
            raise DataError("seasonal terms need a seasonal period s >= 2")

    @property
    def n_arma(self) -> int:
        return self.p + self.q + self.P + self.Q

    @property
    def diff_span(self) -> int:
        return self.d + self.D * self.s

    def as_tuple(self) -> tuple[int, int, int, int, int, int]:
        return (self.p, self.d, self.q, self.P, self.D, self.Q)

    def __str__(self) -> str:
        return f"({self.p},{self.d},{self.q})x({self.P},{self.D},{self.Q})_{self.s}"


@dataclass
class SarimaxParams:
    phi: np.ndarray
    Phi: np.ndarray
    theta: np.ndarray
    Theta: np.ndarray
    beta_exog: np.ndarray
    intercept: float
    sigma2: float

    def __post_init__(self) -> None:
        for name in ("phi", "Phi", "theta", "Theta", "beta_exog"):
            setattr(self, name, np.atleast_1d(np.asarray(getattr(self, name), dtype=float)))
        if not self.sigma2 > 0.0:
            raise NumericalError(f"innovation variance must be positive, got {self.sigma2}")

    def to_dict(self) -> dict:
        return {
            "phi": [float(v) for v in self.phi],
            "Phi": [float(v) for v in self.Phi],
            "theta": [float(v) for v in self.theta],
            "Theta": [float(v) for v in self.Theta],
            "beta_exog": [float(v) for v in self.beta_exog],
            "intercept": float(self.intercept),
            "sigma2": float(self.sigma2),
        }


@njit(cache=True)
def _css_kernel(w, ar, ma):
    """ARMA innovations with zero pre-sample values (w and eps before t=0).

    Summing the likelihood over every observation keeps AIC comparable
    across candidate orders; conditioning away the first max-lag values
    would hand longer models a spurious advantage.
    """
    n = w.shape[0]
    m_ar = ar.shape[0]
    m_ma = ma.shape[0]
    eps = np.zeros(n)
    ssr = 0.0
    for t in range(n):
        pred = 0.0
        for i in range(m_ar):
            s = t - 1 - i
            if s >= 0:
                pred += ar[i] * w[s]
        for j in range(m_ma):
            s = t - 1 - j
            if s >= 0:
                pred += ma[j] * eps[s]
        eps[t] = w[t] - pred
        ssr += eps[t] * eps[t]
    return eps, ssr


def _apply_diff(values: np.ndarray, d: int, D: int, s: int) -> np.ndarray:
    v = values
    for _ in range(d):
        v = v[1:] - v[:-1]
    for _ in range(D):
        v = v[s:] - v[:-s]
    return v


def _diff_poly(d: int, D: int, s: int) -> np.ndarray:
    """Coefficients of (1-L)^d (1-L^s)^D in increasing powers of L."""
    poly = np.array([1.0])
    for _ in range(d):
        poly = np.convolve(poly, [1.0, -1.0])
    seasonal = np.zeros(s + 1)
    seasonal[0] = 1.0
    seasonal[s] = -1.0
    for _ in range(D):
        poly = np.convolve(poly, seasonal)
    return poly


def _lag_poly(coefs: np.ndarray, period: int, sign: float) -> np.ndarray:
    """1 + sign * sum_i coefs[i] * L^(period*(i+1)), increasing powers."""
    poly = np.zeros(period * coefs.size + 1)
    poly[0] = 1.0
    for i, c in enumerate(coefs):
        poly[period * (i + 1)] = sign * c
    return poly


def _min_root_modulus(poly: np.ndarray) -> float:
    """Smallest root modulus of sum_i poly[i] z^i; inf for degree zero."""
    trimmed = np.trim_zeros(poly, "b")
    if trimmed.size <= 1:
        return np.inf
    roots = np.roots(trimmed[::-1])
    return float(np.min(np.abs(roots))) if roots.size else np.inf


def _expand_arma(order: SarimaxOrder, vec: np.ndarray) -> tuple[np.ndarray, np.ndarray, float, float]:
    """Split the ARMA parameter vector and expand seasonal products.

    Returns (ar, ma, ar_min_root, ma_min_root) where ``ar``/``ma`` are the
    coefficients a_i, b_j of w_t = sum a_i w_{t-i} + eps_t + sum b_j eps_{t-j}.
    """
    p, q, P, Q, s = order.p, order.q, order.P, order.Q, order.s
    phi = vec[:p]
    Phi = vec[p : p + P]
    theta = vec[p + P : p + P + q]
    Theta = vec[p + P + q :]
    ar_poly = np.convolve(_lag_poly(phi, 1, -1.0), _lag_poly(Phi, s, -1.0))
    ma_poly = np.convolve(_lag_poly(theta, 1, 1.0), _lag_poly(Theta, s, 1.0))
    ar = -ar_poly[1:]
    ma = ma_poly[1:]
    return ar, ma, _min_root_modulus(ar_poly), _min_root_modulus(ma_poly)


@dataclass
class SarimaxFit:
    order: SarimaxOrder
    params: SarimaxParams
    aic: float
    loglik: float
    residuals: MonthlySeries
    fitted: MonthlySeries
    n_obs: int
    n_free_params: int
    # state needed to extend the model beyond the training window
    _y: np.ndarray
    _exog: np.ndarray
    _w: np.ndarray
    _eps: np.ndarray
    _ar: np.ndarray
    _ma: np.ndarray
    _start: Month

    def to_dict(self) -> dict:
        return {
            "order": {
                "p": self.order.p, "d": self.order.d, "q": self.order.q,
                "P": self.order.P, "D": self.order.D, "Q": self.order.Q, "s": self.order.s,
            },
            "params": self.params.to_dict(),
            "aic": float(self.aic),
            "loglik": float(self.loglik),
            "n_obs": self.n_obs,
            "n_free_params": self.n_free_params,
        }


def seasonal_difference(x: MonthlySeries, d: int, D: int, s: int = 12) -> MonthlySeries:
    """Apply (1-L)^d then (1-L^s)^D; output shrinks by d + D*s months."""
    if min(d, D) < 0 or (D > 0 and s < 1):
        raise DataError(f"invalid differencing orders d={d}, D={D}, s={s}")
    span = d + D * s
    if len(x) <= span:
        raise DataError(f"series length {len(x)} too short for d={d}, D={D}, s={s}")
    if span == 0:
        return x
    x.require_complete("seasonal_difference")
    return MonthlySeries(x.start.shift(span), _apply_diff(x.values, d, D, s), x.label)


def _exog_matrix(y: MonthlySeries, exog) -> np.ndarray:
    cols = []
    for e in exog:
        es = as_series(e, "exog")
        if len(es) != len(y):
            raise DataError(f"exog length {len(es)} does not match target length {len(y)}")
        if isinstance(e, MonthlySeries) and e.start != y.start:
            raise DataError(f"exog {e.label!r} starts at {e.start}, target at {y.start}")
        es.require_complete("sarimax exog")
        cols.append(es.values)
    if not cols:
        return np.empty((len(y), 0))
    return np.column_stack(cols)


def sarimax_fit(y, exog=(), order: SarimaxOrder = SarimaxOrder(1, 0, 0)) -> SarimaxFit:
    """Fit by OLS on differenced data, then CSS likelihood for the ARMA part."""
    ys = as_series(y, "target")
    ys.require_complete("sarimax_fit")
    x_levels = _exog_matrix(ys, exog)
    n_exog = x_levels.shape[1]

    span = order.diff_span
    if len(ys) <= span:
        raise DataError(f"series length {len(ys)} cannot absorb differencing span {span}")
    z = _apply_diff(ys.values, order.d, order.D, order.s)
    x_diff = np.column_stack(
        [_apply_diff(x_levels[:, j], order.d, order.D, order.s) for j in range(n_exog)]
    ) if n_exog else np.empty((z.size, 0))

    if z.size <= 10 + order.n_arma + n_exog:
        raise DataError(
            f"only {z.size} observations after differencing; "
            f"need more than {10 + order.n_arma + n_exog}"
        )

    design = np.column_stack([np.ones(z.size), x_diff])
    q_mat, r_mat = np.linalg.qr(design, mode="reduced")
    diag = np.abs(np.diag(r_mat))
    if np.any(diag < 1e-10 * max(diag.max(), 1.0)):
        raise DataError("collinear exogenous regressors")
    ols_coef = np.linalg.solve(r_mat, q_mat.T @ z)
    intercept = float(ols_coef[0])
    beta_exog = ols_coef[1:]
    w = z - design @ ols_coef

    def split_negloglik(vec: np.ndarray) -> tuple[float, np.ndarray, np.ndarray, float]:
        ar, ma, ar_root, ma_root = _expand_arma(order, vec)
        if ar_root <= _ROOT_MARGIN or ma_root <= _ROOT_MARGIN:
            shortfall = max(0.0, _ROOT_MARGIN - min(ar_root, ma_root))
            return 1e10 * (1.0 + shortfall), ar, ma, np.inf
        eps, ssr = _css_kernel(w, ar, ma)
        if not np.isfinite(ssr):
            return 1e10, ar, ma, np.inf
        n_eff = w.size
        sigma2 = max(ssr / n_eff, 1e-300)
        nll = 0.5 * n_eff * (LOG_2PI + math.log(sigma2) + 1.0)
        return nll, ar, ma, sigma2

    if order.n_arma > 0:
        vec0 = np.zeros(order.n_arma)

        def objective(vec: np.ndarray) -> float:
            return split_negloglik(vec)[0]

        warm = minimize(
            objective,
            vec0,
            method="Nelder-Mead",
            options={"maxiter": 2000 * order.n_arma, "xatol": 1e-7, "fatol": 1e-10, "adaptive": True},
        )
        refined = minimize(objective, warm.x, method="BFGS", options={"maxiter": 300})
        best_vec = refined.x if refined.fun <= warm.fun else warm.x
        best_nll = min(refined.fun, warm.fun)
        if not np.isfinite(best_nll) or best_nll >= 1e9:
            raise NumericalError(f"CSS optimizer failed to converge at order {order}")
    else:
        best_vec = np.zeros(0)

    nll, ar, ma, sigma2 = split_negloglik(best_vec)
    if not np.isfinite(nll) or nll >= 1e9:
        raise NumericalError(f"non-stationary or non-invertible estimates at order {order}")
    if sigma2 <= 1e-250:
        raise NumericalError("degenerate innovation variance (target is numerically constant)")

    eps, _ = _css_kernel(w, ar, ma)
    n_eff = w.size
    loglik = -nll
    p_, P_ = order.p, order.P
    params = SarimaxParams(
        phi=best_vec[:p_],
        Phi=best_vec[p_ : p_ + P_],
        theta=best_vec[p_ + P_ : p_ + P_ + order.q],
        Theta=best_vec[p_ + P_ + order.q :],
        beta_exog=beta_exog,
        intercept=intercept,
        sigma2=sigma2,
    )
    n_free = 1 + n_exog + order.n_arma + 1
    aic = 2.0 * n_free - 2.0 * loglik

    # one-step level predictions over the likelihood window
    dpoly = _diff_poly(order.d, order.D, order.s)
    y_vals = ys.values
    level_pred = np.empty(n_eff)
    for idx in range(n_eff):
        t_level = span + idx
        zhat = z[idx] - eps[idx]
        tail = sum(dpoly[i] * y_vals[t_level - i] for i in range(1, dpoly.size))
        level_pred[idx] = zhat - tail
    res_start = ys.start.shift(span)

    return SarimaxFit(
        order=order,
        params=params,
        aic=aic,
        loglik=loglik,
        residuals=MonthlySeries(res_start, eps, f"{ys.label} innovations".strip()),
        fitted=MonthlySeries(res_start, level_pred, f"{ys.label} fitted".strip()),
        n_obs=n_eff,
        n_free_params=n_free,
        _y=y_vals.copy(),
        _exog=x_levels.copy(),
        _w=w,
        _eps=eps,
        _ar=ar,
        _ma=ma,
        _start=ys.start,
    )


def default_order_grid(s: int = 12) -> list[SarimaxOrder]:
    grid = []
    for p, d, q, P, D, Q in product(range(3), range(2), range(3), range(2), range(2), range(2)):
        grid.append(SarimaxOrder(p, d, q, P, D, Q, s))
    return grid


def aic_grid_search(y, exog=(), grid: list[SarimaxOrder] | None = None) -> SarimaxFit:
    """Fit every candidate order and keep the converged fit with minimal AIC.

    Ties break toward fewer parameters, then lexicographic (p,d,q,P,D,Q).
    """
    if grid is None:
        grid = default_order_grid()
    if not grid:
        raise DataError("empty order grid")
    best: SarimaxFit | None = None
    best_key = None
    for order in sorted(grid, key=lambda o: o.as_tuple()):
        try:
            fit = sarimax_fit(y, exog, order)
        except (DataError, NumericalError):
            continue
        key = (fit.aic, fit.n_free_params, order.as_tuple())
        if best_key is None or key < best_key:
            best, best_key = fit, key
    if best is None:
        raise NumericalError("no candidate order converged")
    return best


def _forecast_w(fit: SarimaxFit, horizon: int) -> np.ndarray:
    ar, ma = fit._ar, fit._ma
    n_w = fit._w.size
    w_ext = np.concatenate([fit._w, np.zeros(horizon)])
    eps_ext = np.concatenate([fit._eps, np.zeros(horizon)])
    for step in range(horizon):
        t = n_w + step
        pred = 0.0
        for i in range(ar.size):
            pred += ar[i] * w_ext[t - 1 - i]
        for j in range(ma.size):
            s = t - 1 - j
            if s >= 0:
                pred += ma[j] * eps_ext[s]
        w_ext[t] = pred
    return w_ext[n_w:]


def sarimax_forecast(fit: SarimaxFit, horizon: int, future_exog=()) -> MonthlySeries:
    """Iterated multi-step forecast on the original (undifferenced) scale."""
    if horizon < 1:
        raise DataError("forecast horizon must be >= 1")
    n_exog = fit._exog.shape[1]
    fut = [np.asarray(getattr(e, "values", e), dtype=float) for e in future_exog]
    if len(fut) != n_exog:
        raise DataError(f"model has {n_exog} exogenous columns, got {len(fut)} future series")
    for col in fut:
        if col.size != horizon:
            raise DataError(f"future exog length {col.size} != horizon {horizon}")

    order = fit.order
    if n_exog:
        x_ext = np.vstack([fit._exog, np.column_stack(fut)])
        x_diff = np.column_stack(
            [_apply_diff(x_ext[:, j], order.d, order.D, order.s) for j in range(n_exog)]
        )[-horizon:]
    else:
        x_diff = np.empty((horizon, 0))

    w_fore = _forecast_w(fit, horizon)
    z_fore = fit.params.intercept + x_diff @ fit.params.beta_exog + w_fore

    dpoly = _diff_poly(order.d, order.D, order.s)
    n_y = fit._y.size
    y_ext = np.concatenate([fit._y, np.zeros(horizon)])
    for step in range(horizon):
        t = n_y + step
        tail = sum(dpoly[i] * y_ext[t - i] for i in range(1, dpoly.size))
        y_ext[t] = z_fore[step] - tail
    start = fit._start.shift(n_y)
    return MonthlySeries(start, y_ext[n_y:], "sarimax forecast")


def sarimax_rolling_forecast(fit: SarimaxFit, y, exog=()) -> MonthlySeries:
    """One-step-ahead predictions over the months following the training window.

    ``y`` (and each exog column) must extend the training series: same start,
    identical values over the training span, plus the realized test months.
    Each test-month prediction conditions on the true history through the
    previous month, with parameters frozen at their training estimates.
    """
    ys = as_series(y, "target")
    ys.require_complete("sarimax_rolling_forecast")
    n_train = fit._y.size
    if len(ys) <= n_train:
        raise DataError("rolling forecast needs observations beyond the training window")
    if not np.array_equal(ys.values[:n_train], fit._y):
        raise DataError("series does not extend the training data (prefix mismatch)")
    x_levels = _exog_matrix(ys, exog)
    if x_levels.shape[1] != fit._exog.shape[1]:
        raise DataError(
            f"model has {fit._exog.shape[1]} exogenous columns, got {x_levels.shape[1]}"
        )

    order = fit.order
    span = order.diff_span
    z = _apply_diff(ys.values, order.d, order.D, order.s)
    x_diff = np.column_stack(
        [_apply_diff(x_levels[:, j], order.d, order.D, order.s) for j in range(x_levels.shape[1])]
    ) if x_levels.shape[1] else np.empty((z.size, 0))
    w = z - fit.params.intercept - x_diff @ fit.params.beta_exog
    eps, _ = _css_kernel(w, fit._ar, fit._ma)

    n_test = len(ys) - n_train
    if n_train - span < fit._ar.size:
        raise DataError("training window too short to roll the recursion into the test months")
    dpoly = _diff_poly(order.d, order.D, order.s)
    preds = np.empty(n_test)
    for idx in range(n_test):
        t_level = n_train + idx
        t_diff = t_level - span
        zhat = z[t_diff] - eps[t_diff]
        tail = sum(dpoly[i] * ys.values[t_level - i] for i in range(1, dpoly.size))
        preds[idx] = zhat - tail
    return MonthlySeries(ys.start.shift(n_train), preds, "sarimax one-step forecast")
