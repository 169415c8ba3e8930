"""EGARCH(p, o, q) volatility models: filtering, Gaussian ML fitting, simulation.

The conditional variance follows a log recursion driven by centered absolute
standardized shocks (size effect, ``alpha``), signed standardized shocks
(leverage, ``gamma``) and lagged log variances (persistence, ``beta``):

    ln s2[t] = omega + sum_i alpha[i] * (|z[t-1-i]| - sqrt(2/pi))
                     + sum_j gamma[j] * z[t-1-j]
                     + sum_k beta[k]  * ln s2[t-1-k]

with z[t] = eps[t] / s[t] and eps[t] = r[t] - mu. Innovations are standard
normal; sqrt(2/pi) is E|z| under normality, so the size term is mean zero.

Pre-sample convention: lagged log variances before the sample use a fixed
initialization (default ln of the sample variance of the returns, overridable
via ``lnsigma2_init``); shock terms whose lag falls before the sample drop out
of the recursion.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from ._jit import njit
from .errors import DataError, NumericalError
from .series import Month, MonthlySeries, as_series

__all__ = [
    "EgarchSpec",
    "EgarchParams",
    "EgarchFit",
    "egarch_filter",
    "egarch_fit",
    "egarch_simulate",
]

SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)
LOG_2PI = math.log(2.0 * math.pi)

# keep exp(lnsigma2) comfortably inside double range during optimization
_LNSIGMA2_CAP = 500.0


@dataclass(frozen=True)
class EgarchSpec:
    """Lag orders: p absolute-shock terms, o leverage terms, q log-variance terms."""

    p: int
    o: int
    q: int

    def __post_init__(self) -> None:
        if self.p < 1 or self.q < 1 or self.o < 0:
            raise DataError(f"need p >= 1, q >= 1, o >= 0, got {(self.p, self.o, self.q)}")
        if max(self.p, self.o, self.q) > 12:
            raise DataError("lag orders above 12 are not supported")

    @property
    def n_params(self) -> int:
        return 2 + self.p + self.o + self.q

    @property
    def max_lag(self) -> int:
        return max(self.p, self.o, self.q)


@dataclass(frozen=True)
class EgarchParams:
    """Parameter set (mu, omega, alpha_1..p, gamma_1..o, beta_1..q)."""

    mu: float
    omega: float
    alpha: np.ndarray
    gamma: np.ndarray
    beta: np.ndarray

    def __post_init__(self) -> None:
        for name in ("alpha", "gamma", "beta"):
            object.__setattr__(self, name, np.atleast_1d(np.asarray(getattr(self, name), dtype=float)))
        theta = self.to_array()
        if not np.all(np.isfinite(theta)):
            raise DataError("EGARCH parameters must be finite")
        if self.beta.size < 1:
            raise DataError("at least one beta term is required")
        if np.sum(np.abs(self.beta)) >= 1.0:
            raise DataError(
                f"sum(|beta|) = {np.sum(np.abs(self.beta)):.4f} >= 1: "
                "log-variance recursion is not covariance stationary"
            )

    @property
    def spec(self) -> EgarchSpec:
        return EgarchSpec(self.alpha.size, self.gamma.size, self.beta.size)

    def to_array(self) -> np.ndarray:
        """Flatten in the canonical order mu, omega, alpha..., gamma..., beta..."""
        return np.concatenate(([self.mu, self.omega], self.alpha, self.gamma, self.beta))

    @classmethod
    def from_array(cls, spec: EgarchSpec, theta: np.ndarray) -> "EgarchParams":
        theta = np.asarray(theta, dtype=float)
        if theta.size != spec.n_params:
            raise DataError(f"expected {spec.n_params} parameters, got {theta.size}")
        p, o = spec.p, spec.o
        return cls(
            mu=float(theta[0]),
            omega=float(theta[1]),
            alpha=theta[2 : 2 + p],
            gamma=theta[2 + p : 2 + p + o],
            beta=theta[2 + p + o :],
        )

    @staticmethod
    def names(spec: EgarchSpec) -> list[str]:
        return (
            ["mu", "omega"]
            + [f"alpha{i + 1}" for i in range(spec.p)]
            + [f"gamma{j + 1}" for j in range(spec.o)]
            + [f"beta{k + 1}" for k in range(spec.q)]
        )


@dataclass
class EgarchFit:
    """A fitted model: parameters, uncertainty, and the filtered paths."""

    spec: EgarchSpec
    params: EgarchParams
    std_errs: np.ndarray | None
    log_likelihood: float
    cond_vol: MonthlySeries
    residuals: MonthlySeries
    converged: bool = True

    def to_dict(self) -> dict:
        return {
            "spec": {"p": self.spec.p, "o": self.spec.o, "q": self.spec.q},
            "param_names": EgarchParams.names(self.spec),
            "params": [float(v) for v in self.params.to_array()],
            "std_errs": None if self.std_errs is None else [float(v) for v in self.std_errs],
            "log_likelihood": float(self.log_likelihood),
            "n_obs": len(self.residuals),
            "converged": bool(self.converged),
        }


@njit(cache=True)
def _filter_kernel(eps, alpha, gamma, beta, omega, lnsig2_init):
    n = eps.shape[0]
    p = alpha.shape[0]
    o = gamma.shape[0]
    q = beta.shape[0]
    lnsig2 = np.empty(n)
    z = np.zeros(n)
    absz = np.zeros(n)
    loglik = 0.0
    for t in range(n):
        v = omega
        for i in range(p):
            s = t - 1 - i
            if s >= 0:
                v += alpha[i] * (absz[s] - SQRT_2_OVER_PI)
        for j in range(o):
            s = t - 1 - j
            if s >= 0:
                v += gamma[j] * z[s]
        for k in range(q):
            s = t - 1 - k
            if s >= 0:
                v += beta[k] * lnsig2[s]
            else:
                v += beta[k] * lnsig2_init
        # cap both tails: exp overflow above, sigma underflow (-> division by
        # zero in the standardized shock) below
        if not np.isfinite(v) or v > _LNSIGMA2_CAP or v < -_LNSIGMA2_CAP:
            return lnsig2, z, -np.inf
        lnsig2[t] = v
        sig = np.exp(0.5 * v)
        z[t] = eps[t] / sig
        absz[t] = abs(z[t])
        loglik += -0.5 * (LOG_2PI + v + z[t] * z[t])
    return lnsig2, z, loglik


@njit(cache=True)
def _simulate_kernel(z, alpha, gamma, beta, omega, mu, lnsig2_init):
    n = z.shape[0]
    p = alpha.shape[0]
    o = gamma.shape[0]
    q = beta.shape[0]
    lnsig2 = np.empty(n)
    r = np.empty(n)
    for t in range(n):
        v = omega
        for i in range(p):
            s = t - 1 - i
            if s >= 0:
                v += alpha[i] * (abs(z[s]) - SQRT_2_OVER_PI)
        for j in range(o):
            s = t - 1 - j
            if s >= 0:
                v += gamma[j] * z[s]
        for k in range(q):
            s = t - 1 - k
            if s >= 0:
                v += beta[k] * lnsig2[s]
            else:
                v += beta[k] * lnsig2_init
        lnsig2[t] = v
        r[t] = mu + np.exp(0.5 * v) * z[t]
    return r


def _check_shapes(spec: EgarchSpec, params: EgarchParams) -> None:
    if (params.alpha.size, params.gamma.size, params.beta.size) != (spec.p, spec.o, spec.q):
        raise DataError(
            f"parameter shapes {(params.alpha.size, params.gamma.size, params.beta.size)} "
            f"do not match spec (p={spec.p}, o={spec.o}, q={spec.q})"
        )


def egarch_filter(
    returns,
    spec: EgarchSpec,
    params: EgarchParams,
    lnsigma2_init: float | None = None,
) -> tuple[MonthlySeries, MonthlySeries, float]:
    """Run the variance recursion; return (cond_vol, residuals, loglik).

    ``lnsigma2_init`` overrides the pre-sample log variance (default: ln of
    the sample variance of the returns).
    """
    series = as_series(returns, "returns")
    series.require_complete("egarch_filter")
    _check_shapes(spec, params)
    r = series.values
    if r.size <= spec.max_lag:
        raise DataError(f"need more than {spec.max_lag} observations, got {r.size}")
    if lnsigma2_init is None:
        v0 = float(r.var(ddof=1))
        if v0 <= 0.0:
            raise DataError("constant returns: cannot initialize the recursion")
        lnsigma2_init = math.log(v0)
    eps = r - params.mu
    lnsig2, _, loglik = _filter_kernel(
        eps, params.alpha, params.gamma, params.beta, params.omega, float(lnsigma2_init)
    )
    if not np.isfinite(loglik):
        raise NumericalError("EGARCH recursion diverged: parameters explosive on this data")
    cond_vol = MonthlySeries(series.start, np.exp(0.5 * lnsig2), f"{series.label} cond vol".strip())
    residuals = MonthlySeries(series.start, eps, f"{series.label} residuals".strip())
    return cond_vol, residuals, float(loglik)


def _negloglik(theta: np.ndarray, spec: EgarchSpec, eps_base: np.ndarray, lnsig2_init: float) -> float:
    p, o = spec.p, spec.o
    mu = theta[0]
    omega = theta[1]
    alpha = theta[2 : 2 + p]
    gamma = theta[2 + p : 2 + p + o]
    beta = theta[2 + p + o :]
    beta_mass = np.sum(np.abs(beta))
    if not np.all(np.isfinite(theta)):
        return 1e10
    if beta_mass > 0.999:
        # steep penalty ramp back into the stationarity region
        return 1e10 * (1.0 + beta_mass)
    _, _, loglik = _filter_kernel(eps_base - mu, alpha, gamma, beta, omega, lnsig2_init)
    if not np.isfinite(loglik):
        return 1e10
    return -loglik


def _numerical_hessian(fun, theta: np.ndarray) -> np.ndarray:
    n = theta.size
    h = 1e-4 * np.maximum(1.0, np.abs(theta))
    hess = np.empty((n, n))
    for i in range(n):
        for j in range(i, n):
            ei = np.zeros(n)
            ej = np.zeros(n)
            ei[i] = h[i]
            ej[j] = h[j]
            f_pp = fun(theta + ei + ej)
            f_pm = fun(theta + ei - ej)
            f_mp = fun(theta - ei + ej)
            f_mm = fun(theta - ei - ej)
            hess[i, j] = hess[j, i] = (f_pp - f_pm - f_mp + f_mm) / (4.0 * h[i] * h[j])
    return hess


def egarch_fit(returns, spec: EgarchSpec) -> EgarchFit:
    """Maximize the Gaussian likelihood: Nelder-Mead warm start, BFGS refinement.

    Standard errors come from the inverse finite-difference Hessian at the
    optimum; when that matrix is not positive definite the fit is returned
    with ``std_errs=None``.
    """
    series = as_series(returns, "returns")
    series.require_complete("egarch_fit")
    r = series.values
    min_len = max(30, 5 * (1 + spec.p + spec.o + spec.q) + 1)
    if r.size < min_len:
        raise DataError(f"need at least {min_len} returns for EGARCH({spec.p},{spec.o},{spec.q}), got {r.size}")
    v0 = float(r.var(ddof=1))
    if v0 <= 0.0:
        raise DataError("constant returns cannot be fitted")
    lnsig2_init = math.log(v0)

    beta0 = np.zeros(spec.q)
    beta0[0] = 0.8
    theta0 = np.concatenate(
        (
            [float(r.mean()), (1.0 - 0.8) * lnsig2_init],
            np.full(spec.p, 0.05),
            np.zeros(spec.o),
            beta0,
        )
    )

    def objective(theta: np.ndarray) -> float:
        return _negloglik(theta, spec, r, lnsig2_init)

    warm = minimize(
        objective,
        theta0,
        method="Nelder-Mead",
        options={"maxiter": 4000 * spec.n_params, "xatol": 1e-6, "fatol": 1e-8, "adaptive": True},
    )
    refined = minimize(objective, warm.x, method="BFGS", options={"maxiter": 500, "gtol": 1e-6})
    best = refined if refined.fun <= warm.fun else warm
    if not np.isfinite(best.fun) or best.fun >= 1e9:
        raise NumericalError("EGARCH optimizer failed to find a usable parameter set")

    params = EgarchParams.from_array(spec, best.x)
    cond_vol, residuals, loglik = egarch_filter(series, spec, params, lnsigma2_init=lnsig2_init)

    std_errs: np.ndarray | None
    if np.sum(np.abs(params.beta)) > 0.99:
        # optimum pinned against the stationarity constraint: the local
        # quadratic approximation is invalid, so no usable standard errors
        std_errs = None
    else:
        try:
            hess = _numerical_hessian(objective, best.x)
            cov = np.linalg.inv(hess)
            diag = np.diag(cov)
            std_errs = np.sqrt(diag) if np.all(diag > 0) else None
        except np.linalg.LinAlgError:
            std_errs = None

    return EgarchFit(
        spec=spec,
        params=params,
        std_errs=std_errs,
        log_likelihood=loglik,
        cond_vol=cond_vol,
        residuals=residuals,
        converged=bool(warm.success or refined.success),
    )


def egarch_simulate(
    spec: EgarchSpec,
    params: EgarchParams,
    n: int,
    seed: int,
    burn: int = 500,
    start: Month = Month(2000, 1),
) -> MonthlySeries:
    """Draw r_t = mu + sigma_t z_t with seeded standard-normal shocks.

    The recursion starts from its unconditional mean omega / (1 - sum(beta))
    and discards ``burn`` warm-up observations; identical seeds give
    identical series.
    """
    _check_shapes(spec, params)
    if n < 1:
        raise DataError(f"simulation length must be >= 1, got {n}")
    if burn < 0:
        raise DataError("burn must be >= 0")
    rng = np.random.default_rng(seed)
    z = rng.standard_normal(n + burn)
    lnsig2_init = params.omega / (1.0 - float(np.sum(params.beta)))
    r = _simulate_kernel(
        z, params.alpha, params.gamma, params.beta, params.omega, params.mu, lnsig2_init
    )
    return MonthlySeries(start, r[burn:], "egarch simulation")
