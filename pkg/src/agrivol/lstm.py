"""Single-layer LSTM regressor, implemented from scratch on numpy.

The cell follows the standard gate equations: forget f, input i, candidate
state, output o, with sigmoid gates and tanh state squashing; a linear head
maps the final hidden state to one scalar prediction. Training is full-batch
gradient descent with backpropagation through time, mean squared error on
min-max scaled targets, and global gradient-norm clipping. Everything is
deterministic for a fixed (data, config, seed) triple.

The dataset is tiny (~150 monthly observations), which is why the defaults
are small and there is no mini-batching, momentum, or GPU path.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError, NumericalError
from .series import MonthlySeries, as_series

__all__ = [
    "LstmConfig",
    "LstmWeights",
    "CellState",
    "lstm_cell",
    "lstm_forward",
    "lstm_train",
    "lstm_forecast",
    "batch_loss",
    "batch_gradients",
]

_WEIGHT_FIELDS = ("W_f", "W_i", "W_C", "W_o", "b_f", "b_i", "b_C", "b_o", "W_out", "b_out")


@dataclass(frozen=True)
class LstmConfig:
    input_dim: int
    hidden_dim: int = 16
    lookback: int = 12
    epochs: int = 500
    learning_rate: float = 0.01
    seed: int = 0
    train_fraction: float = 0.8

    def __post_init__(self) -> None:
        if min(self.input_dim, self.hidden_dim, self.lookback, self.epochs) < 1:
            raise DataError("input_dim, hidden_dim, lookback, and epochs must all be >= 1")
        if not 0.0 < self.train_fraction < 1.0:
            raise DataError(f"train_fraction must be in (0, 1), got {self.train_fraction}")
        if self.learning_rate <= 0.0:
            raise DataError("learning_rate must be positive")


@dataclass
class LstmWeights:
    """Gate weights over the concatenated [h_prev, x] vector, plus the output head.

    ``feature_min``/``feature_max`` hold the training-range min-max scalers
    (feature 0 is the forecast target); they and ``config`` are attached by
    :func:`lstm_train` and are required by :func:`lstm_forecast`.
    """

    W_f: np.ndarray
    W_i: np.ndarray
    W_C: np.ndarray
    W_o: np.ndarray
    b_f: np.ndarray
    b_i: np.ndarray
    b_C: np.ndarray
    b_o: np.ndarray
    W_out: np.ndarray
    b_out: float
    feature_min: np.ndarray | None = None
    feature_max: np.ndarray | None = None
    config: LstmConfig | None = None
    loss_history: np.ndarray | None = None

    def __post_init__(self) -> None:
        for name in _WEIGHT_FIELDS[:-1]:
            setattr(self, name, np.asarray(getattr(self, name), dtype=float))
        self.b_out = float(self.b_out)
        h, hi = self.W_f.shape
        for name in ("W_i", "W_C", "W_o"):
            if getattr(self, name).shape != (h, hi):
                raise DataError(f"{name} shape {getattr(self, name).shape} != {(h, hi)}")
        for name in ("b_f", "b_i", "b_C", "b_o"):
            if getattr(self, name).shape != (h,):
                raise DataError(f"{name} shape {getattr(self, name).shape} != {(h,)}")
        if self.W_out.shape != (1, h):
            raise DataError(f"W_out shape {self.W_out.shape} != {(1, h)}")
        if not all(np.all(np.isfinite(getattr(self, n))) for n in _WEIGHT_FIELDS):
            raise DataError("weights must be finite")

    @property
    def hidden_dim(self) -> int:
        return self.W_f.shape[0]

    @property
    def input_dim(self) -> int:
        return self.W_f.shape[1] - self.W_f.shape[0]

    def to_dict(self) -> dict:
        out: dict = {
            name: np.asarray(getattr(self, name)).tolist() for name in _WEIGHT_FIELDS
        }
        out["hidden_dim"] = self.hidden_dim
        out["input_dim"] = self.input_dim
        if self.feature_min is not None:
            out["feature_min"] = self.feature_min.tolist()
            out["feature_max"] = self.feature_max.tolist()
        if self.config is not None:
            out["config"] = {
                "input_dim": self.config.input_dim,
                "hidden_dim": self.config.hidden_dim,
                "lookback": self.config.lookback,
                "epochs": self.config.epochs,
                "learning_rate": self.config.learning_rate,
                "seed": self.config.seed,
                "train_fraction": self.config.train_fraction,
            }
        return out


@dataclass
class CellState:
    h: np.ndarray
    C: np.ndarray

    @classmethod
    def zero(cls, hidden_dim: int) -> "CellState":
        return cls(np.zeros(hidden_dim), np.zeros(hidden_dim))


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


def lstm_cell(x_t: np.ndarray, prev: CellState, w: LstmWeights) -> CellState:
    """One step of the gate equations on a single feature vector."""
    x_t = np.asarray(x_t, dtype=float)
    if x_t.shape != (w.input_dim,):
        raise DataError(f"expected input of shape {(w.input_dim,)}, got {x_t.shape}")
    if prev.h.shape != (w.hidden_dim,) or prev.C.shape != (w.hidden_dim,):
        raise DataError("previous state shape does not match hidden_dim")
    v = np.concatenate([prev.h, x_t])
    f = _sigmoid(w.W_f @ v + w.b_f)
    i = _sigmoid(w.W_i @ v + w.b_i)
    c_tilde = np.tanh(w.W_C @ v + w.b_C)
    c = f * prev.C + i * c_tilde
    o = _sigmoid(w.W_o @ v + w.b_o)
    h = o * np.tanh(c)
    return CellState(h=h, C=c)


def lstm_forward(window: np.ndarray, w: LstmWeights) -> float:
    """Unroll the cell over one window from a zero state; linear head on h_T."""
    window = np.asarray(window, dtype=float)
    if window.ndim != 2 or window.shape[1] != w.input_dim:
        raise DataError(f"window must have shape (steps, {w.input_dim}), got {window.shape}")
    if w.config is not None and window.shape[0] != w.config.lookback:
        raise DataError(f"window length {window.shape[0]} != lookback {w.config.lookback}")
    state = CellState.zero(w.hidden_dim)
    for t in range(window.shape[0]):
        state = lstm_cell(window[t], state, w)
    return float((w.W_out @ state.h)[0] + w.b_out)


def _batch_forward(w: LstmWeights, windows: np.ndarray):
    """Vectorized unroll over a (batch, steps, input_dim) tensor, with caches."""
    n, steps, _ = windows.shape
    hd = w.hidden_dim
    h = np.zeros((n, hd))
    c = np.zeros((n, hd))
    cache = []
    for t in range(steps):
        v = np.concatenate([h, windows[:, t, :]], axis=1)
        f = _sigmoid(v @ w.W_f.T + w.b_f)
        i = _sigmoid(v @ w.W_i.T + w.b_i)
        c_tilde = np.tanh(v @ w.W_C.T + w.b_C)
        c_new = f * c + i * c_tilde
        o = _sigmoid(v @ w.W_o.T + w.b_o)
        tanh_c = np.tanh(c_new)
        h_new = o * tanh_c
        cache.append((v, f, i, c_tilde, o, c, tanh_c))
        h, c = h_new, c_new
    pred = h @ w.W_out.T[:, 0] + w.b_out
    return pred, h, cache


def batch_loss(w: LstmWeights, windows: np.ndarray, targets: np.ndarray) -> float:
    pred, _, _ = _batch_forward(w, windows)
    diff = pred - targets
    return float(np.mean(diff * diff))


def batch_gradients(w: LstmWeights, windows: np.ndarray, targets: np.ndarray):
    """Mean-squared-error gradients by backpropagation through time."""
    n, steps, _ = windows.shape
    hd = w.hidden_dim
    pred, h_last, cache = _batch_forward(w, windows)
    diff = pred - targets
    loss = float(np.mean(diff * diff))

    grads = {name: np.zeros_like(np.asarray(getattr(w, name), dtype=float)) for name in _WEIGHT_FIELDS[:-1]}
    grads["b_out"] = 0.0

    dpred = 2.0 * diff / n
    grads["W_out"] += (dpred @ h_last)[None, :]
    grads["b_out"] += float(dpred.sum())

    dh = np.outer(dpred, w.W_out[0])
    dc_next = np.zeros((n, hd))
    for t in reversed(range(steps)):
        v, f, i, c_tilde, o, c_prev, tanh_c = cache[t]
        do = dh * tanh_c
        dc = dc_next + dh * o * (1.0 - tanh_c * tanh_c)
        df = dc * c_prev
        di = dc * c_tilde
        dct = dc * i
        zf = df * f * (1.0 - f)
        zi = di * i * (1.0 - i)
        zc = dct * (1.0 - c_tilde * c_tilde)
        zo = do * o * (1.0 - o)
        grads["W_f"] += zf.T @ v
        grads["W_i"] += zi.T @ v
        grads["W_C"] += zc.T @ v
        grads["W_o"] += zo.T @ v
        grads["b_f"] += zf.sum(axis=0)
        grads["b_i"] += zi.sum(axis=0)
        grads["b_C"] += zc.sum(axis=0)
        grads["b_o"] += zo.sum(axis=0)
        dv = zf @ w.W_f + zi @ w.W_i + zc @ w.W_C + zo @ w.W_o
        dh = dv[:, :hd]
        dc_next = dc * f
    return loss, grads


def _clip_gradients(grads: dict, max_norm: float = 1.0) -> None:
    total = 0.0
    for g in grads.values():
        total += float(np.sum(np.square(g)))
    norm = np.sqrt(total)
    if norm > max_norm:
        scale = max_norm / norm
        for name in grads:
            grads[name] = grads[name] * scale


def _init_weights(cfg: LstmConfig) -> LstmWeights:
    rng = np.random.default_rng(cfg.seed)
    hd, idim = cfg.hidden_dim, cfg.input_dim
    bound = 1.0 / np.sqrt(hd + idim)

    def mat(rows, cols):
        return rng.uniform(-bound, bound, size=(rows, cols))

    return LstmWeights(
        W_f=mat(hd, hd + idim),
        W_i=mat(hd, hd + idim),
        W_C=mat(hd, hd + idim),
        W_o=mat(hd, hd + idim),
        b_f=np.ones(hd),  # retention prior
        b_i=np.zeros(hd),
        b_C=np.zeros(hd),
        b_o=np.zeros(hd),
        W_out=mat(1, hd),
        b_out=0.0,
        config=cfg,
    )


def _feature_matrix(series: MonthlySeries, exog) -> np.ndarray:
    cols = [series.values]
    for e in exog:
        es = as_series(e, "exog")
        if len(es) != len(series):
            raise DataError(f"exog length {len(es)} != series length {len(series)}")
        if isinstance(e, MonthlySeries) and e.start != series.start:
            raise DataError(f"exog {e.label!r} is not aligned with the target series")
        es.require_complete("lstm features")
        cols.append(es.values)
    return np.column_stack(cols)


def _scale(features: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    span = np.where(hi > lo, hi - lo, 1.0)
    return (features - lo) / span


def _inverse_scale_target(scaled: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    span = hi[0] - lo[0] if hi[0] > lo[0] else 1.0
    return scaled * span + lo[0]


def _windows(features: np.ndarray, lookback: int, first_target: int, last_target: int):
    """Windows of rows [t-lookback, t) predicting row t, for t in [first, last)."""
    x = np.stack([features[t - lookback : t] for t in range(first_target, last_target)])
    y = features[first_target:last_target, 0]
    return x, y


def lstm_train(series, exog=(), cfg: LstmConfig | None = None) -> LstmWeights:
    """Train on the chronological head of the data; scalers fit there too.

    The first round(train_fraction * n) months form the training range.
    Min-max scalers are fit on that range only (no leakage); windows of
    ``lookback`` months predict the next month's target.
    """
    ser = as_series(series, "target")
    ser.require_complete("lstm_train")
    if cfg is None:
        cfg = LstmConfig(input_dim=1 + len(tuple(exog)))
    features = _feature_matrix(ser, exog)
    if features.shape[1] != cfg.input_dim:
        raise DataError(
            f"config expects {cfg.input_dim} features, data provides {features.shape[1]}"
        )
    n = features.shape[0]
    if cfg.lookback >= n:
        raise DataError(f"lookback {cfg.lookback} must be < series length {n}")
    n_train = int(round(cfg.train_fraction * n))
    n_windows = n_train - cfg.lookback
    if n_windows < 10:
        raise DataError(
            f"only {n_windows} training windows; need at least 10 "
            f"(train range {n_train}, lookback {cfg.lookback})"
        )

    lo = features[:n_train].min(axis=0)
    hi = features[:n_train].max(axis=0)
    scaled = _scale(features, lo, hi)
    x_train, y_train = _windows(scaled, cfg.lookback, cfg.lookback, n_train)

    w = _init_weights(cfg)
    losses = np.empty(cfg.epochs)
    for epoch in range(cfg.epochs):
        loss, grads = batch_gradients(w, x_train, y_train)
        if not np.isfinite(loss):
            raise NumericalError(f"training loss diverged at epoch {epoch}")
        losses[epoch] = loss
        _clip_gradients(grads)
        for name in _WEIGHT_FIELDS[:-1]:
            arr = getattr(w, name)
            arr -= cfg.learning_rate * grads[name]
        w.b_out -= cfg.learning_rate * grads["b_out"]

    w.feature_min = lo
    w.feature_max = hi
    w.loss_history = losses
    return w


def lstm_forecast(weights: LstmWeights, series, exog=(), horizon: int = 1) -> MonthlySeries:
    """Rolling one-step predictions for the last ``horizon`` months.

    Each prediction conditions on the realized (not forecast) lagged target,
    matching how the seasonal-ARMA forecasts are evaluated. Output is on the
    original scale.
    """
    if weights.config is None or weights.feature_min is None:
        raise DataError("weights lack config/scalers; train with lstm_train first")
    if horizon < 0:
        raise DataError("horizon must be >= 0")
    ser = as_series(series, "target")
    if horizon == 0:
        return MonthlySeries(ser.start, np.empty(0), "lstm forecast")
    ser.require_complete("lstm_forecast")
    cfg = weights.config
    features = _feature_matrix(ser, exog)
    if features.shape[1] != cfg.input_dim:
        raise DataError(f"expected {cfg.input_dim} feature columns, got {features.shape[1]}")
    n = features.shape[0]
    if horizon > n - cfg.lookback:
        raise DataError(
            f"horizon {horizon} exceeds available history "
            f"({n} rows, lookback {cfg.lookback})"
        )
    scaled = _scale(features, weights.feature_min, weights.feature_max)
    x, _ = _windows(scaled, cfg.lookback, n - horizon, n)
    pred_scaled, _, _ = _batch_forward(weights, x)
    preds = _inverse_scale_target(pred_scaled, weights.feature_min, weights.feature_max)
    return MonthlySeries(ser.start.shift(n - horizon), preds, "lstm forecast")
