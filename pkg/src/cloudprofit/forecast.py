"""Holt-Winters exponential smoothing in multiplicative state-space form
(level + additive trend + multiplicative season, multiplicative error,
undamped) for predicting the next epoch's mean arrival rate.

State update, driven by the relative one-step error
e_t = (y_t - yhat_t) / yhat_t with yhat_t = (l + b) * s:

    l' = (l + b) * (1 + alpha * e)
    b' = b + beta * (l + b) * e
    s' = s * (1 + gamma * e)

Smoothing parameters are chosen by Nelder-Mead minimization of the sum
of squared relative errors, box-constrained to (0.0001, 0.9999).
"""

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import minimize


class InsufficientDataError(ValueError):
    """Series too short to initialize the seasonal state."""


@dataclass
class EtsModel:
    """Fitted smoothing state; one instance per fitted series.

    ``n_obs`` counts observations consumed so far and fixes the phase of
    the seasonal cycle: observation t uses seasonal index t mod
    season_len.
    """

    alpha_s: float
    beta_s: float
    gamma_s: float
    level: float
    trend: float
    seasonals: np.ndarray
    season_len: int
    n_obs: int
    sse: float = 0.0


_PARAM_LO = 1e-4
_PARAM_HI = 0.9999
_BAD_FIT = 1e18


def _initial_state(y: np.ndarray, m: int) -> tuple[float, float, np.ndarray]:
    """Classical two-season decomposition of the series head.

    Level is the first-season mean and trend the per-step change between
    the two season means. Seasonal indices are the per-position means of
    the first two seasons after dividing out the trend line through the
    season means, normalized to mean 1 (without detrending, a strong
    trend would leak into the seasonal profile).
    """
    first, second = y[:m], y[m:2 * m]
    level = float(first.mean())
    trend = float(second.mean() - first.mean()) / m
    t = np.arange(2 * m, dtype=float)
    line = level + trend * (t - (m - 1) / 2.0)
    ratio = y[:2 * m] / np.maximum(line, 1e-12)
    per_position = 0.5 * (ratio[:m] + ratio[m:])
    seasonals = per_position / per_position.mean()
    return level, trend, seasonals


def _filter(y: np.ndarray, alpha: float, beta: float, gamma: float,
            level: float, trend: float,
            seasonals: np.ndarray) -> tuple[float, float, np.ndarray, np.ndarray] | None:
    """Run the recursion over y; None if the state leaves the valid region."""
    m = len(seasonals)
    s = seasonals.copy()
    errors = np.empty(len(y))
    l, b = level, trend
    for t in range(len(y)):
        j = t % m
        predicted = (l + b) * s[j]
        if not predicted > 1e-12:
            return None
        e = (y[t] - predicted) / predicted
        errors[t] = e
        lb = l + b
        l = lb * (1.0 + alpha * e)
        b = b + beta * lb * e
        s[j] = s[j] * (1.0 + gamma * e)
        if not (l > 0.0 and s[j] > 0.0):
            return None
    return l, b, s, errors


def fit_ets(series, season_len: int = 24) -> EtsModel:
    """Fit the smoothing model to a positive-valued series.

    Args:
        series: observations, oldest first; length >= 2 * season_len.
        season_len: seasonal period in observations (>= 2).

    Raises:
        InsufficientDataError: fewer than two full seasons of data.
        ValueError: non-positive observations (the multiplicative model
            requires positivity).
    """
    y = np.asarray(series, dtype=float)
    if season_len < 2:
        raise ValueError(f"season length must be >= 2, got {season_len}")
    if len(y) < 2 * season_len:
        raise InsufficientDataError(
            f"need at least {2 * season_len} observations, got {len(y)}")
    if not np.all(y > 0):
        raise ValueError("multiplicative smoothing requires strictly positive values")

    level0, trend0, seas0 = _initial_state(y, season_len)

    def objective(p: np.ndarray) -> float:
        a, b, g = p
        if not (_PARAM_LO < a < _PARAM_HI
                and _PARAM_LO < b < _PARAM_HI
                and _PARAM_LO < g < _PARAM_HI):
            return _BAD_FIT
        out = _filter(y, a, b, g, level0, trend0, seas0)
        if out is None:
            return _BAD_FIT
        return float(np.dot(out[3], out[3]))

    result = minimize(objective, x0=np.array([0.3, 0.05, 0.1]),
                      method="Nelder-Mead",
                      options=dict(xatol=1e-6, fatol=1e-12, maxiter=3000))
    params = np.clip(result.x, _PARAM_LO, _PARAM_HI)
    out = _filter(y, *params, level0, trend0, seas0)
    if out is None:
        # fall back to a sluggish but always-valid parameterization
        params = np.array([_PARAM_LO, _PARAM_LO, _PARAM_LO])
        out = _filter(y, *params, level0, trend0, seas0)
        if out is None:
            raise ValueError("smoothing state left the valid region even "
                             "at minimal parameters; series is degenerate")
    level, trend, seasonals, errors = out
    return EtsModel(alpha_s=float(params[0]), beta_s=float(params[1]),
                    gamma_s=float(params[2]), level=level, trend=trend,
                    seasonals=seasonals, season_len=season_len,
                    n_obs=len(y), sse=float(np.dot(errors, errors)))


def forecast_next(model: EtsModel, horizon: int = 1) -> float:
    """Point forecast h steps past the last observation, floored at 0.

    yhat_{T+h} = (level + h * trend) * seasonal[(T+h) mod season_len].
    """
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    j = (model.n_obs + horizon - 1) % model.season_len
    return max(0.0, (model.level + horizon * model.trend) * float(model.seasonals[j]))


def advance(model: EtsModel, y: float) -> EtsModel:
    """Fold one new observation into the state without refitting parameters."""
    if y <= 0:
        raise ValueError("multiplicative smoothing requires positive observations")
    j = model.n_obs % model.season_len
    predicted = (model.level + model.trend) * float(model.seasonals[j])
    if not predicted > 1e-12:
        raise ValueError("model state has collapsed; refit required")
    e = (y - predicted) / predicted
    lb = model.level + model.trend
    seasonals = model.seasonals.copy()
    seasonals[j] = seasonals[j] * (1.0 + model.gamma_s * e)
    return replace(model,
                   level=lb * (1.0 + model.alpha_s * e),
                   trend=model.trend + model.beta_s * lb * e,
                   seasonals=seasonals,
                   n_obs=model.n_obs + 1)


@dataclass
class ErrorStats:
    """Relative forecast-error summary for reporting."""

    errors: np.ndarray
    mean: float
    std: float
    bin_edges: np.ndarray
    counts: np.ndarray

    def mean_abs(self) -> float:
        return float(np.abs(self.errors).mean())


def relative_error(actual, predicted, bucket_width: float = 0.05) -> ErrorStats:
    """Per-point relative errors (predicted - actual) / actual with summary.

    The histogram buckets span the observed error range on a grid of the
    given width, aligned at zero.
    """
    a = np.asarray(actual, dtype=float)
    p = np.asarray(predicted, dtype=float)
    if a.shape != p.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {p.shape}")
    if a.size == 0:
        raise ValueError("empty series")
    if not np.all(a > 0):
        raise ValueError("actual values must be positive")
    if bucket_width <= 0:
        raise ValueError("bucket width must be positive")
    errors = (p - a) / a
    lo = math.floor(errors.min() / bucket_width) * bucket_width
    hi = math.ceil(errors.max() / bucket_width) * bucket_width
    if hi <= lo:
        hi = lo + bucket_width
    n_bins = int(round((hi - lo) / bucket_width))
    counts, edges = np.histogram(errors, bins=n_bins, range=(lo, hi))
    return ErrorStats(errors=errors, mean=float(errors.mean()),
                      std=float(errors.std()), bin_edges=edges, counts=counts)
