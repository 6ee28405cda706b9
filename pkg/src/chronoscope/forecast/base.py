"""Forecaster contract and the seasonal-naive baseline."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from ..data import DomainProfile, TimeSeries
from ..errors import NotFittedError, TooShort


def context_values(context) -> np.ndarray:
    """Accept either a TimeSeries or a plain array as forecasting context."""
    if isinstance(context, TimeSeries):
        return context.values
    return np.asarray(context, dtype=np.float64)


class Forecaster(BaseEstimator):
    """fit(train, profile) / predict(context, horizon) contract.

    context_mode declares what the evaluation harness should pass to predict:
    "window" for the trailing context_C values, "full" for the entire history
    accumulated so far (needed when features index from the series origin).
    A forecaster that produces its own full-test rollout (the rolling ARIMA)
    sets inference="rolling" and implements forecast_test.
    """

    context_mode = "window"
    inference: str | None = None
    model_name = "forecaster"

    def fit(self, train: TimeSeries, profile: DomainProfile) -> "Forecaster":
        raise NotImplementedError

    def predict(self, context, horizon: int) -> np.ndarray:
        raise NotImplementedError

    def predict_intervals(self, context, horizon: int):
        """Optional (point, lower, upper) triple; None when unsupported."""
        return None

    def _require_fitted(self, attr: str):
        if not hasattr(self, attr):
            raise NotFittedError(f"{type(self).__name__} is not fitted")


def seasonal_naive(context, horizon: int, s: int) -> np.ndarray:
    """Repeat the last s observed values cyclically for horizon steps."""
    values = context_values(context)
    if s < 1:
        raise TooShort("seasonal period must be >= 1")
    if values.size < s:
        raise TooShort(f"context of length {values.size} shorter than period {s}")
    last = values[-s:]
    reps = -(-horizon // s)
    return np.tile(last, reps)[:horizon].copy()


class SeasonalNaiveForecaster(Forecaster):
    """Baseline that repeats the value observed one season earlier."""

    model_name = "seasonal-naive"

    def fit(self, train: TimeSeries, profile: DomainProfile) -> "SeasonalNaiveForecaster":
        if len(train) < profile.seasonal_s:
            raise TooShort(
                f"train of length {len(train)} shorter than period {profile.seasonal_s}"
            )
        self.seasonal_s_ = profile.seasonal_s
        return self

    def predict(self, context, horizon: int) -> np.ndarray:
        self._require_fitted("seasonal_s_")
        return seasonal_naive(context, horizon, self.seasonal_s_)
