"""Gradient-boosting forecaster: engineered features in, iterative rollout out."""

from __future__ import annotations

import numpy as np

from ..data import BUILTIN_PROFILES, DomainProfile, TimeSeries
from ..errors import SpecInfeasible
from ..features import (
    FeatureSpec,
    build_features,
    feature_preset,
    roll_forward,
    surrogate_feature_spec,
)
from .base import Forecaster
from .trees import TreeEnsemble, gbdt_fit


def gbdt_forecast_iterative(
    ensemble: TreeEnsemble, history: TimeSeries, spec: FeatureSpec, horizon: int
) -> np.ndarray:
    """Predict one step, append it to the history, recompute features, repeat."""
    if horizon < 1:
        raise SpecInfeasible("horizon must be >= 1")
    cur = history.values.copy()
    out = np.empty(horizon, dtype=np.float64)
    series = history
    for h in range(horizon):
        row = roll_forward(series, spec, 0.0)
        out[h] = float(ensemble.predict(row[None, :])[0])
        cur = np.append(cur, out[h])
        series = history.with_values(cur)
    return out


class GBDTForecaster(Forecaster):
    """Boosted-tree forecaster over a FeatureSpec.

    Needs the full accumulated history at predict time (not just a trailing
    window) because Fourier and calendar features are positional.
    """

    context_mode = "full"
    model_name = "gbdt"

    def __init__(
        self,
        feature_spec: FeatureSpec | None = None,
        n_estimators: int = 500,
        learning_rate: float = 0.05,
        max_depth: int = 6,
        min_leaf: int = 20,
        n_bins: int = 64,
    ):
        self.feature_spec = feature_spec
        self.n_estimators = n_estimators
        self.learning_rate = learning_rate
        self.max_depth = max_depth
        self.min_leaf = min_leaf
        self.n_bins = n_bins

    def _resolve_spec(self, profile: DomainProfile) -> FeatureSpec:
        if self.feature_spec is not None:
            return self.feature_spec
        if profile.name in BUILTIN_PROFILES:
            return feature_preset(profile.name, profile.seasonal_s)
        return surrogate_feature_spec(profile.seasonal_s)

    def fit(self, train: TimeSeries, profile: DomainProfile) -> "GBDTForecaster":
        spec = self._resolve_spec(profile)
        fm = build_features(train, spec)
        self.ensemble_ = gbdt_fit(
            fm,
            n_estimators=self.n_estimators,
            learning_rate=self.learning_rate,
            max_depth=self.max_depth,
            min_leaf=self.min_leaf,
            n_bins=self.n_bins,
        )
        self.feature_spec_ = spec
        return self

    def predict(self, context, horizon: int) -> np.ndarray:
        self._require_fitted("ensemble_")
        if not isinstance(context, TimeSeries):
            raise SpecInfeasible(
                "gbdt forecaster needs the full history as a TimeSeries"
            )
        return gbdt_forecast_iterative(
            self.ensemble_, context, self.feature_spec_, horizon
        )
