"""Rolling-origin evaluation: autoregressive and direct rollouts, full-test
coverage, and metric scoring per series.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import datetime

import numpy as np

from .data import DomainProfile, SplitSeries, TimeSeries
from .errors import LengthMismatch
from .metrics import MetricRow, aggregate, mase, smape

__all__ = [
    "ForecastRecord",
    "run_autoregressive",
    "run_direct",
    "evaluate_split",
    "score_record",
    "aggregate",
]


@dataclass(frozen=True)
class ForecastRecord:
    """Test-aligned forecasts for one (series, model) pair."""

    series_id: str
    model_name: str
    timestamps: tuple[datetime, ...]
    y_true: np.ndarray
    y_pred: np.ndarray
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None

    def __post_init__(self):
        n = len(self.timestamps)
        if self.y_true.shape != (n,) or self.y_pred.shape != (n,):
            raise LengthMismatch(
                f"record arrays must align with {n} timestamps"
            )
        for b in (self.lower, self.upper):
            if b is not None and b.shape != (n,):
                raise LengthMismatch("interval bounds must align with timestamps")


def _context(model, base: TimeSeries, extra: np.ndarray, profile: DomainProfile):
    """Assemble the context to hand to model.predict: either the trailing
    context_C values or the full history, per the model's declared mode."""
    values = (
        np.concatenate([base.values, extra]) if extra.size else base.values
    )
    if getattr(model, "context_mode", "window") == "full":
        return base.with_values(values)
    return values[-profile.context_C :]


def run_autoregressive(model, split: SplitSeries, profile: DomainProfile) -> ForecastRecord:
    """Predict H, append the predictions to the context, repeat until the
    test segment is covered; the final call asks only for the remainder."""
    n_test = len(split.test)
    preds = np.empty(0, dtype=np.float64)
    while preds.size < n_test:
        h = min(profile.horizon_H, n_test - preds.size)
        ctx = _context(model, split.train, preds, profile)
        block = np.asarray(model.predict(ctx, h), dtype=np.float64)
        if block.shape != (h,):
            raise LengthMismatch(
                f"model returned {block.shape} for horizon {h}"
            )
        preds = np.concatenate([preds, block])
    return ForecastRecord(
        series_id=split.test.series_id,
        model_name=getattr(model, "model_name", type(model).__name__),
        timestamps=tuple(split.test.timestamps()),
        y_true=split.test.values.copy(),
        y_pred=preds,
    )


def run_direct(model, split: SplitSeries, profile: DomainProfile) -> ForecastRecord:
    """One context window per test block; observed truth (never predictions)
    refills the context between blocks."""
    n_test = len(split.test)
    preds = np.empty(0, dtype=np.float64)
    done = 0
    while done < n_test:
        h = min(profile.horizon_H, n_test - done)
        ctx = _context(model, split.train, split.test.values[:done], profile)
        block = np.asarray(model.predict(ctx, h), dtype=np.float64)
        if block.shape != (h,):
            raise LengthMismatch(f"model returned {block.shape} for horizon {h}")
        preds = np.concatenate([preds, block])
        done += h
    return ForecastRecord(
        series_id=split.test.series_id,
        model_name=getattr(model, "model_name", type(model).__name__),
        timestamps=tuple(split.test.timestamps()),
        y_true=split.test.values.copy(),
        y_pred=preds,
    )


def evaluate_split(
    model, split: SplitSeries, profile: DomainProfile, mode: str | None = None
) -> ForecastRecord:
    """Dispatch on the model's declared inference style: a model that rolls
    the whole test itself (ARIMA) is called once; everything else goes
    through the profile's autoregressive or direct setup."""
    if getattr(model, "inference", None) == "rolling" and hasattr(model, "forecast_test"):
        point, lower, upper = model.forecast_test(split, profile)
        return ForecastRecord(
            series_id=split.test.series_id,
            model_name=getattr(model, "model_name", type(model).__name__),
            timestamps=tuple(split.test.timestamps()),
            y_true=split.test.values.copy(),
            y_pred=np.asarray(point, dtype=np.float64),
            lower=np.asarray(lower, dtype=np.float64),
            upper=np.asarray(upper, dtype=np.float64),
        )
    mode = mode or profile.inference
    if mode == "direct":
        return run_direct(model, split, profile)
    return run_autoregressive(model, split, profile)


def score_record(
    record: ForecastRecord,
    split: SplitSeries,
    profile: DomainProfile,
    domain: str | None = None,
) -> MetricRow:
    m = mase(record.y_true, record.y_pred, split.train.values, profile.seasonal_s)
    sm = smape(record.y_true, record.y_pred)
    flags = () if math.isfinite(m) else ("infinite-mase",)
    return MetricRow(
        domain=domain or profile.name,
        model=record.model_name,
        series_id=record.series_id,
        mase=m,
        smape=sm,
        flags=flags,
    )
