"""Forecast accuracy metrics (sMAPE, MASE) and per-domain aggregation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import LengthMismatch, TrainTooShort


def smape(y_true, y_pred) -> float:
    """Symmetric MAPE in percent, bounded [0, 200].

    Each term is 100 * |x - x_hat| / ((|x| + |x_hat|) / 2); a term where both
    values are exactly zero contributes 0 rather than propagating 0/0, which
    matters on sparse intermittent series.
    """
    y_true = np.asarray(y_true, dtype=np.float64)
    y_pred = np.asarray(y_pred, dtype=np.float64)
    if y_true.shape != y_pred.shape or y_true.ndim != 1 or y_true.size == 0:
        raise LengthMismatch(
            f"need equal non-empty 1-d arrays, got {y_true.shape} vs {y_pred.shape}"
        )
    denom = (np.abs(y_true) + np.abs(y_pred)) / 2.0
    num = np.abs(y_true - y_pred)
    terms = np.divide(num, denom, out=np.zeros_like(num), where=denom > 0)
    return float(100.0 * terms.mean())


def mase(y_true, y_pred, train, s: int) -> float:
    """Mean absolute error scaled by the train-side seasonal-naive error with
    period s; returns +inf when the training series repeats with period s
    exactly (flagged downstream rather than raised)."""
    y_true = np.asarray(y_true, dtype=np.float64)
    y_pred = np.asarray(y_pred, dtype=np.float64)
    train = np.asarray(train, dtype=np.float64)
    if y_true.shape != y_pred.shape or y_true.ndim != 1 or y_true.size == 0:
        raise LengthMismatch(
            f"need equal non-empty 1-d arrays, got {y_true.shape} vs {y_pred.shape}"
        )
    if s < 1:
        raise TrainTooShort("seasonal period must be >= 1")
    if train.size <= s:
        raise TrainTooShort(
            f"train length {train.size} must exceed seasonal period {s}"
        )
    denom = float(np.abs(train[s:] - train[:-s]).mean())
    num = float(np.abs(y_true - y_pred).mean())
    if denom == 0.0:
        return math.inf
    return num / denom


@dataclass(frozen=True)
class MetricRow:
    """Per-(domain, model, series) metric record."""

    domain: str
    model: str
    series_id: str
    mase: float
    smape: float
    flags: tuple[str, ...] = ()


@dataclass(frozen=True)
class MetricSummary:
    domain: str
    model: str
    n_series: int
    mase_mean: float
    mase_std: float
    smape_mean: float
    smape_std: float
    infinite_count: int
    seen_in_pretraining: bool


@dataclass(frozen=True)
class MetricTable:
    rows: tuple[MetricRow, ...]
    summaries: tuple[MetricSummary, ...]
    flags: dict = field(default_factory=dict)


def _mean_std(values: list[float]) -> tuple[float, float]:
    if not values:
        return math.nan, math.nan
    arr = np.asarray(values, dtype=np.float64)
    # population std: single-series domains report "± 0.00"
    return float(arr.mean()), float(arr.std(ddof=0))


def aggregate(rows, pretrained_models: set[str] | None = None) -> MetricTable:
    """Mean +/- population std per (domain, model); infinite MASE values are
    excluded from the aggregate and surfaced as a count instead."""
    rows = tuple(rows)
    if not rows:
        raise LengthMismatch("need at least one metric row")
    pretrained = pretrained_models or set()
    groups: dict[tuple[str, str], list[MetricRow]] = {}
    for r in rows:
        groups.setdefault((r.domain, r.model), []).append(r)
    summaries = []
    for (domain, model) in sorted(groups):
        members = groups[(domain, model)]
        finite = [r.mase for r in members if math.isfinite(r.mase)]
        inf_count = sum(1 for r in members if not math.isfinite(r.mase))
        mase_mean, mase_std = _mean_std(finite)
        smape_mean, smape_std = _mean_std([r.smape for r in members])
        summaries.append(
            MetricSummary(
                domain=domain,
                model=model,
                n_series=len(members),
                mase_mean=mase_mean,
                mase_std=mase_std,
                smape_mean=smape_mean,
                smape_std=smape_std,
                infinite_count=inf_count,
                seen_in_pretraining=model in pretrained,
            )
        )
    return MetricTable(rows=rows, summaries=tuple(summaries))
