"""Deterministic feature engineering for the tree forecaster and the SHAP
surrogate.

Every feature at target index t reads the series strictly before t, so a row
never leaks its own target. build_features vectorizes over the whole series;
roll_forward recomputes a single row with independent scalar arithmetic, which
gives the test suite a second route to the same numbers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .data import TimeSeries, timestamp_at
from .errors import BadParams, SpecInfeasible

EXPANDING_STATS = ("mean", "std")
CALENDAR_FIELDS = ("hour", "day-of-week", "month", "weekend")
EXTRA_FIELDS = ("log-return", "volatility", "zero-indicator", "diff-last-vs-lag7")

_LOG_EPS = 1e-12


@dataclass(frozen=True)
class FeatureSpec:
    """Declarative description of one feature set.

    fourier_K sinusoid pairs use period seasonal_s and the absolute index
    within the series handed to build_features, so callers that forecast
    iteratively must keep extending the same series rather than re-slicing it.
    """

    lags: tuple[int, ...] = ()
    rolling_means: tuple[int, ...] = ()
    expanding: tuple[str, ...] = ()
    fourier_K: int = 0
    seasonal_s: int = 1
    calendar: tuple[str, ...] = ()
    extras: tuple[str, ...] = ()
    volatility_window: int = 5

    def __post_init__(self):
        object.__setattr__(self, "lags", tuple(int(k) for k in self.lags))
        object.__setattr__(
            self, "rolling_means", tuple(int(w) for w in self.rolling_means)
        )
        object.__setattr__(self, "expanding", tuple(self.expanding))
        object.__setattr__(self, "calendar", tuple(self.calendar))
        object.__setattr__(self, "extras", tuple(self.extras))
        if any(k < 1 for k in self.lags):
            raise BadParams("lags must be >= 1")
        if any(w < 1 for w in self.rolling_means):
            raise BadParams("rolling windows must be >= 1")
        if self.fourier_K < 0:
            raise BadParams("fourier_K must be >= 0")
        if self.fourier_K > 0 and self.seasonal_s < 1:
            raise BadParams("fourier terms need seasonal_s >= 1")
        if self.volatility_window < 2:
            raise BadParams("volatility window must be >= 2")
        for name in self.expanding:
            if name not in EXPANDING_STATS:
                raise BadParams(f"unknown expanding stat {name!r}")
        for name in self.calendar:
            if name not in CALENDAR_FIELDS:
                raise BadParams(f"unknown calendar field {name!r}")
        for name in self.extras:
            if name not in EXTRA_FIELDS:
                raise BadParams(f"unknown extra feature {name!r}")
        if len(set(self.lags)) != len(self.lags):
            raise BadParams("duplicate lag")
        if len(set(self.rolling_means)) != len(self.rolling_means):
            raise BadParams("duplicate rolling window")

    def names(self) -> list[str]:
        out = [f"lag_{k}" for k in self.lags]
        out += [f"roll_mean_{w}" for w in self.rolling_means]
        out += [f"exp_{s}" for s in EXPANDING_STATS if s in self.expanding]
        for k in range(1, self.fourier_K + 1):
            out += [f"fourier_sin_{k}", f"fourier_cos_{k}"]
        out += [c.replace("-", "_") for c in CALENDAR_FIELDS if c in self.calendar]
        out += [e.replace("-", "_") for e in EXTRA_FIELDS if e in self.extras]
        return out

    def min_index(self) -> int:
        """Smallest target index where every requested feature is defined."""
        need = [0]
        need += list(self.lags)
        need += list(self.rolling_means)
        if self.expanding:
            need.append(1)
        if "log-return" in self.extras:
            need.append(2)
        if "volatility" in self.extras:
            need.append(self.volatility_window + 1)
        if "zero-indicator" in self.extras:
            need.append(1)
        if "diff-last-vs-lag7" in self.extras:
            need.append(8)
        return max(need)

    def to_dict(self) -> dict:
        return {
            "lags": list(self.lags),
            "rolling_means": list(self.rolling_means),
            "expanding": list(self.expanding),
            "fourier_K": self.fourier_K,
            "seasonal_s": self.seasonal_s,
            "calendar": list(self.calendar),
            "extras": list(self.extras),
            "volatility_window": self.volatility_window,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureSpec":
        known = {
            "lags", "rolling_means", "expanding", "fourier_K", "seasonal_s",
            "calendar", "extras", "volatility_window",
        }
        bad = set(d) - known
        if bad:
            raise BadParams(f"unknown feature spec keys: {sorted(bad)}")
        return cls(**{k: (tuple(v) if isinstance(v, list) else v) for k, v in d.items()})


@dataclass(frozen=True)
class FeatureMatrix:
    names: tuple[str, ...]
    rows: np.ndarray
    target: np.ndarray
    time_index: np.ndarray

    def __post_init__(self):
        if self.rows.shape != (self.time_index.size, len(self.names)):
            raise BadParams("feature matrix shape does not match names/index")
        if self.target.size != self.time_index.size:
            raise BadParams("target length does not match row count")

    def __len__(self) -> int:
        return int(self.time_index.size)


def _log_returns(x: np.ndarray) -> np.ndarray:
    """r[j] = ln(x[j-1] / x[j-2]), defined for j >= 2; non-positive values
    are floored so the log stays finite."""
    prev = np.maximum(x[1:], _LOG_EPS)
    prev2 = np.maximum(x[:-1], _LOG_EPS)
    r = np.full(x.size, np.nan)
    r[2:] = np.log(prev[:-1] / prev2[:-1])
    return r


def build_features(s: TimeSeries, spec: FeatureSpec) -> FeatureMatrix:
    """Feature rows for every index of s where the full spec is defined."""
    x = s.values
    n = x.size
    t0 = spec.min_index()
    if t0 >= n:
        raise SpecInfeasible(
            f"series of length {n} too short for features needing {t0} prior points"
        )
    idx = np.arange(t0, n)
    cols: list[np.ndarray] = []

    for k in spec.lags:
        cols.append(x[idx - k])
    if spec.rolling_means:
        csum = np.concatenate(([0.0], np.cumsum(x)))
        for w in spec.rolling_means:
            cols.append((csum[idx] - csum[idx - w]) / w)
    if spec.expanding:
        csum = np.concatenate(([0.0], np.cumsum(x)))
        csq = np.concatenate(([0.0], np.cumsum(x * x)))
        mean = csum[idx] / idx
        if "mean" in spec.expanding:
            cols.append(mean)
        if "std" in spec.expanding:
            var = np.maximum(csq[idx] / idx - mean * mean, 0.0)
            cols.append(np.sqrt(var))
    for k in range(1, spec.fourier_K + 1):
        ang = 2.0 * math.pi * k * idx / spec.seasonal_s
        cols.append(np.sin(ang))
        cols.append(np.cos(ang))
    if spec.calendar:
        stamps = [timestamp_at(s.start, s.freq, int(t)) for t in idx]
        if "hour" in spec.calendar:
            cols.append(np.array([ts.hour for ts in stamps], dtype=np.float64))
        if "day-of-week" in spec.calendar:
            cols.append(np.array([ts.weekday() for ts in stamps], dtype=np.float64))
        if "month" in spec.calendar:
            cols.append(np.array([ts.month for ts in stamps], dtype=np.float64))
        if "weekend" in spec.calendar:
            cols.append(
                np.array([1.0 if ts.weekday() >= 5 else 0.0 for ts in stamps])
            )
    if spec.extras:
        r = _log_returns(x)
        if "log-return" in spec.extras:
            cols.append(r[idx])
        if "volatility" in spec.extras:
            v = spec.volatility_window
            out = np.empty(idx.size)
            for i, t in enumerate(idx):
                win = r[t - v + 1 : t + 1]
                out[i] = float(np.std(win))
            cols.append(out)
        if "zero-indicator" in spec.extras:
            cols.append((x[idx - 1] == 0.0).astype(np.float64))
        if "diff-last-vs-lag7" in spec.extras:
            cols.append(x[idx - 1] - x[idx - 8])
    rows = (
        np.column_stack(cols) if cols else np.empty((idx.size, 0), dtype=np.float64)
    )
    return FeatureMatrix(
        names=tuple(spec.names()),
        rows=np.ascontiguousarray(rows, dtype=np.float64),
        target=x[idx].copy(),
        time_index=idx.copy(),
    )


def roll_forward(history: TimeSeries, spec: FeatureSpec, new_value: float) -> np.ndarray:
    """The feature row for target index len(history), i.e. for the position
    new_value is about to occupy.

    Computed directly from history with scalar arithmetic; because no feature
    reads its own target index, the result never depends on new_value, and it
    matches the last row of build_features on the appended series to float
    round-off (the vectorized path accumulates sums in a different order).
    """
    x = history.values
    t = x.size
    if spec.min_index() > t:
        raise SpecInfeasible(
            f"history of length {t} too short for features needing {spec.min_index()} points"
        )
    row: list[float] = []
    for k in spec.lags:
        row.append(float(x[t - k]))
    for w in spec.rolling_means:
        row.append(float(x[t - w : t].sum()) / w)
    if spec.expanding:
        m = float(x.sum()) / t
        if "mean" in spec.expanding:
            row.append(m)
        if "std" in spec.expanding:
            row.append(math.sqrt(max(float((x * x).sum()) / t - m * m, 0.0)))
    for k in range(1, spec.fourier_K + 1):
        ang = 2.0 * math.pi * k * t / spec.seasonal_s
        row.append(math.sin(ang))
        row.append(math.cos(ang))
    if spec.calendar:
        ts = timestamp_at(history.start, history.freq, t)
        if "hour" in spec.calendar:
            row.append(float(ts.hour))
        if "day-of-week" in spec.calendar:
            row.append(float(ts.weekday()))
        if "month" in spec.calendar:
            row.append(float(ts.month))
        if "weekend" in spec.calendar:
            row.append(1.0 if ts.weekday() >= 5 else 0.0)
    if spec.extras:
        if "log-return" in spec.extras:
            row.append(_scalar_log_return(x, t))
        if "volatility" in spec.extras:
            v = spec.volatility_window
            rets = [_scalar_log_return(x, j) for j in range(t - v + 1, t + 1)]
            row.append(float(np.std(np.array(rets))))
        if "zero-indicator" in spec.extras:
            row.append(1.0 if x[t - 1] == 0.0 else 0.0)
        if "diff-last-vs-lag7" in spec.extras:
            row.append(float(x[t - 1] - x[t - 8]))
    return np.array(row, dtype=np.float64)


def _scalar_log_return(x: np.ndarray, j: int) -> float:
    return math.log(
        max(float(x[j - 1]), _LOG_EPS) / max(float(x[j - 2]), _LOG_EPS)
    )


# Per-domain presets. The published feature lists name the families but not
# every window, so these are reconstructed defaults, overridable via config.
def feature_preset(domain: str, seasonal_s: int | None = None) -> FeatureSpec:
    if domain == "finance":
        return FeatureSpec(
            lags=(1, 2, 3, 4, 5),
            rolling_means=(5,),
            extras=("log-return", "volatility"),
            volatility_window=5,
            seasonal_s=seasonal_s or 5,
        )
    if domain == "power":
        return FeatureSpec(
            lags=(1, 30),
            rolling_means=(60,),
            calendar=("hour",),
            seasonal_s=seasonal_s or 1440,
        )
    if domain == "pedestrian":
        return FeatureSpec(
            lags=(1, 24, 168),
            calendar=("weekend",),
            fourier_K=3,
            seasonal_s=seasonal_s or 24,
        )
    if domain == "car":
        return FeatureSpec(
            lags=(1, 2),
            extras=("zero-indicator",),
            seasonal_s=seasonal_s or 1,
        )
    raise BadParams(f"no feature preset for domain {domain!r}")


def surrogate_feature_spec(seasonal_s: int) -> FeatureSpec:
    """Summary-statistic spec for surrogate fitting: short lags plus the
    seasonal lag, expanding mean/std, rolling means at half/full/double
    season, and the lag-7 difference."""
    if seasonal_s < 1:
        raise BadParams("seasonal_s must be >= 1")
    lags = tuple(sorted({1, 2, 3, seasonal_s}))
    windows = tuple(sorted({max(seasonal_s // 2, 1), seasonal_s, 2 * seasonal_s}))
    return FeatureSpec(
        lags=lags,
        rolling_means=windows,
        expanding=("mean", "std"),
        extras=("diff-last-vs-lag7",),
        seasonal_s=seasonal_s,
    )
