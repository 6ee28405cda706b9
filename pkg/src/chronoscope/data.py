"""Series ingestion, splitting, windowing, and per-domain protocol constants.

Input data is a long-format table (series_id, timestamp, value) with a uniform
frequency per file.  Everything downstream works on immutable TimeSeries
objects whose timestamps are implied by (start, freq, index).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    BadParams,
    DuplicateTimestamp,
    EmptySeries,
    MissingLeadingValue,
    TooShort,
    UnparseableRow,
)

FREQUENCIES = ("minutely", "hourly", "business-daily", "monthly")

_STEP = {
    "minutely": timedelta(minutes=1),
    "hourly": timedelta(hours=1),
    # business-daily is treated as a plain index; one nominal day per step.
    "business-daily": timedelta(days=1),
}


def _check_freq(freq: str) -> str:
    if freq not in FREQUENCIES:
        raise BadParams(f"unknown frequency {freq!r}; expected one of {FREQUENCIES}")
    return freq


def parse_timestamp(text: str, freq: str) -> datetime:
    """Parse an RFC 3339 timestamp, or YYYY-MM for monthly series."""
    text = text.strip()
    if freq == "monthly" and len(text) == 7 and text[4] == "-":
        return datetime(int(text[:4]), int(text[5:7]), 1, tzinfo=timezone.utc)
    iso = text[:-1] + "+00:00" if text.endswith(("Z", "z")) else text
    try:
        dt = datetime.fromisoformat(iso)
    except ValueError as exc:
        raise ValueError(f"bad timestamp {text!r}: {exc}") from None
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc)


def format_timestamp(dt: datetime, freq: str) -> str:
    if freq == "monthly":
        return f"{dt.year:04d}-{dt.month:02d}"
    return dt.strftime("%Y-%m-%dT%H:%M:%SZ")


def _add_months(dt: datetime, k: int) -> datetime:
    month0 = dt.year * 12 + (dt.month - 1) + k
    return dt.replace(year=month0 // 12, month=month0 % 12 + 1)


def timestamp_at(start: datetime, freq: str, index: int) -> datetime:
    if freq == "monthly":
        return _add_months(start, index)
    return start + _STEP[freq] * index


def _index_of(start: datetime, freq: str, ts: datetime) -> float:
    """Fractional number of steps from start to ts (integral when on-grid)."""
    if freq == "monthly":
        months = (ts.year - start.year) * 12 + (ts.month - start.month)
        return float(months) if ts.day == start.day else months + 0.5
    return (ts - start) / _STEP[freq]


@dataclass(frozen=True)
class TimeSeries:
    """Uniform-frequency univariate series.

    The timestamp of values[k] is timestamp_at(start, freq, k).  Values are
    finite float64 and read-only after construction.
    """

    series_id: str
    start: datetime
    freq: str
    values: np.ndarray

    def __post_init__(self):
        _check_freq(self.freq)
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim != 1 or arr.size == 0:
            raise EmptySeries(f"series {self.series_id!r} has no values")
        if not np.all(np.isfinite(arr)):
            raise EmptySeries(f"series {self.series_id!r} contains non-finite values")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)
        if self.start.tzinfo is None:
            object.__setattr__(self, "start", self.start.replace(tzinfo=timezone.utc))

    def __len__(self) -> int:
        return int(self.values.size)

    def timestamps(self) -> list[datetime]:
        return [timestamp_at(self.start, self.freq, k) for k in range(len(self))]

    def slice(self, lo: int, hi: int, series_id: str | None = None) -> "TimeSeries":
        return TimeSeries(
            series_id=series_id or self.series_id,
            start=timestamp_at(self.start, self.freq, lo),
            freq=self.freq,
            values=self.values[lo:hi],
        )

    def with_values(self, values: np.ndarray) -> "TimeSeries":
        return TimeSeries(self.series_id, self.start, self.freq, values)


@dataclass(frozen=True)
class DomainProfile:
    """Per-domain protocol constants: context/horizon sizes, seasonal period,
    gap-fill policy, ARIMA rolling-window length, and inference setup."""

    name: str
    context_C: int
    horizon_H: int
    seasonal_s: int
    fill: str = "forward-fill"
    arima_rolling_w: int = 0  # 0 -> defaults to context_C
    inference: str = "autoregressive"
    freq: str = "hourly"

    def __post_init__(self):
        for fname in ("context_C", "horizon_H", "seasonal_s"):
            if getattr(self, fname) < 1:
                raise BadParams(f"{fname} must be a positive int")
        if self.fill not in ("forward-fill", "zero-fill"):
            raise BadParams(f"unknown fill policy {self.fill!r}")
        if self.inference not in ("autoregressive", "direct"):
            raise BadParams(f"unknown inference setup {self.inference!r}")
        _check_freq(self.freq)
        if self.arima_rolling_w == 0:
            object.__setattr__(self, "arima_rolling_w", self.context_C)
        if self.arima_rolling_w < 1:
            raise BadParams("arima_rolling_w must be a positive int")


BUILTIN_PROFILES = {
    "finance": DomainProfile(
        "finance", context_C=20, horizon_H=5, seasonal_s=5,
        arima_rolling_w=7, freq="business-daily",
    ),
    "power": DomainProfile(
        "power", context_C=1440, horizon_H=360, seasonal_s=1440,
        arima_rolling_w=1440, freq="minutely",
    ),
    "pedestrian": DomainProfile(
        "pedestrian", context_C=72, horizon_H=18, seasonal_s=24,
        freq="hourly",
    ),
    "car": DomainProfile(
        "car", context_C=8, horizon_H=2, seasonal_s=1,
        fill="zero-fill", freq="monthly",
    ),
}


def get_profile(name: str, **overrides) -> DomainProfile:
    """Look up a built-in profile, optionally overriding individual fields."""
    base = BUILTIN_PROFILES.get(name)
    if base is None:
        return DomainProfile(name=name, **overrides)
    if not overrides:
        return base
    merged = {**base.__dict__, **overrides}
    return DomainProfile(**merged)


@dataclass(frozen=True)
class SplitSeries:
    """80/20 prefix/suffix split; concat(train, test) equals the original."""

    train: TimeSeries
    test: TimeSeries
    split_index: int

    def __post_init__(self):
        if len(self.train) != self.split_index:
            raise BadParams("split_index must equal len(train)")


def split_80_20(s: TimeSeries) -> SplitSeries:
    """Split into the first floor(0.8 * len) points and the remainder."""
    n = len(s)
    if n < 5:
        raise TooShort(f"need at least 5 points to split, got {n}")
    k = math.floor(0.8 * n)
    return SplitSeries(train=s.slice(0, k), test=s.slice(k, n), split_index=k)


def windows(
    s: TimeSeries | np.ndarray,
    C: int,
    H: int,
    stride: int | None = None,
    ragged_tail: bool = False,
) -> list[tuple[np.ndarray, np.ndarray]]:
    """Slide (context, target) windows across a series.

    Each window pairs C consecutive values with the next H values.  The
    default stride is H (inference tiling); pass 1 for training windows.
    With ragged_tail=True a final window whose target is shorter than H is
    kept (truncated) so stride=H tiles the tail of the series exactly.
    """
    values = s.values if isinstance(s, TimeSeries) else np.asarray(s, dtype=np.float64)
    n = values.size
    if n < C + H and not (ragged_tail and n > C):
        raise TooShort(f"need at least C+H={C + H} points, got {n}")
    if stride is None:
        stride = H
    if stride < 1:
        raise BadParams("stride must be >= 1")
    out = []
    t = C
    while t + H <= n:
        out.append((values[t - C:t], values[t:t + H]))
        t += stride
    if ragged_tail and t < n:
        out.append((values[t - C:t], values[t:n]))
    return out


# --- synthetic generators ---------------------------------------------------

_EPOCH = datetime(2020, 1, 1, tzinfo=timezone.utc)


def synth(
    kind: str,
    length: int,
    seed: int,
    series_id: str = "synth",
    freq: str = "hourly",
    start: datetime | None = None,
    **params,
) -> TimeSeries:
    """Deterministic synthetic series for tests and dry runs.

    Kinds: ar1(phi, sigma), seasonal(period, amp, sigma), sparse-poisson(rate),
    random-walk(sigma).  The same (kind, params, length, seed) always yields
    the same values.
    """
    if length < 1:
        raise BadParams("length must be positive")
    rng = np.random.default_rng(seed)
    if kind == "ar1":
        phi = float(params.pop("phi", 0.5))
        sigma = float(params.pop("sigma", 1.0))
        if abs(phi) >= 1.0:
            raise BadParams("ar1 requires |phi| < 1")
        eps = rng.normal(0.0, sigma, size=length)
        x = np.empty(length)
        x[0] = eps[0] / math.sqrt(max(1.0 - phi * phi, 1e-12))
        for t in range(1, length):
            x[t] = phi * x[t - 1] + eps[t]
    elif kind == "seasonal":
        period = int(params.pop("period", 24))
        amp = float(params.pop("amp", 10.0))
        sigma = float(params.pop("sigma", 1.0))
        if period < 1:
            raise BadParams("seasonal requires period >= 1")
        t = np.arange(length)
        x = amp * np.sin(2.0 * np.pi * t / period) + rng.normal(0.0, sigma, size=length)
    elif kind == "sparse-poisson":
        rate = float(params.pop("rate", 0.3))
        if rate < 0:
            raise BadParams("sparse-poisson requires rate >= 0")
        x = rng.poisson(rate, size=length).astype(np.float64)
    elif kind == "random-walk":
        sigma = float(params.pop("sigma", 1.0))
        x = np.cumsum(rng.normal(0.0, sigma, size=length))
    else:
        raise BadParams(f"unknown synthetic kind {kind!r}")
    if params:
        raise BadParams(f"unknown parameters for {kind!r}: {sorted(params)}")
    return TimeSeries(series_id, start or _EPOCH, freq, x)


# --- ingestion --------------------------------------------------------------

def _parse_value(raw: str) -> float | None:
    raw = raw.strip()
    if raw == "" or raw.lower() in ("nan", "na", "null"):
        return None
    return float(raw)


def ingest(
    rows: Iterable[tuple[str, str, object]],
    freq: str,
    fill: str = "forward-fill",
    first_line: int = 1,
) -> list[TimeSeries]:
    """Group long-format rows into one TimeSeries per id.

    Gaps on the frequency grid are filled per the fill policy (forward-fill
    repeats the previous value; zero-fill inserts 0.0).  Business-daily rows
    are re-indexed contiguously: the calendar has no reliable step, so every
    observed row is the next index and no gaps are detected.
    """
    _check_freq(freq)
    if fill not in ("forward-fill", "zero-fill"):
        raise BadParams(f"unknown fill policy {fill!r}")

    per_series: dict[str, list[tuple[datetime, float | None]]] = {}
    seen: set[tuple[str, datetime]] = set()
    any_row = False
    for offset, row in enumerate(rows):
        line_no = first_line + offset
        any_row = True
        try:
            sid, ts_raw, val_raw = row
            ts = parse_timestamp(str(ts_raw), freq)
            val = val_raw if (val_raw is None or isinstance(val_raw, float)) \
                else _parse_value(str(val_raw))
            if val is not None and not math.isfinite(val):
                val = None
        except (ValueError, TypeError) as exc:
            raise UnparseableRow(line_no, str(exc)) from None
        key = (str(sid), ts)
        if key in seen:
            raise DuplicateTimestamp(
                f"duplicate timestamp {format_timestamp(ts, freq)} for series {sid!r}"
            )
        seen.add(key)
        per_series.setdefault(str(sid), []).append((ts, val))
    if not any_row:
        raise EmptySeries("no input rows")

    out = []
    for sid in sorted(per_series):
        obs = sorted(per_series[sid], key=lambda p: p[0])
        start = obs[0][0]
        values: list[float] = []
        for ts, val in obs:
            if freq == "business-daily":
                gap = 0  # plain index: no gap detection across business days
            else:
                pos = _index_of(start, freq, ts)
                if pos != int(pos):
                    raise UnparseableRow(
                        first_line,
                        f"timestamp {format_timestamp(ts, freq)} of series {sid!r} "
                        f"is off the {freq} grid",
                    )
                gap = int(pos) - len(values)
            for _ in range(gap):
                values.append(0.0 if fill == "zero-fill" else values[-1])
            if val is None:
                if not values:
                    raise MissingLeadingValue(
                        f"series {sid!r} starts with a missing value"
                    )
                values.append(0.0 if fill == "zero-fill" else values[-1])
            else:
                values.append(float(val))
        out.append(TimeSeries(sid, start, freq, np.asarray(values)))
    return out


CSV_HEADER = ["series_id", "timestamp", "value"]


def read_long_csv(path) -> tuple[list[tuple[str, str, str]], int]:
    """Read a long-format CSV; returns (rows, first_data_line)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptySeries(f"{path}: empty file") from None
        if [h.strip() for h in header] != CSV_HEADER:
            raise UnparseableRow(1, f"expected header {','.join(CSV_HEADER)}")
        rows = []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise UnparseableRow(line_no, f"expected 3 fields, got {len(row)}")
            rows.append((row[0], row[1], row[2]))
    return rows, 2


def write_long_csv(path, series: Sequence[TimeSeries]) -> None:
    """Emit series in the ingestion schema; values round-trip bit-exactly."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for s in series:
            for k, v in enumerate(s.values):
                ts = format_timestamp(timestamp_at(s.start, s.freq, k), s.freq)
                writer.writerow([s.series_id, ts, repr(float(v))])


def load_series_csv(path, freq: str, fill: str = "forward-fill") -> list[TimeSeries]:
    rows, first = read_long_csv(path)
    return ingest(rows, freq, fill=fill, first_line=first)
