import numpy as np
import pytest

from chronoscope import TimeSeries, get_profile, parse_timestamp


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def hourly_series():
    def make(values, series_id="s0", start="2024-01-01T00:00:00Z"):
        return TimeSeries(
            series_id=series_id,
            start=parse_timestamp(start, "hourly"),
            freq="hourly",
            values=np.asarray(values, dtype=np.float64),
        )

    return make


@pytest.fixture
def small_profile():
    # tiny windows keep model fits fast in unit tests
    return get_profile(
        "pedestrian", context_C=24, horizon_H=6, seasonal_s=8, arima_rolling_w=40
    )
