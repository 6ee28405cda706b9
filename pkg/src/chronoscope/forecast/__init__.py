from .base import Forecaster, SeasonalNaiveForecaster, seasonal_naive
from .trees import Tree, TreeEnsemble, gbdt_fit
from .gbdt import GBDTForecaster, gbdt_forecast_iterative
from .arima import (
    ArimaForecaster,
    ArimaModel,
    arima_forecast_rolling,
    arima_select,
    detect_seasonal_period,
)

__all__ = [
    "Forecaster",
    "SeasonalNaiveForecaster",
    "seasonal_naive",
    "Tree",
    "TreeEnsemble",
    "gbdt_fit",
    "GBDTForecaster",
    "gbdt_forecast_iterative",
    "ArimaForecaster",
    "ArimaModel",
    "arima_forecast_rolling",
    "arima_select",
    "detect_seasonal_period",
]
