"""Forecast evaluation toolkit: windowed protocols, explainers, causal ratings."""

from .data import (
    BUILTIN_PROFILES,
    DomainProfile,
    SplitSeries,
    TimeSeries,
    get_profile,
    ingest,
    load_series_csv,
    parse_timestamp,
    split_80_20,
    synth,
    timestamp_at,
    windows,
    write_long_csv,
)
from .errors import ChronoscopeError
from .features import FeatureMatrix, FeatureSpec, build_features, feature_preset, roll_forward
from .forecast import (
    ArimaForecaster,
    Forecaster,
    GBDTForecaster,
    SeasonalNaiveForecaster,
    TreeEnsemble,
    arima_select,
    gbdt_fit,
    seasonal_naive,
)
from .harness import ForecastRecord, evaluate_split, run_autoregressive, run_direct, score_record
from .metrics import MetricRow, MetricTable, aggregate, mase, smape
from .explain import (
    LimeConfig,
    SegmentAttribution,
    ShapExplanation,
    SurrogateReport,
    fit_surrogate,
    global_shap,
    lime_explain,
    perturb,
    segment_uniform,
    tree_shap,
)
from .rde import CausalFrame, ate, baselines, build_frame, rate, run_hypothesis, wrs
from .adapter import (
    ForecastRequest,
    ForecastResponse,
    HttpClient,
    MockForecaster,
    RemoteForecaster,
    SubprocessClient,
    call_remote,
    canonical_json,
    make_client,
    parse_request,
    parse_response,
)
from .config import Config, config_sha256, load_config, validate_config

__version__ = "0.1.0"

__all__ = [
    "ArimaForecaster",
    "BUILTIN_PROFILES",
    "CausalFrame",
    "ChronoscopeError",
    "Config",
    "DomainProfile",
    "FeatureMatrix",
    "FeatureSpec",
    "ForecastRecord",
    "ForecastRequest",
    "ForecastResponse",
    "Forecaster",
    "GBDTForecaster",
    "HttpClient",
    "LimeConfig",
    "MetricRow",
    "MetricTable",
    "MockForecaster",
    "RemoteForecaster",
    "SeasonalNaiveForecaster",
    "SegmentAttribution",
    "ShapExplanation",
    "SplitSeries",
    "SubprocessClient",
    "SurrogateReport",
    "TimeSeries",
    "TreeEnsemble",
    "aggregate",
    "arima_select",
    "ate",
    "baselines",
    "build_features",
    "build_frame",
    "call_remote",
    "canonical_json",
    "config_sha256",
    "evaluate_split",
    "feature_preset",
    "fit_surrogate",
    "gbdt_fit",
    "get_profile",
    "global_shap",
    "ingest",
    "lime_explain",
    "load_config",
    "load_series_csv",
    "mase",
    "make_client",
    "parse_request",
    "parse_response",
    "parse_timestamp",
    "perturb",
    "rate",
    "roll_forward",
    "run_autoregressive",
    "run_direct",
    "run_hypothesis",
    "score_record",
    "seasonal_naive",
    "segment_uniform",
    "smape",
    "split_80_20",
    "synth",
    "timestamp_at",
    "tree_shap",
    "validate_config",
    "wrs",
    "windows",
    "write_long_csv",
]
