"""Run-config document: validation, dataset loading, model construction.

One JSON document drives the whole pipeline; every artifact embeds it (plus
its SHA-256) so results stay traceable to their exact inputs.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

from .adapter import RemoteForecaster, make_client
from .data import (
    BUILTIN_PROFILES,
    DomainProfile,
    TimeSeries,
    get_profile,
    load_series_csv,
    parse_timestamp,
    synth,
)
from .errors import ChronoscopeError, ConfigInvalid
from .features import FeatureSpec
from .forecast import ArimaForecaster, GBDTForecaster, SeasonalNaiveForecaster

TOP_LEVEL_KEYS = {
    "seed",
    "jobs",
    "data",
    "profile",
    "models",
    "explain",
    "rde",
    "output",
    "pretrained_models",
}

MODEL_NAMES = ("seasonal-naive", "arima", "gbdt", "adapter")


@dataclass(frozen=True)
class Config:
    doc: dict
    seed: int
    jobs: int
    profile: DomainProfile
    models: tuple[dict, ...]
    output_dir: str
    explain: dict = field(default_factory=dict)
    rde: dict | None = None
    pretrained_models: tuple[str, ...] = ()

    def sha256(self) -> str:
        return config_sha256(self.doc)


def config_sha256(doc: dict) -> str:
    blob = json.dumps(doc, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()


def _expect(cond: bool, key: str, reason: str):
    if not cond:
        raise ConfigInvalid(key, reason)


def load_config(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigInvalid("config", f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigInvalid("config", f"invalid JSON in {path}: {exc}") from exc
    _expect(isinstance(doc, dict), "config", "top level must be an object")
    return doc


def validate_config(doc: dict) -> Config:
    unknown = set(doc) - TOP_LEVEL_KEYS
    _expect(not unknown, sorted(unknown)[0] if unknown else "", "unknown config key")

    seed = doc.get("seed", 0)
    _expect(isinstance(seed, int), "seed", "must be an integer")
    jobs = doc.get("jobs", 1)
    _expect(isinstance(jobs, int) and jobs >= 1, "jobs", "must be a positive integer")

    data = doc.get("data")
    _expect(isinstance(data, dict), "data", "required object")
    has_csv = "csv" in data
    has_synth = "synthetic" in data
    _expect(
        has_csv != has_synth, "data", "exactly one of csv/synthetic is required"
    )
    if has_csv:
        _expect(isinstance(data["csv"], str), "data.csv", "must be a path string")
        _expect(isinstance(data.get("freq"), str), "data.freq", "required with csv")
    else:
        _expect(
            isinstance(data["synthetic"], list) and data["synthetic"],
            "data.synthetic",
            "must be a non-empty list",
        )
        for i, item in enumerate(data["synthetic"]):
            _expect(
                isinstance(item, dict) and "kind" in item and "length" in item,
                f"data.synthetic[{i}]",
                "needs kind and length",
            )

    prof = doc.get("profile")
    _expect(isinstance(prof, dict) and "name" in prof, "profile", "needs a name")
    overrides = prof.get("overrides", {})
    _expect(isinstance(overrides, dict), "profile.overrides", "must be an object")
    try:
        profile = get_profile(prof["name"], **overrides)
    except (TypeError, ChronoscopeError) as exc:
        raise ConfigInvalid("profile", str(exc)) from exc

    models = doc.get("models")
    _expect(isinstance(models, list) and models, "models", "must be a non-empty list")
    for i, m in enumerate(models):
        _expect(isinstance(m, dict) and "name" in m, f"models[{i}]", "needs a name")
        _expect(
            m["name"] in MODEL_NAMES,
            f"models[{i}].name",
            f"unknown model {m['name']!r}; expected one of {MODEL_NAMES}",
        )
        if m["name"] == "adapter":
            _expect(
                isinstance(m.get("forecaster"), str),
                f"models[{i}].forecaster",
                "adapter model needs a forecaster spec string",
            )

    explain = doc.get("explain", {})
    _expect(isinstance(explain, dict), "explain", "must be an object")
    for section in explain:
        _expect(
            section in ("lime", "shap", "surrogate"),
            f"explain.{section}",
            "unknown explain section",
        )

    rde = doc.get("rde")
    if rde is not None:
        _expect(isinstance(rde, dict), "rde", "must be an object")
        hyp = rde.get("hypothesis", "h1")
        _expect(hyp in ("h1", "h2"), "rde.hypothesis", "must be h1 or h2")

    output = doc.get("output", {})
    _expect(isinstance(output, dict), "output", "must be an object")
    output_dir = output.get("dir", "chronoscope-out")
    _expect(isinstance(output_dir, str), "output.dir", "must be a string")

    pretrained = doc.get("pretrained_models", [])
    _expect(
        isinstance(pretrained, list)
        and all(isinstance(p, str) for p in pretrained),
        "pretrained_models",
        "must be a list of model names",
    )

    return Config(
        doc=doc,
        seed=seed,
        jobs=jobs,
        profile=profile,
        models=tuple(models),
        output_dir=output_dir,
        explain=explain,
        rde=rde,
        pretrained_models=tuple(pretrained),
    )


def load_dataset(cfg: Config) -> list[TimeSeries]:
    """Materialize the configured dataset, sorted by series_id."""
    data = cfg.doc["data"]
    if "csv" in data:
        fill = data.get("fill", cfg.profile.fill)
        series = load_series_csv(data["csv"], freq=data["freq"], fill=fill)
    else:
        series = []
        for i, item in enumerate(data["synthetic"]):
            params = {
                k: v
                for k, v in item.items()
                if k not in ("kind", "length", "seed", "series_id", "freq", "start")
            }
            freq = item.get("freq", cfg.profile.freq)
            try:
                series.append(
                    synth(
                        item["kind"],
                        length=item["length"],
                        seed=item.get("seed", cfg.seed + i),
                        series_id=item.get("series_id", f"synthetic-{i}"),
                        freq=freq,
                        start=parse_timestamp(
                            item.get("start", "2024-01-01T00:00:00Z"), freq
                        ),
                        **params,
                    )
                )
            except (ChronoscopeError, ValueError) as exc:
                raise ConfigInvalid(f"data.synthetic[{i}]", str(exc)) from exc
    return sorted(series, key=lambda s: s.series_id)


def build_model(mconf: dict, seed: int, profile: DomainProfile):
    """Instantiate one configured forecaster from {name, params?, ...}."""
    name = mconf["name"]
    params = dict(mconf.get("params", {}))
    extra = {k: v for k, v in mconf.items() if k not in ("name", "params")}
    if name != "adapter" and extra:
        raise ConfigInvalid("models", f"{name}: unknown keys {sorted(extra)}")
    try:
        if name == "seasonal-naive":
            _expect(not params, "models", f"seasonal-naive takes no params, got {params}")
            return SeasonalNaiveForecaster()
        if name == "arima":
            return ArimaForecaster(**params)
        if name == "gbdt":
            if "feature_spec" in params and params["feature_spec"] is not None:
                params["feature_spec"] = FeatureSpec.from_dict(params["feature_spec"])
            return GBDTForecaster(**params)
        if name == "adapter":
            _expect(not params, "models", "adapter options go at the entry top level")
            spec = extra.pop("forecaster")
            scaling_hint = extra.pop("scaling_hint", "none")
            timeout = extra.pop("timeout", 30.0)
            client = make_client(
                spec,
                seed=extra.pop("seed", seed),
                period=extra.pop("period", profile.seasonal_s),
            )
            _expect(not extra, "models", f"unknown adapter keys {sorted(extra)}")
            if hasattr(client, "predict"):
                # in-process mock already satisfies the Forecaster contract
                return client
            return RemoteForecaster(client, scaling_hint=scaling_hint, timeout=timeout)
    except TypeError as exc:
        raise ConfigInvalid("models", f"{name}: {exc}") from exc
    raise ConfigInvalid("models", f"unknown model {name!r}")
