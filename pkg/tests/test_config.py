"""Run-config validation, hashing, dataset materialization, and model
construction."""

import json

import numpy as np
import pytest

from chronoscope import (
    ArimaForecaster,
    GBDTForecaster,
    MockForecaster,
    RemoteForecaster,
    SeasonalNaiveForecaster,
    config_sha256,
    load_config,
    validate_config,
)
from chronoscope.config import build_model, load_dataset
from chronoscope.errors import ConfigInvalid


def minimal_doc(**over) -> dict:
    doc = {
        "seed": 7,
        "data": {
            "synthetic": [
                {"kind": "ar1", "length": 120, "phi": 0.5},
                {"kind": "seasonal", "length": 120, "period": 24},
            ]
        },
        "profile": {"name": "pedestrian"},
        "models": [{"name": "seasonal-naive"}],
    }
    doc.update(over)
    return doc


def test_validate_minimal_and_defaults():
    cfg = validate_config(minimal_doc())
    assert cfg.seed == 7
    assert cfg.jobs == 1
    assert cfg.profile.name == "pedestrian"
    assert cfg.output_dir == "chronoscope-out"
    assert cfg.explain == {}
    assert cfg.rde is None
    assert cfg.pretrained_models == ()
    assert cfg.models == ({"name": "seasonal-naive"},)


def test_validation_errors_carry_the_offending_key():
    cases = [
        (minimal_doc(bogus=1), "bogus"),
        (minimal_doc(seed="x"), "seed"),
        (minimal_doc(jobs=0), "jobs"),
        ({k: v for k, v in minimal_doc().items() if k != "data"}, "data"),
        (minimal_doc(data={}), "data"),
        (minimal_doc(data={"csv": "x.csv", "synthetic": []}), "data"),
        (minimal_doc(data={"csv": 7, "freq": "hourly"}), "data.csv"),
        (minimal_doc(data={"csv": "x.csv"}), "data.freq"),
        (minimal_doc(data={"synthetic": []}), "data.synthetic"),
        (minimal_doc(data={"synthetic": [{"kind": "ar1"}]}), "data.synthetic[0]"),
        (minimal_doc(profile={}), "profile"),
        (minimal_doc(profile={"name": "bogus-domain"}), "profile"),
        (minimal_doc(profile={"name": "car", "overrides": 3}), "profile.overrides"),
        (minimal_doc(profile={"name": "car", "overrides": {"context_C": -1}}), "profile"),
        (minimal_doc(models=[]), "models"),
        (minimal_doc(models=[{"params": {}}]), "models[0]"),
        (minimal_doc(models=[{"name": "prophet"}]), "models[0].name"),
        (minimal_doc(models=[{"name": "adapter"}]), "models[0].forecaster"),
        (minimal_doc(explain={"lime": {}, "anchors": {}}), "explain.anchors"),
        (minimal_doc(rde={"hypothesis": "h3"}), "rde.hypothesis"),
        (minimal_doc(output={"dir": 5}), "output.dir"),
        (minimal_doc(pretrained_models=[1]), "pretrained_models"),
    ]
    for doc, key in cases:
        with pytest.raises(ConfigInvalid) as err:
            validate_config(doc)
        assert err.value.key == key, f"expected key {key}, got {err.value.key}"
        assert key in str(err.value)


def test_sha256_is_order_insensitive_and_content_sensitive():
    doc = minimal_doc()
    reordered = json.loads(json.dumps(doc, sort_keys=True))
    assert config_sha256(doc) == config_sha256(reordered)
    assert config_sha256(doc) != config_sha256(minimal_doc(seed=8))
    # pinned so any serialization drift shows up loudly
    assert config_sha256({"a": 1}) == (
        "015abd7f5cc57a2dd94b7590f04ad8084273905ee33ec5cebeae62276a97f862"
    )
    assert validate_config(doc).sha256() == config_sha256(doc)


def test_load_config_file_round_trip(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps(minimal_doc()))
    assert load_config(path) == minimal_doc()
    with pytest.raises(ConfigInvalid, match="cannot read"):
        load_config(tmp_path / "absent.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{nope")
    with pytest.raises(ConfigInvalid, match="invalid JSON"):
        load_config(bad)
    lst = tmp_path / "list.json"
    lst.write_text("[1]")
    with pytest.raises(ConfigInvalid, match="object"):
        load_config(lst)


def test_load_dataset_synthetic():
    cfg = validate_config(minimal_doc())
    series = load_dataset(cfg)
    assert [s.series_id for s in series] == ["synthetic-0", "synthetic-1"]
    assert all(len(s) == 120 for s in series)
    # default freq comes from the profile, start from the default stamp
    assert series[0].freq == "hourly"
    assert series[0].start.isoformat() == "2024-01-01T00:00:00+00:00"
    # item seed defaults to cfg.seed + position, so runs reproduce exactly
    again = load_dataset(cfg)
    assert all(np.array_equal(a.values, b.values) for a, b in zip(series, again))

    named = validate_config(
        minimal_doc(
            data={
                "synthetic": [
                    {
                        "kind": "ar1",
                        "length": 50,
                        "seed": 3,
                        "series_id": "walk",
                        "freq": "monthly",
                        "start": "2020-06",
                    }
                ]
            }
        )
    )
    (only,) = load_dataset(named)
    assert only.series_id == "walk"
    assert only.freq == "monthly"
    assert only.start.year == 2020 and only.start.month == 6


def test_load_dataset_bad_synth_params():
    cfg = validate_config(
        minimal_doc(data={"synthetic": [{"kind": "warp", "length": 10}]})
    )
    with pytest.raises(ConfigInvalid) as err:
        load_dataset(cfg)
    assert err.value.key == "data.synthetic[0]"


def test_load_dataset_csv(tmp_path):
    path = tmp_path / "series.csv"
    path.write_text(
        "series_id,timestamp,value\n"
        "a,2024-01-01T00:00:00Z,1.0\n"
        "a,2024-01-01T01:00:00Z,2.0\n"
        "b,2024-01-01T00:00:00Z,5.0\n"
    )
    cfg = validate_config(
        minimal_doc(data={"csv": str(path), "freq": "hourly"})
    )
    series = load_dataset(cfg)
    assert [s.series_id for s in series] == ["a", "b"]
    assert list(series[0].values) == [1.0, 2.0]


def test_build_model_dispatch():
    profile = validate_config(minimal_doc()).profile
    assert isinstance(
        build_model({"name": "seasonal-naive"}, 0, profile), SeasonalNaiveForecaster
    )
    arima = build_model({"name": "arima", "params": {"max_pq": 2}}, 0, profile)
    assert isinstance(arima, ArimaForecaster)
    assert arima.get_params()["max_pq"] == 2
    gbdt = build_model(
        {
            "name": "gbdt",
            "params": {
                "n_estimators": 30,
                "feature_spec": {"lags": [1, 2], "rolling_means": [3]},
            },
        },
        0,
        profile,
    )
    assert isinstance(gbdt, GBDTForecaster)
    assert gbdt.get_params()["n_estimators"] == 30
    assert gbdt.get_params()["feature_spec"].lags == (1, 2)


def test_build_model_adapter_entries():
    profile = validate_config(minimal_doc()).profile
    mock = build_model(
        {"name": "adapter", "forecaster": "mock:seasonal"}, 11, profile
    )
    # in-process mock is used directly, seeded from the run seed and the
    # profile's season
    assert isinstance(mock, MockForecaster)
    assert mock.seed == 11
    assert mock.period == profile.seasonal_s

    remote = build_model(
        {
            "name": "adapter",
            "forecaster": "http://127.0.0.1:1/f",
            "scaling_hint": "minmax",
            "timeout": 3.0,
        },
        0,
        profile,
    )
    assert isinstance(remote, RemoteForecaster)
    assert remote.scaling_hint == "minmax"
    assert remote.timeout == 3.0


def test_build_model_rejects_bad_entries():
    profile = validate_config(minimal_doc()).profile
    with pytest.raises(ConfigInvalid, match="no params"):
        build_model({"name": "seasonal-naive", "params": {"s": 3}}, 0, profile)
    with pytest.raises(ConfigInvalid, match="unknown keys"):
        build_model({"name": "gbdt", "workers": 4}, 0, profile)
    with pytest.raises(ConfigInvalid, match="unknown adapter keys"):
        build_model(
            {"name": "adapter", "forecaster": "mock:echo", "shards": 2}, 0, profile
        )
    with pytest.raises(ConfigInvalid, match="top level"):
        build_model(
            {"name": "adapter", "forecaster": "mock:echo", "params": {"a": 1}},
            0,
            profile,
        )
    # constructor TypeErrors surface as config errors, not tracebacks
    with pytest.raises(ConfigInvalid, match="arima"):
        build_model({"name": "arima", "params": {"max_z": 1}}, 0, profile)
