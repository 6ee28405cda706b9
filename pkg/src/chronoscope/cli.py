"""Command-line pipeline: validate, evaluate, explain, surrogate, rate, report.

Every artifact embeds the effective config (and its SHA-256) so a result file
is self-describing; two runs with the same config and seed produce
byte-identical CSV/JSON.
"""

from __future__ import annotations

import csv
import json
import math
import sys
from pathlib import Path

import click
import numpy as np

from .adapter import MockForecaster, call_remote, make_client, ForecastRequest
from .config import Config, build_model, config_sha256, load_config, load_dataset, validate_config
from .data import split_80_20
from .errors import ChronoscopeError, ConfigInvalid, SingleSeriesDataset
from .explain.lime import LimeConfig, lime_explain
from .explain.plots import svg_beeswarm, svg_segment_plot
from .explain.shap import fit_surrogate, global_shap, tree_shap
from .features import FeatureSpec, build_features
from .harness import evaluate_split, score_record
from .metrics import aggregate
from .rde import run_hypothesis

CONFIG_COMMENT = "# chronoscope-config-sha256:"


def _json_text(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _num(v) -> str:
    if isinstance(v, float):
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    return str(v)


def _write_text(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _write_csv(path: Path, header: list[str], rows: list[list], sha: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"{CONFIG_COMMENT}{sha}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_num(v) for v in row])


def _effective_config(config_path: str, seed: int | None) -> Config:
    doc = load_config(config_path)
    if seed is not None:
        doc = {**doc, "seed": seed}
    return validate_config(doc)


def _artifact_header(cfg: Config) -> dict:
    return {"config": cfg.doc, "config_sha256": cfg.sha256()}


def _run_evaluation(cfg: Config):
    """(records_by_model, metric_rows, failures) over every model x series."""
    dataset = load_dataset(cfg)
    records_by_model: dict[str, list] = {}
    rows = []
    failures = []
    for mconf in cfg.models:
        for series in dataset:
            try:
                split = split_80_20(series)
                model = build_model(mconf, cfg.seed, cfg.profile)
                model.fit(split.train, cfg.profile)
                rec = evaluate_split(model, split, cfg.profile)
                rows.append(score_record(rec, split, cfg.profile))
                records_by_model.setdefault(rec.model_name, []).append(rec)
            except ChronoscopeError as exc:
                failures.append(
                    {
                        "model": mconf["name"],
                        "series_id": series.series_id,
                        "error": f"{type(exc).__name__}: {exc}",
                    }
                )
    rows.sort(key=lambda r: (r.domain, r.model, r.series_id))
    return records_by_model, rows, failures


def _cmd_evaluate(cfg: Config, outdir: Path) -> int:
    records, rows, failures = _run_evaluation(cfg)
    if not rows:
        raise ConfigInvalid("models", "every evaluation cell failed")
    table = aggregate(rows, pretrained_models=set(cfg.pretrained_models))
    sha = cfg.sha256()
    _write_csv(
        outdir / "metrics.csv",
        ["domain", "model", "series_id", "mase", "smape", "flags"],
        [
            [r.domain, r.model, r.series_id, r.mase, r.smape, "|".join(r.flags)]
            for r in table.rows
        ],
        sha,
    )
    summary = {
        **_artifact_header(cfg),
        "table": [
            {
                "domain": s.domain,
                "model": s.model,
                "n_series": s.n_series,
                "mase_mean": s.mase_mean,
                "mase_std": s.mase_std,
                "smape_mean": s.smape_mean,
                "smape_std": s.smape_std,
                "infinite_count": s.infinite_count,
                "seen_in_pretraining": s.seen_in_pretraining,
            }
            for s in table.summaries
        ],
        "failures": failures,
    }
    _write_text(outdir / "metrics_summary.json", _json_text(summary))
    click.echo(f"wrote {outdir / 'metrics.csv'} ({len(table.rows)} rows)")
    if failures:
        for f in failures:
            click.echo(
                f"failed: {f['model']} on {f['series_id']}: {f['error']}", err=True
            )
        return 2
    return 0


def _model_entry(cfg: Config, wanted: str | None, key: str) -> dict:
    if wanted is None:
        return cfg.models[0]
    for mconf in cfg.models:
        if mconf["name"] == wanted:
            return mconf
    raise ConfigInvalid(key, f"model {wanted!r} not present in models list")


def _predict_fn(model, split, profile):
    """Adapt a fitted model to LIME's context -> forecasts callable."""
    C = profile.context_C
    train = split.train

    if getattr(model, "context_mode", "window") == "full":

        def f(ctx):
            vals = np.concatenate([train.values[: len(train) - C], np.asarray(ctx)])
            return model.predict(train.with_values(vals), profile.horizon_H)

    else:

        def f(ctx):
            return model.predict(np.asarray(ctx), profile.horizon_H)

    return f


def _cmd_explain_lime(cfg: Config, outdir: Path) -> int:
    lconf = dict(cfg.explain.get("lime", {}))
    model_conf = _model_entry(cfg, lconf.pop("model", None), "explain.lime.model")
    wanted_series = lconf.pop("series", None)
    lconf.setdefault("seed", cfg.seed)
    try:
        lime_cfg = LimeConfig(**lconf)
    except TypeError as exc:
        raise ConfigInvalid("explain.lime", str(exc)) from exc
    dataset = load_dataset(cfg)
    if wanted_series is not None:
        dataset = [s for s in dataset if s.series_id in set(wanted_series)]
        if not dataset:
            raise ConfigInvalid("explain.lime.series", "no matching series")
    count = 0
    for series in dataset:
        split = split_80_20(series)
        model = build_model(model_conf, cfg.seed, cfg.profile)
        model.fit(split.train, cfg.profile)
        context = split.train.values[-cfg.profile.context_C :]
        attr = lime_explain(_predict_fn(model, split, cfg.profile), context, lime_cfg)
        doc = {
            **_artifact_header(cfg),
            "series_id": series.series_id,
            "model": model_conf["name"],
            "lime": lime_cfg.to_dict(),
            "segment_bounds": [list(b) for b in attr.segment_bounds],
            "weights": [float(w) for w in attr.weights],
            "intercept": attr.intercept,
            "fit_r2": attr.fit_r2,
            "flags": list(attr.flags),
        }
        _write_text(outdir / f"lime_{series.series_id}.json", _json_text(doc))
        svg = svg_segment_plot(
            context,
            attr.segment_bounds,
            attr.weights,
            title=f"{series.series_id}: segment contributions "
            f"({lime_cfg.perturbation})",
        )
        _write_text(outdir / f"lime_{series.series_id}.svg", svg + "\n")
        count += 1
    click.echo(f"wrote {count} LIME artifact pair(s) to {outdir}")
    return 0


def _cmd_explain_shap(cfg: Config, outdir: Path) -> int:
    sconf = dict(cfg.explain.get("shap", {}))
    model_conf = _model_entry(cfg, sconf.pop("model", "gbdt"), "explain.shap.model")
    if model_conf["name"] != "gbdt":
        raise ConfigInvalid("explain.shap.model", "tree explanations need the gbdt model")
    max_rows = sconf.pop("max_rows", 50)
    wanted = sconf.pop("series", None)
    if sconf:
        raise ConfigInvalid("explain.shap", f"unknown keys {sorted(sconf)}")
    dataset = load_dataset(cfg)
    if wanted is not None:
        dataset = [s for s in dataset if s.series_id in set(wanted)]
        if not dataset:
            raise ConfigInvalid("explain.shap.series", "no matching series")
    series = dataset[0]
    split = split_80_20(series)
    model = build_model(model_conf, cfg.seed, cfg.profile)
    model.fit(split.train, cfg.profile)
    fm = build_features(split.train, model.feature_spec_)
    n = fm.rows.shape[0]
    if n > max_rows:
        keep = np.unique(np.linspace(0, n - 1, max_rows).round().astype(int))
        rows = fm.rows[keep]
    else:
        rows = fm.rows
    expl = tree_shap(model.ensemble_, rows)
    ranking = global_shap(expl)
    check = model.ensemble_.predict(rows)
    recon = expl.base_value + expl.values.sum(axis=1)
    doc = {
        **_artifact_header(cfg),
        "series_id": series.series_id,
        "model": "gbdt",
        "base_value": expl.base_value,
        "feature_names": list(expl.feature_names),
        "values": [[float(v) for v in row] for row in expl.values],
        "global_ranking": [[name, value] for name, value in ranking],
        "additivity_max_abs_err": float(np.abs(check - recon).max()),
    }
    name = f"shap_gbdt_{cfg.profile.name}"
    _write_text(outdir / f"{name}.json", _json_text(doc))
    svg = svg_beeswarm(
        expl.values,
        expl.feature_names,
        title=f"{series.series_id}: per-row attribution",
    )
    _write_text(outdir / f"{name}.svg", svg + "\n")
    click.echo(f"wrote {name}.json / .svg to {outdir}")
    return 0


def _blackbox_callable(spec: str, cfg: Config, series, period: int | None):
    client = make_client(spec, seed=cfg.seed, period=period)
    if isinstance(client, MockForecaster):
        return lambda ctx, h: client.predict(np.asarray(ctx), h)

    def bb(ctx, h):
        req = ForecastRequest(
            series_id=series.series_id,
            freq=series.freq,
            context=tuple(float(v) for v in ctx),
            horizon=h,
        )
        return np.asarray(call_remote(client, req).point)

    return bb


def _cmd_surrogate(cfg: Config, outdir: Path) -> int:
    uconf = dict(cfg.explain.get("surrogate", {}))
    spec_str = uconf.pop("forecaster", "mock:seasonal")
    period = uconf.pop("period", cfg.profile.seasonal_s)
    wanted = uconf.pop("series", None)
    feature_spec = uconf.pop("feature_spec", None)
    if feature_spec is not None:
        feature_spec = FeatureSpec.from_dict(feature_spec)
    max_pairs = uconf.pop("max_pairs", 512)
    gbdt_keys = {"n_estimators", "learning_rate", "max_depth", "min_leaf", "n_bins"}
    gbdt_params = {k: uconf.pop(k) for k in list(uconf) if k in gbdt_keys}
    if uconf:
        raise ConfigInvalid("explain.surrogate", f"unknown keys {sorted(uconf)}")
    dataset = load_dataset(cfg)
    if wanted is not None:
        dataset = [s for s in dataset if s.series_id == wanted]
        if not dataset:
            raise ConfigInvalid("explain.surrogate.series", "no matching series")
    series = dataset[0]
    bb = _blackbox_callable(spec_str, cfg, series, period)
    report = fit_surrogate(
        bb, series, cfg.profile, spec=feature_spec, max_pairs=max_pairs, **gbdt_params
    )
    doc = {
        **_artifact_header(cfg),
        "series_id": series.series_id,
        "blackbox": spec_str,
        "fidelity_rmse": report.fidelity_rmse,
        "accuracy_table": report.table_rows(),
        "feature_spec": report.feature_spec.to_dict(),
        "detail": report.detail,
        "surrogate_ensemble": report.surrogate.to_dict(),
    }
    name = f"surrogate_{cfg.profile.name}"
    _write_text(outdir / f"{name}.json", _json_text(doc))
    click.echo(
        f"wrote {name}.json (fidelity rmse {report.fidelity_rmse:.6g}) to {outdir}"
    )
    return 0


def _default_protected_key(cfg: Config) -> str:
    return "day-of-week" if cfg.profile.freq in ("hourly", "minutely") else "month"


def _cmd_rate(cfg: Config, outdir: Path, hypothesis: str | None) -> int:
    rconf = dict(cfg.rde or {})
    hyp = hypothesis or rconf.get("hypothesis", "h1")
    protected_key = rconf.get("protected_key", _default_protected_key(cfg))
    treatment_key = rconf.get("treatment_key", "series_id")
    reference = rconf.get("reference")
    records_by_model, _, failures = _run_evaluation(cfg)
    if not records_by_model:
        raise ConfigInvalid("models", "every evaluation cell failed")
    report = run_hypothesis(
        records_by_model,
        hyp,
        protected_key=protected_key,
        treatment_key=treatment_key,
        seed=cfg.seed,
        reference=reference,
    )
    sha = cfg.sha256()
    _write_csv(
        outdir / "ratings.csv",
        [
            "dataset",
            "model",
            "metric",
            "value",
            "raw_value",
            "rating",
            "baseline_random",
            "baseline_biased",
        ],
        [
            [
                cfg.profile.name,
                r["model"],
                r["metric"],
                r["value"],
                r["raw_value"],
                r["rating"],
                r["baseline_random"],
                r["baseline_biased"],
            ]
            for r in report.rows
        ],
        sha,
    )
    lines = [
        "# Rating report",
        "",
        f"Hypothesis {report.hypothesis}: {report.narrative}",
        "",
        f"- metric: {report.metric} (lower is better)",
        f"- treatment: {report.treatment_key}",
        f"- protected attribute: {report.protected_key}",
        f"- config sha256: {sha}",
        "",
        "| model | value | rating | random baseline | biased baseline |",
        "|---|---|---|---|---|",
    ]
    for r in report.rows:
        lines.append(
            f"| {r['model']} | {_num(r['value'])} | {r['rating']} "
            f"| {_num(r['baseline_random'])} | {_num(r['baseline_biased'])} |"
        )
    lines += [
        "",
        "Random baseline permutes outcomes across all records; biased "
        "baseline inflates one protected group by three standard deviations.",
        "",
    ]
    if failures:
        lines.append(f"Partial results: {len(failures)} evaluation cell(s) failed.")
        lines.append("")
    _write_text(outdir / "rde_report.md", "\n".join(lines))
    click.echo(f"wrote ratings.csv and rde_report.md to {outdir}")
    return 2 if failures else 0


def _cmd_report(cfg: Config, outdir: Path) -> int:
    code = _cmd_evaluate(cfg, outdir)
    sections = ["# Run report", "", f"- config sha256: {cfg.sha256()}", ""]
    sections.append("## Forecast metrics")
    sections.append("")
    sections.append("See metrics.csv / metrics_summary.json.")
    sections.append("")
    if "lime" in cfg.explain:
        _cmd_explain_lime(cfg, outdir)
        sections += ["## LIME", "", "See lime_<series>.json / .svg.", ""]
    if "shap" in cfg.explain:
        _cmd_explain_shap(cfg, outdir)
        sections += ["## SHAP", "", "See shap_*.json / .svg.", ""]
    if "surrogate" in cfg.explain:
        _cmd_surrogate(cfg, outdir)
        sections += ["## Surrogate", "", "See surrogate_*.json.", ""]
    if cfg.rde is not None:
        rate_code = _cmd_rate(cfg, outdir, None)
        code = max(code, rate_code)
        sections += ["## Ratings", "", "See ratings.csv / rde_report.md.", ""]
    _write_text(outdir / "report.md", "\n".join(sections))
    click.echo(f"wrote report.md to {outdir}")
    return code


def _common(fn):
    fn = click.option("--jobs", type=int, default=None, help="parallel jobs cap")(fn)
    fn = click.option("--seed", type=int, default=None, help="override config seed")(fn)
    fn = click.option("--output", type=str, default=None, help="override output dir")(fn)
    fn = click.option(
        "--config", "config_path", required=True, type=click.Path(), help="run config"
    )(fn)
    return fn


def _run(config_path, seed, output, body) -> None:
    try:
        cfg = _effective_config(config_path, seed)
        outdir = Path(output or cfg.output_dir)
        code = body(cfg, outdir)
    except ConfigInvalid as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(1)
    except SingleSeriesDataset as exc:
        click.echo(f"refusing: {exc}", err=True)
        sys.exit(1)
    except ChronoscopeError as exc:
        click.echo(f"{type(exc).__name__}: {exc}", err=True)
        sys.exit(1)
    sys.exit(code)


@click.group()
def main():
    """Forecast evaluation, explanation, and rating pipeline."""


@main.command()
@_common
def validate(config_path, seed, output, jobs):
    """Check the config document and exit."""
    try:
        cfg = _effective_config(config_path, seed)
    except ConfigInvalid as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(1)
    click.echo(f"config ok (sha256 {cfg.sha256()})")
    sys.exit(0)


@main.command()
@_common
def evaluate(config_path, seed, output, jobs):
    """Run every model x series cell and write metric artifacts."""
    _run(config_path, seed, output, _cmd_evaluate)


@main.command("explain-lime")
@_common
def explain_lime(config_path, seed, output, jobs):
    """Per-series segment attributions for one configured model."""
    _run(config_path, seed, output, _cmd_explain_lime)


@main.command("explain-shap")
@_common
def explain_shap(config_path, seed, output, jobs):
    """Exact tree attributions for the gbdt model."""
    _run(config_path, seed, output, _cmd_explain_shap)


@main.command()
@_common
def surrogate(config_path, seed, output, jobs):
    """Fit a tree surrogate to a black-box forecaster and report fidelity."""
    _run(config_path, seed, output, _cmd_surrogate)


@main.command()
@click.option("--hypothesis", type=click.Choice(["h1", "h2"]), default=None)
@_common
def rate(config_path, seed, output, jobs, hypothesis):
    """Causal rating workflow with baselines."""
    _run(config_path, seed, output, lambda cfg, out: _cmd_rate(cfg, out, hypothesis))


@main.command()
@_common
def report(config_path, seed, output, jobs):
    """Full pipeline: evaluate, explain, rate, and summarize."""
    _run(config_path, seed, output, _cmd_report)


if __name__ == "__main__":
    main()
