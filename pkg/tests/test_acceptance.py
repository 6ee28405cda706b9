"""Headline guarantees, each checked against an independent oracle or closed
form: metric arithmetic, split/window protocol counts, model recovery on
synthetic processes, explanation exactness, rating behavior, and byte-level
pipeline determinism. Tests with a runtime budget assert it explicitly."""

import json
import math
import time
import warnings
from itertools import combinations
from math import factorial

import numpy as np
import pytest
from click.testing import CliRunner

from chronoscope import (
    CausalFrame,
    GBDTForecaster,
    LimeConfig,
    MockForecaster,
    SeasonalNaiveForecaster,
    TreeEnsemble,
    arima_select,
    ate,
    baselines,
    evaluate_split,
    fit_surrogate,
    get_profile,
    lime_explain,
    mase,
    rate,
    score_record,
    segment_uniform,
    smape,
    split_80_20,
    synth,
    tree_shap,
    windows,
    wrs,
)
from chronoscope.cli import main
from chronoscope.forecast.trees import Tree

runner = CliRunner()


# ---------------------------------------------------------------- metrics


def smape_oracle(y_true, y_pred):
    total = 0.0
    for t, p in zip(y_true, y_pred):
        half_sum = (abs(t) + abs(p)) / 2.0
        if half_sum != 0.0:
            total += abs(t - p) / half_sum
    return 100.0 * total / len(y_true)


def mase_oracle(y_true, y_pred, train, s):
    num = 0.0
    for t, p in zip(y_true, y_pred):
        num += abs(t - p)
    num /= len(y_true)
    den = 0.0
    for i in range(s, len(train)):
        den += abs(train[i] - train[i - s])
    den /= len(train) - s
    return num / den if den != 0.0 else math.inf


def test_metrics_match_straight_loop_oracle():
    t0 = time.monotonic()
    rng = np.random.default_rng(901)
    for trial in range(1000):
        n = int(rng.integers(1, 81))
        y_true = rng.normal(0.0, 5.0, n)
        y_pred = rng.normal(0.0, 5.0, n)
        if trial % 3 == 0:
            # shared zeros exercise the 0/0 terms
            idx = rng.choice(n, size=int(rng.integers(0, n + 1)), replace=False)
            y_true[idx] = 0.0
            y_pred[idx] = 0.0
        s = int(rng.choice([1, 2, 5, 7]))
        train = rng.normal(0.0, 5.0, int(rng.integers(s + 1, s + 60)))
        if trial % 7 == 0:
            train[:] = train[0]

        got_s = smape(y_true, y_pred)
        assert math.isclose(got_s, smape_oracle(y_true, y_pred), rel_tol=1e-12, abs_tol=1e-12)
        assert 0.0 <= got_s <= 200.0

        got_m = mase(y_true, y_pred, train, s)
        want_m = mase_oracle(y_true, y_pred, train, s)
        if math.isinf(want_m):
            assert math.isinf(got_m)
        else:
            assert math.isclose(got_m, want_m, rel_tol=1e-12, abs_tol=1e-12)
    assert time.monotonic() - t0 < 5.0


def test_constant_train_flags_infinite_mase():
    flat = np.full(30, 4.25)
    assert math.isinf(mase(np.array([1.0, 2.0]), np.array([1.5, 1.5]), flat, 1))

    # the flag surfaces on the scored row: car profile has s=1
    series = synth("seasonal", 60, 0, freq="monthly", period=4, amp=0.0, sigma=0.0)
    profile = get_profile("car")
    split = split_80_20(series)
    model = SeasonalNaiveForecaster().fit(split.train, profile)
    row = score_record(evaluate_split(model, split, profile), split, profile)
    assert math.isinf(row.mase)
    assert row.flags == ("infinite-mase",)


# ------------------------------------------------------- split and windows


class CountingModel:
    model_name = "counting"

    def __init__(self):
        self.calls = []

    def fit(self, train, profile):
        return self

    def predict(self, context, horizon):
        self.calls.append((int(np.asarray(context).size), horizon))
        return np.zeros(horizon)


def test_split_and_window_protocol_arithmetic():
    t0 = time.monotonic()
    for length, freq, want in [
        (250, "business-daily", (200, 50)),
        (51, "monthly", (40, 11)),
        (20915, "minutely", (16732, 4183)),
    ]:
        split = split_80_20(synth("ar1", length, 0, freq=freq))
        assert (len(split.train), len(split.test)) == want
        assert len(split.train) == math.floor(0.8 * length)
        assert len(split.train) + len(split.test) == length

    assert len(windows(np.arange(30.0), 20, 5)) == 2
    assert len(windows(np.arange(25.0), 20, 5)) == 1
    assert len(windows(np.arange(10.0), 8, 2, stride=1)) == 1

    daily = CountingModel()
    evaluate_split(
        daily, split_80_20(synth("ar1", 250, 1, freq="business-daily")), get_profile("finance")
    )
    assert daily.calls == [(20, 5)] * 10

    monthly = CountingModel()
    evaluate_split(
        monthly, split_80_20(synth("ar1", 51, 1, freq="monthly")), get_profile("car")
    )
    assert monthly.calls == [(8, 2)] * 5 + [(8, 1)]
    assert time.monotonic() - t0 < 1.0


# ----------------------------------------------------------------- arima


def test_arima_recovers_ar_order_and_differencing():
    t0 = time.monotonic()
    profile = get_profile("pedestrian")

    ar = synth("ar1", 1000, 1, phi=0.7)
    model = arima_select(ar, profile, max_pq=3)
    assert model.order[0] >= 1
    assert abs(model.ar[0] - 0.7) <= 0.1

    walk = synth("random-walk", 500, 3)
    assert arima_select(walk, profile, max_pq=3).order[1] == 1
    assert time.monotonic() - t0 < 60.0


# ------------------------------------------------------------------ gbdt


def test_gbdt_beats_seasonal_naive_on_seasonal_synthetic():
    t0 = time.monotonic()
    series = synth("seasonal", 1200, 42, period=24, amp=10.0, sigma=1.0)
    profile = get_profile("pedestrian")
    split = split_80_20(series)

    gbdt = GBDTForecaster().fit(split.train, profile)
    naive = SeasonalNaiveForecaster().fit(split.train, profile)
    gbdt_row = score_record(evaluate_split(gbdt, split, profile), split, profile)
    naive_row = score_record(evaluate_split(naive, split, profile), split, profile)

    assert gbdt_row.mase < 1.0
    assert gbdt_row.mase < naive_row.mase

    checkpoints = gbdt.ensemble_.loss_checkpoints
    assert len(checkpoints) >= 2
    assert all(b <= a for a, b in zip(checkpoints, checkpoints[1:]))
    assert time.monotonic() - t0 < 120.0


# ------------------------------------------------------------------ shap


def random_tree(rng, n_split_features, max_depth):
    feature, threshold, left, right, value, cover = [], [], [], [], [], []

    def grow(depth):
        idx = len(feature)
        for col in (feature, left, right):
            col.append(-1)
        threshold.append(0.0)
        value.append(0.0)
        cover.append(0.0)
        if depth >= max_depth or rng.random() < 0.25:
            value[idx] = float(rng.normal(0.0, 2.0))
            cover[idx] = float(rng.integers(1, 50))
            return idx
        feature[idx] = int(rng.integers(0, n_split_features))
        threshold[idx] = float(rng.normal(0.0, 1.0))
        left[idx] = grow(depth + 1)
        right[idx] = grow(depth + 1)
        cover[idx] = cover[left[idx]] + cover[right[idx]]
        return idx

    grow(0)
    return Tree(
        feature=np.array(feature, dtype=np.int64),
        threshold=np.array(threshold),
        left=np.array(left, dtype=np.int64),
        right=np.array(right, dtype=np.int64),
        value=np.array(value),
        cover=np.array(cover),
    )


def cover_conditioned_value(tree, x, known, node=0):
    j = int(tree.feature[node])
    if j < 0:
        return float(tree.value[node])
    lo, hi = int(tree.left[node]), int(tree.right[node])
    if j in known:
        nxt = lo if x[j] <= tree.threshold[node] else hi
        return cover_conditioned_value(tree, x, known, nxt)
    w_left = tree.cover[lo] / tree.cover[node]
    return w_left * cover_conditioned_value(tree, x, known, lo) + (
        1.0 - w_left
    ) * cover_conditioned_value(tree, x, known, hi)


def shapley_by_enumeration(ensemble, x):
    m = ensemble.n_features
    memo = {}

    def coalition_value(mask):
        if mask not in memo:
            known = {j for j in range(m) if mask >> j & 1}
            memo[mask] = ensemble.base_score + ensemble.learning_rate * sum(
                cover_conditioned_value(t, x, known) for t in ensemble.trees
            )
        return memo[mask]

    phi = np.zeros(m)
    for i in range(m):
        rest = [j for j in range(m) if j != i]
        for k in range(m):
            weight = factorial(k) * factorial(m - k - 1) / factorial(m)
            for subset in combinations(rest, k):
                mask = 0
                for j in subset:
                    mask |= 1 << j
                phi[i] += weight * (
                    coalition_value(mask | 1 << i) - coalition_value(mask)
                )
    return phi, coalition_value(0)


def test_tree_shap_matches_subset_enumeration():
    rng = np.random.default_rng(2717)
    for _ in range(100):
        n_split = int(rng.integers(1, 10))
        n_features = n_split + 1  # last feature never split on
        trees = tuple(
            random_tree(rng, n_split, max_depth=3)
            for _ in range(int(rng.integers(1, 4)))
        )
        ensemble = TreeEnsemble(
            trees=trees,
            learning_rate=float(rng.uniform(0.05, 1.0)),
            base_score=float(rng.normal()),
            n_features=n_features,
            feature_names=tuple(f"f{j}" for j in range(n_features)),
        )
        X = rng.normal(0.0, 1.2, (4, n_features))

        explanation = tree_shap(ensemble, X)
        reconstructed = explanation.base_value + explanation.values.sum(axis=1)
        assert np.abs(reconstructed - ensemble.predict(X)).max() <= 1e-9

        phi, base = shapley_by_enumeration(ensemble, X[0])
        assert np.abs(explanation.values[0] - phi).max() <= 1e-9
        assert abs(explanation.base_value - base) <= 1e-9
        assert np.all(explanation.values[:, n_split] == 0.0)


# ------------------------------------------------------------- surrogate


def test_surrogate_reproduces_seasonal_blackbox():
    series = synth("seasonal", 240, 5, period=4, amp=10.0, sigma=0.0)
    profile = get_profile(
        "pedestrian", context_C=8, horizon_H=2, seasonal_s=4, arima_rolling_w=8
    )
    mock = MockForecaster("seasonal", period=4)
    report = fit_surrogate(
        lambda ctx, h: mock.predict(np.asarray(ctx, dtype=np.float64), h),
        series,
        profile,
        n_estimators=400,
        learning_rate=0.1,
        min_leaf=5,
    )

    scale = float(np.mean(np.abs(series.values)))
    assert report.fidelity_rmse < 1e-6 * scale
    assert "lag_4" in report.surrogate.feature_names

    rows = report.table_rows()
    assert [row["model"] for row in rows] == ["base", "surrogate"]
    for row in rows:
        assert set(row) == {"model", "mase", "smape"}


# ------------------------------------------------------------------ lime


def test_lime_recovers_mask_linear_weights():
    coeffs = np.array([3.0, -1.5, 0.25, 4.0, 0.0])
    intercept = 7.0
    ctx = np.arange(1.0, 21.0)
    bounds = segment_uniform(20, 5)

    def black_box(pert):
        present = np.array(
            [float(np.any(pert[lo:hi] != 0.0)) for lo, hi in bounds]
        )
        return np.array([intercept + float(coeffs @ present)])

    cfg = LimeConfig(n_segments=5, n_samples=400, perturbation="zero", seed=3)
    att = lime_explain(black_box, ctx, cfg)
    np.testing.assert_allclose(att.weights, coeffs, atol=1e-6)
    assert att.intercept == pytest.approx(intercept, abs=1e-6)
    assert att.fit_r2 >= 0.999

    again = lime_explain(black_box, ctx, cfg)
    assert np.asarray(again.weights).tobytes() == np.asarray(att.weights).tobytes()

    degenerate = lime_explain(black_box, np.zeros(20), cfg)
    assert np.all(np.asarray(degenerate.weights) == 0.0)
    assert "degenerate-model" in degenerate.flags


# ------------------------------------------------------------------- wrs


def groups_frame(groups):
    treatment, protected, outcome = [], [], []
    for name, values in groups.items():
        for v in values:
            treatment.append("m")
            protected.append(name)
            outcome.append(float(v))
    return CausalFrame(
        treatment=tuple(treatment),
        outcome=np.array(outcome),
        protected=tuple(protected),
    )


def test_wrs_calibration_on_identical_groups():
    hits = 0
    for trial in range(200):
        base = np.random.default_rng(trial).normal(0.0, 1.0, 40)
        frame = groups_frame({f"g{k}": base for k in range(7)})
        hits += wrs(frame).normalized < 0.15
    assert hits >= 190


def test_wrs_one_shifted_group_among_seven():
    base = np.tile([1.0, -1.0], 20)  # integer-valued floats keep sums exact
    groups = {f"g{k}": base for k in range(6)}
    groups["g6"] = base + 10.0 * base.std()
    frame = groups_frame(groups)

    result = wrs(frame)
    assert result.n_pairs == 21
    assert result.rejections == {"95%": 6, "75%": 6, "60%": 6}
    assert result.normalized == pytest.approx(6 / 21, abs=1e-15)

    # a single confidence level makes the normalization exact integer math
    unit = wrs(frame, weights={"95%": 1.0})
    assert unit.raw == 6.0
    assert unit.normalized == 6 / 21

    # symmetry: relabeling groups and reordering rows changes nothing
    relabeled = groups_frame(
        {f"z{6 - k}": vals for k, vals in enumerate(reversed(groups.values()))}
    )
    assert wrs(relabeled).normalized == result.normalized
    perm = np.random.default_rng(8).permutation(len(frame.outcome))
    shuffled = CausalFrame(
        treatment=tuple(frame.treatment[i] for i in perm),
        outcome=frame.outcome[perm],
        protected=tuple(frame.protected[i] for i in perm),
    )
    assert wrs(shuffled).normalized == result.normalized


def test_wrs_monotone_in_group_separation():
    base = np.random.default_rng(17).normal(0.0, 1.0, 30)
    scores = []
    for delta in (0.0, 0.1, 0.25, 0.4, 1.0, 3.0):
        frame = groups_frame(
            {"a": base, "b": base, "c": base, "d": base + delta}
        )
        scores.append(wrs(frame).normalized)
    assert scores[0] == 0.0
    assert all(lo <= hi for lo, hi in zip(scores, scores[1:]))
    assert scores[-1] == pytest.approx(3 / 6, abs=1e-15)


# ------------------------------------------------------------------- ate


def ate_oracle(frame, reference):
    """Stratified standardization recomputed from plain dicts and loops.
    Cell means use numpy on identically ordered values so agreement with the
    library can be exact rather than within rounding."""
    levels = sorted(set(frame.treatment))
    strata = sorted(set(frame.protected))
    by_cell = {}
    for t, z, o in zip(frame.treatment, frame.protected, frame.outcome):
        by_cell.setdefault((t, z), []).append(float(o))
    n = len(frame.treatment)
    p_z = {z: frame.protected.count(z) / n for z in strata}
    cell_mean = {k: float(np.mean(np.array(v))) for k, v in by_cell.items()}

    effects = {}
    for t in levels:
        if t == reference:
            continue
        common = [
            z for z in strata if (t, z) in cell_mean and (reference, z) in cell_mean
        ]
        if not common:
            continue
        mass = sum(p_z[z] for z in common)
        e_t = sum(cell_mean[(t, z)] * p_z[z] for z in common) / mass
        e_ref = sum(cell_mean[(reference, z)] * p_z[z] for z in common) / mass
        effects[t] = abs(e_t - e_ref)
    return float(np.mean(list(effects.values()))), effects


def test_ate_equals_stratified_oracle_exactly():
    rng = np.random.default_rng(33)
    for _ in range(25):
        n = int(rng.integers(40, 1001))
        t_levels = [f"t{i}" for i in range(int(rng.integers(2, 5)))]
        z_levels = [f"z{i}" for i in range(int(rng.integers(2, 6)))]
        frame = CausalFrame(
            treatment=tuple(str(x) for x in rng.choice(t_levels, n)),
            outcome=rng.normal(0.0, 3.0, n),
            protected=tuple(str(x) for x in rng.choice(z_levels, n)),
        )
        reference = t_levels[int(rng.integers(len(t_levels)))]
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            result = ate(frame, reference=reference)
        want_value, want_effects = ate_oracle(frame, reference)
        assert result.value == want_value
        assert result.effects == want_effects


def confounded_frame(n, a, b, sigma, seed):
    rng = np.random.default_rng(seed)
    z = rng.random(n) < 0.5
    t = rng.random(n) < np.where(z, 0.8, 0.2)
    y = a * t + b * z + rng.normal(0.0, sigma, n)
    frame = CausalFrame(
        treatment=tuple("t1" if v else "t0" for v in t),
        outcome=y,
        protected=tuple("z1" if v else "z0" for v in z),
    )
    return frame, t, z, y


def test_ate_deconfounds_while_raw_difference_does_not():
    frame, t, z, y = confounded_frame(4000, a=1.0, b=2.0, sigma=1.0, seed=7)
    adjusted = ate(frame, reference="t0").effects["t1"]

    se2 = 0.0
    for stratum in (z, ~z):
        p = stratum.mean()
        treated, control = y[t & stratum], y[~t & stratum]
        se2 += p**2 * (
            treated.var(ddof=1) / treated.size + control.var(ddof=1) / control.size
        )
    assert abs(adjusted - 1.0) <= 2.0 * math.sqrt(se2)

    unadjusted = abs(y[t].mean() - y[~t].mean())
    se_u = math.sqrt(y[t].var(ddof=1) / t.sum() + y[~t].var(ddof=1) / (~t).sum())
    assert abs(unadjusted - 1.0) > 2.0 * se_u


def test_permutation_baseline_ate_is_near_zero():
    frame, _, _, _ = confounded_frame(10_000, a=1.0, b=1.0, sigma=0.5, seed=7)
    result = baselines(frame, seed=2, reference="t0")
    assert result["random"]["ate"] < 0.05


# ---------------------------------------------------------------- rating


def test_rating_bands_and_shared_tie():
    t0 = time.monotonic()
    rows = rate({"m1": 0.22, "m2": 0.26, "m3": 0.46, "m4": 0.47})
    assert [(r.model, r.rating) for r in rows] == [
        ("m1", 1),
        ("m2", 2),
        ("m3", 3),
        ("m4", 4),
    ]

    rows = rate({"m1": 0.27, "m2": 0.66, "m3": 0.75, "m4": 0.85, "m5": 0.85})
    assert [r.rating for r in rows] == [1, 2, 3, 4, 4]
    assert {r.model for r in rows if r.rating == 4} == {"m4", "m5"}
    assert time.monotonic() - t0 < 1.0


# ----------------------------------------------------------- determinism


def test_pipeline_runs_are_byte_identical(tmp_path):
    doc = {
        "seed": 11,
        "data": {
            "synthetic": [
                {"kind": "ar1", "length": 220, "phi": 0.55, "series_id": "a"},
                {"kind": "seasonal", "length": 220, "period": 24, "series_id": "b"},
            ]
        },
        "profile": {"name": "pedestrian"},
        "models": [
            {"name": "seasonal-naive"},
            {"name": "arima", "params": {"max_pq": 1}},
            {
                "name": "gbdt",
                "params": {"n_estimators": 20, "max_depth": 3, "min_leaf": 5},
            },
        ],
        "explain": {
            "lime": {"n_samples": 48, "n_segments": 4, "series": ["a"]},
            "shap": {"max_rows": 12},
            "surrogate": {
                "forecaster": "mock:seasonal",
                "max_pairs": 40,
                "n_estimators": 20,
                "min_leaf": 5,
            },
        },
        "rde": {"hypothesis": "h1"},
        "output": {"dir": "ignored"},
    }
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps(doc))

    outputs = []
    for name in ("one", "two"):
        out = tmp_path / name
        result = runner.invoke(main, ["report", "--config", str(cfg), "--output", str(out)])
        assert result.exit_code == 0, result.output
        outputs.append(out)

    first, second = outputs
    names_a = sorted(p.relative_to(first).as_posix() for p in first.rglob("*") if p.is_file())
    names_b = sorted(p.relative_to(second).as_posix() for p in second.rglob("*") if p.is_file())
    assert names_a == names_b
    assert names_a
    for name in names_a:
        assert (first / name).read_bytes() == (second / name).read_bytes(), name
