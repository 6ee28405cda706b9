"""Exact path-dependent SHAP for tree ensembles, global aggregation, and the
surrogate pipeline that mimics a black-box forecaster so trees can explain it.

The per-tree attribution walks every decision path once, maintaining the
polynomial of subset weights (the EXTEND/UNWIND bookkeeping from the exact
tree-SHAP algorithm); expectations at internal nodes use training cover
ratios recorded by the tree builder.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..data import DomainProfile, TimeSeries, split_80_20
from ..errors import BlackboxUnavailable, FeatureMismatch, SpecInfeasible
from ..features import (
    FeatureMatrix,
    FeatureSpec,
    build_features,
    surrogate_feature_spec,
)
from ..forecast.trees import Tree, TreeEnsemble, gbdt_fit
from ..metrics import mase as _mase, smape as _smape


@dataclass(frozen=True)
class ShapExplanation:
    values: np.ndarray
    base_value: float
    feature_names: tuple[str, ...]

    def __post_init__(self):
        if self.values.ndim != 2 or self.values.shape[1] != len(self.feature_names):
            raise FeatureMismatch("values matrix does not match feature names")


class _Path:
    """Decision-path state: parallel lists of feature index, zero fraction,
    one fraction, and permutation weight."""

    __slots__ = ("d", "z", "o", "w")

    def __init__(self):
        self.d: list[int] = []
        self.z: list[float] = []
        self.o: list[float] = []
        self.w: list[float] = []

    def copy(self) -> "_Path":
        p = _Path()
        p.d = self.d.copy()
        p.z = self.z.copy()
        p.o = self.o.copy()
        p.w = self.w.copy()
        return p

    def extend(self, pz: float, po: float, pi: int) -> None:
        l = len(self.d)
        self.d.append(pi)
        self.z.append(pz)
        self.o.append(po)
        self.w.append(1.0 if l == 0 else 0.0)
        for i in range(l - 1, -1, -1):
            self.w[i + 1] += po * self.w[i] * (i + 1) / (l + 1)
            self.w[i] = pz * self.w[i] * (l - i) / (l + 1)

    def unwind(self, i: int) -> None:
        l = len(self.d) - 1
        one, zero = self.o[i], self.z[i]
        n = self.w[l]
        for j in range(l - 1, -1, -1):
            if one != 0.0:
                t = self.w[j]
                self.w[j] = n * (l + 1) / ((j + 1) * one)
                n = t - self.w[j] * zero * (l - j) / (l + 1)
            else:
                self.w[j] = self.w[j] * (l + 1) / (zero * (l - j))
        for j in range(i, l):
            self.d[j] = self.d[j + 1]
            self.z[j] = self.z[j + 1]
            self.o[j] = self.o[j + 1]
        self.d.pop()
        self.z.pop()
        self.o.pop()
        self.w.pop()

    def unwound_sum(self, i: int) -> float:
        l = len(self.d) - 1
        one, zero = self.o[i], self.z[i]
        total = 0.0
        if one != 0.0:
            n = self.w[l]
            for j in range(l - 1, -1, -1):
                t = n * (l + 1) / ((j + 1) * one)
                total += t
                n = self.w[j] - t * zero * (l - j) / (l + 1)
        else:
            for j in range(l - 1, -1, -1):
                total += self.w[j] * (l + 1) / (zero * (l - j))
        return total


def _tree_shap_row(tree: Tree, x: np.ndarray, phi: np.ndarray) -> None:
    def recurse(j: int, path: _Path, pz: float, po: float, pi: int) -> None:
        path = path.copy()
        path.extend(pz, po, pi)
        feat = int(tree.feature[j])
        if feat < 0:
            leaf = float(tree.value[j])
            for i in range(1, len(path.d)):
                w = path.unwound_sum(i)
                phi[path.d[i]] += w * (path.o[i] - path.z[i]) * leaf
            return
        left, right = int(tree.left[j]), int(tree.right[j])
        if x[feat] <= tree.threshold[j]:
            hot, cold = left, right
        else:
            hot, cold = right, left
        iz = io = 1.0
        k = -1
        for idx in range(1, len(path.d)):
            if path.d[idx] == feat:
                k = idx
                break
        if k >= 0:
            iz, io = path.z[k], path.o[k]
            path.unwind(k)
        rj = tree.cover[j]
        recurse(hot, path, iz * tree.cover[hot] / rj, io, feat)
        recurse(cold, path, iz * tree.cover[cold] / rj, 0.0, feat)

    recurse(0, _Path(), 1.0, 1.0, -1)


def _tree_expected(tree: Tree) -> float:
    """Cover-weighted mean leaf value (the path-dependent no-feature
    expectation)."""
    total = 0.0
    stack = [(0, 1.0)]
    while stack:
        j, p = stack.pop()
        if tree.feature[j] < 0:
            total += p * float(tree.value[j])
            continue
        rj = tree.cover[j]
        left, right = int(tree.left[j]), int(tree.right[j])
        stack.append((left, p * tree.cover[left] / rj))
        stack.append((right, p * tree.cover[right] / rj))
    return total


def tree_shap(ensemble: TreeEnsemble, rows) -> ShapExplanation:
    """Exact SHAP values for each row; base_value + sum(values) reproduces
    the ensemble prediction."""
    X = np.asarray(rows, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != ensemble.n_features:
        raise FeatureMismatch(
            f"rows have {X.shape[1]} features, ensemble has {ensemble.n_features}"
        )
    n, m = X.shape
    values = np.zeros((n, m))
    lr = ensemble.learning_rate
    for t in ensemble.trees:
        phi_t = np.zeros(m)
        for r in range(n):
            phi_t[:] = 0.0
            _tree_shap_row(t, X[r], phi_t)
            values[r] += lr * phi_t
    base = ensemble.base_score + lr * sum(_tree_expected(t) for t in ensemble.trees)
    names = ensemble.feature_names or tuple(f"x{i}" for i in range(m))
    return ShapExplanation(values=values, base_value=float(base), feature_names=names)


def global_shap(expl: ShapExplanation) -> list[tuple[str, float]]:
    """Mean |SHAP| per feature, descending, ties broken by name."""
    if expl.values.shape[0] < 1:
        raise FeatureMismatch("need at least one explained row")
    mean_abs = np.abs(expl.values).mean(axis=0)
    pairs = list(zip(expl.feature_names, (float(v) for v in mean_abs)))
    return sorted(pairs, key=lambda kv: (-kv[1], kv[0]))


@dataclass(frozen=True)
class SurrogateReport:
    surrogate: TreeEnsemble
    fidelity_rmse: float
    base_mase: float
    base_smape: float
    surrogate_mase: float
    surrogate_smape: float
    feature_spec: FeatureSpec
    detail: dict = field(default_factory=dict)

    def table_rows(self) -> list[dict]:
        """Base-vs-surrogate accuracy in the shape of an appendix comparison
        table: one row per model, MASE and sMAPE columns."""
        return [
            {"model": "base", "mase": self.base_mase, "smape": self.base_smape},
            {
                "model": "surrogate",
                "mase": self.surrogate_mase,
                "smape": self.surrogate_smape,
            },
        ]


def fit_surrogate(
    blackbox_predict,
    series: TimeSeries,
    profile: DomainProfile,
    spec: FeatureSpec | None = None,
    max_pairs: int | None = None,
    **gbdt_params,
) -> SurrogateReport:
    """Train a tree ensemble to mimic a black box's one-step forecasts.

    blackbox_predict(context_values, horizon) -> forecasts. Training pairs
    come from sliding windows over the train region (features at index t,
    black-box forecast for the window ending at t); the last 20% of pairs are
    held out for fidelity and never seen by the surrogate fit.
    """
    spec = spec or surrogate_feature_spec(profile.seasonal_s)
    split = split_80_20(series)
    fm = build_features(series, spec)
    C = profile.context_C
    usable = [
        i
        for i, t in enumerate(fm.time_index)
        if C <= int(t) < split.split_index
    ]
    if len(usable) < 10:
        raise SpecInfeasible(
            f"only {len(usable)} usable windows; need at least 10"
        )
    if max_pairs is not None and len(usable) > max_pairs:
        keep = np.linspace(0, len(usable) - 1, max_pairs).round().astype(int)
        usable = [usable[i] for i in np.unique(keep)]
    rows = fm.rows[usable]
    t_idx = fm.time_index[usable]
    y_bb = np.empty(len(usable))
    for out_i, t in enumerate(t_idx):
        ctx = series.values[int(t) - C : int(t)]
        try:
            fc = np.asarray(blackbox_predict(ctx, 1), dtype=np.float64)
        except Exception as exc:
            raise BlackboxUnavailable(f"black-box call failed: {exc}") from exc
        if fc.size < 1 or not np.all(np.isfinite(fc)):
            raise BlackboxUnavailable("black-box returned no finite forecast")
        y_bb[out_i] = float(fc[0])

    n_fit = max(int(math.floor(0.8 * len(usable))), 1)
    fit_fm = FeatureMatrix(
        names=fm.names,
        rows=rows[:n_fit],
        target=y_bb[:n_fit],
        time_index=t_idx[:n_fit],
    )
    ensemble = gbdt_fit(fit_fm, **gbdt_params)
    held_rows = rows[n_fit:]
    held_y = y_bb[n_fit:]
    if held_rows.shape[0] == 0:
        held_rows, held_y = rows[:n_fit], y_bb[:n_fit]
    pred_held = ensemble.predict(held_rows)
    fidelity_rmse = float(np.sqrt(np.mean((pred_held - held_y) ** 2)))

    truth = series.values[t_idx]
    surr_pred = ensemble.predict(rows)
    train_vals = split.train.values
    s = profile.seasonal_s
    return SurrogateReport(
        surrogate=ensemble,
        fidelity_rmse=fidelity_rmse,
        base_mase=_mase(truth, y_bb, train_vals, s),
        base_smape=_smape(truth, y_bb),
        surrogate_mase=_mase(truth, surr_pred, train_vals, s),
        surrogate_smape=_smape(truth, surr_pred),
        feature_spec=spec,
        detail={
            "n_pairs": len(usable),
            "n_fit": n_fit,
            "n_holdout": len(usable) - n_fit,
            "context_C": C,
        },
    )
