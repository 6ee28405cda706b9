"""Rating-driven explanations: build causal frames from forecast residuals,
score group sensitivity (weighted rejection score) and cross-series effect
(G-computation ATE), compare against random and biased baselines, and rank
models into ordinal ratings.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .errors import (
    AllCellsEmpty,
    GroupTooSmall,
    MissingReference,
    SingleSeriesDataset,
    UnresolvableProtectedKey,
)
from .harness import ForecastRecord
from .stats import t_test_two_sample

DEFAULT_WRS_WEIGHTS = {"95%": 1.0, "75%": 0.8, "60%": 0.6}

PROTECTED_KEYS = ("month", "day-of-week", "hour")

SINGLE_SERIES_RATIONALE = (
    "dataset contains only a single series, so treatment/outcome contrasts "
    "across series are undefined; rating analysis is infeasible"
)


@dataclass(frozen=True)
class CausalFrame:
    """(treatment, outcome, protected) records; outcome is the absolute
    residual unless the caller built something else."""

    treatment: tuple[str, ...]
    outcome: np.ndarray
    protected: tuple[str, ...]

    def __post_init__(self):
        n = len(self.treatment)
        if self.outcome.shape != (n,) or len(self.protected) != n:
            raise UnresolvableProtectedKey("frame columns must align")
        if not np.all(np.isfinite(self.outcome)):
            raise UnresolvableProtectedKey("outcomes must be finite")

    def __len__(self) -> int:
        return len(self.treatment)

    def treatment_levels(self) -> list[str]:
        return sorted(set(self.treatment))

    def protected_levels(self) -> list[str]:
        return sorted(set(self.protected))

    def with_outcome(self, outcome: np.ndarray) -> "CausalFrame":
        return CausalFrame(self.treatment, outcome, self.protected)


def _protected_value(ts, key: str) -> str:
    if key == "month":
        return f"{ts.month:02d}"
    if key == "day-of-week":
        return str(ts.weekday())
    if key == "hour":
        return f"{ts.hour:02d}"
    raise UnresolvableProtectedKey(
        f"unknown protected key {key!r}; expected one of {PROTECTED_KEYS}"
    )


def build_frame(
    records: ForecastRecord | list[ForecastRecord],
    treatment_key: str = "series_id",
    protected_key: str = "month",
) -> CausalFrame:
    """One frame row per test point: treatment from the record identity,
    outcome = |truth - forecast|, protected group from the timestamp."""
    if isinstance(records, ForecastRecord):
        records = [records]
    if treatment_key not in ("series_id", "model"):
        raise UnresolvableProtectedKey(
            f"unknown treatment key {treatment_key!r}; expected series_id or model"
        )
    treat: list[str] = []
    out: list[float] = []
    prot: list[str] = []
    for rec in records:
        t_val = rec.series_id if treatment_key == "series_id" else rec.model_name
        resid = np.abs(rec.y_true - rec.y_pred)
        for ts, o in zip(rec.timestamps, resid):
            treat.append(t_val)
            out.append(float(o))
            prot.append(_protected_value(ts, protected_key))
    return CausalFrame(tuple(treat), np.asarray(out, dtype=np.float64), tuple(prot))


@dataclass(frozen=True)
class WrsResult:
    normalized: float
    raw: float
    n_pairs: int
    rejections: dict
    dropped_groups: tuple[str, ...] = ()

    def __float__(self) -> float:
        return self.normalized


def wrs(frame: CausalFrame, weights: dict | None = None) -> WrsResult:
    """Weighted rejection score over all protected-group pairs.

    Each pair gets one two-sample t-test; rejections are counted at each
    confidence level independently (a strong rejection therefore counts at
    every level), weighted, summed, and normalized by the maximum attainable
    sum so the value lands in [0, 1]."""
    weights = dict(DEFAULT_WRS_WEIGHTS if weights is None else weights)
    groups: dict[str, list[float]] = {}
    for z, o in zip(frame.protected, frame.outcome):
        groups.setdefault(z, []).append(o)
    kept: dict[str, np.ndarray] = {}
    dropped: list[str] = []
    for z in sorted(groups):
        if len(groups[z]) < 2:
            dropped.append(z)
            warnings.warn(
                f"protected group {z!r} has <2 outcomes; dropped from WRS",
                stacklevel=2,
            )
        else:
            kept[z] = np.asarray(groups[z])
    if len(kept) < 2:
        raise GroupTooSmall(
            f"need >= 2 protected groups with >= 2 outcomes, have {len(kept)}"
        )
    names = sorted(kept)
    rejections = {lvl: 0 for lvl in weights}
    n_pairs = 0
    for za, zb in combinations(names, 2):
        res = t_test_two_sample(kept[za], kept[zb])
        n_pairs += 1
        for lvl in weights:
            if res.reject[lvl]:
                rejections[lvl] += 1
    raw = sum(weights[lvl] * rejections[lvl] for lvl in weights)
    max_raw = sum(weights.values()) * n_pairs
    return WrsResult(
        normalized=raw / max_raw if max_raw > 0 else 0.0,
        raw=raw,
        n_pairs=n_pairs,
        rejections=rejections,
        dropped_groups=tuple(dropped),
    )


@dataclass(frozen=True)
class AteResult:
    value: float
    reference: str
    effects: dict
    dropped_cells: tuple[tuple[str, str], ...] = ()

    def __float__(self) -> float:
        return self.value


def ate(frame: CausalFrame, reference: str | None = None) -> AteResult:
    """Average treatment effect by standardization: stratum means weighted by
    the marginal protected distribution, compared pairwise against the
    reference treatment; strata missing on either side of a comparison drop
    out with the weights renormalized."""
    levels = frame.treatment_levels()
    if reference is None:
        reference = levels[0]
    if reference not in levels:
        raise MissingReference(f"reference treatment {reference!r} not in frame")
    z_levels = frame.protected_levels()
    t_arr = np.asarray(frame.treatment)
    z_arr = np.asarray(frame.protected)
    o = frame.outcome
    p_z = {z: float(np.mean(z_arr == z)) for z in z_levels}
    cell_mean: dict[tuple[str, str], float] = {}
    for t in levels:
        for z in z_levels:
            sel = (t_arr == t) & (z_arr == z)
            if sel.any():
                cell_mean[(t, z)] = float(o[sel].mean())
    effects: dict[str, float] = {}
    dropped: list[tuple[str, str]] = []
    for t in levels:
        if t == reference:
            continue
        common = [
            z for z in z_levels if (t, z) in cell_mean and (reference, z) in cell_mean
        ]
        missing = [
            z
            for z in z_levels
            if ((t, z) in cell_mean) != ((reference, z) in cell_mean)
        ]
        for z in missing:
            dropped.append((t, z))
            warnings.warn(
                f"stratum {z!r} empty for one of ({t!r}, {reference!r}); dropped",
                stacklevel=2,
            )
        if not common:
            continue
        mass = sum(p_z[z] for z in common)
        e_t = sum(cell_mean[(t, z)] * p_z[z] for z in common) / mass
        e_ref = sum(cell_mean[(reference, z)] * p_z[z] for z in common) / mass
        effects[t] = abs(e_t - e_ref)
    if not effects:
        raise AllCellsEmpty(
            "no treatment shares a populated stratum with the reference"
        )
    value = float(np.mean(list(effects.values())))
    return AteResult(
        value=value,
        reference=reference,
        effects=effects,
        dropped_cells=tuple(dropped),
    )


def baselines(
    frame: CausalFrame, seed: int, reference: str | None = None
) -> dict[str, dict[str, float | None]]:
    """Recompute both metrics on a random permutation of outcomes and on a
    copy with one protected group's outcomes inflated by 3 standard
    deviations. Returns {"random": {...}, "biased": {...}}."""
    rng = np.random.default_rng(seed)
    permuted = frame.with_outcome(rng.permutation(frame.outcome))
    target = frame.protected_levels()[0]
    bump = 3.0 * float(frame.outcome.std())
    biased_outcome = frame.outcome.copy()
    biased_outcome[np.asarray(frame.protected) == target] += bump
    biased = frame.with_outcome(biased_outcome)

    def _metrics(f: CausalFrame) -> dict[str, float | None]:
        out: dict[str, float | None] = {"wrs": None, "ate": None}
        try:
            out["wrs"] = wrs(f).normalized
        except GroupTooSmall:
            pass
        if len(f.treatment_levels()) >= 2:
            try:
                out["ate"] = ate(f, reference).value
            except (AllCellsEmpty, MissingReference):
                pass
        return out

    return {"random": _metrics(permuted), "biased": _metrics(biased)}


@dataclass(frozen=True)
class RatingRow:
    model: str
    value: float
    rating: int


def rate(models: dict[str, float]) -> list[RatingRow]:
    """Dense ascending ranks after rounding to 2 decimals; equal rounded
    values share a rating."""
    if not models:
        raise MissingReference("need at least one model to rate")
    rounded = {m: round(v, 2) for m, v in models.items()}
    distinct = sorted(set(rounded.values()))
    rank_of = {v: i + 1 for i, v in enumerate(distinct)}
    rows = [RatingRow(model=m, value=models[m], rating=rank_of[rounded[m]])
            for m in models]
    return sorted(rows, key=lambda r: (r.rating, r.model))


@dataclass(frozen=True)
class RatingReport:
    hypothesis: str
    metric: str
    treatment_key: str
    protected_key: str
    rows: tuple[dict, ...]
    narrative: str
    detail: dict = field(default_factory=dict)


HYPOTHESES = {
    "h1": (
        "ate",
        "The model exhibits different levels of error depending on which "
        "series it forecasts.",
    ),
    "h2": (
        "wrs",
        "The model exhibits systematically different errors depending on "
        "the {protected} group of the timestamp.",
    ),
}


def run_hypothesis(
    records_by_model: dict[str, list[ForecastRecord]],
    hypothesis: str,
    protected_key: str = "month",
    treatment_key: str = "series_id",
    seed: int = 0,
    reference: str | None = None,
) -> RatingReport:
    """Evaluate one hypothesis across models: build a frame per model,
    compute the metric with baselines, and rate models against each other."""
    if hypothesis not in HYPOTHESES:
        raise UnresolvableProtectedKey(
            f"unknown hypothesis {hypothesis!r}; expected h1 or h2"
        )
    metric, template = HYPOTHESES[hypothesis]
    series_ids = {
        rec.series_id for recs in records_by_model.values() for rec in recs
    }
    if len(series_ids) < 2:
        raise SingleSeriesDataset(SINGLE_SERIES_RATIONALE)
    values: dict[str, float] = {}
    raws: dict[str, float] = {}
    base: dict[str, dict] = {}
    for model in sorted(records_by_model):
        frame = build_frame(
            records_by_model[model], treatment_key, protected_key
        )
        if metric == "wrs":
            res = wrs(frame)
            values[model] = res.normalized
            raws[model] = res.raw
        else:
            res_a = ate(frame, reference)
            values[model] = res_a.value
            raws[model] = res_a.value
        base[model] = baselines(frame, seed, reference)
    rating_rows = rate(values)
    narrative = template.format(protected=protected_key)
    rows = tuple(
        {
            "model": r.model,
            "metric": metric,
            "value": r.value,
            "raw_value": raws[r.model],
            "rating": r.rating,
            "baseline_random": base[r.model]["random"][metric],
            "baseline_biased": base[r.model]["biased"][metric],
        }
        for r in rating_rows
    )
    return RatingReport(
        hypothesis=hypothesis,
        metric=metric,
        treatment_key=treatment_key,
        protected_key=protected_key,
        rows=rows,
        narrative=narrative,
        detail={"n_models": len(values), "seed": seed},
    )
