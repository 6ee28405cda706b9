"""Statistical kernels: ACF, unit-root tests, Welch t-test, robust scaling,
and weighted least squares.

The ADF and KPSS critical values are embedded from the standard published
tables (MacKinnon response-surface constants; KPSS level-stationarity table),
so the tests carry no runtime dependency beyond an OLS solve.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as sps

from .errors import ShapeMismatch, TooShort, ZeroVariance

SCALE_FLOOR = 1e-12


@dataclass(frozen=True)
class TestResult:
    """Outcome of a hypothesis test at a fixed set of levels.

    reject[level] is True when the statistic falls past the critical value in
    the direction the test treats as significant (below for ADF, above for
    KPSS and |t| tests).
    """

    statistic: float
    critical_values: dict[str, float]
    reject: dict[str, bool]
    detail: dict = field(default_factory=dict)


def acf(x, max_lag: int) -> np.ndarray:
    """Sample autocorrelation up to max_lag (biased estimator, so every
    value stays in [-1, 1])."""
    x = np.asarray(x, dtype=np.float64)
    n = x.size
    if n <= max_lag:
        raise TooShort(f"need more than max_lag={max_lag} points, got {n}")
    centered = x - x.mean()
    denom = float(np.dot(centered, centered))
    if denom <= 0.0:
        raise ZeroVariance("series is constant; ACF undefined")
    out = np.empty(max_lag + 1)
    out[0] = 1.0
    for k in range(1, max_lag + 1):
        out[k] = float(np.dot(centered[k:], centered[:-k])) / denom
    return out


def _ols(X: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray, float]:
    """OLS fit; returns (beta, se(beta), sigma2)."""
    beta, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ beta
    dof = max(X.shape[0] - X.shape[1], 1)
    sigma2 = float(resid @ resid) / dof
    xtx_inv = np.linalg.pinv(X.T @ X)
    se = np.sqrt(np.maximum(np.diag(xtx_inv) * sigma2, 0.0))
    return beta, se, sigma2


def schwert_lag(n: int) -> int:
    """Schwert's rule for the ADF augmentation order."""
    return int(math.floor(12.0 * (n / 100.0) ** 0.25))


# MacKinnon (2010) response-surface constants, constant-only regression.
_ADF_CRIT = {
    "1%": (-3.43035, -6.5393, -16.786, -79.433),
    "5%": (-2.86154, -2.8903, -4.234, -40.040),
    "10%": (-2.56677, -1.5384, -2.809, 0.0),
}

# KPSS level-stationarity asymptotic critical values.
_KPSS_CRIT = {"1%": 0.739, "5%": 0.463, "10%": 0.347}


def adf_test(x) -> TestResult:
    """Augmented Dickey-Fuller test with constant; rejecting the unit root
    (statistic below the critical value) is evidence of stationarity."""
    x = np.asarray(x, dtype=np.float64)
    n = x.size
    if n < 20:
        raise TooShort(f"ADF needs at least 20 points, got {n}")
    p = schwert_lag(n)
    dx = np.diff(x)
    # keep at least a handful of regression rows
    while n - 1 - p < p + 4 and p > 0:
        p -= 1
    rows = n - 1 - p
    y = dx[p:]
    cols = [np.ones(rows), x[p:-1]]
    for i in range(1, p + 1):
        cols.append(dx[p - i:-i])
    X = np.column_stack(cols)
    beta, se, _ = _ols(X, y)
    stat = float(beta[1] / se[1]) if se[1] > 0 else 0.0
    nobs = rows
    crit = {
        lvl: c[0] + c[1] / nobs + c[2] / nobs**2 + c[3] / nobs**3
        for lvl, c in _ADF_CRIT.items()
    }
    reject = {lvl: stat < cv for lvl, cv in crit.items()}
    return TestResult(stat, crit, reject, detail={"lags": p, "nobs": nobs})


def _newey_west_lags(e: np.ndarray) -> int:
    """Automatic bandwidth for the KPSS long-run variance."""
    n = e.size
    covlags = int(n ** (2.0 / 9.0))
    s0 = float(e @ e) / n
    s1 = 0.0
    for i in range(1, covlags + 1):
        gamma = float(e[i:] @ e[:-i]) / n
        s0 += 2.0 * gamma
        s1 += 2.0 * i * gamma
    if s0 <= 0:
        return 0
    gamma_hat = 1.1447 * abs(s1 / s0) ** (2.0 / 3.0)
    return min(int(gamma_hat * n ** (1.0 / 3.0)), n - 1)


def kpss_test(x) -> TestResult:
    """KPSS level-stationarity test; rejecting (statistic above the critical
    value) is evidence of non-stationarity."""
    x = np.asarray(x, dtype=np.float64)
    n = x.size
    if n < 20:
        raise TooShort(f"KPSS needs at least 20 points, got {n}")
    e = x - x.mean()
    lags = _newey_west_lags(e)
    lrvar = float(e @ e) / n
    for j in range(1, lags + 1):
        w = 1.0 - j / (lags + 1.0)
        lrvar += 2.0 * w * float(e[j:] @ e[:-j]) / n
    s = np.cumsum(e)
    if lrvar <= 0:
        stat = 0.0
    else:
        stat = float(s @ s) / (n * n * lrvar)
    reject = {lvl: stat > cv for lvl, cv in _KPSS_CRIT.items()}
    return TestResult(stat, dict(_KPSS_CRIT), reject, detail={"lags": lags})


T_TEST_LEVELS = ("95%", "75%", "60%")


def t_test_two_sample(a, b) -> TestResult:
    """Welch two-sample t-test with two-sided critical values at the 95%,
    75%, and 60% confidence levels."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.size < 2 or b.size < 2:
        raise TooShort("each sample needs at least 2 observations")
    na, nb = a.size, b.size
    va, vb = float(a.var(ddof=1)), float(b.var(ddof=1))
    denom2 = va / na + vb / nb
    if denom2 <= 0.0:
        # both samples constant: no information, define statistic 0
        stat = 0.0 if a.mean() == b.mean() else math.copysign(math.inf, a.mean() - b.mean())
        df = float(na + nb - 2)
    else:
        stat = float((a.mean() - b.mean()) / math.sqrt(denom2))
        df = denom2**2 / (
            (va / na) ** 2 / (na - 1) + (vb / nb) ** 2 / (nb - 1)
        )
    crit = {
        lvl: float(sps.t.ppf(1.0 - (1.0 - float(lvl[:-1]) / 100.0) / 2.0, df))
        for lvl in T_TEST_LEVELS
    }
    reject = {lvl: abs(stat) > cv for lvl, cv in crit.items()}
    return TestResult(stat, crit, reject, detail={"df": df})


# --- robust scaling ---------------------------------------------------------

@dataclass(frozen=True)
class RobustScalerParams:
    """Median/IQR scaling constants; scale is floored so a constant series
    never divides by zero."""

    center: float
    scale: float

    def transform(self, x):
        return (np.asarray(x, dtype=np.float64) - self.center) / self.scale

    def inverse(self, u):
        return np.asarray(u, dtype=np.float64) * self.scale + self.center


def fit_robust_scaler(x) -> RobustScalerParams:
    x = np.asarray(x, dtype=np.float64)
    center = float(np.median(x))
    q75, q25 = np.percentile(x, [75.0, 25.0])
    scale = max(float(q75 - q25), SCALE_FLOOR)
    return RobustScalerParams(center=center, scale=scale)


class RobustScaler:
    """fit/transform/inverse_transform wrapper around RobustScalerParams."""

    def __init__(self):
        self.params_: RobustScalerParams | None = None

    def fit(self, x):
        self.params_ = fit_robust_scaler(x)
        return self

    def transform(self, x):
        return self.params_.transform(x)

    def fit_transform(self, x):
        return self.fit(x).transform(x)

    def inverse_transform(self, u):
        return self.params_.inverse(u)


# --- weighted least squares -------------------------------------------------

def wls_fit(X, y, w, ridge: float = 1e-8) -> np.ndarray:
    """Minimize sum(w_i * (y_i - X_i beta)^2) via normal equations, adding a
    ridge jitter on singular designs."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != y.size or y.size != w.size:
        raise ShapeMismatch(
            f"X {X.shape}, y {y.shape}, w {w.shape} do not line up"
        )
    if np.any(w < 0):
        raise ShapeMismatch("weights must be non-negative")
    Xw = X * w[:, None]
    A = X.T @ Xw
    b = Xw.T @ y
    try:
        beta = np.linalg.solve(A, b)
        if not np.all(np.isfinite(beta)):
            raise np.linalg.LinAlgError
        # reject solutions the solver produced from a numerically singular A
        if np.linalg.cond(A) > 1e12:
            raise np.linalg.LinAlgError
    except np.linalg.LinAlgError:
        beta = np.linalg.solve(A + ridge * np.eye(A.shape[0]), b)
    return beta


def weighted_r2(y, y_hat, w) -> float:
    """Weighted coefficient of determination; 0 when y has no weighted
    variance."""
    y = np.asarray(y, dtype=np.float64)
    y_hat = np.asarray(y_hat, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    wsum = w.sum()
    if wsum <= 0:
        return 0.0
    ybar = float((w * y).sum() / wsum)
    ss_tot = float((w * (y - ybar) ** 2).sum())
    if ss_tot <= 0:
        return 0.0
    ss_res = float((w * (y - y_hat) ** 2).sum())
    return 1.0 - ss_res / ss_tot
