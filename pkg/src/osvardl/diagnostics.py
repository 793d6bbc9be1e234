"""Residual and series diagnostics: ACF, Ljung-Box, ADF, Jarque-Bera, QQ data."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats

from . import _mackinnon
from .ardl import ArdlFit, Target, Transform


class DegenerateInputError(ValueError):
    pass


class UsageError(ValueError):
    pass


# Acklam's rational approximation to the inverse normal CDF.
_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
      1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
      6.680131188771972e01, -1.328068155288572e01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
      -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
      3.754408661907416e00)
_P_LOW = 0.02425


def norm_cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def norm_ppf(p: float) -> float:
    """Inverse standard normal CDF.

    Acklam's approximation (relative error about 1e-9) followed by one Halley
    step against ``erfc``, which brings the error to near machine precision.
    """
    if not 0.0 < p < 1.0:
        if p == 0.0:
            return -math.inf
        if p == 1.0:
            return math.inf
        raise ValueError(f"probability must lie in [0, 1], got {p}")
    if p < _P_LOW:
        q = math.sqrt(-2.0 * math.log(p))
        x = (((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]) / \
            ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0)
    elif p <= 1.0 - _P_LOW:
        q = p - 0.5
        r = q * q
        x = (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q / \
            (((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0)
    else:
        q = math.sqrt(-2.0 * math.log1p(-p))
        x = -(((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]) / \
            ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0)

    # Tail residual via erfc keeps relative accuracy for small p.
    if x < 0:
        e = 0.5 * math.erfc(-x / math.sqrt(2.0)) - p
    else:
        e = (1.0 - p) - 0.5 * math.erfc(x / math.sqrt(2.0))
    u = e * math.sqrt(2.0 * math.pi) * math.exp(x * x / 2.0)
    return x - u / (1.0 + x * u / 2.0)


def two_sided_z(confidence: float) -> float:
    return norm_ppf(0.5 + confidence / 2.0)


def default_max_lag(n: int) -> int:
    return int(math.floor(10.0 * math.log10(n)))


@dataclass
class AcfResult:
    values: np.ndarray
    band: float
    max_lag: int
    n: int
    confidence: float = 0.95

    @property
    def lags(self) -> np.ndarray:
        return np.arange(1, self.max_lag + 1)

    @property
    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values))) if len(self.values) else 0.0

    @property
    def exceeds_band(self) -> bool:
        return bool(np.any(np.abs(self.values) > self.band))


def acf(series: Sequence[float], max_lag: int | None = None, confidence: float = 0.95) -> AcfResult:
    """Sample autocorrelations at lags 1..max_lag with the full-sample denominator.

    ``max_lag`` defaults to floor(10 * log10(n)), capped at n - 1.
    """
    x = np.asarray(series, dtype=float)
    n = len(x)
    if n < 2:
        raise DegenerateInputError("ACF needs at least two observations")
    if max_lag is None:
        max_lag = min(default_max_lag(n), n - 1)
    if max_lag < 1 or max_lag > n - 1:
        raise ValueError(f"max_lag must be in 1..{n - 1}, got {max_lag}")
    d = x - x.mean()
    denom = float(d @ d)
    if denom <= 0.0 or denom <= 1e-28 * n * max(1.0, float(np.max(np.abs(x))) ** 2):
        raise DegenerateInputError("series has zero variance")
    values = np.array([float(d[:-lag] @ d[lag:]) / denom for lag in range(1, max_lag + 1)])
    return AcfResult(values, two_sided_z(confidence) / math.sqrt(n), max_lag, n, confidence)


@dataclass
class TestResult:
    name: str
    statistic: float
    p_value: float
    reject_at_95: bool
    critical_values: dict[str, float] = field(default_factory=dict)
    lags: int | None = None
    nobs: int | None = None

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "statistic": float(self.statistic),
            "p_value": float(self.p_value),
            "reject_at_95": bool(self.reject_at_95),
            "critical_values": {k: float(v) for k, v in self.critical_values.items()},
            "lags": self.lags,
            "nobs": self.nobs,
        }


# Keep pytest from collecting the result container as a test class.
TestResult.__test__ = False


def ljung_box(series: Sequence[float], lags: int | None = None) -> TestResult:
    """Ljung-Box portmanteau test at a single lag (chi-squared with ``lags`` dof)."""
    x = np.asarray(series, dtype=float)
    n = len(x)
    if lags is None:
        lags = min(default_max_lag(n), n - 1)
    r = acf(x, lags).values
    q = n * (n + 2) * float(np.sum(r**2 / (n - np.arange(1, lags + 1))))
    p = float(stats.chi2.sf(q, lags))
    return TestResult("ljung_box", q, p, p < 0.05, lags=lags, nobs=n)


def adf_critical_values(nobs: int, regression: str = "c") -> dict[str, float]:
    surface = _mackinnon.CRITICAL_SURFACE[regression]
    out = {}
    for level, (b0, b1, b2, b3) in surface.items():
        out[f"{int(round(level * 100))}%"] = b0 + b1 / nobs + b2 / nobs**2 + b3 / nobs**3
    return out


def adf_pvalue(statistic: float, regression: str = "c") -> float:
    """Approximate p-value of a tau statistic from normal-CDF polynomial fits."""
    if statistic > _mackinnon.TAU_MAX[regression]:
        return 1.0
    if statistic < _mackinnon.TAU_MIN[regression]:
        return 0.0
    if statistic <= _mackinnon.TAU_STAR[regression]:
        coefs = _mackinnon.TAU_SMALLP[regression]
    else:
        coefs = _mackinnon.TAU_LARGEP[regression]
    z = sum(c * statistic**i for i, c in enumerate(coefs))
    return norm_cdf(z)


def _adf_design(x: np.ndarray, lags: int, regression: str, trim: int):
    """Response and regressors for the ADF regression using ``trim`` leading rows."""
    dx = np.diff(x)
    rows = slice(trim, len(dx))
    y = dx[rows]
    cols = [x[:-1][rows]]
    m = len(y)
    if regression in ("c", "ct"):
        cols.append(np.ones(m))
    if regression == "ct":
        cols.append(np.arange(trim + 1, trim + 1 + m, dtype=float))
    for j in range(1, lags + 1):
        cols.append(dx[trim - j : len(dx) - j])
    return y, np.column_stack(cols)


def _ols_tstat_and_llf(y: np.ndarray, X: np.ndarray) -> tuple[float, float]:
    Q, R = np.linalg.qr(X, mode="reduced")
    params = np.linalg.solve(R, Q.T @ y)
    resid = y - X @ params
    n, k = X.shape
    ssr = float(resid @ resid)
    sigma2 = ssr / (n - k)
    R_inv = np.linalg.solve(R, np.eye(k))
    se0 = math.sqrt(sigma2 * float(R_inv[0] @ R_inv[0]))
    llf = -n / 2.0 * (math.log(2.0 * math.pi) + math.log(ssr / n) + 1.0)
    return params[0] / se0, llf


def adf_test(
    series: Sequence[float],
    max_lag: int | str = "auto",
    regression: str = "c",
    autolag: str | None = "AIC",
) -> TestResult:
    """Augmented Dickey-Fuller test of the unit-root null.

    The regression is dx_t = c + delta * x_{t-1} + sum_j theta_j dx_{t-j} + e_t
    (``regression="c"``); ``"n"`` drops the constant, ``"ct"`` adds a trend.
    With ``max_lag="auto"`` the upper bound is floor(12 * (n/100)**0.25). When
    ``autolag="AIC"`` the lag count is chosen on a common sample and the final
    regression is rerun on all usable rows; ``autolag=None`` uses ``max_lag``
    lags directly.
    """
    x = np.asarray(series, dtype=float)
    n = len(x)
    if n < 20:
        raise ValueError(f"ADF test needs at least 20 observations, got {n}")
    if regression not in _mackinnon.CRITICAL_SURFACE:
        raise ValueError(f"regression must be one of 'n', 'c', 'ct', got {regression!r}")
    n_det = {"n": 0, "c": 1, "ct": 2}[regression]
    if max_lag == "auto":
        max_lag = int(math.floor(12.0 * (n / 100.0) ** 0.25))
        max_lag = max(0, min(max_lag, n // 2 - n_det - 2))
    max_lag = int(max_lag)
    if max_lag < 0:
        raise ValueError("max_lag must be non-negative")
    if n - 1 - max_lag <= max_lag + n_det + 2:
        raise ValueError(f"series of length {n} too short for {max_lag} ADF lags")

    if autolag is None:
        lags = max_lag
    elif autolag.upper() == "AIC":
        best = None
        for p in range(max_lag + 1):
            y, X = _adf_design(x, p, regression, trim=max_lag)
            _, llf = _ols_tstat_and_llf(y, X)
            aic = -2.0 * llf + 2.0 * X.shape[1]
            if best is None or aic < best[0]:
                best = (aic, p)
        lags = best[1]
    else:
        raise ValueError(f"unsupported autolag {autolag!r}")

    y, X = _adf_design(x, lags, regression, trim=lags)
    stat, _ = _ols_tstat_and_llf(y, X)
    nobs = len(y)
    crit = adf_critical_values(nobs, regression)
    return TestResult("adf", float(stat), adf_pvalue(stat, regression), bool(stat < crit["5%"]),
                      crit, lags=lags, nobs=nobs)


def moments(series: Sequence[float]) -> tuple[float, float]:
    """Sample skewness and raw (non-excess) kurtosis from plain central moments."""
    x = np.asarray(series, dtype=float)
    d = x - x.mean()
    m2 = float(np.mean(d**2))
    if m2 <= 0.0:
        raise DegenerateInputError("series has zero variance")
    m3 = float(np.mean(d**3))
    m4 = float(np.mean(d**4))
    return m3 / m2**1.5, m4 / m2**2


def jarque_bera(series: Sequence[float]) -> TestResult:
    x = np.asarray(series, dtype=float)
    n = len(x)
    if n < 8:
        raise ValueError(f"Jarque-Bera test needs at least 8 observations, got {n}")
    skew, kurt = moments(x)
    jb = n / 6.0 * (skew**2 + (kurt - 3.0) ** 2 / 4.0)
    # chi-squared survival function with two degrees of freedom.
    p = math.exp(-jb / 2.0)
    return TestResult("jarque_bera", jb, p, p < 0.05, nobs=n)


def qq_points(series: Sequence[float]) -> np.ndarray:
    """Array of ``(theoretical, sample)`` pairs at plotting positions (i - 0.5)/n."""
    x = np.sort(np.asarray(series, dtype=float))
    n = len(x)
    if n < 2:
        raise ValueError("QQ data needs at least two observations")
    theo = np.array([norm_ppf((i - 0.5) / n) for i in range(1, n + 1)])
    return np.column_stack((theo, x))


def share_exceedance(fit: ArdlFit, limit: float = 100.0) -> float:
    """Percentage of fitted values above ``limit`` for a MalShare model."""
    if fit.target is not Target.MAL_SHARE or fit.transform is not Transform.IDENTITY:
        raise UsageError("share exceedance applies only to MalShare fits with identity transform")
    if len(fit.fitted) == 0:
        return 0.0
    return 100.0 * float(np.count_nonzero(fit.fitted > limit)) / len(fit.fitted)


@dataclass
class DiagnosticsReport:
    acf: AcfResult
    ljung_box: TestResult
    jarque_bera: TestResult
    qq: np.ndarray
    adf: TestResult | None = None
    exceedance: float | None = None

    def to_dict(self) -> dict:
        return {
            "acf_max_abs": self.acf.max_abs,
            "acf_band": self.acf.band,
            "acf_max_lag": self.acf.max_lag,
            "acf_within_band": not self.acf.exceeds_band,
            "ljung_box": self.ljung_box.to_dict(),
            "jarque_bera": self.jarque_bera.to_dict(),
            "adf_response": self.adf.to_dict() if self.adf else None,
            "share_exceedance_pct": self.exceedance,
        }


def diagnose(fit: ArdlFit, response: Sequence[float] | None = None) -> DiagnosticsReport:
    """Full battery on a fit's residuals; ADF runs on ``response`` when given."""
    resid = fit.residuals
    report = DiagnosticsReport(
        acf=acf(resid),
        ljung_box=ljung_box(resid),
        jarque_bera=jarque_bera(resid),
        qq=qq_points(resid),
    )
    if response is not None and len(response) >= 20:
        report.adf = adf_test(response)
    if fit.target is Target.MAL_SHARE and fit.transform is Transform.IDENTITY:
        report.exceedance = share_exceedance(fit)
    return report
