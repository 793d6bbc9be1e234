"""ARDL(p1, p2, p3, p4) estimation with long-run and dynamic multipliers.

The model regresses f(y_t) on a constant, p1 own lags and lags 0..p2, 0..p3,
0..p4 of the Eco, Adv and Art series, all passed through the same transform f.
"""

from __future__ import annotations

import dataclasses
import enum
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import linalg, stats

from .series import SeriesBundle

REGRESSORS = ("eco", "adv", "art")
CONDITION_WARN = 1e8
UNIT_ROOT_TOL = 1e-10


class ArdlError(Exception):
    """Base class for estimation errors."""


class DimensionError(ArdlError):
    pass


class SingularDesignError(ArdlError):
    def __init__(self, column: str, index: int):
        super().__init__(f"design matrix is rank deficient at column {index} ({column})")
        self.column = column
        self.index = index


class UnitRootError(ArdlError):
    pass


class IllConditionedWarning(RuntimeWarning):
    pass


class Transform(str, enum.Enum):
    LOG_PLUS_ONE = "log1p"
    IDENTITY = "identity"

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self is Transform.LOG_PLUS_ONE:
            return np.log1p(x)
        return x


class Target(str, enum.Enum):
    MAL_FREQ = "freq"
    MAL_SHARE = "share"

    @property
    def series_name(self) -> str:
        return "mal_freq" if self is Target.MAL_FREQ else "mal_share"

    @property
    def default_transform(self) -> Transform:
        return Transform.LOG_PLUS_ONE if self is Target.MAL_FREQ else Transform.IDENTITY


@dataclass(frozen=True)
class ArdlOrders:
    p1: int
    p2: int
    p3: int
    p4: int

    def __post_init__(self):
        for name in ("p1", "p2", "p3", "p4"):
            value = getattr(self, name)
            if int(value) != value or value < 0:
                raise ValueError(f"{name} must be a non-negative integer, got {value!r}")
            object.__setattr__(self, name, int(value))

    @classmethod
    def uniform(cls, p: int) -> "ArdlOrders":
        return cls(p, p, p, p)

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.p1, self.p2, self.p3, self.p4)

    def __iter__(self):
        return iter(self.as_tuple())

    def __str__(self) -> str:
        return "(" + ", ".join(str(p) for p in self.as_tuple()) + ")"

    @property
    def maxlag(self) -> int:
        return max(self.as_tuple())

    @property
    def n_params(self) -> int:
        return 1 + self.p1 + (self.p2 + 1) + (self.p3 + 1) + (self.p4 + 1)

    def regressor_order(self, regressor: str) -> int:
        return {"eco": self.p2, "adv": self.p3, "art": self.p4}[regressor]

    def replace(self, **changes) -> "ArdlOrders":
        values = dict(zip(("p1", "p2", "p3", "p4"), self.as_tuple()))
        values.update(changes)
        return ArdlOrders(**values)


def coef_names(orders: ArdlOrders) -> list[str]:
    names = ["const"] + [f"y.L{j}" for j in range(1, orders.p1 + 1)]
    for reg in REGRESSORS:
        names += [f"{reg}.L{j}" for j in range(orders.regressor_order(reg) + 1)]
    return names


def coef_slices(orders: ArdlOrders) -> dict[str, slice]:
    out = {"const": slice(0, 1), "y": slice(1, 1 + orders.p1)}
    start = 1 + orders.p1
    for reg in REGRESSORS:
        width = orders.regressor_order(reg) + 1
        out[reg] = slice(start, start + width)
        start += width
    return out


def design_from_arrays(
    y: Sequence[float],
    eco: Sequence[float],
    adv: Sequence[float],
    art: Sequence[float],
    orders: ArdlOrders,
    transform: Transform | str = Transform.IDENTITY,
) -> tuple[np.ndarray, np.ndarray]:
    """Lagged design for raw (untransformed) series of equal length T."""
    transform = Transform(transform)
    fy, fe, fa, fr = (transform(s) for s in (y, eco, adv, art))
    T = len(fy)
    if not (len(fe) == len(fa) == len(fr) == T):
        raise DimensionError("response and regressors differ in length")
    m = orders.maxlag
    n_rows = T - m
    # The design itself only needs one usable row; fit_ols enforces dof > 0.
    if n_rows < 1:
        raise DimensionError(f"T = {T} too short for orders {orders}: no usable rows")
    for arr in (fy, fe, fa, fr):
        if not np.all(np.isfinite(arr)):
            raise ValueError("series contain non-finite values after transform")

    columns = [np.ones(n_rows)]
    columns += [fy[m - j : T - j] for j in range(1, orders.p1 + 1)]
    for series, p in ((fe, orders.p2), (fa, orders.p3), (fr, orders.p4)):
        columns += [series[m - j : T - j] for j in range(p + 1)]
    return fy[m:].copy(), np.column_stack(columns)


@dataclass
class ModelData:
    """Untransformed response and regressor series of one model."""

    y: np.ndarray
    eco: np.ndarray
    adv: np.ndarray
    art: np.ndarray
    target: Target | None = None

    def __post_init__(self):
        for name in ("y", "eco", "adv", "art"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=float))
        if not (len(self.y) == len(self.eco) == len(self.adv) == len(self.art)):
            raise DimensionError("response and regressors differ in length")

    @classmethod
    def from_bundle(cls, bundle: SeriesBundle, target: Target | str) -> "ModelData":
        target = Target(target)
        return cls(bundle.series(target.series_name), bundle.eco, bundle.adv, bundle.art, target)

    def __len__(self) -> int:
        return len(self.y)


def as_model_data(data: SeriesBundle | ModelData, target: Target | str | None = None) -> ModelData:
    if isinstance(data, ModelData):
        if target is not None and data.target is None:
            return dataclasses.replace(data, target=Target(target))
        return data
    if target is None:
        raise ValueError("a target is required when passing a SeriesBundle")
    return ModelData.from_bundle(data, target)


def _resolve_transform(data: ModelData, transform) -> Transform:
    if transform is not None:
        return Transform(transform)
    return data.target.default_transform if data.target is not None else Transform.IDENTITY


def build_design(
    bundle: SeriesBundle | ModelData,
    target: Target | str | None,
    orders: ArdlOrders,
    transform: Transform | str | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Response vector and lagged design matrix for one model.

    ``transform`` defaults to log(x + 1) for MalFreq and identity for MalShare
    and is applied to the response and all regressors alike.
    """
    data = as_model_data(bundle, target)
    transform = _resolve_transform(data, transform)
    return design_from_arrays(data.y, data.eco, data.adv, data.art, orders, transform)


@dataclass
class ArdlFit:
    params: np.ndarray
    coef_covariance: np.ndarray
    residuals: np.ndarray
    fitted: np.ndarray
    r_squared: float
    sigma2: float
    dof: int
    orders: ArdlOrders | None = None
    transform: Transform = Transform.IDENTITY
    target: Target | None = None
    names: list[str] = field(default_factory=list)
    cov_type: str = "classical"
    condition_number: float = float("nan")
    response: np.ndarray | None = None

    def __post_init__(self):
        self.params = np.asarray(self.params, dtype=float)
        if not self.names:
            self.names = coef_names(self.orders) if self.orders else [f"x{i}" for i in range(len(self.params))]

    @classmethod
    def from_coefficients(
        cls,
        alpha: float = 0.0,
        beta: Sequence[float] = (),
        gamma: Sequence[float] = (0.0,),
        phi: Sequence[float] = (0.0,),
        rho: Sequence[float] = (0.0,),
        coef_covariance: np.ndarray | None = None,
        dof: int = 1_000_000,
    ) -> "ArdlFit":
        """Build a fit from known coefficients, e.g. for multiplier arithmetic."""
        orders = ArdlOrders(len(beta), len(gamma) - 1, len(phi) - 1, len(rho) - 1)
        params = np.concatenate(([alpha], beta, gamma, phi, rho)).astype(float)
        k = len(params)
        cov = np.zeros((k, k)) if coef_covariance is None else np.asarray(coef_covariance, float)
        return cls(params, cov, np.zeros(0), np.zeros(0), float("nan"), float("nan"), dof, orders)

    def _block(self, key: str) -> np.ndarray:
        if self.orders is None:
            raise ArdlError("fit has no ARDL orders attached")
        return self.params[coef_slices(self.orders)[key]]

    @property
    def alpha(self) -> float:
        return float(self.params[0])

    @property
    def beta(self) -> np.ndarray:
        return self._block("y")

    @property
    def gamma(self) -> np.ndarray:
        return self._block("eco")

    @property
    def phi(self) -> np.ndarray:
        return self._block("adv")

    @property
    def rho(self) -> np.ndarray:
        return self._block("art")

    def regressor_coefs(self, regressor: str) -> np.ndarray:
        return self._block(regressor)

    @property
    def std_errors(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.coef_covariance), 0.0, None))

    @property
    def t_values(self) -> np.ndarray:
        se = self.std_errors
        with np.errstate(divide="ignore", invalid="ignore"):
            t = self.params / se
        # Zero standard error (exact fits): infinite unless the coefficient is zero too.
        return np.where(se > 0, t, np.where(self.params == 0, 0.0, np.sign(self.params) * np.inf))

    @property
    def nobs(self) -> int:
        return len(self.residuals)

    @property
    def observed(self) -> np.ndarray:
        """Transformed response aligned with ``fitted`` and ``residuals``."""
        if self.response is not None:
            return self.response
        return self.fitted + self.residuals

    def critical_value(self, level: float = 0.95) -> float:
        return float(stats.t.ppf(0.5 + level / 2.0, self.dof))

    def top_lag_tvalues(self) -> dict[str, float]:
        """t-statistics of the highest-lag coefficient of each regressor."""
        t = self.t_values
        sl = coef_slices(self.orders)
        return {reg: float(t[sl[reg].stop - 1]) for reg in REGRESSORS}

    def to_dict(self) -> dict:
        return {
            "target": self.target.value if self.target else None,
            "transform": self.transform.value,
            "orders": list(self.orders.as_tuple()) if self.orders else None,
            "coefficients": [
                {"name": n, "value": float(v), "std_error": float(s)}
                for n, v, s in zip(self.names, self.params, self.std_errors)
            ],
            "r_squared": float(self.r_squared),
            "sigma2": float(self.sigma2),
            "dof": int(self.dof),
            "nobs": int(self.nobs),
            "cov_type": self.cov_type,
        }


def _first_dependent_column(R: np.ndarray, X: np.ndarray, rtol: float) -> int | None:
    norms = np.linalg.norm(X, axis=0)
    diag = np.abs(np.diag(R))
    for j, (d, nrm) in enumerate(zip(diag, norms)):
        if nrm == 0.0 or d <= rtol * nrm:
            return j
    return None


def fit_ols(
    response: Sequence[float],
    design: np.ndarray,
    orders: ArdlOrders | None = None,
    transform: Transform | str = Transform.IDENTITY,
    target: Target | str | None = None,
    names: Sequence[str] | None = None,
    cov_type: str = "classical",
) -> ArdlFit:
    """Least squares through a thin QR decomposition.

    ``cov_type`` is ``"classical"`` (sigma2 * (X'X)^-1) or ``"HC1"``
    (White heteroskedasticity-robust with n/(n-k) scaling).

    Raises
    ------
    SingularDesignError
        When a column is numerically a combination of the preceding ones.
    DimensionError
        When there are no residual degrees of freedom.
    """
    y = np.asarray(response, dtype=float)
    X = np.asarray(design, dtype=float)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise DimensionError(f"design shape {X.shape} does not match response length {y.shape[0]}")
    n, k = X.shape
    dof = n - k
    if dof <= 0:
        raise DimensionError(f"{n} observations for {k} parameters leaves no degrees of freedom")
    if names is None:
        names = coef_names(orders) if orders is not None else [f"x{i}" for i in range(k)]
    names = list(names)

    Q, R = np.linalg.qr(X, mode="reduced")
    bad = _first_dependent_column(R, X, rtol=1e-10 * max(n, k))
    if bad is not None:
        raise SingularDesignError(names[bad], bad)
    cond = float(np.linalg.cond(R))
    if cond > CONDITION_WARN:
        warnings.warn(f"design condition number {cond:.3g} exceeds {CONDITION_WARN:.0e}",
                      IllConditionedWarning, stacklevel=2)

    params = linalg.solve_triangular(R, Q.T @ y)
    fitted = X @ params
    residuals = y - fitted
    rss = float(residuals @ residuals)
    centered = y - y.mean()
    tss = float(centered @ centered)
    if tss > 0:
        r2 = min(max(1.0 - rss / tss, 0.0), 1.0)
    else:
        r2 = 1.0
    sigma2 = rss / dof

    R_inv = linalg.solve_triangular(R, np.eye(k))
    xtx_inv = R_inv @ R_inv.T
    if cov_type == "classical":
        cov = sigma2 * xtx_inv
    elif cov_type.upper() == "HC1":
        meat = (X * residuals[:, None] ** 2).T @ X
        cov = xtx_inv @ meat @ xtx_inv * (n / dof)
        cov_type = "HC1"
    else:
        raise ValueError(f"unknown cov_type {cov_type!r}")
    cov = 0.5 * (cov + cov.T)

    return ArdlFit(
        params=params,
        coef_covariance=cov,
        residuals=residuals,
        fitted=fitted,
        r_squared=r2,
        sigma2=sigma2,
        dof=dof,
        orders=orders,
        transform=Transform(transform),
        target=Target(target) if target is not None else None,
        names=names,
        cov_type=cov_type,
        condition_number=cond,
        response=y,
    )


def fit_ardl(
    data: SeriesBundle | ModelData,
    target: Target | str | None,
    orders: ArdlOrders,
    transform: Transform | str | None = None,
    cov_type: str = "classical",
) -> ArdlFit:
    data = as_model_data(data, target)
    transform = _resolve_transform(data, transform)
    y, X = design_from_arrays(data.y, data.eco, data.adv, data.art, orders, transform)
    return fit_ols(y, X, orders=orders, transform=transform, target=data.target, cov_type=cov_type)


@dataclass(frozen=True)
class MultiplierResult:
    regressor: str
    value: float
    std_error: float
    significant_95: bool
    t_value: float = float("nan")
    critical_value: float = float("nan")


def lrm_value(beta: Sequence[float], coefs: Sequence[float]) -> float:
    denom = 1.0 - float(np.sum(beta))
    if abs(denom) < UNIT_ROOT_TOL:
        raise UnitRootError(f"1 - sum(beta) = {denom:.3g}; long-run multiplier undefined")
    return float(np.sum(coefs)) / denom


def long_run_multiplier(fit: ArdlFit, regressor: str, level: float = 0.95) -> MultiplierResult:
    """Long-run multiplier of one regressor with a delta-method standard error."""
    if regressor not in REGRESSORS:
        raise ValueError(f"regressor must be one of {REGRESSORS}, got {regressor!r}")
    beta = fit.beta
    coefs = fit.regressor_coefs(regressor)
    value = lrm_value(beta, coefs)
    denom = 1.0 - float(np.sum(beta))

    sl = coef_slices(fit.orders)
    grad = np.zeros(len(fit.params))
    grad[sl["y"]] = value / denom
    grad[sl[regressor]] = 1.0 / denom
    var = float(grad @ fit.coef_covariance @ grad)
    se = float(np.sqrt(max(var, 0.0)))

    crit = fit.critical_value(level)
    if se > 0:
        t_value = value / se
    else:
        t_value = float("inf") if value != 0 else 0.0
    return MultiplierResult(regressor, value, se, bool(abs(t_value) > crit), t_value, crit)


def dm_path(beta: Sequence[float], coefs: Sequence[float], horizon: int) -> np.ndarray:
    """Impulse response of y to a one-period unit impulse in a regressor."""
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    beta = np.asarray(beta, dtype=float)
    coefs = np.asarray(coefs, dtype=float)
    p1 = len(beta)
    out = np.zeros(horizon + 1)
    for i in range(horizon + 1):
        value = coefs[i] if i < len(coefs) else 0.0
        for j in range(1, min(i, p1) + 1):
            value += beta[j - 1] * out[i - j]
        out[i] = value
    return out


def dynamic_multipliers(fit: ArdlFit, regressor: str, horizon: int) -> np.ndarray:
    if regressor not in REGRESSORS:
        raise ValueError(f"regressor must be one of {REGRESSORS}, got {regressor!r}")
    return dm_path(fit.beta, fit.regressor_coefs(regressor), horizon)
