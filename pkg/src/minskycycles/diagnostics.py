"""Unit-root and residual autocorrelation tests.

Critical values come from embedded tables rather than numerical CDFs:
the Dickey-Fuller test without deterministic terms, and chi-square upper
quantiles for 1 to 24 degrees of freedom, both rounded to two decimals as
in printed tables.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .model import MsVarModel, SeriesPair

DF_NO_CONSTANT = {0.01: -2.58, 0.05: -1.94, 0.10: -1.62}

CHI2_UPPER = {
    0.10: (2.71, 4.61, 6.25, 7.78, 9.24, 10.64, 12.02, 13.36, 14.68, 15.99, 17.28,
           18.55, 19.81, 21.06, 22.31, 23.54, 24.77, 25.99, 27.20, 28.41, 29.62,
           30.81, 32.01, 33.20),
    0.05: (3.84, 5.99, 7.81, 9.49, 11.07, 12.59, 14.07, 15.51, 16.92, 18.31, 19.68,
           21.03, 22.36, 23.68, 25.00, 26.30, 27.59, 28.87, 30.14, 31.41, 32.67,
           33.92, 35.17, 36.42),
    0.01: (6.63, 9.21, 11.34, 13.28, 15.09, 16.81, 18.48, 20.09, 21.67, 23.21, 24.72,
           26.22, 27.69, 29.14, 30.58, 32.00, 33.41, 34.81, 36.19, 37.57, 38.93,
           40.29, 41.64, 42.98),
}

MIN_REGIME_OBS = 10
RESIDUAL_NAMES = ("eps", "phi", "delta", "rho")


@dataclass(frozen=True)
class TestReport:
    __test__ = False  # not a pytest class

    statistic: float
    critical_value: float
    significance: float
    reject_null: bool
    null_description: str
    tail: str = "left"
    n_obs: int = 0
    warning: bool = False

    def recompute_reject(self) -> bool:
        if not math.isfinite(self.statistic):
            return False
        if self.tail == "left":
            return self.statistic < self.critical_value
        return self.statistic > self.critical_value


def df_critical_value(level: float = 0.05) -> float:
    try:
        return DF_NO_CONSTANT[level]
    except KeyError:
        raise DataError(f"no Dickey-Fuller critical value for level {level}") from None


def chi2_critical_value(dof: int, level: float = 0.01) -> float:
    if level not in CHI2_UPPER:
        raise DataError(f"no chi-square table for level {level}")
    if not 1 <= dof <= len(CHI2_UPPER[level]):
        raise DataError(f"chi-square table covers 1..24 degrees of freedom, got {dof}")
    return CHI2_UPPER[level][dof - 1]


def df_test(series, lags: int = 0, level: float = 0.05) -> TestReport:
    """Dickey-Fuller test without constant or trend.

    Regresses ``diff(y)_t`` on ``y_{t-1}`` and ``lags`` lagged differences;
    the statistic is the t-ratio on ``y_{t-1}``, compared in the left tail.
    """
    y = np.asarray(series, dtype=float)
    if lags < 0:
        raise DataError("lags must be >= 0")
    if y.size < lags + 10:
        raise DataError(f"series too short for DF test: T={y.size} < {lags + 10}")
    if not np.all(np.isfinite(y)):
        raise DataError("DF test input contains non-finite values")
    if np.ptp(y) == 0:
        raise DataError("zero-variance regressor")

    dy = np.diff(y)
    target = dy[lags:]
    cols = [y[lags:-1]]
    for i in range(1, lags + 1):
        cols.append(dy[lags - i:-i])
    X = np.column_stack(cols)
    n, k = X.shape
    XtX = X.T @ X
    beta = np.linalg.solve(XtX, X.T @ target)
    resid = target - X @ beta
    s2 = resid @ resid / (n - k)
    se = math.sqrt(s2 * np.linalg.inv(XtX)[0, 0])
    if se == 0:
        raise DataError("zero-variance regressor")
    stat = float(beta[0] / se)
    crit = df_critical_value(level)
    return TestReport(
        statistic=stat,
        critical_value=crit,
        significance=level,
        reject_null=stat < crit,
        null_description="unit root",
        tail="left",
        n_obs=n,
    )


def autocorrelations(x, nlags: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    d = x - x.mean()
    denom = d @ d
    if denom == 0:
        raise DataError("zero-variance residuals")
    return np.array([d[k:] @ d[:-k] / denom for k in range(1, nlags + 1)])


def ljung_box(residuals, lags: int = 1, level: float = 0.01) -> TestReport:
    """Ljung-Box portmanteau test; rejects when Q exceeds the chi-square quantile."""
    e = np.asarray(residuals, dtype=float)
    n = e.size
    if lags < 1 or n <= lags:
        raise DataError(f"Ljung-Box needs 1 <= lags < T (lags={lags}, T={n})")
    rho = autocorrelations(e, lags)
    k = np.arange(1, lags + 1)
    q = float(n * (n + 2) * np.sum(rho ** 2 / (n - k)))
    crit = chi2_critical_value(lags, level)
    return TestReport(
        statistic=q,
        critical_value=crit,
        significance=level,
        reject_null=q > crit,
        null_description="no serial correlation",
        tail="right",
        n_obs=n,
    )


@dataclass(frozen=True)
class RegimeResiduals:
    """Residuals under hard regime assignment, with the years they belong to.

    Regime 1 holds ``eps`` (real equation) and ``phi`` (financial equation);
    regime 2 holds ``delta`` and ``rho``.
    """

    years1: tuple[int, ...]
    eps: tuple[float, ...]
    phi: tuple[float, ...]
    years2: tuple[int, ...]
    delta: tuple[float, ...]
    rho: tuple[float, ...]

    def series(self) -> dict[str, tuple[float, ...]]:
        return {"eps": self.eps, "phi": self.phi, "delta": self.delta, "rho": self.rho}


def assign_residuals(model: MsVarModel, smoothed, data: SeriesPair) -> RegimeResiduals:
    """Give each period to the regime with the larger smoothed probability.

    Ties go to regime 1. ``smoothed`` has one row per observation 2..T.
    """
    obs = data.as_array()
    Z, X = obs[1:], obs[:-1]
    sm = np.asarray(smoothed, dtype=float)
    if sm.shape != (Z.shape[0], 2):
        raise DataError(f"smoothed probabilities must have shape ({Z.shape[0]}, 2)")
    in1 = sm[:, 0] >= sm[:, 1]
    years = np.asarray(data.years[1:])
    R1 = Z - X @ model.regime1.matrix.T
    R2 = Z - X @ model.regime2.matrix.T
    return RegimeResiduals(
        years1=tuple(int(v) for v in years[in1]),
        eps=tuple(R1[in1, 0]),
        phi=tuple(R1[in1, 1]),
        years2=tuple(int(v) for v in years[~in1]),
        delta=tuple(R2[~in1, 0]),
        rho=tuple(R2[~in1, 1]),
    )


def regime_residuals(result, data: SeriesPair) -> RegimeResiduals:
    """Residual series of an :class:`~minskycycles.em.EstimationResult`."""
    return assign_residuals(result.model, result.filter.smoothed, data)


def residual_diagnostics(resid: RegimeResiduals, lags: int = 1,
                         level: float = 0.01) -> dict[str, TestReport]:
    """Ljung-Box on each of the four residual series.

    A regime with fewer than 10 observations still gets tested but its
    reports carry ``warning=True``; a series too short (or too flat) to
    test yields a NaN statistic.
    """
    out = {}
    crit = chi2_critical_value(lags, level)
    for name, values in resid.series().items():
        n = len(values)
        try:
            rep = ljung_box(values, lags, level)
        except DataError:
            rep = TestReport(math.nan, crit, level, False, "no serial correlation",
                             "right", n, True)
        if n < MIN_REGIME_OBS and not rep.warning:
            rep = TestReport(rep.statistic, rep.critical_value, rep.significance,
                             rep.reject_null, rep.null_description, rep.tail, n, True)
        out[name] = rep
    return out


def reports_to_csv(rows) -> str:
    """Wide CSV block: one row per dataset, ``cValue``/``StatValue`` per test.

    ``rows`` is a sequence of ``(label, {name: TestReport})`` sharing the
    same names in the same order.
    """
    rows = list(rows)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    if not rows:
        return ""
    names = list(rows[0][1])
    header = ["series"]
    for name in names:
        header += [f"{name}_cValue", f"{name}_StatValue", f"{name}_reject"]
    writer.writerow(header)
    for label, reports in rows:
        line = [label]
        for name in names:
            rep = reports[name]
            line += [f"{rep.critical_value:.6g}", f"{rep.statistic:.6g}",
                     str(rep.reject_null).lower()]
        writer.writerow(line)
    return buf.getvalue()
