"""Declustering, generalized-Pareto peaks-over-threshold fitting, and
return levels with delta-method uncertainty.

Depths are tenths of millimeters throughout; return levels are reported in
inches (254 tenths-mm = 1 inch exactly).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .errors import HessianNotPDWarning, NonConvergence, SubAnnualReturn, TooFewExceedances

TENTHS_MM_PER_INCH = 254.0
DAYS_PER_YEAR = 365.25
DEFAULT_THRESHOLD = 254.0   # one inch of rainfall
MIN_EXCEEDANCES = 10
XI_BOUNDS = (-0.5, 1.0)
XI_ZERO_TOL = 1e-6          # |xi| below this uses the exponential branch


@dataclass(frozen=True)
class DailySeries:
    """One station's daily precipitation record on a contiguous calendar.

    ``dates`` spans every day from first to last observation; days absent
    from the source record are flagged in ``missing`` (their depth is 0).
    """

    station_id: str
    dates: np.ndarray     # datetime64[D], strictly daily
    depths: np.ndarray    # float, >= 0 where present
    missing: np.ndarray   # bool

    def __post_init__(self):
        if len(self.dates) != len(self.depths) or len(self.dates) != len(self.missing):
            raise ValueError("dates, depths, missing lengths differ")
        if len(self.dates) > 1:
            steps = np.diff(self.dates).astype("timedelta64[D]").astype(int)
            if np.any(steps != 1):
                raise ValueError("dates must advance one day at a time")
        present = ~self.missing
        if np.any(self.depths[present] < 0):
            raise ValueError("negative depth in a non-missing day")

    @classmethod
    def from_records(cls, station_id, dates, depths) -> "DailySeries":
        """Build from (possibly gappy) dated records; gaps become missing days."""
        d = np.asarray(dates, dtype="datetime64[D]")
        v = np.asarray(depths, dtype=float)
        if len(d) == 0:
            return cls(station_id, d, v, np.zeros(0, dtype=bool))
        order = np.argsort(d)
        d, v = d[order], v[order]
        if len(np.unique(d)) != len(d):
            raise ValueError(f"duplicate dates for station {station_id!r}")
        full = np.arange(d[0], d[-1] + 1)
        depths_full = np.zeros(len(full))
        missing = np.ones(len(full), dtype=bool)
        pos = (d - d[0]).astype(int)
        present = ~np.isnan(v)
        depths_full[pos[present]] = v[present]
        missing[pos[present]] = False
        return cls(station_id, full, depths_full, missing)

    @property
    def n_days(self) -> int:
        """Count of non-missing days."""
        return int((~self.missing).sum())

    def window(self, start_year: int, end_year: int) -> "DailySeries":
        """Subset to calendar years [start_year, end_year], padding to the full span."""
        lo = np.datetime64(f"{start_year}-01-01")
        hi = np.datetime64(f"{end_year}-12-31")
        full = np.arange(lo, hi + 1)
        depths = np.zeros(len(full))
        missing = np.ones(len(full), dtype=bool)
        if len(self.dates):
            inside = (self.dates >= lo) & (self.dates <= hi)
            pos = (self.dates[inside] - lo).astype(int)
            depths[pos] = self.depths[inside]
            missing[pos] = self.missing[inside]
        return DailySeries(self.station_id, full, depths, missing)


def decluster(series: DailySeries) -> DailySeries:
    """Keep only the wettest day of every run of consecutive wet days.

    A wet day has positive depth and is not missing; missing days break
    runs.  Ties keep the earliest day.  Idempotent.
    """
    wet = (series.depths > 0) & ~series.missing
    depths = series.depths.copy()
    n = len(wet)
    if n:
        starts = np.flatnonzero(wet & ~np.concatenate(([False], wet[:-1])))
        ends = np.flatnonzero(wet & ~np.concatenate((wet[1:], [False])))
        for s, e in zip(starts, ends):
            if e > s:
                keep = s + int(np.argmax(depths[s:e + 1]))
                kept_value = depths[keep]
                depths[s:e + 1] = 0.0
                depths[keep] = kept_value
    return DailySeries(series.station_id, series.dates, depths, series.missing)


def exceedances(series: DailySeries, u: float) -> tuple[np.ndarray, int]:
    """Depths strictly above ``u`` in date order, plus the non-missing day count."""
    mask = (series.depths > u) & ~series.missing
    return series.depths[mask].copy(), series.n_days


@dataclass(frozen=True)
class GpdFit:
    """Generalized-Pareto fit of threshold exceedances for one series."""

    threshold: float
    scale: float              # sigma-tilde, tenths of mm
    shape: float              # xi
    rate: float               # zeta, per-day exceedance probability
    n_exceed: int
    n_days: int
    cov: np.ndarray           # 2x2 covariance of (scale, shape)
    rate_se: float
    loglik: float
    cov_ok: bool = True

    @property
    def scale_se(self) -> float:
        return float(np.sqrt(self.cov[0, 0]))

    @property
    def shape_se(self) -> float:
        return float(np.sqrt(self.cov[1, 1]))


def gpd_neg_loglik(scale: float, shape: float, excess: np.ndarray) -> float:
    """Negative log-likelihood of GPD excesses; +inf outside the support."""
    if scale <= 0:
        return np.inf
    z = excess / scale
    w = shape * z
    if np.any(w <= -1.0):
        return np.inf
    n = len(excess)
    if abs(shape) < 1e-9:
        # exponential limit with a first-order shape correction
        return n * np.log(scale) + float(np.sum(z)) + shape * float(np.sum(z - z * z / 2.0))
    return n * np.log(scale) + (1.0 + 1.0 / shape) * float(np.sum(np.log1p(w)))


def _nll_hessian(scale: float, shape: float, excess: np.ndarray) -> np.ndarray:
    """Central-difference Hessian of the negative log-likelihood at (scale, shape)."""
    h = np.array([3e-4 * scale, 3e-4 * max(abs(shape), 1.0)])

    def f(p):
        return gpd_neg_loglik(p[0], p[1], excess)

    p0 = np.array([scale, shape])
    hess = np.empty((2, 2))
    for i in range(2):
        ei = np.zeros(2)
        ei[i] = h[i]
        hess[i, i] = (f(p0 + ei) - 2.0 * f(p0) + f(p0 - ei)) / h[i] ** 2
    e0 = np.array([h[0], 0.0])
    e1 = np.array([0.0, h[1]])
    hess[0, 1] = hess[1, 0] = (
        f(p0 + e0 + e1) - f(p0 + e0 - e1) - f(p0 - e0 + e1) + f(p0 - e0 - e1)
    ) / (4.0 * h[0] * h[1])
    return hess


def fit_gpd(values: np.ndarray, u: float, n_days: int,
            min_exceed: int = MIN_EXCEEDANCES) -> GpdFit:
    """Maximum-likelihood GPD fit of the exceedances of ``u``.

    Optimizes (log scale, shape) with L-BFGS-B, shape boxed to [-0.5, 1],
    starting from moment estimates plus fallback starts.  The parameter
    covariance is the inverse observed information (finite-difference
    Hessian); the exceedance rate is n_exceed / n_days with a binomial
    standard error.
    """
    vals = np.sort(np.asarray(values, dtype=float))  # order-canonical sums
    if len(vals) < min_exceed:
        raise TooFewExceedances(
            f"{len(vals)} exceedances of u={u}; need at least {min_exceed}")
    excess = vals - u
    if np.any(excess <= 0):
        raise ValueError("all values must strictly exceed the threshold")

    m = float(excess.mean())
    v = float(excess.var())
    if v > 0:
        xi0 = float(np.clip(0.5 * (1.0 - m * m / v), XI_BOUNDS[0] + 0.05, XI_BOUNDS[1] - 0.05))
        sigma0 = max(m * (1.0 - xi0), 1e-8)
    else:
        xi0, sigma0 = 0.1, max(m, 1e-8)

    def nll_t(theta):
        return gpd_neg_loglik(np.exp(theta[0]), theta[1], excess)

    starts = [(np.log(sigma0), xi0), (np.log(m), 0.1), (np.log(m), 0.0)]
    bounds = [(np.log(m) - 8.0, np.log(max(excess.max(), m)) + 4.0), XI_BOUNDS]
    best = None
    for theta0 in starts:
        res = minimize(nll_t, np.asarray(theta0), method="L-BFGS-B", bounds=bounds)
        if np.isfinite(res.fun) and (best is None or res.fun < best.fun):
            best = res
    if best is None or not np.isfinite(best.fun):
        raise NonConvergence("GPD likelihood optimization failed from all starts",
                             diagnostics=best)

    scale = float(np.exp(best.x[0]))
    shape = float(best.x[1])
    cov_ok = True
    cov = np.full((2, 2), np.nan)
    try:
        hess = _nll_hessian(scale, shape, excess)
        eigvals = np.linalg.eigvalsh(hess)
        if np.all(np.isfinite(hess)) and np.all(eigvals > 0):
            cov = np.linalg.inv(hess)
        else:
            raise np.linalg.LinAlgError("observed information not PD")
    except np.linalg.LinAlgError:
        cov_ok = False
        warnings.warn(
            f"observed information not positive definite at the optimum "
            f"(scale={scale:.4g}, shape={shape:.4g}); covariance unusable",
            HessianNotPDWarning)

    rate = len(vals) / n_days
    rate_se = float(np.sqrt(rate * (1.0 - rate) / n_days))
    return GpdFit(threshold=float(u), scale=scale, shape=shape, rate=rate,
                  n_exceed=len(vals), n_days=int(n_days), cov=cov,
                  rate_se=rate_se, loglik=-float(best.fun), cov_ok=cov_ok)


@dataclass(frozen=True)
class ReturnLevelEstimate:
    """N-year return level in inches with a delta-method standard error."""

    period: float
    level: float
    se: float


def gpd_return_level(u: float, scale: float, shape: float, rate: float,
                     period: float, days_per_year: float = DAYS_PER_YEAR,
                     cov: np.ndarray | None = None) -> ReturnLevelEstimate:
    """Return level of a GPD+POT model, converted to inches.

    level = u + (scale/shape) * ((N * days_per_year * rate)^shape - 1), with
    the log form in the shape->0 limit.  ``cov`` is the 3x3 covariance of
    (scale, shape, rate); omit it for a point estimate (se = 0).
    """
    m = period * days_per_year * rate
    if m <= 1.0:
        raise SubAnnualReturn(
            f"N*days_per_year*rate = {m:.4g} <= 1; the {period}-year level "
            "sits below the threshold")
    logm = np.log(m)
    if abs(shape) < XI_ZERO_TOL:
        level = u + scale * logm
        grad = np.array([logm, scale * logm ** 2 / 2.0, scale / rate])
    else:
        mg = m ** shape
        level = u + scale / shape * (mg - 1.0)
        grad = np.array([
            (mg - 1.0) / shape,
            scale * (mg * logm / shape - (mg - 1.0) / shape ** 2),
            scale * mg / rate,
        ])
    if cov is None:
        se = 0.0
    else:
        var = float(grad @ np.asarray(cov) @ grad)
        se = float(np.sqrt(max(var, 0.0)))
    return ReturnLevelEstimate(period=float(period),
                               level=float(level) / TENTHS_MM_PER_INCH,
                               se=se / TENTHS_MM_PER_INCH)


def return_level(fit: GpdFit, period: float,
                 days_per_year: float = DAYS_PER_YEAR,
                 cov: np.ndarray | None = None) -> ReturnLevelEstimate:
    """Return level for a fitted series; block-diagonal covariance by default.

    Unless a full 3x3 covariance of (scale, shape, rate) is supplied, the
    parameter covariance from the fit is combined with the rate variance
    assuming zero cross-covariance.
    """
    if cov is None:
        cov = np.zeros((3, 3))
        if fit.cov_ok:
            cov[:2, :2] = fit.cov
        cov[2, 2] = fit.rate_se ** 2
    return gpd_return_level(fit.threshold, fit.scale, fit.shape, fit.rate,
                            period, days_per_year, cov)
