"""Ordinary kriging and cokriging of GPD parameter surfaces with block
averaging to regions.

The predictor uses the hierarchical form with a GLS-estimated constant mean:

    Y*(s0)     = mu + c_Y(s0)' C_Z^{-1} (Z - mu 1)
    sigma^2(s0) = C_Y(s0,s0) - c_Y' C_Z^{-1} c_Y
                  + (1 - 1' C_Z^{-1} c_Y)^2 / (1' C_Z^{-1} 1)
    mu = (1' C_Z^{-1} Z) / (1' C_Z^{-1} 1)

Block (region) estimates average the point predictor over sample locations;
because the predictor is linear in c_Y, the block mean and its error
variance reduce to the same formulas with region-averaged covariances.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np
import shapely
from scipy.linalg import cho_factor, cho_solve
from scipy.optimize import least_squares
from scipy.spatial.distance import cdist, pdist, squareform

from .errors import (
    DegenerateFitWarning,
    EmptyBinWarning,
    InvalidLMC,
    NoInteriorPoints,
    NonConvergence,
    SingularCovariance,
)

VARIOGRAM_KINDS = ("exponential", "spherical", "gaussian")
DEFAULT_N_BINS = 15
DEFAULT_BLOCK_SAMPLES = 1000


def _unit_correlation(kind: str, h, range_: float):
    """Unit-sill correlation function; ranges are effective (95%) ranges."""
    h = np.asarray(h, dtype=float)
    if kind == "nugget":
        return (h == 0.0).astype(float)
    if kind == "exponential":
        return np.exp(-3.0 * h / range_)
    if kind == "gaussian":
        return np.exp(-3.0 * (h / range_) ** 2)
    if kind == "spherical":
        t = np.minimum(h / range_, 1.0)
        return 1.0 - (1.5 * t - 0.5 * t ** 3)
    raise ValueError(f"unknown variogram kind {kind!r}")


@dataclass(frozen=True)
class VariogramModel:
    """Isotropic semivariogram: gamma(h) = nugget + partial_sill * (1 - corr(h))."""

    kind: str
    nugget: float
    partial_sill: float
    range_: float

    def __post_init__(self):
        if self.kind not in VARIOGRAM_KINDS:
            raise ValueError(f"kind must be one of {VARIOGRAM_KINDS}")
        if self.nugget < 0 or self.partial_sill < 0 or self.range_ <= 0:
            raise ValueError("nugget/partial_sill must be >= 0 and range > 0")

    @property
    def sill(self) -> float:
        return self.nugget + self.partial_sill

    def gamma(self, h):
        h = np.asarray(h, dtype=float)
        g = self.partial_sill * (1.0 - _unit_correlation(self.kind, h, self.range_))
        return np.where(h > 0, g + self.nugget, 0.0)

    def covariance(self, h, include_nugget_at_zero: bool = False):
        """C_Y(h); the nugget rides along at h = 0 only when it belongs to Y."""
        h = np.asarray(h, dtype=float)
        c = self.partial_sill * _unit_correlation(self.kind, h, self.range_)
        if include_nugget_at_zero:
            c = c + self.nugget * (h == 0.0)
        return c


@dataclass(frozen=True)
class EmpiricalVariogram:
    lags: np.ndarray      # mean pair distance per bin
    gamma: np.ndarray     # semivariance per bin
    counts: np.ndarray    # pair count per bin


def empirical_variogram(points, values, n_bins: int = DEFAULT_N_BINS,
                        max_dist: float | None = None,
                        values2=None) -> EmpiricalVariogram:
    """Binned empirical (cross-)semivariogram.

    gamma_hat(h) averages (v_i - v_j)(u_i - u_j)/2 over pairs in each bin;
    with ``values2`` omitted this is the usual squared-increment form.
    Empty bins are dropped with a warning.
    """
    pts = np.asarray(points, dtype=float)
    v = np.asarray(values, dtype=float)
    u = v if values2 is None else np.asarray(values2, dtype=float)
    if len(pts) < 2:
        raise ValueError("need at least two points")
    d = pdist(pts)
    if max_dist is None:
        max_dist = 0.5 * d.max()
    if max_dist <= 0:
        raise ValueError("max_dist must be positive")
    iv, ju = np.triu_indices(len(pts), k=1)
    cross = 0.5 * (v[iv] - v[ju]) * (u[iv] - u[ju])
    keep = d <= max_dist
    d, cross = d[keep], cross[keep]
    edges = np.linspace(0.0, max_dist, n_bins + 1)
    idx = np.clip(np.digitize(d, edges) - 1, 0, n_bins - 1)
    lags, gammas, counts = [], [], []
    for b in range(n_bins):
        sel = idx == b
        c = int(sel.sum())
        if c == 0:
            warnings.warn(f"empty variogram bin {b} "
                          f"({edges[b]:.3g}-{edges[b + 1]:.3g}); dropped",
                          EmptyBinWarning)
            continue
        lags.append(d[sel].mean())
        gammas.append(cross[sel].mean())
        counts.append(c)
    return EmpiricalVariogram(lags=np.asarray(lags), gamma=np.asarray(gammas),
                              counts=np.asarray(counts, dtype=int))


def fit_variogram(emp: EmpiricalVariogram, kind: str = "exponential") -> VariogramModel:
    """Weighted least squares fit of (nugget, partial_sill, range).

    Weights are pair count / h^2.  Starts from several range guesses; a
    vanishing partial sill is flagged as a degenerate (nugget-only) fit.
    """
    if len(emp.lags) < 3:
        raise ValueError("need at least 3 nonempty bins")
    h, g, w = emp.lags, emp.gamma, np.sqrt(emp.counts / emp.lags ** 2)
    gmax = max(g.max(), 1e-30)
    hmax = h.max()

    def resid(p):
        model = VariogramModel(kind, p[0], p[1], p[2])
        return (model.gamma(h) - g) * w

    best = None
    for r0 in (hmax / 3.0, hmax / 10.0, hmax):
        p0 = np.array([max(g[0], 1e-3 * gmax), max(gmax - g[0], 1e-3 * gmax), r0])
        try:
            res = least_squares(resid, p0, bounds=([0.0, 0.0, 1e-6 * hmax],
                                                   [np.inf, np.inf, 1e3 * hmax]),
                                xtol=1e-14, ftol=1e-14, gtol=1e-14)
        except ValueError:
            continue
        if best is None or res.cost < best.cost:
            best = res
    if best is None:
        raise NonConvergence("variogram weighted least squares failed")
    nugget, psill, range_ = best.x
    if psill <= 1e-6 * max(nugget, gmax):
        warnings.warn("partial sill collapsed to zero: nugget-only variogram",
                      DegenerateFitWarning)
    return VariogramModel(kind=kind, nugget=float(nugget),
                          partial_sill=float(psill), range_=float(range_))


# -- linear model of coregionalization ----------------------------------------

@dataclass(frozen=True)
class CoregionalizationModel:
    """Shared correlation structures with 2x2 coefficient matrices.

    structures[k] is ("nugget", 0) or (kind, range); b[k] is the symmetric
    PSD coefficient matrix of structure k for the variable pair.
    """

    structures: tuple
    b: np.ndarray            # (k, 2, 2)

    def validate(self, tol: float = 1e-10) -> None:
        for k, bk in enumerate(self.b):
            if not np.allclose(bk, bk.T):
                raise InvalidLMC(f"B_{k} not symmetric")
            eig = np.linalg.eigvalsh(bk)
            if eig.min() < -tol * max(abs(eig).max(), 1.0):
                raise InvalidLMC(f"B_{k} not positive semidefinite "
                                 f"(eigenvalues {eig})")

    def cross_covariance(self, h, i: int, j: int, include_nugget_at_zero: bool = False):
        """C_{ij}(h) between variables i and j at lag h."""
        h = np.asarray(h, dtype=float)
        c = np.zeros_like(h)
        for (kind, range_), bk in zip(self.structures, self.b):
            if kind == "nugget":
                if include_nugget_at_zero:
                    c = c + bk[i, j] * (h == 0.0)
            else:
                c = c + bk[i, j] * _unit_correlation(kind, h, range_)
        return c

    def nugget_matrix(self) -> np.ndarray:
        for (kind, _), bk in zip(self.structures, self.b):
            if kind == "nugget":
                return bk
        return np.zeros((2, 2))

    def sill(self, i: int, j: int) -> float:
        return float(sum(bk[i, j] for bk in self.b))


def _nearest_psd(m: np.ndarray) -> np.ndarray:
    sym = 0.5 * (m + m.T)
    eigval, eigvec = np.linalg.eigh(sym)
    return (eigvec * np.maximum(eigval, 0.0)) @ eigvec.T


def fit_lmc(points, v1, v2, kind: str = "exponential",
            n_bins: int = DEFAULT_N_BINS,
            max_dist: float | None = None) -> CoregionalizationModel:
    """Fit a two-variable LMC: nugget + one structural component.

    Direct variograms are fitted first; their ranges are pooled (sill
    weighted) into a shared range, then nugget/sill coefficients of all
    three (co)variograms are refitted linearly and the coefficient matrices
    projected to the nearest PSD pair.
    """
    emp11 = empirical_variogram(points, v1, n_bins, max_dist)
    emp22 = empirical_variogram(points, v2, n_bins, max_dist)
    emp12 = empirical_variogram(points, v1, n_bins, max_dist, values2=v2)
    m1 = fit_variogram(emp11, kind)
    m2 = fit_variogram(emp22, kind)
    w1, w2 = max(m1.partial_sill, 1e-12), max(m2.partial_sill, 1e-12)
    shared_range = (w1 * m1.range_ + w2 * m2.range_) / (w1 + w2)

    def linear_refit(emp):
        # gamma(h) = b0 + b1 * (1 - corr(h; shared_range)), weighted LS
        g1 = 1.0 - _unit_correlation(kind, emp.lags, shared_range)
        a = np.column_stack([np.ones_like(emp.lags), g1])
        w = np.sqrt(emp.counts / emp.lags ** 2)
        coef, *_ = np.linalg.lstsq(a * w[:, None], emp.gamma * w, rcond=None)
        return coef  # (nugget-ish, sill-ish), sign-free

    c11 = np.maximum(linear_refit(emp11), 0.0)
    c22 = np.maximum(linear_refit(emp22), 0.0)
    c12 = linear_refit(emp12)
    b0 = _nearest_psd(np.array([[c11[0], c12[0]], [c12[0], c22[0]]]))
    b1 = _nearest_psd(np.array([[c11[1], c12[1]], [c12[1], c22[1]]]))
    model = CoregionalizationModel(structures=(("nugget", 0.0), (kind, shared_range)),
                                   b=np.stack([b0, b1]))
    model.validate()
    return model


# -- predictors ----------------------------------------------------------------

@dataclass(frozen=True)
class KrigePrediction:
    """Point or block prediction with kriging variance."""

    value: float
    variance: float
    target: object = None
    sample_points: np.ndarray | None = None

    @property
    def se(self) -> float:
        return float(np.sqrt(max(self.variance, 0.0)))


class OrdinaryKriging:
    """Factorized ordinary-kriging system for one variable.

    ``nugget_as_measurement_error`` treats the nugget as the variance of the
    observation noise (filtered from predictions); switch it off to make the
    nugget part of the process, recovering exact interpolation.
    """

    def __init__(self, points, values, model: VariogramModel,
                 nugget_as_measurement_error: bool = True):
        self.points = np.asarray(points, dtype=float)
        self.values = np.asarray(values, dtype=float)
        self.model = model
        self.filtered = bool(nugget_as_measurement_error)
        n = len(self.points)
        if n != len(self.values):
            raise ValueError("points/values length mismatch")
        h = squareform(pdist(self.points))
        c_y = model.covariance(h, include_nugget_at_zero=not self.filtered)
        sigma_eps2 = model.nugget if self.filtered else 0.0
        c_z = c_y + np.eye(n) * sigma_eps2
        try:
            self._cho = cho_factor(c_z)
        except np.linalg.LinAlgError as err:
            raise SingularCovariance(
                f"observation covariance not invertible: {err}") from None
        ones = np.ones(n)
        self._ci_ones = cho_solve(self._cho, ones)
        self._ones_ci_ones = float(ones @ self._ci_ones)
        if self._ones_ci_ones <= 0:
            raise SingularCovariance("1' C^{-1} 1 not positive")
        self.mu_gls = float(self._ci_ones @ self.values) / self._ones_ci_ones
        self._alpha = cho_solve(self._cho, self.values - self.mu_gls)

    # covariance between Y(target) and each observation
    def _cov_vector(self, targets) -> np.ndarray:
        h = cdist(np.atleast_2d(targets), self.points)
        return self.model.covariance(h, include_nugget_at_zero=not self.filtered)

    def _point_variance_scalar(self) -> float:
        return self.model.partial_sill + (0.0 if self.filtered else self.model.nugget)

    def _predict_from_cov(self, c: np.ndarray, c0: float) -> tuple:
        ci_c = cho_solve(self._cho, c.T)                      # (n, m)
        pred = self.mu_gls + c @ self._alpha
        penalty = (1.0 - c @ self._ci_ones) ** 2 / self._ones_ci_ones
        var = c0 - np.einsum("ij,ji->i", c, ci_c) + penalty
        return pred, var

    def predict(self, targets) -> tuple:
        """Predictions and kriging variances at target points (m, 2)."""
        c = self._cov_vector(targets)
        return self._predict_from_cov(c, self._point_variance_scalar())

    def predict_point(self, s0) -> KrigePrediction:
        pred, var = self.predict(np.atleast_2d(s0))
        return KrigePrediction(value=float(pred[0]), variance=float(var[0]),
                               target=tuple(np.asarray(s0, dtype=float)))

    def weights(self, s0) -> np.ndarray:
        """Kriging weights w with Y*(s0) = w'Z (they sum to one)."""
        c = self._cov_vector(np.atleast_2d(s0))[0]
        ci_c = cho_solve(self._cho, c)
        lam = (1.0 - float(np.ones_like(c) @ ci_c)) / self._ones_ci_ones
        return ci_c + lam * self._ci_ones

    def block_from_points(self, sample_points, target=None) -> KrigePrediction:
        """Block mean prediction over the given support sample points."""
        sp = np.asarray(sample_points, dtype=float)
        if len(sp) == 0:
            raise NoInteriorPoints("no sample points for block averaging")
        c_bar = self._cov_vector(sp).mean(axis=0)
        h = cdist(sp, sp)
        c0_bar = float(self.model.covariance(
            h, include_nugget_at_zero=not self.filtered).mean())
        pred, var = self._predict_from_cov(c_bar[None, :], c0_bar)
        return KrigePrediction(value=float(pred[0]), variance=float(var[0]),
                               target=target, sample_points=sp)


class Cokriging:
    """Ordinary cokriging of two co-located variables under an LMC.

    Observations stack as (variable 0 at all stations, variable 1 at all
    stations); each variable keeps its own unknown constant mean.
    """

    def __init__(self, points, values1, values2, lmc: CoregionalizationModel,
                 nugget_as_measurement_error: bool = True):
        lmc.validate()
        self.points = np.asarray(points, dtype=float)
        self.lmc = lmc
        self.filtered = bool(nugget_as_measurement_error)
        v1 = np.asarray(values1, dtype=float)
        v2 = np.asarray(values2, dtype=float)
        n = len(self.points)
        if len(v1) != n or len(v2) != n:
            raise ValueError("points/values length mismatch")
        self.n = n
        self.z = np.concatenate([v1, v2])
        h = squareform(pdist(self.points))
        include = not self.filtered
        c = np.empty((2 * n, 2 * n))
        for i in range(2):
            for j in range(2):
                c[i * n:(i + 1) * n, j * n:(j + 1) * n] = \
                    lmc.cross_covariance(h, i, j, include_nugget_at_zero=include)
        if self.filtered:
            b_nug = lmc.nugget_matrix()
            for i in range(2):
                for j in range(2):
                    c[i * n:(i + 1) * n, j * n:(j + 1) * n] += np.eye(n) * b_nug[i, j]
        self._design = np.zeros((2 * n, 2))
        self._design[:n, 0] = 1.0
        self._design[n:, 1] = 1.0
        try:
            self._cho = cho_factor(c)
        except np.linalg.LinAlgError as err:
            raise SingularCovariance(
                f"joint covariance not invertible: {err}") from None
        self._ci_f = cho_solve(self._cho, self._design)           # (2n, 2)
        self._ftcif = self._design.T @ self._ci_f                 # (2, 2)
        self._ftcif_inv = np.linalg.inv(self._ftcif)
        self.mu_gls = self._ftcif_inv @ (self._ci_f.T @ self.z)   # (2,)
        self._alpha = cho_solve(self._cho, self.z - self._design @ self.mu_gls)

    def _cov_vector(self, targets, variable: int) -> np.ndarray:
        """(m, 2n) covariance between Y_variable(targets) and all observations."""
        h = cdist(np.atleast_2d(targets), self.points)
        include = not self.filtered
        return np.hstack([
            self.lmc.cross_covariance(h, variable, 0, include_nugget_at_zero=include),
            self.lmc.cross_covariance(h, variable, 1, include_nugget_at_zero=include),
        ])

    def _point_c0(self, i: int, j: int) -> float:
        return self.lmc.cross_covariance(np.zeros(1), i, j,
                                         include_nugget_at_zero=not self.filtered)[0]

    def _predict_from_cov(self, c: np.ndarray, c0: float, variable: int) -> tuple:
        ci_c = cho_solve(self._cho, c.T)
        pred = self.mu_gls[variable] + c @ self._alpha
        d = np.eye(2)[variable][None, :] - c @ self._ci_f       # (m, 2)
        penalty = np.einsum("ij,jk,ik->i", d, self._ftcif_inv, d)
        var = c0 - np.einsum("ij,ji->i", c, ci_c) + penalty
        return pred, var

    def predict(self, targets, variable: int) -> tuple:
        c = self._cov_vector(targets, variable)
        return self._predict_from_cov(c, self._point_c0(variable, variable), variable)

    def predict_point(self, s0, variable: int) -> KrigePrediction:
        pred, var = self.predict(np.atleast_2d(s0), variable)
        return KrigePrediction(value=float(pred[0]), variance=float(var[0]),
                               target=tuple(np.asarray(s0, dtype=float)))

    def block_from_points(self, sample_points, target=None) -> tuple:
        """Block predictions of both variables plus their error cross-covariance."""
        sp = np.asarray(sample_points, dtype=float)
        if len(sp) == 0:
            raise NoInteriorPoints("no sample points for block averaging")
        h = cdist(sp, sp)
        include = not self.filtered
        preds = []
        cbars = []
        for variable in range(2):
            c_bar = self._cov_vector(sp, variable).mean(axis=0)
            c0_bar = float(self.lmc.cross_covariance(
                h, variable, variable, include_nugget_at_zero=include).mean())
            pred, var = self._predict_from_cov(c_bar[None, :], c0_bar, variable)
            preds.append(KrigePrediction(value=float(pred[0]), variance=float(var[0]),
                                         target=target, sample_points=sp))
            cbars.append(c_bar)
        c0_cross = float(self.lmc.cross_covariance(
            h, 0, 1, include_nugget_at_zero=include).mean())
        ci_c2 = cho_solve(self._cho, cbars[1])
        d0 = np.eye(2)[0] - cbars[0] @ self._ci_f
        d1 = np.eye(2)[1] - cbars[1] @ self._ci_f
        cross = c0_cross - float(cbars[0] @ ci_c2) + float(d0 @ self._ftcif_inv @ d1)
        return preds[0], preds[1], cross


def ordinary_krige(points, values, model: VariogramModel, s0,
                   nugget_as_measurement_error: bool = True) -> KrigePrediction:
    """One-shot ordinary kriging prediction at a single location."""
    ok = OrdinaryKriging(points, values, model, nugget_as_measurement_error)
    return ok.predict_point(s0)


def cokrige(points, values1, values2, lmc: CoregionalizationModel, s0,
            nugget_as_measurement_error: bool = True) -> tuple:
    """One-shot cokriging prediction of both variables at a single location."""
    ck = Cokriging(points, values1, values2, lmc, nugget_as_measurement_error)
    return ck.predict_point(s0, 0), ck.predict_point(s0, 1)


# -- block change of support ----------------------------------------------------

def block_sample_points(region, method: str = "random",
                        resolution: float | None = None,
                        n_samples: int = DEFAULT_BLOCK_SAMPLES,
                        seed: int = 0) -> np.ndarray:
    """Support points inside a region polygon, by lattice or uniform sampling."""
    if method == "grid":
        if resolution is None or resolution <= 0:
            raise ValueError("grid method needs a positive resolution")
        minx, miny, maxx, maxy = region.bounds
        xs = np.arange(minx + resolution / 2.0, maxx, resolution)
        ys = np.arange(miny + resolution / 2.0, maxy, resolution)
        if len(xs) == 0 or len(ys) == 0:
            raise NoInteriorPoints(f"resolution {resolution} too coarse for region")
        gx, gy = np.meshgrid(xs, ys)
        pts = np.column_stack([gx.ravel(), gy.ravel()])
        pts = pts[shapely.covers(region, shapely.points(pts))]
        if len(pts) == 0:
            raise NoInteriorPoints(f"resolution {resolution} too coarse for region")
        return pts
    if method == "random":
        rng = np.random.default_rng(seed)
        minx, miny, maxx, maxy = region.bounds
        out = []
        have = 0
        for _ in range(1000):
            cand = np.column_stack([rng.uniform(minx, maxx, size=4 * n_samples),
                                    rng.uniform(miny, maxy, size=4 * n_samples)])
            cand = cand[shapely.covers(region, shapely.points(cand))]
            out.append(cand)
            have += len(cand)
            if have >= n_samples:
                return np.vstack(out)[:n_samples]
        raise NoInteriorPoints("uniform sampling kept missing the region")
    raise ValueError(f"unknown block method {method!r}")


def block_average(predictor, region, method: str = "random",
                  resolution: float | None = None,
                  n_samples: int = DEFAULT_BLOCK_SAMPLES, seed: int = 0,
                  target=None):
    """Block estimate over a region for an OrdinaryKriging or Cokriging system.

    Returns a KrigePrediction, or for cokriging a tuple
    (prediction_var0, prediction_var1, error_cross_covariance).
    """
    pts = block_sample_points(region, method=method, resolution=resolution,
                              n_samples=n_samples, seed=seed)
    return predictor.block_from_points(pts, target=target)


def _is_constant(values: np.ndarray) -> bool:
    return np.ptp(values) <= 1e-10 * max(1.0, float(np.abs(values).mean()))


def krige_to_regions(stations, fits, regions, kind: str = "exponential",
                     n_bins: int = DEFAULT_N_BINS, max_dist: float | None = None,
                     method: str = "random", resolution: float | None = None,
                     n_samples: int = DEFAULT_BLOCK_SAMPLES, seed: int = 0,
                     nugget_as_measurement_error: bool = True,
                     days_per_year: float = 365.25):
    """Block-kriging region estimates from station GPD fits.

    Shape and log(scale) are cokriged jointly; the rate is kriged on its
    own.  Block averages use the requested support sampling, the log-scale
    estimate is back-transformed, and the cokriging-implied shape/scale
    cross-covariance is carried into the region parameter covariance.
    Constant fields short-circuit to the constant; a single station passes
    its own fit through unchanged.
    """
    from .pare import backtransform_logscale
    from .results import RegionEstimates

    pts = stations.points
    shape_v = np.array([f.shape for f in fits])
    logscale_v = np.array([np.log(f.scale) for f in fits])
    rate_v = np.array([f.rate for f in fits])
    threshold = fits[0].threshold
    r = regions.r

    if stations.n == 1:
        f = fits[0]
        return RegionEstimates(
            method="block_kriging", region_ids=tuple(regions.ids), threshold=threshold,
            scale=np.full(r, f.scale), scale_se=np.full(r, f.scale_se),
            shape=np.full(r, f.shape), shape_se=np.full(r, f.shape_se),
            rate=np.full(r, f.rate), rate_se=np.full(r, f.rate_se),
            cov_scale_shape=np.full(r, f.cov[0, 1] if f.cov_ok else 0.0),
            days_per_year=days_per_year)

    sample_sets = [block_sample_points(poly, method=method, resolution=resolution,
                                       n_samples=n_samples, seed=seed + 7919 * j)
                   for j, poly in enumerate(regions.polygons)]

    def krige_blocks(values):
        if _is_constant(values):
            return np.full(r, values.mean()), np.zeros(r)
        model = fit_variogram(empirical_variogram(pts, values, n_bins, max_dist), kind)
        ok = OrdinaryKriging(pts, values, model, nugget_as_measurement_error)
        out_v, out_var = np.empty(r), np.empty(r)
        for j, sp in enumerate(sample_sets):
            pred = ok.block_from_points(sp, target=regions.ids[j])
            out_v[j], out_var[j] = pred.value, pred.variance
        return out_v, out_var

    cross_block = np.zeros(r)
    if not _is_constant(shape_v) and not _is_constant(logscale_v):
        lmc = fit_lmc(pts, shape_v, logscale_v, kind, n_bins, max_dist)
        ck = Cokriging(pts, shape_v, logscale_v, lmc, nugget_as_measurement_error)
        shape_b, shape_var = np.empty(r), np.empty(r)
        logsc_b, logsc_var = np.empty(r), np.empty(r)
        for j, sp in enumerate(sample_sets):
            p_shape, p_logsc, cross = ck.block_from_points(sp, target=regions.ids[j])
            shape_b[j], shape_var[j] = p_shape.value, p_shape.variance
            logsc_b[j], logsc_var[j] = p_logsc.value, p_logsc.variance
            cross_block[j] = cross
    else:
        shape_b, shape_var = krige_blocks(shape_v)
        logsc_b, logsc_var = krige_blocks(logscale_v)
    rate_b, rate_var = krige_blocks(rate_v)

    scale = np.empty(r)
    scale_se = np.empty(r)
    for j in range(r):
        scale[j], scale_se[j] = backtransform_logscale(float(logsc_b[j]),
                                                       max(float(logsc_var[j]), 0.0))
    # cov(scale, shape) ~= exp(m) * cov(log scale, shape), first-order delta
    cov_scale_shape = np.exp(logsc_b) * cross_block
    return RegionEstimates(
        method="block_kriging", region_ids=tuple(regions.ids), threshold=threshold,
        scale=scale, scale_se=scale_se,
        shape=shape_b, shape_se=np.sqrt(np.maximum(shape_var, 0.0)),
        rate=rate_b, rate_se=np.sqrt(np.maximum(rate_var, 0.0)),
        cov_scale_shape=cov_scale_shape, days_per_year=days_per_year)
