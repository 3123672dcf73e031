"""Region-level estimate containers shared by the three estimators."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .extremes import DAYS_PER_YEAR, ReturnLevelEstimate, gpd_return_level


@dataclass(frozen=True)
class RegionEstimates:
    """Per-region GPD parameters with standard errors and return levels.

    ``cov_scale_shape`` carries any cross-covariance between scale and shape
    (zero for PARE and regional max; cokriging can supply one).  Return
    levels are computed lazily per period via the shared delta-method path.
    """

    method: str
    region_ids: tuple
    threshold: float
    scale: np.ndarray
    scale_se: np.ndarray
    shape: np.ndarray
    shape_se: np.ndarray
    rate: np.ndarray
    rate_se: np.ndarray
    cov_scale_shape: np.ndarray = None
    days_per_year: float = DAYS_PER_YEAR

    def __post_init__(self):
        if self.cov_scale_shape is None:
            object.__setattr__(self, "cov_scale_shape", np.zeros(len(self.region_ids)))

    @property
    def r(self) -> int:
        return len(self.region_ids)

    def param_cov(self, j: int) -> np.ndarray:
        """3x3 covariance of (scale, shape, rate) for region j."""
        cov = np.zeros((3, 3))
        cov[0, 0] = self.scale_se[j] ** 2
        cov[1, 1] = self.shape_se[j] ** 2
        cov[2, 2] = self.rate_se[j] ** 2
        cov[0, 1] = cov[1, 0] = self.cov_scale_shape[j]
        return cov

    def return_level(self, j: int, period: float) -> ReturnLevelEstimate:
        return gpd_return_level(self.threshold, float(self.scale[j]),
                                float(self.shape[j]), float(self.rate[j]),
                                period, self.days_per_year, self.param_cov(j))

    def return_levels(self, periods) -> dict:
        """{period: [ReturnLevelEstimate per region]} for the given periods."""
        return {float(p): [self.return_level(j, p) for j in range(self.r)]
                for p in periods}
