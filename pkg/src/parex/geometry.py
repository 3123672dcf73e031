"""Region/station geometry, extended Hausdorff distances, and the
block-structured spatial weight matrix used by the point-to-area model.

All computations run in a planar coordinate frame in miles.  Geographic
input (WGS84 lon/lat) is projected with a local equirectangular map
anchored at the region-set centroid; over a study area a few degrees
across this approximation errs well under half a percent.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import shapely
from scipy.spatial import cKDTree
from shapely.geometry import Polygon, MultiPolygon

from .errors import (
    BoundaryTieWarning,
    DegeneratePolygon,
    InvalidC,
    NonPositiveEntry,
    PointOutsideAllRegions,
    ZeroDistance,
)

R_EARTH_MILES = 3958.7613
DEFAULT_PITCH = 0.25       # miles, polygon discretization for Hausdorff quantiles
DEFAULT_C = 1.0            # miles, within-region distance constant
DEFAULT_JITTER_SD = 0.1    # miles, weight-matrix de-singularization


def lonlat_to_miles(lon, lat, anchor):
    """Project WGS84 degrees to planar miles, equirectangular about ``anchor``.

    Parameters
    ----------
    lon, lat : array_like
        Coordinates in degrees.
    anchor : (float, float)
        (lon0, lat0) of the projection origin.

    Returns
    -------
    ndarray of shape (n, 2)
        x (east) and y (north) in miles.
    """
    lon0, lat0 = anchor
    x = np.radians(np.asarray(lon, dtype=float) - lon0) * R_EARTH_MILES * np.cos(np.radians(lat0))
    y = np.radians(np.asarray(lat, dtype=float) - lat0) * R_EARTH_MILES
    return np.column_stack([np.atleast_1d(x), np.atleast_1d(y)])


def _project_geometry(geom, anchor):
    def f(coords):
        return lonlat_to_miles(coords[:, 0], coords[:, 1], anchor)
    return shapely.transform(geom, f)


def _check_polygon(poly) -> None:
    if not isinstance(poly, (Polygon, MultiPolygon)):
        raise DegeneratePolygon(f"expected a polygon, got {type(poly).__name__}")
    if poly.is_empty or not poly.is_valid or poly.area <= 0.0:
        raise DegeneratePolygon("polygon is empty, invalid, or has zero area")


@dataclass(frozen=True)
class RegionSet:
    """Ordered set of non-overlapping region polygons in planar miles."""

    ids: tuple
    polygons: tuple
    anchor: tuple | None = None  # (lon0, lat0) if projected from geographic input

    def __post_init__(self):
        if len(self.ids) == 0:
            raise DegeneratePolygon("region set is empty")
        if len(set(self.ids)) != len(self.ids):
            raise ValueError("region ids are not unique")
        for poly in self.polygons:
            _check_polygon(poly)
        for i in range(len(self.polygons)):
            for j in range(i + 1, len(self.polygons)):
                inter = self.polygons[i].intersection(self.polygons[j])
                if inter.area > 1e-9 * min(self.polygons[i].area, self.polygons[j].area):
                    raise ValueError(f"regions {self.ids[i]!r} and {self.ids[j]!r} overlap")

    @property
    def r(self) -> int:
        return len(self.ids)

    @classmethod
    def from_lonlat(cls, ids, polygons) -> "RegionSet":
        """Build from WGS84 polygons, projecting about their joint centroid."""
        union = shapely.unary_union(list(polygons))
        anchor = (union.centroid.x, union.centroid.y)
        projected = tuple(_project_geometry(p, anchor) for p in polygons)
        return cls(ids=tuple(ids), polygons=projected, anchor=anchor)

    def union(self):
        return shapely.unary_union(list(self.polygons))


@dataclass(frozen=True)
class StationSet:
    """Gauge locations (miles) with their region assignment."""

    ids: tuple
    points: np.ndarray                 # (n, 2)
    region_index: np.ndarray           # (n,) ints into the owning RegionSet
    region_ids: tuple = ()

    def __post_init__(self):
        if len(self.ids) != len(self.points) or len(self.ids) != len(self.region_index):
            raise ValueError("ids, points and region_index lengths differ")
        if len(self.ids) == 0:
            raise ValueError("station set is empty")

    @property
    def n(self) -> int:
        return len(self.ids)

    def counts(self, r: int | None = None) -> np.ndarray:
        r = r if r is not None else (int(self.region_index.max()) + 1)
        return np.bincount(self.region_index, minlength=r)

    def indicator(self, r: int | None = None) -> np.ndarray:
        """n x r zero/one matrix H with h_ij = 1 iff station i sits in region j."""
        r = r if r is not None else (int(self.region_index.max()) + 1)
        h = np.zeros((self.n, r))
        h[np.arange(self.n), self.region_index] = 1.0
        return h


def assign_stations(ids, points, regions: RegionSet, atol: float = 1e-3) -> StationSet:
    """Assign each station point to exactly one region.

    Boundary points covered by more than one region go to the lowest region
    index (a warning is emitted).  Points outside every region are snapped to
    the nearest region if within ``atol`` miles, else raise
    :class:`PointOutsideAllRegions`.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    geoms = shapely.points(pts)
    covered = np.column_stack([shapely.covers(poly, geoms) for poly in regions.polygons])
    index = np.full(len(pts), -1, dtype=int)
    for i in range(len(pts)):
        hits = np.nonzero(covered[i])[0]
        if len(hits) == 1:
            index[i] = hits[0]
        elif len(hits) > 1:
            index[i] = hits[0]
            warnings.warn(
                f"station {ids[i]!r} lies on a boundary shared by regions "
                f"{[regions.ids[h] for h in hits]}; assigned to {regions.ids[hits[0]]!r}",
                BoundaryTieWarning,
            )
        else:
            dists = np.array([poly.distance(geoms[i]) for poly in regions.polygons])
            j = int(np.argmin(dists))
            if dists[j] <= atol:
                index[i] = j
            else:
                raise PointOutsideAllRegions(ids[i], pts[i])
    return StationSet(ids=tuple(ids), points=pts, region_index=index,
                      region_ids=tuple(regions.ids))


# -- extended Hausdorff distance ---------------------------------------------

def discretize_polygon(poly, pitch: float = DEFAULT_PITCH) -> np.ndarray:
    """Point-set stand-in for a polygon: interior lattice plus boundary walk.

    Interior points sit on the global lattice of multiples of ``pitch`` (so
    two polygons sample consistent grids); boundary points are spaced at most
    ``pitch`` apart along every ring.
    """
    _check_polygon(poly)
    minx, miny, maxx, maxy = poly.bounds
    xs = np.arange(np.floor(minx / pitch) * pitch, maxx + pitch, pitch)
    ys = np.arange(np.floor(miny / pitch) * pitch, maxy + pitch, pitch)
    gx, gy = np.meshgrid(xs, ys)
    inner = np.column_stack([gx.ravel(), gy.ravel()])
    inner = inner[shapely.covers(poly, shapely.points(inner))]

    polys = poly.geoms if isinstance(poly, MultiPolygon) else [poly]
    chunks = [inner]
    for part in polys:
        for ring in [part.exterior, *part.interiors]:
            n = max(int(np.ceil(ring.length / pitch)), 1)
            along = np.linspace(0.0, ring.length, n, endpoint=False)
            chunks.append(shapely.get_coordinates(shapely.line_interpolate_point(ring, along)))
    return np.vstack(chunks)


def extended_hausdorff(a, b, f: float = 0.5, pitch: float = DEFAULT_PITCH) -> float:
    """f-quantile generalization of the Hausdorff distance between two polygons.

    Both polygons are discretized (interior + boundary, ``pitch`` miles);
    each point's distance to the other polygon's point set is the minimum
    pairwise distance, and the directional statistic is the f-quantile of
    those distances.  The result is the larger of the two directions.
    f = 1 recovers the classical Hausdorff distance of the point sets;
    f = 0.5 uses only the closest half of each region.
    """
    if not (0.0 < f <= 1.0):
        raise ValueError(f"f must be in (0, 1], got {f}")
    pa = discretize_polygon(a, pitch)
    pb = discretize_polygon(b, pitch)
    d_ab = cKDTree(pb).query(pa)[0]
    d_ba = cKDTree(pa).query(pb)[0]
    return float(max(np.quantile(d_ab, f), np.quantile(d_ba, f)))


# -- distance and weight matrices ---------------------------------------------

@dataclass(frozen=True)
class DistanceMatrix:
    """Symmetric nonnegative distance matrix; region-level or station-block."""

    values: np.ndarray
    kind: str                      # "region_hausdorff" or "block"
    c: float | None = None         # within-region constant (block kind)
    jitter_sd: float | None = None

    def __post_init__(self):
        v = self.values
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValueError("distance matrix must be square")
        if not np.allclose(v, v.T, atol=1e-12):
            raise ValueError("distance matrix must be symmetric")


@dataclass(frozen=True)
class WeightMatrix:
    """Inverse-distance spatial weights for the point-to-area model."""

    values: np.ndarray
    c: float
    jitter_sd: float | None = None

    def __post_init__(self):
        v = self.values
        if not np.all(v > 0):
            raise ValueError("weight matrix entries must be strictly positive")
        if not np.allclose(v, v.T, atol=1e-12):
            raise ValueError("weight matrix must be symmetric")

    @property
    def n(self) -> int:
        return self.values.shape[0]


def region_distance_matrix(regions: RegionSet, f: float = 0.5,
                           pitch: float = DEFAULT_PITCH) -> DistanceMatrix:
    """r x r matrix of pairwise extended Hausdorff distances, zero diagonal."""
    r = regions.r
    d = np.zeros((r, r))
    for i in range(r):
        for j in range(i + 1, r):
            d[i, j] = d[j, i] = extended_hausdorff(regions.polygons[i],
                                                   regions.polygons[j], f, pitch)
    return DistanceMatrix(values=d, kind="region_hausdorff")


def block_distance_matrix(d: DistanceMatrix, stations: StationSet,
                          c: float = DEFAULT_C) -> DistanceMatrix:
    """Expand region distances to an n x n station matrix, ``c`` within regions.

    Every entry between stations of regions i != j is the region distance
    d[i, j]; entries within a region (including the diagonal) are the
    constant ``c``, which must stay below every between-region distance.
    """
    vals = d.values
    r = vals.shape[0]
    if c <= 0:
        raise InvalidC(f"c must be positive, got {c}")
    if r > 1:
        off = vals[~np.eye(r, dtype=bool)]
        if c >= off.min():
            raise InvalidC(f"c={c} must be below the smallest between-region "
                           f"distance {off.min():.4g}")
    idx = stations.region_index
    block = vals[np.ix_(idx, idx)]
    same = idx[:, None] == idx[None, :]
    block = np.where(same, c, block)
    return DistanceMatrix(values=block, kind="block", c=c)


def jitter_symmetrize(dblock: DistanceMatrix, sd: float = DEFAULT_JITTER_SD,
                      seed: int = 0, max_retries: int = 100) -> DistanceMatrix:
    """Break the repeated-row structure of a block distance matrix.

    Adds independent Normal(0, sd) noise to the lower triangle (diagonal
    included) and mirrors it to the upper triangle.  Draws are retried with
    fresh noise up to ``max_retries`` times if any entry would go
    non-positive.
    """
    if sd <= 0:
        raise ValueError(f"jitter sd must be positive, got {sd}")
    base = dblock.values
    n = base.shape[0]
    rng = np.random.default_rng(seed)
    tril = np.tril_indices(n)
    for _ in range(max_retries):
        noise = np.zeros((n, n))
        noise[tril] = rng.normal(0.0, sd, size=len(tril[0]))
        jittered = base + noise
        jittered = np.tril(jittered) + np.tril(jittered, -1).T
        if np.all(jittered > 0):
            return DistanceMatrix(values=jittered, kind=dblock.kind,
                                  c=dblock.c, jitter_sd=sd)
    raise NonPositiveEntry(
        f"jitter sd={sd} kept producing non-positive distances after "
        f"{max_retries} retries")


def inverse_distance_weights(d: DistanceMatrix) -> WeightMatrix:
    """Reciprocal of each distance entry, scalar-normalized to a max of 1.

    Normalization by the maximum entry is applied whenever some weight
    exceeds 1 (always the case for c != 1, occasionally after jitter for
    c = 1); it rescales the admissible rho interval but leaves the fitted
    coefficients unchanged.
    """
    vals = d.values
    if np.any(vals <= 0):
        raise ZeroDistance("distance matrix has non-positive entries")
    w = 1.0 / vals
    wmax = w.max()
    if wmax > 1.0:
        w = w / wmax
    return WeightMatrix(values=w, c=d.c if d.c is not None else DEFAULT_C,
                        jitter_sd=d.jitter_sd)


def station_weight_matrix(regions: RegionSet, stations: StationSet,
                          f: float = 0.5, c: float = DEFAULT_C,
                          jitter_sd: float = DEFAULT_JITTER_SD, seed: int = 0,
                          pitch: float = DEFAULT_PITCH,
                          region_distances: DistanceMatrix | None = None) -> WeightMatrix:
    """Full pipeline: region distances -> block expansion -> jitter -> weights."""
    d = region_distances if region_distances is not None else \
        region_distance_matrix(regions, f=f, pitch=pitch)
    dblock = block_distance_matrix(d, stations, c=c)
    jittered = jitter_symmetrize(dblock, sd=jitter_sd, seed=seed)
    return inverse_distance_weights(jittered)
