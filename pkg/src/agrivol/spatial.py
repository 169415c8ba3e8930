"""Monthly spatial volatility surfaces.

Pipeline per month: district volatilities become a site set, a k-nearest-
neighbour graph over great-circle distances gives a symmetric binary
adjacency, a Leroux conditional-autoregressive model smooths the site values
by Gibbs sampling, and inverse-distance weighting interpolates the smoothed
values onto a fine lat/lon grid clipped to the region boundary (convex hull
of the sites unless a polygon is supplied).

The Leroux field has precision tau^-2 * Q(rho) with
Q(rho) = rho * (D_w - W) + (1 - rho) * I, which bridges independent effects
(rho = 0) and the intrinsic CAR limit (rho -> 1). rho stays fixed during
sampling so every conditional is conjugate and runs are reproducible.
"""
from __future__ import annotations

import csv
import json
import logging
import math
import warnings
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy.linalg import cho_solve, solve_triangular
from scipy.sparse.csgraph import connected_components
from scipy.spatial import ConvexHull, QhullError

from .errors import DataError, NumericalError
from .series import DistrictPanel, Month

__all__ = [
    "SiteSet",
    "Adjacency",
    "CarConfig",
    "CarResult",
    "SurfaceSpec",
    "VolatilitySurface",
    "SurfaceBundle",
    "haversine_km",
    "knn_adjacency",
    "leroux_car_smooth",
    "idw_at_points",
    "idw_interpolate",
    "monthly_surfaces",
]

log = logging.getLogger(__name__)

EARTH_RADIUS_KM = 6371.0
_COINCIDENT_DEG = 1e-9


def haversine_km(lat1, lon1, lat2, lon2):
    """Great-circle distance in km; broadcasts over array inputs."""
    lat1, lon1, lat2, lon2 = (np.radians(np.asarray(a, dtype=float)) for a in (lat1, lon1, lat2, lon2))
    dlat = lat2 - lat1
    dlon = lon2 - lon1
    a = np.sin(dlat / 2.0) ** 2 + np.cos(lat1) * np.cos(lat2) * np.sin(dlon / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_KM * np.arcsin(np.sqrt(np.clip(a, 0.0, 1.0)))


@dataclass
class SiteSet:
    """Observation sites: id, coordinates (degrees), and one value each."""

    ids: list[str]
    lats: np.ndarray
    lons: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        self.lats = np.asarray(self.lats, dtype=float)
        self.lons = np.asarray(self.lons, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        n = len(self.ids)
        if not (self.lats.size == self.lons.size == self.values.size == n):
            raise DataError("ids, lats, lons, and values must have equal length")
        if n < 3:
            raise DataError(f"need at least 3 sites, got {n}")
        if not np.all(np.isfinite(self.values)):
            raise DataError("site values must be finite")
        coords = {(float(a), float(b)) for a, b in zip(self.lats, self.lons)}
        if len(coords) != n:
            raise DataError("duplicate site coordinates")

    def __len__(self) -> int:
        return len(self.ids)

    @classmethod
    def from_tuples(cls, rows) -> "SiteSet":
        """Build from (district_id, lat, lon, value) tuples."""
        ids, lats, lons, vals = zip(*rows)
        return cls(list(ids), np.array(lats), np.array(lons), np.array(vals))


@dataclass
class Adjacency:
    matrix: np.ndarray

    def __post_init__(self) -> None:
        w = np.asarray(self.matrix, dtype=float)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise DataError(f"adjacency must be square, got shape {w.shape}")
        if not np.array_equal(w, w.T):
            raise DataError("adjacency must be symmetric")
        if np.any(np.diag(w) != 0.0):
            raise DataError("adjacency diagonal must be zero")
        if not np.all((w == 0.0) | (w == 1.0)):
            raise DataError("adjacency must be binary")
        if np.any(w.sum(axis=1) < 1.0):
            raise DataError("every site needs at least one neighbour")
        self.matrix = w

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def is_connected(self) -> bool:
        n_comp, _ = connected_components(self.matrix, directed=False)
        return bool(n_comp == 1)


@dataclass(frozen=True)
class CarConfig:
    """Sampler settings; tau2/sigma2 may be pinned for conjugate-oracle checks."""

    rho: float = 0.9
    tau2_prior: tuple[float, float] = (1.0, 0.01)
    sigma2_prior: tuple[float, float] = (1.0, 0.01)
    n_iter: int = 10_000
    burn_in: int = 2_000
    thin: int = 10
    seed: int = 0
    tau2_fixed: float | None = None
    sigma2_fixed: float | None = None

    def __post_init__(self) -> None:
        if not 0.0 <= self.rho < 1.0:
            raise DataError(f"rho must be in [0, 1), got {self.rho}")
        if not self.n_iter > self.burn_in >= 0:
            raise DataError(f"need n_iter > burn_in >= 0, got {(self.n_iter, self.burn_in)}")
        if self.thin < 1:
            raise DataError("thin must be >= 1")


@dataclass
class CarResult:
    """Posterior summaries: smoothed_i estimates E[mu + phi_i | y]."""

    smoothed: np.ndarray
    smoothed_std: np.ndarray
    n_draws: int
    mu_mean: float
    tau2_mean: float
    sigma2_mean: float

    def mc_std_err(self) -> np.ndarray:
        """Monte Carlo standard error of each smoothed value (thinned draws)."""
        return self.smoothed_std / math.sqrt(self.n_draws)


def knn_adjacency(sites: SiteSet, k: int = 2) -> Adjacency:
    """Symmetric binary adjacency: edge when either endpoint is a k-NN of the other."""
    n = len(sites)
    if k < 1:
        raise DataError("k must be >= 1")
    if n <= k:
        raise DataError(f"need more than k={k} sites, got {n}")
    d = haversine_km(sites.lats[:, None], sites.lons[:, None], sites.lats[None, :], sites.lons[None, :])
    np.fill_diagonal(d, np.inf)
    w = np.zeros((n, n))
    order = np.argsort(d, axis=1, kind="stable")
    for i in range(n):
        w[i, order[i, :k]] = 1.0
    w = np.maximum(w, w.T)
    return Adjacency(w)


def _inv_gamma_draw(rng: np.random.Generator, shape: float, rate: float) -> float:
    return 1.0 / rng.gamma(shape, 1.0 / rate)


def leroux_car_smooth(sites, adj: Adjacency, cfg: CarConfig) -> CarResult:
    """Gibbs sampler for y_i = mu + phi_i + e_i with a Leroux prior on phi.

    ``sites`` may be a SiteSet or a bare value array: the sampler only needs
    values and the adjacency (coordinates never enter). Conditionals: phi is
    multivariate normal, mu has a flat prior, tau^2 and sigma_e^2 are
    inverse-gamma (unless pinned). rho is fixed from the config. Identical
    seeds give identical output.
    """
    y = sites.values if isinstance(sites, SiteSet) else np.asarray(sites, dtype=float)
    n = y.size
    if adj.n != n:
        raise DataError(f"adjacency size {adj.n} does not match {n} sites")
    if not adj.is_connected() and cfg.rho > 0.8:
        warnings.warn(
            f"adjacency graph is disconnected; the Leroux precision becomes "
            f"singular as rho -> 1 (rho={cfg.rho})",
            stacklevel=2,
        )
    w = adj.matrix
    q = cfg.rho * (np.diag(w.sum(axis=1)) - w) + (1.0 - cfg.rho) * np.eye(n)

    rng = np.random.default_rng(cfg.seed)
    mu = float(y.mean())
    phi = np.zeros(n)
    spread = float(y.var()) if y.var() > 0 else 1.0
    tau2 = cfg.tau2_fixed if cfg.tau2_fixed is not None else spread
    sigma2 = cfg.sigma2_fixed if cfg.sigma2_fixed is not None else spread
    a_tau, b_tau = cfg.tau2_prior
    a_sig, b_sig = cfg.sigma2_prior

    kept: list[np.ndarray] = []
    mu_draws = []
    tau2_draws = []
    sigma2_draws = []
    eye = np.eye(n)
    for it in range(cfg.n_iter):
        # phi | rest
        prec = q / tau2 + eye / sigma2
        chol = np.linalg.cholesky(prec)
        rhs = (y - mu) / sigma2
        mean = cho_solve((chol, True), rhs)
        z = rng.standard_normal(n)
        phi = mean + solve_triangular(chol.T, z, lower=False)
        # mu | rest (flat prior)
        mu = float(rng.normal((y - phi).mean(), math.sqrt(sigma2 / n)))
        # variances | rest
        if cfg.tau2_fixed is None:
            tau2 = _inv_gamma_draw(rng, a_tau + 0.5 * n, b_tau + 0.5 * float(phi @ q @ phi))
        if cfg.sigma2_fixed is None:
            resid = y - mu - phi
            sigma2 = _inv_gamma_draw(rng, a_sig + 0.5 * n, b_sig + 0.5 * float(resid @ resid))
        if not (np.isfinite(mu) and np.all(np.isfinite(phi)) and np.isfinite(tau2) and np.isfinite(sigma2)):
            raise NumericalError(f"CAR sampler produced a non-finite draw at iteration {it}")
        if it >= cfg.burn_in and (it - cfg.burn_in) % cfg.thin == 0:
            kept.append(mu + phi)
            mu_draws.append(mu)
            tau2_draws.append(tau2)
            sigma2_draws.append(sigma2)

    draws = np.vstack(kept)
    return CarResult(
        smoothed=draws.mean(axis=0),
        smoothed_std=draws.std(axis=0, ddof=1),
        n_draws=draws.shape[0],
        mu_mean=float(np.mean(mu_draws)),
        tau2_mean=float(np.mean(tau2_draws)),
        sigma2_mean=float(np.mean(sigma2_draws)),
    )


@dataclass(frozen=True)
class SurfaceSpec:
    """Grid geometry and IDW settings for surface construction."""

    cell_size: float = 0.01
    padding: float = 0.25
    power: float = 2.0
    bounding_box: tuple[float, float, float, float] | None = None  # lat0, lat1, lon0, lon1
    boundary: np.ndarray | None = None  # polygon vertices (lat, lon); default: site hull

    def __post_init__(self) -> None:
        if self.cell_size <= 0.0:
            raise DataError("cell size must be positive")
        if self.power <= 0.0:
            raise DataError("IDW power must be positive")


@dataclass
class VolatilitySurface:
    month: Month
    lat0: float
    lon0: float
    cell_size: float
    grid: np.ndarray  # (n_lat, n_lon), NaN outside the mask
    mask: np.ndarray  # True inside the region boundary

    @property
    def lats(self) -> np.ndarray:
        return self.lat0 + self.cell_size * np.arange(self.grid.shape[0])

    @property
    def lons(self) -> np.ndarray:
        return self.lon0 + self.cell_size * np.arange(self.grid.shape[1])

    def write_csv(self, path: str | Path) -> None:
        """Rows (lat, lon, value) for every cell inside the mask."""
        lats, lons = self.lats, self.lons
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["lat", "lon", "value"])
            for i in range(self.grid.shape[0]):
                for j in range(self.grid.shape[1]):
                    if self.mask[i, j]:
                        writer.writerow([f"{lats[i]:.4f}", f"{lons[j]:.4f}", repr(float(self.grid[i, j]))])

    def write_json(self, path: str | Path) -> None:
        doc = {
            "month": str(self.month),
            "lat0": self.lat0,
            "lon0": self.lon0,
            "cell_size": self.cell_size,
            "shape": list(self.grid.shape),
            "grid": [[None if not self.mask[i, j] else float(self.grid[i, j])
                      for j in range(self.grid.shape[1])]
                     for i in range(self.grid.shape[0])],
        }
        Path(path).write_text(json.dumps(doc, sort_keys=True))


def _point_in_polygon(lats, lons, poly: np.ndarray) -> np.ndarray:
    """Even-odd rule, vectorized over query points; boundary points count inside."""
    px, py = np.asarray(lats, dtype=float), np.asarray(lons, dtype=float)
    inside = np.zeros(px.shape, dtype=bool)
    on_edge = np.zeros(px.shape, dtype=bool)
    n = poly.shape[0]
    for k in range(n):
        ax, ay = poly[k]
        bx, by = poly[(k + 1) % n]
        cross = (bx - ax) * (py - ay) - (by - ay) * (px - ax)
        within = (np.minimum(ax, bx) - 1e-12 <= px) & (px <= np.maximum(ax, bx) + 1e-12) & (
            np.minimum(ay, by) - 1e-12 <= py) & (py <= np.maximum(ay, by) + 1e-12)
        on_edge |= within & (np.abs(cross) < 1e-12)
        crosses = ((ax > px) != (bx > px)) & (
            py < (by - ay) * (px - ax) / (bx - ax + np.where(bx == ax, 1e-300, 0.0)) + ay
        )
        inside ^= crosses
    return inside | on_edge


def _boundary_polygon(s_lat: np.ndarray, s_lon: np.ndarray, spec: SurfaceSpec) -> np.ndarray | None:
    if spec.boundary is not None:
        poly = np.asarray(spec.boundary, dtype=float)
        if poly.ndim != 2 or poly.shape[1] != 2 or poly.shape[0] < 3:
            raise DataError("boundary polygon needs shape (n >= 3, 2)")
        return poly
    pts = np.column_stack([s_lat, s_lon])
    if pts.shape[0] < 3:
        return None
    try:
        hull = ConvexHull(pts)
    except QhullError:
        log.warning("degenerate site geometry; surface mask disabled")
        return None
    return pts[hull.vertices]


def _site_arrays(sites) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Accept a SiteSet or a bare (lats, lons, values) triple (n >= 1)."""
    if isinstance(sites, SiteSet):
        return sites.lats, sites.lons, sites.values
    lats, lons, values = (np.atleast_1d(np.asarray(a, dtype=float)) for a in sites)
    if lats.size < 1 or not (lats.size == lons.size == values.size):
        raise DataError("site arrays must be non-empty and of equal length")
    if not np.all(np.isfinite(values)):
        raise DataError("site values must be finite")
    return lats, lons, values


def idw_at_points(sites, lats, lons, power: float = 2.0) -> np.ndarray:
    """Inverse-distance-weighted values at arbitrary query points.

    A query within 1e-9 degrees of a site returns that site's value exactly;
    results are clipped to the convex bound [min(values), max(values)] to
    keep floating-point rounding from leaking past it.
    """
    s_lat, s_lon, s_val = _site_arrays(sites)
    q_lat = np.atleast_1d(np.asarray(lats, dtype=float))
    q_lon = np.atleast_1d(np.asarray(lons, dtype=float))
    d_km = haversine_km(q_lat[:, None], q_lon[:, None], s_lat[None, :], s_lon[None, :])
    coincident = (np.abs(q_lat[:, None] - s_lat[None, :]) < _COINCIDENT_DEG) & (
        np.abs(q_lon[:, None] - s_lon[None, :]) < _COINCIDENT_DEG
    ) | (d_km == 0.0)
    with np.errstate(divide="ignore"):
        weights = d_km ** (-power)
    out = np.empty(q_lat.size)
    hit_any = coincident.any(axis=1)
    for idx in np.nonzero(hit_any)[0]:
        out[idx] = s_val[np.argmax(coincident[idx])]
    free = ~hit_any
    if np.any(free):
        w_free = weights[free]
        out[free] = (w_free @ s_val) / w_free.sum(axis=1)
    return np.clip(out, s_val.min(), s_val.max())


def idw_interpolate(sites, spec: SurfaceSpec = SurfaceSpec(), month: Month = Month(2000, 1),
                    values: np.ndarray | None = None) -> VolatilitySurface:
    """Interpolate (optionally smoothed) site values onto the lat/lon grid.

    The bounding box is the site extent padded by ``spec.padding`` degrees
    unless overridden; cell count per axis is ceil(extent / cell_size).
    """
    s_lat, s_lon, s_val = _site_arrays(sites)
    if values is not None:
        s_val = np.asarray(values, dtype=float)
        if s_val.size != s_lat.size:
            raise DataError("replacement values must match the number of sites")
    if spec.bounding_box is not None:
        lat_min, lat_max, lon_min, lon_max = spec.bounding_box
    else:
        lat_min = s_lat.min() - spec.padding
        lat_max = s_lat.max() + spec.padding
        lon_min = s_lon.min() - spec.padding
        lon_max = s_lon.max() + spec.padding
    if not (lat_max > lat_min and lon_max > lon_min):
        raise DataError("empty bounding box")
    n_lat = math.ceil((lat_max - lat_min) / spec.cell_size)
    n_lon = math.ceil((lon_max - lon_min) / spec.cell_size)
    lats = lat_min + spec.cell_size * np.arange(n_lat)
    lons = lon_min + spec.cell_size * np.arange(n_lon)
    glat, glon = np.meshgrid(lats, lons, indexing="ij")
    flat_lat = glat.ravel()
    flat_lon = glon.ravel()

    poly = _boundary_polygon(s_lat, s_lon, spec)
    if poly is None:
        mask = np.ones(flat_lat.size, dtype=bool)
    else:
        mask = _point_in_polygon(flat_lat, flat_lon, poly)

    grid = np.full(flat_lat.size, np.nan)
    if mask.any():
        grid[mask] = idw_at_points((s_lat, s_lon, s_val), flat_lat[mask], flat_lon[mask], power=spec.power)
    return VolatilitySurface(
        month=month,
        lat0=float(lat_min),
        lon0=float(lon_min),
        cell_size=spec.cell_size,
        grid=grid.reshape(n_lat, n_lon),
        mask=mask.reshape(n_lat, n_lon),
    )


@dataclass
class SurfaceBundle:
    """One month's outputs: the surface plus raw and smoothed site values."""

    month: Month
    surface: VolatilitySurface
    site_ids: list[str]
    lats: np.ndarray
    lons: np.ndarray
    raw: np.ndarray
    smoothed: np.ndarray

    def write_sites_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["district", "lat", "lon", "raw", "smoothed"])
            for i, name in enumerate(self.site_ids):
                writer.writerow([
                    name, f"{self.lats[i]:.4f}", f"{self.lons[i]:.4f}",
                    repr(float(self.raw[i])), repr(float(self.smoothed[i])),
                ])


def month_seed(global_seed: int, month: Month) -> int:
    """Stable per-month sampler seed so parallel and serial runs agree."""
    return int(np.random.SeedSequence([int(global_seed), month.index]).generate_state(1)[0])


def monthly_surfaces(
    panel: DistrictPanel,
    car_cfg: CarConfig = CarConfig(),
    spec: SurfaceSpec = SurfaceSpec(),
    k: int = 2,
    out_dir: str | Path | None = None,
    write_json: bool = False,
) -> list[SurfaceBundle]:
    """Smooth and interpolate every month of a district volatility panel.

    Months with a missing district value are dropped with a logged warning.
    When ``out_dir`` is given, each month writes ``surface_YYYY-MM.csv`` and
    ``sites_YYYY-MM.csv`` (plus optional gridded JSON).
    """
    panel.require_aligned()
    names = panel.districts
    if len(names) < 3:
        raise DataError(f"need at least 3 districts, got {len(names)}")
    lats = np.array([panel.coords[n][0] for n in names])
    lons = np.array([panel.coords[n][1] for n in names])
    first = panel.series[names[0]]
    out_path = Path(out_dir) if out_dir is not None else None
    if out_path is not None:
        out_path.mkdir(parents=True, exist_ok=True)

    bundles: list[SurfaceBundle] = []
    for t in range(len(first)):
        month = first.start.shift(t)
        values = np.array([panel.series[n].values[t] for n in names])
        if not np.all(np.isfinite(values)):
            log.warning("skipping %s: missing district values", month)
            continue
        sites = SiteSet(list(names), lats, lons, values)
        adj = knn_adjacency(sites, k=k)
        cfg_m = replace(car_cfg, seed=month_seed(car_cfg.seed, month))
        result = leroux_car_smooth(sites, adj, cfg_m)
        surface = idw_interpolate(sites, spec, month=month, values=result.smoothed)
        bundle = SurfaceBundle(
            month=month,
            surface=surface,
            site_ids=list(names),
            lats=lats,
            lons=lons,
            raw=values,
            smoothed=result.smoothed,
        )
        bundles.append(bundle)
        if out_path is not None:
            surface.write_csv(out_path / f"surface_{month}.csv")
            bundle.write_sites_csv(out_path / f"sites_{month}.csv")
            if write_json:
                surface.write_json(out_path / f"surface_{month}.json")
    return bundles
