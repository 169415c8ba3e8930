import numpy as np
import pytest

from agrivol import DataError, DistrictPanel, Month, MonthlySeries
from agrivol.spatial import (
    Adjacency,
    CarConfig,
    SiteSet,
    SurfaceSpec,
    haversine_km,
    idw_at_points,
    idw_interpolate,
    knn_adjacency,
    leroux_car_smooth,
    month_seed,
    monthly_surfaces,
)


def square_sites(values=(1.0, 2.0, 3.0, 4.0)):
    return SiteSet(
        ["sw", "se", "nw", "ne"],
        [0.0, 0.0, 1.0, 1.0],
        [0.0, 1.0, 0.0, 1.0],
        list(values),
    )


def chain_adjacency(n):
    w = np.zeros((n, n))
    for i in range(n - 1):
        w[i, i + 1] = w[i + 1, i] = 1.0
    return Adjacency(w)


def car_posterior_closed_form(y, w_matrix, rho, tau2, sigma2):
    """E[mu + phi | y] by direct matrix algebra for fixed variances, flat mu."""
    n = y.size
    q = rho * (np.diag(w_matrix.sum(axis=1)) - w_matrix) + (1.0 - rho) * np.eye(n)
    prec = np.zeros((n + 1, n + 1))
    prec[0, 0] = n / sigma2
    prec[0, 1:] = 1.0 / sigma2
    prec[1:, 0] = 1.0 / sigma2
    prec[1:, 1:] = q / tau2 + np.eye(n) / sigma2
    rhs = np.concatenate([[y.sum() / sigma2], y / sigma2])
    mean = np.linalg.solve(prec, rhs)
    return mean[0] + mean[1:]


class TestHaversine:
    def test_known_distance(self):
        # one degree of latitude is ~111.2 km
        assert haversine_km(0.0, 0.0, 1.0, 0.0) == pytest.approx(111.19, abs=0.1)

    def test_symmetry_and_zero(self):
        assert haversine_km(12.3, 45.6, 12.3, 45.6) == 0.0
        assert haversine_km(10.0, 20.0, 30.0, 40.0) == haversine_km(30.0, 40.0, 10.0, 20.0)


class TestSiteSet:
    def test_validation(self):
        with pytest.raises(DataError):
            SiteSet(["a", "b"], [0.0, 1.0], [0.0, 1.0], [1.0, 2.0])
        with pytest.raises(DataError):
            SiteSet(["a", "b", "c"], [0.0, 0.0, 1.0], [0.0, 0.0, 1.0], [1.0, 2.0, 3.0])
        with pytest.raises(DataError):
            SiteSet(["a", "b", "c"], [0.0, 0.5, 1.0], [0.0, 0.5, 1.0], [1.0, np.nan, 3.0])

    def test_from_tuples(self):
        s = SiteSet.from_tuples([("a", 0.0, 0.0, 1.0), ("b", 1.0, 0.0, 2.0), ("c", 0.0, 1.0, 3.0)])
        assert len(s) == 3


class TestKnnAdjacency:
    def test_three_sites_forced_complete(self):
        sites = SiteSet(["a", "b", "c"], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 2.0, 3.0])
        adj = knn_adjacency(sites, k=2)
        expected = np.ones((3, 3)) - np.eye(3)
        np.testing.assert_array_equal(adj.matrix, expected)

    def test_unit_square_k1(self):
        # meridian convergence makes the polar edges shorter than the
        # equatorial one, so each corner pairs along a lat-0/lat-1 edge
        adj = knn_adjacency(square_sites(), k=1)
        w = adj.matrix
        np.testing.assert_array_equal(w, w.T)
        assert np.all(np.diag(w) == 0)
        assert np.all(w.sum(axis=1) >= 1)

    def test_symmetrization_is_or(self):
        # site d is far away: it selects a, but nothing selects it back
        sites = SiteSet(
            ["a", "b", "c", "d"],
            [0.0, 0.1, 0.2, 9.0],
            [0.0, 0.0, 0.0, 0.0],
            [1.0, 2.0, 3.0, 4.0],
        )
        adj = knn_adjacency(sites, k=1)
        assert adj.matrix[3].sum() >= 1
        np.testing.assert_array_equal(adj.matrix, adj.matrix.T)

    def test_too_few_sites(self):
        sites = SiteSet(["a", "b", "c"], [0.0, 1.0, 2.0], [0.0, 1.0, 2.0], [1.0, 2.0, 3.0])
        with pytest.raises(DataError):
            knn_adjacency(sites, k=3)


class TestAdjacencyInvariants:
    def test_rejects_asymmetric(self):
        w = np.zeros((3, 3))
        w[0, 1] = 1.0
        with pytest.raises(DataError):
            Adjacency(w)

    def test_rejects_nonzero_diagonal(self):
        w = np.ones((3, 3))
        with pytest.raises(DataError):
            Adjacency(w)

    def test_rejects_isolated_site(self):
        w = np.zeros((3, 3))
        w[0, 1] = w[1, 0] = 1.0
        with pytest.raises(DataError):
            Adjacency(w)


class TestLerouxCar:
    def test_rho_zero_shrinks_between_obs_and_grand_mean(self):
        y = np.array([0.0, 2.0, 4.0, 6.0, 10.0])
        cfg = CarConfig(rho=0.0, n_iter=6000, burn_in=1000, thin=5, seed=1)
        res = leroux_car_smooth(y, chain_adjacency(5), cfg)
        grand = y.mean()
        for obs, smooth in zip(y, res.smoothed):
            lo, hi = min(obs, grand), max(obs, grand)
            assert lo < smooth < hi

    def test_rho_zero_preserves_ordering(self):
        y = np.array([0.0, 2.0, 4.0, 6.0, 10.0])
        cfg = CarConfig(rho=0.0, n_iter=6000, burn_in=1000, thin=5, seed=2)
        res = leroux_car_smooth(y, chain_adjacency(5), cfg)
        assert np.all(np.diff(res.smoothed) > -3.0 * res.mc_std_err()[:-1])

    def test_two_site_closed_form_oracle(self):
        y = np.array([0.0, 1.0])
        adj = Adjacency(np.array([[0.0, 1.0], [1.0, 0.0]]))
        cfg = CarConfig(
            rho=0.5, n_iter=22000, burn_in=2000, thin=5, seed=3,
            tau2_fixed=0.5, sigma2_fixed=0.2,
        )
        res = leroux_car_smooth(y, adj, cfg)
        closed = car_posterior_closed_form(y, adj.matrix, rho=0.5, tau2=0.5, sigma2=0.2)
        np.testing.assert_array_less(np.abs(res.smoothed - closed), 3.0 * res.mc_std_err())

    def test_identical_observations_reproduced(self):
        y = np.full(4, 7.5)
        cfg = CarConfig(rho=0.6, n_iter=6000, burn_in=1000, thin=5, seed=4)
        res = leroux_car_smooth(y, chain_adjacency(4), cfg)
        np.testing.assert_allclose(res.smoothed, 7.5, atol=max(0.05, 4 * res.mc_std_err().max()))

    def test_seed_determinism(self):
        y = np.array([1.0, 3.0, 2.0, 5.0])
        cfg = CarConfig(n_iter=2000, burn_in=500, seed=5)
        a = leroux_car_smooth(y, chain_adjacency(4), cfg)
        b = leroux_car_smooth(y, chain_adjacency(4), cfg)
        np.testing.assert_array_equal(a.smoothed, b.smoothed)

    def test_disconnected_graph_warns(self):
        w = np.zeros((4, 4))
        w[0, 1] = w[1, 0] = 1.0
        w[2, 3] = w[3, 2] = 1.0
        cfg = CarConfig(rho=0.95, n_iter=200, burn_in=50, seed=6)
        with pytest.warns(UserWarning, match="disconnected"):
            leroux_car_smooth(np.array([1.0, 2.0, 3.0, 4.0]), Adjacency(w), cfg)

    def test_config_validation(self):
        with pytest.raises(DataError):
            CarConfig(rho=1.0)
        with pytest.raises(DataError):
            CarConfig(n_iter=100, burn_in=100)


class TestIdw:
    def test_exact_at_sites(self):
        sites = square_sites()
        got = idw_at_points(sites, sites.lats, sites.lons)
        np.testing.assert_array_equal(got, sites.values)

    def test_two_site_midpoint(self):
        got = idw_at_points(([0.0, 0.0], [0.0, 1.0], [0.0, 1.0]), [0.0], [0.5])
        assert got[0] == pytest.approx(0.5, abs=1e-12)

    def test_matches_bruteforce_formula(self):
        sites = square_sites()
        q_lat, q_lon = 0.3, 0.7
        d = np.array([
            haversine_km(q_lat, q_lon, la, lo) for la, lo in zip(sites.lats, sites.lons)
        ])
        w = d**-2.0
        expected = float(w @ sites.values / w.sum())
        got = idw_at_points(sites, [q_lat], [q_lon])
        assert got[0] == pytest.approx(expected, rel=1e-12)

    def test_convex_bound(self):
        rng = np.random.default_rng(7)
        sites = SiteSet(
            [f"s{i}" for i in range(10)],
            rng.uniform(0, 2, 10),
            rng.uniform(0, 2, 10),
            rng.uniform(-5, 5, 10),
        )
        q = rng.uniform(-1, 3, (200, 2))
        vals = idw_at_points(sites, q[:, 0], q[:, 1])
        assert np.all(vals >= sites.values.min())
        assert np.all(vals <= sites.values.max())


class TestSurface:
    def test_grid_cell_count(self):
        sites = square_sites()
        spec = SurfaceSpec(cell_size=0.05, padding=0.25)
        surf = idw_interpolate(sites, spec)
        n_lat = int(np.ceil((1.5) / 0.05))
        n_lon = int(np.ceil((1.5) / 0.05))
        assert surf.grid.shape == (n_lat, n_lon)

    def test_mask_is_site_hull(self):
        sites = square_sites()
        surf = idw_interpolate(sites, SurfaceSpec(cell_size=0.05))
        lats, lons = surf.lats, surf.lons
        # a point well inside the square is unmasked, a far corner is masked
        i_in = int(np.argmin(np.abs(lats - 0.5)))
        j_in = int(np.argmin(np.abs(lons - 0.5)))
        assert surf.mask[i_in, j_in]
        assert not surf.mask[0, 0]
        assert np.all(np.isfinite(surf.grid[surf.mask]))

    def test_explicit_boundary_polygon(self):
        sites = square_sites()
        poly = np.array([[0.4, 0.4], [0.4, 0.6], [0.6, 0.6], [0.6, 0.4]])
        surf = idw_interpolate(sites, SurfaceSpec(cell_size=0.05, boundary=poly))
        assert 0 < surf.mask.sum() < surf.mask.size

    def test_csv_export(self, tmp_path):
        sites = square_sites()
        surf = idw_interpolate(sites, SurfaceSpec(cell_size=0.25))
        path = tmp_path / "surface.csv"
        surf.write_csv(path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "lat,lon,value"
        assert len(lines) == 1 + surf.mask.sum()

    def test_cell_size_validation(self):
        with pytest.raises(DataError):
            SurfaceSpec(cell_size=0.0)


def volatility_panel(n_months=3, n_districts=5, seed=8):
    rng = np.random.default_rng(seed)
    start = Month(2020, 1)
    series = {}
    coords = {}
    for i in range(n_districts):
        name = f"d{i}"
        series[name] = MonthlySeries(start, 0.1 + 0.05 * rng.random(n_months), name)
        coords[name] = (20.0 + rng.random(), 80.0 + rng.random())
    return DistrictPanel("testland", series, coords)


class TestMonthlySurfaces:
    def test_one_month_panel_gives_one_surface(self):
        panel = volatility_panel(n_months=1)
        cfg = CarConfig(n_iter=500, burn_in=100, thin=2, seed=9)
        bundles = monthly_surfaces(panel, cfg, SurfaceSpec(cell_size=0.1))
        assert len(bundles) == 1
        assert bundles[0].month == Month(2020, 1)

    def test_missing_month_dropped(self, caplog):
        panel = volatility_panel(n_months=3)
        vals = panel.series["d0"].values.copy()
        vals[1] = np.nan
        panel.series["d0"] = MonthlySeries(Month(2020, 1), vals, "d0")
        cfg = CarConfig(n_iter=500, burn_in=100, thin=2, seed=10)
        import logging

        with caplog.at_level(logging.WARNING, logger="agrivol.spatial"):
            bundles = monthly_surfaces(panel, cfg, SurfaceSpec(cell_size=0.1))
        assert len(bundles) == 2
        assert any("skipping" in r.message for r in caplog.records)

    def test_deterministic_per_seed(self):
        panel = volatility_panel(n_months=2)
        cfg = CarConfig(n_iter=500, burn_in=100, thin=2, seed=11)
        spec = SurfaceSpec(cell_size=0.1)
        a = monthly_surfaces(panel, cfg, spec)
        b = monthly_surfaces(panel, cfg, spec)
        for ba, bb in zip(a, b):
            np.testing.assert_array_equal(ba.smoothed, bb.smoothed)
            np.testing.assert_array_equal(
                ba.surface.grid[ba.surface.mask], bb.surface.grid[bb.surface.mask]
            )

    def test_month_seed_is_stable(self):
        assert month_seed(42, Month(2021, 10)) == month_seed(42, Month(2021, 10))
        assert month_seed(42, Month(2021, 10)) != month_seed(42, Month(2021, 11))
        assert month_seed(42, Month(2021, 10)) != month_seed(43, Month(2021, 10))

    def test_output_files(self, tmp_path):
        panel = volatility_panel(n_months=2)
        cfg = CarConfig(n_iter=300, burn_in=100, thin=2, seed=12)
        monthly_surfaces(panel, cfg, SurfaceSpec(cell_size=0.1), out_dir=tmp_path, write_json=True)
        assert (tmp_path / "surface_2020-01.csv").exists()
        assert (tmp_path / "sites_2020-01.csv").exists()
        assert (tmp_path / "surface_2020-02.json").exists()
        header = (tmp_path / "sites_2020-01.csv").read_text().splitlines()[0]
        assert header == "district,lat,lon,raw,smoothed"

    def test_too_few_districts(self):
        panel = volatility_panel(n_districts=2)
        with pytest.raises(DataError):
            monthly_surfaces(panel, CarConfig(n_iter=200, burn_in=50, seed=13))
