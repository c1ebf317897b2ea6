import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, optimize, stats

from geoscale import (
    NoiseSpec,
    ParseError,
    PointCloud,
    embed_with_noise,
    generate_dome,
    generate_hourglass,
    load_csv,
    save_csv,
    subsample,
)
from geoscale.dataset import hourglass_area_density, hourglass_radius


class TestPointCloud:
    def test_rejects_single_point(self):
        with pytest.raises(ValueError, match="at least 2"):
            PointCloud(np.zeros((1, 3)))

    def test_rejects_nonfinite(self):
        pts = np.zeros((3, 2))
        pts[1, 0] = np.nan
        with pytest.raises(ValueError, match="finite"):
            PointCloud(pts)

    def test_shape_properties(self):
        cloud = PointCloud(np.arange(12.0).reshape(4, 3))
        assert cloud.n == 4
        assert cloud.ambient_dim == 3


class TestHourglass:
    def test_points_on_surface(self):
        cloud = generate_hourglass(1000, seed=7)
        assert cloud.points.shape == (1000, 3)
        x, y, z = cloud.points.T
        assert np.all(np.abs(z) <= 1.0)
        residual = x**2 + y**2 - hourglass_radius(z) ** 2
        assert np.abs(residual).max() < 1e-12

    def test_deterministic(self):
        a = generate_hourglass(1000, seed=7)
        b = generate_hourglass(1000, seed=7)
        assert np.array_equal(a.points, b.points)
        c = generate_hourglass(1000, seed=8)
        assert not np.array_equal(a.points, c.points)

    def test_rejects_tiny_n(self):
        with pytest.raises(ValueError, match="at least 10"):
            generate_hourglass(5, seed=0)

    def test_area_uniform_chi_squared(self):
        # Oracle: equal-area z-bands from quadrature of the area element.
        n, bands = 20000, 20
        total = integrate.quad(hourglass_area_density, -1.0, 1.0)[0]
        cum = lambda z: integrate.quad(hourglass_area_density, -1.0, z)[0]
        edges = [-1.0]
        for b in range(1, bands):
            edges.append(optimize.brentq(lambda z: cum(z) - total * b / bands, -1.0, 1.0))
        edges.append(1.0)

        cloud = generate_hourglass(n, seed=1)
        counts, _ = np.histogram(cloud.points[:, 2], bins=edges)
        chi2 = np.sum((counts - n / bands) ** 2) / (n / bands)
        assert chi2 < stats.chi2.ppf(0.99, bands - 1)


class TestDome:
    def test_on_upper_hemisphere(self):
        cloud = generate_dome(500, seed=3)
        norms = np.linalg.norm(cloud.points, axis=1)
        assert np.abs(norms - 1.0).max() < 1e-12
        assert np.all(cloud.points[:, 2] >= 0)

    def test_deterministic(self):
        a = generate_dome(500, seed=3)
        b = generate_dome(500, seed=3)
        assert np.array_equal(a.points, b.points)

    def test_mean_height(self):
        # analytic: the area-weighted mean of z over the hemisphere is 1/2
        cloud = generate_dome(50000, seed=2)
        assert abs(cloud.points[:, 2].mean() - 0.5) < 0.01


class TestEmbedWithNoise:
    def test_zero_noise_same_dim_is_identity(self):
        cloud = generate_dome(50, seed=0)
        out = embed_with_noise(cloud, NoiseSpec(ambient_dim=3, sigma=0.0, seed=1))
        assert np.array_equal(out.points, cloud.points)

    def test_zero_noise_pads_with_zeros(self):
        cloud = generate_dome(50, seed=0)
        out = embed_with_noise(cloud, NoiseSpec(ambient_dim=13, sigma=0.0, seed=1))
        assert out.ambient_dim == 13
        assert np.array_equal(out.points[:, :3], cloud.points)
        assert np.all(out.points[:, 3:] == 0.0)

    def test_noise_variance(self):
        cloud = generate_dome(10000, seed=4)
        out = embed_with_noise(cloud, NoiseSpec(ambient_dim=13, sigma=0.1, seed=5))
        assert out.points[:, 4].var() == pytest.approx(0.01, rel=0.05)

    def test_mean_squared_displacement(self):
        cloud = generate_dome(10000, seed=4)
        spec = NoiseSpec(ambient_dim=13, sigma=0.05, seed=6)
        out = embed_with_noise(cloud, spec)
        padded = np.zeros((cloud.n, 13))
        padded[:, :3] = cloud.points
        displacement = np.sum((out.points - padded) ** 2, axis=1).mean()
        assert displacement == pytest.approx(spec.sigma**2 * 13, rel=0.05)

    def test_rejects_small_ambient(self):
        cloud = generate_dome(50, seed=0)
        with pytest.raises(ValueError, match="ambient_dim"):
            embed_with_noise(cloud, NoiseSpec(ambient_dim=2, sigma=0.0, seed=0))

    def test_deterministic(self):
        cloud = generate_dome(100, seed=0)
        spec = NoiseSpec(ambient_dim=13, sigma=0.2, seed=9)
        assert np.array_equal(embed_with_noise(cloud, spec).points, embed_with_noise(cloud, spec).points)


class TestSubsample:
    def test_full_sample(self):
        cloud = generate_dome(200, seed=0)
        idx = subsample(cloud, 200, seed=1)
        assert sorted(idx) == list(range(200))

    def test_deterministic(self):
        cloud = generate_dome(1000, seed=0)
        assert np.array_equal(subsample(cloud, 200, seed=5), subsample(cloud, 200, seed=5))

    def test_distinct_and_in_range(self):
        cloud = generate_dome(1000, seed=0)
        idx = subsample(cloud, 200, seed=5)
        assert len(set(idx.tolist())) == 200
        assert idx.min() >= 0 and idx.max() < 1000

    def test_inclusion_frequency(self):
        # binomial: index 0 appears with probability n_eval / n
        cloud = generate_dome(1000, seed=0)
        trials = 2000
        hits = sum(0 in set(subsample(cloud, 200, seed=s).tolist()) for s in range(trials))
        p = 0.2
        bound = 3 * np.sqrt(p * (1 - p) / trials)
        assert abs(hits / trials - p) < bound

    def test_rejects_oversized(self):
        cloud = generate_dome(100, seed=0)
        with pytest.raises(ValueError, match="n_eval"):
            subsample(cloud, 101, seed=0)


class TestCsv:
    def test_round_trip(self, tmp_path):
        cloud = PointCloud(np.array([[0.1, -2.5], [1e-7, 3.0], [np.pi, 1.0 / 3.0]]))
        path = tmp_path / "c.csv"
        save_csv(cloud, path)
        back = load_csv(path)
        assert np.array_equal(back.points, cloud.points)

    def test_non_numeric_cell_location(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("1.0,2.0\nabc,3.0\n4.0,5.0\n")
        with pytest.raises(ParseError, match=r"row 2, col 1") as err:
            load_csv(path)
        assert err.value.row == 2
        assert err.value.col == 1

    def test_ragged_row(self, tmp_path):
        path = tmp_path / "ragged.csv"
        path.write_text("1.0,2.0\n3.0\n")
        with pytest.raises(ParseError, match="row 2"):
            load_csv(path)

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("")
        with pytest.raises(ParseError, match="empty"):
            load_csv(path)

    def test_header_detected(self, tmp_path):
        path = tmp_path / "h.csv"
        path.write_text("x,y\n1.0,2.0\n3.0,4.0\n")
        cloud = load_csv(path)
        assert cloud.points.shape == (2, 2)

    def test_large_shape(self, tmp_path):
        rng = np.random.default_rng(0)
        cloud = PointCloud(rng.standard_normal((1000, 13)))
        path = tmp_path / "big.csv"
        save_csv(cloud, path)
        back = load_csv(path)
        assert back.n == 1000 and back.ambient_dim == 13

    @settings(max_examples=50, deadline=None)
    @given(
        st.lists(
            st.lists(st.floats(allow_nan=False, allow_infinity=False, width=64), min_size=2, max_size=2),
            min_size=2,
            max_size=6,
        )
    )
    def test_round_trip_any_finite_doubles(self, rows, tmp_path_factory):
        cloud = PointCloud(np.array(rows, dtype=np.float64))
        path = tmp_path_factory.mktemp("csv") / "h.csv"
        save_csv(cloud, path)
        assert np.array_equal(load_csv(path).points, cloud.points)
