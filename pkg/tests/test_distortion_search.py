import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import geoscale.distortion_search as ds
from geoscale import (
    DistortionUndefinedError,
    MetricEstimate,
    NonInvertibleMetricError,
    PointCloud,
    SelectionError,
    compute_distortion,
    log_grid,
    pairwise_sq_dists,
    search_grid,
    select_bandwidth,
    spectral_norm,
    subsample,
)
from tests.conftest import make_flat_plane


def power_iteration_norm(a, iterations=10000, seed=0):
    """Independent oracle: power iteration on A^2 for the top |eigenvalue|."""
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(a.shape[0])
    v /= np.linalg.norm(v)
    for _ in range(iterations):
        v = a @ (a @ v)
        norm = np.linalg.norm(v)
        if norm == 0.0:
            return 0.0
        v /= norm
    return float(np.sqrt(v @ (a @ (a @ v))))


class TestSpectralNorm:
    def test_zero_matrix(self):
        assert spectral_norm(np.zeros((3, 3))) == 0.0

    def test_diagonal_deviation(self):
        assert spectral_norm(np.diag([2.0, 1.0]) - np.eye(2)) == pytest.approx(1.0, abs=1e-15)

    def test_negative_eigenvalue_counts(self):
        assert spectral_norm(np.diag([0.5, -3.0])) == pytest.approx(3.0, abs=1e-15)

    def test_rejects_asymmetric(self):
        with pytest.raises(ValueError, match="symmetric"):
            spectral_norm(np.array([[0.0, 1.0], [0.0, 0.0]]))

    def test_matches_power_iteration(self):
        rng = np.random.default_rng(20)
        for trial in range(20):
            m = rng.standard_normal((4, 4))
            a = 0.5 * (m + m.T)
            assert spectral_norm(a) == pytest.approx(power_iteration_norm(a, seed=trial), abs=1e-10)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(1, 6), st.integers(0, 10_000))
    def test_matches_eigvalsh(self, size, seed):
        rng = np.random.default_rng(seed)
        m = rng.standard_normal((size, size))
        a = 0.5 * (m + m.T)
        assert spectral_norm(a) == pytest.approx(np.abs(np.linalg.eigvalsh(a)).max(), abs=1e-12)


class TestComputeDistortion:
    def test_all_identity_metrics_give_zero(self, flat_plane_small, monkeypatch):
        monkeypatch.setattr(ds, "riemannian_metric", lambda *a, **k: MetricEstimate(np.eye(2)))
        res = compute_distortion(flat_plane_small, 0.1, 2, [0, 1, 2])
        assert res.distortion == 0.0

    def test_mean_of_squares(self, flat_plane_small, monkeypatch):
        metrics = {0: np.diag([2.0, 1.0]), 1: np.eye(2)}

        def fake(frame, index, lap, dual=True):
            return MetricEstimate(metrics[index])

        monkeypatch.setattr(ds, "riemannian_metric", fake)
        res = compute_distortion(flat_plane_small, 0.1, 2, [0, 1])
        assert res.distortion == pytest.approx(0.5, abs=1e-15)
        assert dict(res.per_point) == {0: 1.0, 1: 0.0}

    def test_unsquared_switch(self, flat_plane_small, monkeypatch):
        metrics = {0: np.diag([3.0, 1.0]), 1: np.eye(2)}
        monkeypatch.setattr(
            ds, "riemannian_metric", lambda f, i, l, dual=True: MetricEstimate(metrics[i])
        )
        res = compute_distortion(flat_plane_small, 0.1, 2, [0, 1], squared=False)
        assert res.distortion == pytest.approx(1.0, abs=1e-15)

    def test_failures_recorded_and_excluded(self, flat_plane_small, monkeypatch):
        def fake(frame, index, lap, dual=True):
            if index == 0:
                raise NonInvertibleMetricError(index, "singular")
            return MetricEstimate(np.diag([1.5, 1.0]))

        monkeypatch.setattr(ds, "riemannian_metric", fake)
        res = compute_distortion(flat_plane_small, 0.1, 2, [0, 1, 2], dual=False)
        assert res.failures == [0]
        assert res.n_evaluated == 2
        assert res.distortion == pytest.approx(0.25, abs=1e-15)

    def test_all_failed_raises(self, flat_plane_small, monkeypatch):
        def fake(frame, index, lap, dual=True):
            raise NonInvertibleMetricError(index, "singular")

        monkeypatch.setattr(ds, "riemannian_metric", fake)
        with pytest.raises(DistortionUndefinedError):
            compute_distortion(flat_plane_small, 0.1, 2, [0, 1], dual=False)

    def test_rejects_bad_epsilon(self, flat_plane_small):
        with pytest.raises(ValueError, match="epsilon"):
            compute_distortion(flat_plane_small, -1.0, 2, [0])

    def test_rejects_empty_indices(self, flat_plane_small):
        with pytest.raises(ValueError, match="empty"):
            compute_distortion(flat_plane_small, 0.1, 2, [])

    def test_u_shape_on_flat_plane(self, flat_plane_small):
        sq = pairwise_sq_dists(flat_plane_small)
        grid = search_grid(sq, count=12)
        idx = subsample(flat_plane_small, 100, seed=3)
        values = [
            compute_distortion(flat_plane_small, float(e), 2, idx, sq_dists=sq).distortion
            for e in grid.values
        ]
        best = int(np.argmin(values))
        assert 0 < best < len(values) - 1
        assert values[0] > 3 * values[best]
        assert values[-1] > 3 * values[best]


def canned_selector(monkeypatch, cloud, curve_values, failures=None):
    failures = failures or {}
    grid = log_grid(1.0, 100.0, len(curve_values))

    def fake(cloud_, epsilon, dim, indices, dual=True, squared=True, sq_dists=None):
        j = int(np.argmin(np.abs(grid.values - epsilon)))
        n_fail = failures.get(j, 0)
        per_point = [(int(i), 0.0) for i in list(indices)[n_fail:]]
        return ds.DistortionResult(epsilon, curve_values[j], per_point, list(range(n_fail)))

    monkeypatch.setattr(ds, "compute_distortion", fake)
    return grid


class TestSelectBandwidth:
    def test_argmin(self, flat_plane_small, monkeypatch):
        grid = canned_selector(monkeypatch, flat_plane_small, [3.0, 1.0, 2.0])
        curve = select_bandwidth(flat_plane_small, 1, grid, n_eval=10, seed=0)
        assert curve.eps_hat == grid.values[1]

    def test_tie_takes_smallest(self, flat_plane_small, monkeypatch):
        grid = canned_selector(monkeypatch, flat_plane_small, [2.0, 1.0, 1.0])
        curve = select_bandwidth(flat_plane_small, 1, grid, n_eval=10, seed=0)
        assert curve.eps_hat == grid.values[1]

    def test_unreliable_grid_point_excluded(self, flat_plane_small, monkeypatch):
        # lowest distortion sits where 30% of points failed: not eligible
        grid = canned_selector(
            monkeypatch, flat_plane_small, [2.0, 0.1, 1.0], failures={1: 3}
        )
        curve = select_bandwidth(flat_plane_small, 1, grid, n_eval=10, seed=0)
        assert curve.eps_hat == grid.values[2]
        assert not curve.results[1].reliable

    def test_all_unreliable_raises(self, flat_plane_small, monkeypatch):
        grid = canned_selector(
            monkeypatch, flat_plane_small, [1.0, 1.0, 1.0], failures={0: 10, 1: 10, 2: 10}
        )
        with pytest.raises(SelectionError):
            select_bandwidth(flat_plane_small, 1, grid, n_eval=10, seed=0)

    def test_deterministic(self, flat_plane_small):
        sq = pairwise_sq_dists(flat_plane_small)
        grid = search_grid(sq, count=8)
        a = select_bandwidth(flat_plane_small, 1, grid, n_eval=50, seed=5)
        b = select_bandwidth(flat_plane_small, 1, grid, n_eval=50, seed=5)
        assert a.eps_hat == b.eps_hat
        for ra, rb in zip(a.results, b.results):
            assert ra.distortion == rb.distortion
            assert ra.per_point == rb.per_point

    def test_parallel_matches_serial(self, flat_plane_small):
        sq = pairwise_sq_dists(flat_plane_small)
        grid = search_grid(sq, count=6)
        serial = select_bandwidth(flat_plane_small, 1, grid, n_eval=40, seed=2, max_workers=1)
        parallel = select_bandwidth(flat_plane_small, 1, grid, n_eval=40, seed=2, max_workers=3)
        assert serial.eps_hat == parallel.eps_hat
        for ra, rb in zip(serial.results, parallel.results):
            assert ra.distortion == rb.distortion
            assert ra.per_point == rb.per_point

    def test_scale_covariance(self, flat_plane_small):
        sq = pairwise_sq_dists(flat_plane_small)
        grid = search_grid(sq, count=8)
        scaled_cloud = PointCloud(2.0 * flat_plane_small.points)
        scaled_grid = log_grid(2.0 * grid.eps_min, 2.0 * grid.eps_max, 8)
        a = select_bandwidth(flat_plane_small, 2, grid, n_eval=60, seed=1)
        b = select_bandwidth(scaled_cloud, 2, scaled_grid, n_eval=60, seed=1)
        assert b.eps_hat == pytest.approx(2.0 * a.eps_hat, rel=1e-12)

    def test_half_sample_consistency(self):
        cloud = make_flat_plane(800, seed=21)
        sq = pairwise_sq_dists(cloud)
        grid = search_grid(sq, count=6)
        rng = np.random.default_rng(0)
        perm = rng.permutation(cloud.n)
        halves = [np.sort(perm[:400]), np.sort(perm[400:])]
        for eps in grid.values[2:5]:
            stats = []
            for half in halves:
                res = compute_distortion(cloud, float(eps), 2, half, sq_dists=sq)
                norms = np.array([v for _, v in res.per_point])
                stats.append((norms.mean(), norms.std(ddof=1) / np.sqrt(norms.size)))
            (m1, se1), (m2, se2) = stats
            assert abs(m1 - m2) < 3 * np.hypot(se1, se2)

    def test_rejects_oversized_subsample(self, flat_plane_small):
        grid = log_grid(0.1, 1.0, 3)
        with pytest.raises(ValueError, match="n_eval"):
            select_bandwidth(flat_plane_small, 1, grid, n_eval=601, seed=0)


class TestCurveSerialization:
    def test_csv_and_json(self, flat_plane_small, tmp_path):
        sq = pairwise_sq_dists(flat_plane_small)
        grid = search_grid(sq, count=5)
        curve = select_bandwidth(flat_plane_small, 1, grid, n_eval=30, seed=0)
        csv_path = tmp_path / "curve.csv"
        curve.write_csv(csv_path)
        lines = csv_path.read_text().strip().split("\n")
        assert lines[0] == "epsilon,distortion,n_evaluated,n_failed"
        assert len(lines) == 6

        json_path = tmp_path / "curve.json"
        curve.write_json(json_path)
        payload = json.loads(json_path.read_text())
        assert payload["eps_hat"] == curve.eps_hat
        assert len(payload["results"]) == 5
        assert all(len(r["per_point"]) == 30 for r in payload["results"])
