"""Geometric-consistency distortion of a candidate bandwidth, and the
grid search that picks the bandwidth minimizing it.

At each candidate bandwidth the dual metric is estimated at a fixed
evaluation subsample; its spectral-norm deviation from the identity,
averaged (squared by default) over the subsample, is the distortion.
The selected bandwidth is the grid argmin.
"""

from __future__ import annotations

import csv
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .dataset import PointCloud, subsample
from .kernel_laplacian import EpsilonGrid, heat_kernel, pairwise_sq_dists, renormalized_laplacian
from .tangent_metric import NonInvertibleMetricError, riemannian_metric, tangent_projection

MAX_FAILURE_FRACTION = 0.2


class DistortionUndefinedError(RuntimeError):
    """No evaluation point yielded a usable metric at this bandwidth."""


class SelectionError(RuntimeError):
    """No grid bandwidth produced a reliable distortion value."""


@dataclass
class DistortionResult:
    """Distortion at one bandwidth.

    per_point holds (index, deviation-norm) pairs for the points that
    evaluated; failures lists the points whose metric could not be
    computed (inverse variant only). The distortion excludes failures.
    """

    epsilon: float
    distortion: float
    per_point: list[tuple[int, float]]
    failures: list[int]

    @property
    def n_evaluated(self) -> int:
        return len(self.per_point)

    @property
    def n_failed(self) -> int:
        return len(self.failures)

    @property
    def reliable(self) -> bool:
        total = self.n_evaluated + self.n_failed
        return (
            total > 0
            and np.isfinite(self.distortion)
            and self.n_failed <= MAX_FAILURE_FRACTION * total
        )


@dataclass
class DistortionCurve:
    """Distortion over a whole grid plus the selected bandwidth."""

    results: list[DistortionResult]
    eps_hat: float
    dim: int
    n_eval: int
    seed: int

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["epsilon", "distortion", "n_evaluated", "n_failed"])
            for res in self.results:
                writer.writerow(
                    [f"{res.epsilon:.17g}", f"{res.distortion:.17g}", res.n_evaluated, res.n_failed]
                )

    def to_dict(self) -> dict:
        return {
            "eps_hat": self.eps_hat,
            "dim": self.dim,
            "n_eval": self.n_eval,
            "seed": self.seed,
            "results": [
                {
                    "epsilon": res.epsilon,
                    "distortion": res.distortion if np.isfinite(res.distortion) else None,
                    "reliable": res.reliable,
                    "per_point": [[int(i), float(v)] for i, v in res.per_point],
                    "failures": [int(i) for i in res.failures],
                }
                for res in self.results
            ],
        }

    def write_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def spectral_norm(a: np.ndarray) -> float:
    """Largest absolute eigenvalue of a symmetric matrix."""
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("input must be a square matrix")
    asym = np.abs(a - a.T).max() if a.size else 0.0
    if asym > 1e-8 * max(1.0, np.abs(a).max()):
        raise ValueError(f"input must be symmetric (asymmetry {asym:.3e})")
    sym = 0.5 * (a + a.T)
    return float(np.max(np.abs(np.linalg.eigvalsh(sym))))


def compute_distortion(
    cloud: PointCloud,
    epsilon: float,
    dim: int,
    eval_indices,
    dual: bool = True,
    squared: bool = True,
    sq_dists: np.ndarray | None = None,
) -> DistortionResult:
    """Distortion of the bandwidth `epsilon` over the given points.

    Builds the kernel and Laplacian once, estimates the metric at every
    evaluation index, and averages the (squared) spectral deviation
    from the identity. Failed metric inversions are excluded from the
    average and reported; raises DistortionUndefinedError if nothing
    evaluates.
    """
    if not np.isfinite(epsilon) or epsilon <= 0:
        raise ValueError(f"epsilon must be positive and finite, got {epsilon}")
    eval_indices = np.atleast_1d(np.asarray(eval_indices, dtype=int))
    if eval_indices.size == 0:
        raise ValueError("eval_indices must not be empty")
    if sq_dists is None:
        sq_dists = pairwise_sq_dists(cloud)
    w = heat_kernel(sq_dists, epsilon)
    lap = renormalized_laplacian(w)
    eye = np.eye(dim)

    per_point: list[tuple[int, float]] = []
    failures: list[int] = []
    for i in eval_indices:
        frame = tangent_projection(cloud, w.weights[i], dim)
        try:
            estimate = riemannian_metric(frame, int(i), lap, dual=dual)
        except NonInvertibleMetricError:
            failures.append(int(i))
            continue
        per_point.append((int(i), spectral_norm(estimate.matrix - eye)))

    if not per_point:
        raise DistortionUndefinedError(
            f"metric computation failed at every evaluation point for epsilon={epsilon:.6g}"
        )
    norms = np.array([v for _, v in per_point])
    # the inverse variant can return astronomically large deviations;
    # an inf mean is meaningful (the grid point is unreliable)
    with np.errstate(over="ignore"):
        distortion = float(np.mean(np.square(norms) if squared else norms))
    return DistortionResult(float(epsilon), distortion, per_point, failures)


def _grid_point_task(args) -> DistortionResult:
    cloud_points, epsilon, dim, indices, dual, squared = args
    cloud = PointCloud(cloud_points)
    try:
        return compute_distortion(cloud, epsilon, dim, indices, dual=dual, squared=squared)
    except DistortionUndefinedError:
        return DistortionResult(float(epsilon), float("nan"), [], [int(i) for i in indices])


def select_bandwidth(
    cloud: PointCloud,
    dim: int,
    grid: EpsilonGrid,
    n_eval: int = 200,
    seed: int = 0,
    dual: bool = True,
    squared: bool = True,
    max_workers: int = 1,
) -> DistortionCurve:
    """Pick the grid bandwidth with minimal distortion.

    One evaluation subsample, drawn once from `seed`, is shared by all
    grid points so the comparison across bandwidths is paired. Grid
    points where more than 20% of the subsample fails are kept in the
    curve but excluded from the argmin; ties go to the smaller
    bandwidth.
    """
    if n_eval > cloud.n:
        raise ValueError(f"n_eval {n_eval} exceeds cloud size {cloud.n}")
    indices = subsample(cloud, n_eval, seed)

    if max_workers > 1:
        tasks = [
            (cloud.points, float(eps), dim, indices, dual, squared) for eps in grid.values
        ]
        with ProcessPoolExecutor(max_workers=max_workers) as pool:
            results = list(pool.map(_grid_point_task, tasks))
    else:
        sq_dists = pairwise_sq_dists(cloud)
        results = []
        for eps in grid.values:
            try:
                res = compute_distortion(
                    cloud, float(eps), dim, indices, dual=dual, squared=squared, sq_dists=sq_dists
                )
            except DistortionUndefinedError:
                res = DistortionResult(float(eps), float("nan"), [], [int(i) for i in indices])
            results.append(res)

    eps_hat = None
    best = np.inf
    for res in results:
        if res.reliable and res.distortion < best:
            best = res.distortion
            eps_hat = res.epsilon
    if eps_hat is None:
        raise SelectionError("distortion could not be computed reliably at any grid bandwidth")
    return DistortionCurve(results, float(eps_hat), dim, n_eval, seed)
