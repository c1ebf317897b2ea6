"""Comparison methods for bandwidth selection.

Two baselines: kernel-weighted reconstruction error (pick the scale at
which each point is best predicted by the weighted average of its
neighbors), and the multiscale local-SVD scale range (the interval of
scales whose singular-value profile indicates local linearity at the
assumed dimension).
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from .dataset import PointCloud
from .kernel_laplacian import EpsilonGrid, heat_kernel, pairwise_sq_dists
from .tangent_metric import weighted_recenter

TREND_TOLERANCE = 1e-3


@dataclass
class SingularValueProfile:
    """Mean local singular values per grid bandwidth.

    values[k] is the (k+1)-th largest singular value as a sequence over
    the grid, averaged over the evaluation points and rescaled to stay
    comparable across bandwidths.
    """

    grid: EpsilonGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape[1] != self.grid.count:
            raise ValueError("values must be (k, len(grid))")
        if np.any(v < 0):
            raise ValueError("singular values must be nonnegative")
        if np.any(np.diff(v, axis=0) > 1e-12 * max(v.max(), 1e-300)):
            raise ValueError("singular values must be non-increasing in index")
        self.values = v

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["epsilon"] + [f"sv{k + 1}" for k in range(self.values.shape[0])])
            for j, eps in enumerate(self.grid.values):
                writer.writerow([f"{eps:.17g}"] + [f"{v:.17g}" for v in self.values[:, j]])


@dataclass
class ClmrRange:
    """Scale range from the first-descent structure of the profile.

    Either endpoint may be undefined when the profile never turns; that
    is a reported outcome, not an error.
    """

    eps_lo: float
    eps_hi: float
    k: int
    defined_lo: bool
    defined_hi: bool

    def to_dict(self) -> dict:
        return {
            "eps_lo": self.eps_lo if self.defined_lo else None,
            "eps_hi": self.eps_hi if self.defined_hi else None,
            "k": self.k,
            "defined_lo": self.defined_lo,
            "defined_hi": self.defined_hi,
        }

    def write_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def reconstruction_error(cloud: PointCloud, epsilon: float, sq_dists: np.ndarray | None = None) -> float:
    """Total squared error reconstructing each point from its neighbors.

    Each point is predicted as the kernel-weighted average of all other
    points (self excluded); small error means the data is locally a
    weighted linear combination of neighbors at this scale.
    """
    if epsilon <= 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    if sq_dists is None:
        sq_dists = pairwise_sq_dists(cloud)
    w = heat_kernel(sq_dists, epsilon).weights.copy()
    np.fill_diagonal(w, 0.0)
    rowsum = w.sum(axis=1)
    # Below the kernel floor a point has no neighbors; it reconstructs
    # as the origin, keeping the error finite and large.
    safe = np.where(rowsum > 0, rowsum, 1.0)
    recon = (w / safe[:, None]) @ cloud.points
    return float(np.sum(np.square(cloud.points - recon)))


def reconstruction_curve(cloud: PointCloud, grid: EpsilonGrid) -> np.ndarray:
    sq_dists = pairwise_sq_dists(cloud)
    return np.array([reconstruction_error(cloud, float(eps), sq_dists) for eps in grid.values])


def select_bandwidth_rec(cloud: PointCloud, grid: EpsilonGrid) -> float:
    """Grid bandwidth minimizing the reconstruction error, ties to the smaller."""
    curve = reconstruction_curve(cloud, grid)
    return float(grid.values[int(np.argmin(curve))])


def multiscale_svd(cloud: PointCloud, grid: EpsilonGrid, k: int, eval_indices) -> SingularValueProfile:
    """Top-k local singular values versus bandwidth, averaged over points.

    Uses the same weighted recentered matrix as the tangent estimation,
    rescaled per point by sum(w) / sqrt(sum(w^2)) so the values have the
    scale of a plain local PCA and are comparable across bandwidths.
    """
    limit = min(cloud.ambient_dim, cloud.n - 1)
    if not 1 <= k <= limit:
        raise ValueError(f"k must be in [1, {limit}], got {k}")
    eval_indices = np.atleast_1d(np.asarray(eval_indices, dtype=int))
    if eval_indices.size == 0:
        raise ValueError("eval_indices must not be empty")
    sq_dists = pairwise_sq_dists(cloud)
    profile = np.empty((k, grid.count))
    for j, eps in enumerate(grid.values):
        w = heat_kernel(sq_dists, float(eps)).weights
        acc = np.zeros(k)
        for i in eval_indices:
            row = w[i]
            z, _ = weighted_recenter(cloud, row)
            s = np.linalg.svd(z, compute_uv=False)
            acc += s[:k] * (row.sum() / np.sqrt(np.square(row).sum()))
        profile[:, j] = acc / eval_indices.size
    return SingularValueProfile(grid, profile)


def _first_growth_end(seq: np.ndarray, tol: float, sustained: bool) -> int | None:
    """First grid index where the sequence's growth has ended.

    The scan starts where the sequence first rises above the tolerance
    (a sequence that never does counts as flat from index 0, which is
    the degenerate small-bandwidth regime where all local singular
    values vanish). With sustained=True the sequence must additionally
    never drop below tolerance afterwards (stay non-decreasing).
    """
    diffs = np.diff(seq)
    above = np.nonzero(seq > tol)[0]
    start = int(above[0]) if above.size else 0
    for t in range(start, diffs.size):
        if diffs[t] <= tol and (not sustained or np.all(diffs[t:] >= -tol)):
            return t
    return None


def clmr_range(profile: SingularValueProfile, k: int) -> ClmrRange:
    """Scale range [eps_lo, eps_hi] read off the singular-value profile.

    eps_lo is the first grid point where the (k+1)-th value stops
    increasing; eps_hi the first where the top value's growth ends and
    it stays non-decreasing to the right. Trends are judged with a
    relative tolerance so grid-level noise does not flip them. Endpoints
    the scan never finds are flagged undefined, as is an upper endpoint
    that would precede the lower one.
    """
    if profile.values.shape[0] < k + 1:
        raise ValueError(f"profile needs at least {k + 1} value sequences, has {profile.values.shape[0]}")
    eps = profile.grid.values
    tol = TREND_TOLERANCE * max(profile.values[0].max(), np.finfo(float).tiny)

    lo_idx = _first_growth_end(profile.values[k], tol, sustained=False)
    hi_idx = _first_growth_end(profile.values[0], tol, sustained=True)

    defined_lo = lo_idx is not None
    defined_hi = hi_idx is not None
    if defined_lo and defined_hi and hi_idx < lo_idx:
        defined_hi = False
    return ClmrRange(
        eps_lo=float(eps[lo_idx]) if defined_lo else float("nan"),
        eps_hi=float(eps[hi_idx]) if defined_hi else float("nan"),
        k=k,
        defined_lo=defined_lo,
        defined_hi=defined_hi,
    )


def dominant_gap_dimension(profile: SingularValueProfile) -> np.ndarray:
    """Per grid point, the index d whose gap (value d minus value d+1)
    is the largest; the scale range where this equals the true dimension
    is where the profile indicates that dimension."""
    gaps = profile.values[:-1] - profile.values[1:]
    if gaps.shape[0] == 0:
        raise ValueError("profile needs at least 2 value sequences")
    return np.argmax(gaps, axis=0) + 1
