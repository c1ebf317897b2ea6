"""Heat-kernel weight matrices, the renormalized graph Laplacian, and
the bandwidth search range.

The Laplacian here is the density-renormalized construction: the raw
kernel is divided by the degree on both sides, row-normalized to a
stochastic matrix P, and scaled so that L = (4 / epsilon^2) (P - I)
acts like the Laplace-Beltrami operator on smooth functions of the
underlying manifold. The 4 / epsilon^2 factor is the second-moment
calibration of the Gaussian kernel exp(-dist^2 / epsilon^2).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

UNDERFLOW_FLUSH = 1e-300


@dataclass
class WeightMatrix:
    """Symmetric heat-kernel affinities at a fixed bandwidth."""

    weights: np.ndarray
    epsilon: float

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise ValueError("weights must be a square matrix")
        if not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        self.weights = w

    @property
    def n(self) -> int:
        return self.weights.shape[0]


@dataclass
class GraphLaplacian:
    """Renormalized graph Laplacian; rows sum to zero."""

    matrix: np.ndarray
    epsilon: float

    @property
    def n(self) -> int:
        return self.matrix.shape[0]


@dataclass
class EpsilonGrid:
    """Logarithmically spaced candidate bandwidths, increasing."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 1 or v.size < 2:
            raise ValueError("grid needs at least 2 values")
        if not np.all(v > 0) or not np.all(np.diff(v) > 0):
            raise ValueError("grid values must be positive and increasing")
        ratios = v[1:] / v[:-1]
        if np.max(np.abs(ratios / ratios[0] - 1.0)) > 1e-12:
            raise ValueError("grid values must be logarithmically spaced")
        self.values = v

    @property
    def eps_min(self) -> float:
        return float(self.values[0])

    @property
    def eps_max(self) -> float:
        return float(self.values[-1])

    @property
    def count(self) -> int:
        return self.values.size


def pairwise_sq_dists(cloud) -> np.ndarray:
    """All-pairs squared Euclidean distances, zero diagonal."""
    if cloud.n < 2:
        raise ValueError("need at least 2 points")
    return cdist(cloud.points, cloud.points, "sqeuclidean")


def heat_kernel(sq_dists: np.ndarray, epsilon: float) -> WeightMatrix:
    """Gaussian affinities exp(-dist^2 / epsilon^2).

    Entries that underflow below 1e-300 are flushed to exact zero.
    """
    if epsilon <= 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    w = np.exp(-sq_dists / (epsilon * epsilon))
    w[w < UNDERFLOW_FLUSH] = 0.0
    return WeightMatrix(w, float(epsilon))


def renormalized_laplacian(w: WeightMatrix) -> GraphLaplacian:
    """Density-renormalized Laplacian L = (4 / epsilon^2) (P - I).

    The kernel is first divided by the degree on both sides (removing
    the sampling-density factor), then row-normalized to the stochastic
    matrix P.
    """
    weights = w.weights
    deg = weights.sum(axis=1)
    w_prime = weights / np.outer(deg, deg)
    deg_prime = w_prime.sum(axis=1)
    p = w_prime / deg_prime[:, None]
    lap = p - np.eye(w.n)
    lap *= 4.0 / (w.epsilon * w.epsilon)
    return GraphLaplacian(lap, w.epsilon)


def epsilon_max(sq_dists: np.ndarray) -> float:
    """Upper end of the search range: root-mean squared pairwise distance."""
    n = sq_dists.shape[0]
    if n < 2:
        raise ValueError("need at least 2 points")
    return float(np.sqrt(sq_dists.sum() / (n * (n - 1))))


def _kernel_mass(sq_dists: np.ndarray, epsilon: float) -> float:
    # max column sum of the off-diagonal kernel entries
    w = np.exp(-sq_dists / (epsilon * epsilon))
    np.fill_diagonal(w, 0.0)
    return float(w.sum(axis=0).max())


def epsilon_min(sq_dists: np.ndarray, gamma: float = 1e-4) -> float:
    """Lower end of the search range.

    The smallest epsilon at which the heat kernel is distinguishable
    from the identity: max column sum minus 1 reaches gamma. Found by
    bisection in log-epsilon; the returned value satisfies the
    threshold within a factor 1.01 and a relative width below 1e-3.
    """
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    n = sq_dists.shape[0]
    if n < 2:
        raise ValueError("need at least 2 points")
    off_diag = sq_dists[~np.eye(n, dtype=bool)]
    if off_diag.min() <= 0.0:
        raise ValueError("duplicate points: kernel never approaches the identity")

    hi = epsilon_max(sq_dists)
    while _kernel_mass(sq_dists, hi) < gamma:
        hi *= 2.0
    # At this scale the nearest-pair term alone is <= gamma, so the
    # whole column sum usually is too; fall back to halving if not.
    lo = hi / 2.0
    if gamma < n - 1:
        lo = min(lo, np.sqrt(off_diag.min() / np.log((n - 1) / gamma)))
    while _kernel_mass(sq_dists, lo) >= gamma:
        lo /= 2.0

    mass_hi = _kernel_mass(sq_dists, hi)
    for _ in range(200):
        if (hi - lo) / hi <= 1e-3 and mass_hi <= 1.01 * gamma:
            break
        mid = np.sqrt(lo * hi)
        mass_mid = _kernel_mass(sq_dists, mid)
        if mass_mid >= gamma:
            hi, mass_hi = mid, mass_mid
        else:
            lo = mid
    return float(hi)


def log_grid(eps_min: float, eps_max: float, count: int = 20) -> EpsilonGrid:
    """Geometric grid of `count` bandwidths from eps_min to eps_max."""
    if not 0 < eps_min < eps_max:
        raise ValueError(f"need 0 < eps_min < eps_max, got {eps_min}, {eps_max}")
    if count < 2:
        raise ValueError(f"count must be at least 2, got {count}")
    k = np.arange(count)
    values = eps_min * (eps_max / eps_min) ** (k / (count - 1))
    values[0] = eps_min
    values[-1] = eps_max
    return EpsilonGrid(values)


def search_grid(sq_dists: np.ndarray, count: int = 20, gamma: float = 1e-4) -> EpsilonGrid:
    """Data-driven search grid spanning [epsilon_min, epsilon_max]."""
    return log_grid(epsilon_min(sq_dists, gamma), epsilon_max(sq_dists), count)
