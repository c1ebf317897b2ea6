"""Tangent-plane estimation by weighted local PCA, and the dual metric
implied by a graph Laplacian in those tangent coordinates.

For points sampled from a manifold the dual metric at an interior
point should be the identity when the Laplacian is well calibrated;
its deviation from the identity is what the bandwidth search measures.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

INVERSION_CONDITION_LIMIT = 1e12


class DegenerateSpectrumWarning(UserWarning):
    """The local PCA spectrum has no gap at the requested dimension."""


class NonInvertibleMetricError(ArithmeticError):
    """Dual metric at a point is singular or too ill-conditioned to invert."""

    def __init__(self, index: int, message: str):
        super().__init__(message)
        self.index = index


@dataclass
class TangentFrame:
    """Local coordinates at one point.

    basis: ambient_dim x dim orthonormal columns, ordered by decreasing
        local singular value.
    center: the weighted mean the frame is anchored at.
    projected: every cloud point expressed in the frame's coordinates.
    """

    basis: np.ndarray
    center: np.ndarray
    projected: np.ndarray


@dataclass
class MetricEstimate:
    """Symmetric dual metric (or its inverse) at one point."""

    matrix: np.ndarray
    is_dual: bool = True


def weighted_recenter(cloud, weights: np.ndarray):
    """Weight-recentered design matrix and its weighted mean.

    Row j of the result is weights[j] * (x_j - mean) / sum(weights),
    so far-away points with negligible weight collapse to the origin.
    """
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != (cloud.n,):
        raise ValueError(f"weights must have shape ({cloud.n},)")
    if np.any(w < 0):
        raise ValueError("weights must be nonnegative")
    total = w.sum()
    if total <= 0:
        raise ValueError("weights must not all be zero")
    center = w @ cloud.points / total
    z = (w[:, None] * (cloud.points - center)) / total
    return z, center


def _fix_column_signs(v: np.ndarray) -> np.ndarray:
    # Largest-magnitude entry of each column made positive.
    idx = np.argmax(np.abs(v), axis=0)
    flip = v[idx, np.arange(v.shape[1])] < 0
    v[:, flip] *= -1.0
    return v


def _reorder_ties(v: np.ndarray, s: np.ndarray) -> np.ndarray:
    # Deterministic ordering inside groups of exactly equal singular values.
    start = 0
    for stop in range(1, s.size + 1):
        if stop == s.size or s[stop] != s[start]:
            if stop - start > 1:
                block = v[:, start:stop]
                order = sorted(range(stop - start), key=lambda j: tuple(block[:, j]))
                v[:, start:stop] = block[:, order]
            start = stop
    return v


def tangent_projection(cloud, weights: np.ndarray, dim: int) -> TangentFrame:
    """Estimate the tangent plane at a point from kernel weights.

    The basis is the top right-singular subspace of the weighted
    recentered design matrix; the whole cloud is centered and projected
    onto it. Column signs are fixed (largest entry positive) and exact
    singular-value ties are broken lexicographically, so repeated runs
    agree. A spectrum with no gap at position `dim` triggers a
    DegenerateSpectrumWarning.
    """
    limit = min(cloud.ambient_dim, cloud.n - 1)
    if not 1 <= dim <= limit:
        raise ValueError(f"dim must be in [1, {limit}], got {dim}")
    z, center = weighted_recenter(cloud, weights)
    _, s, vt = np.linalg.svd(z, full_matrices=False)
    v = _fix_column_signs(vt.T)
    v = _reorder_ties(v, s)
    ev = np.square(s)
    if dim < ev.size and ev[dim - 1] - ev[dim] <= 1e-12 * max(ev[0], np.finfo(float).tiny):
        warnings.warn(
            f"local PCA eigenvalues {dim} and {dim + 1} are degenerate; "
            "basis choice is a deterministic tie-break",
            DegenerateSpectrumWarning,
            stacklevel=2,
        )
    basis = v[:, :dim]
    projected = (cloud.points - center) @ basis
    return TangentFrame(basis=basis, center=center, projected=projected)


def riemannian_metric(frame: TangentFrame, index: int, laplacian, dual: bool = True) -> MetricEstimate:
    """Dual metric at one point from the Laplacian in frame coordinates.

    Applies the Laplacian row at `index` to the centered quadratics of
    the projected coordinates, with the 1/2 that makes the result the
    identity on flat data. With dual=False the matrix is inverted,
    failing loudly if it is singular or has condition number above 1e12.
    """
    y = frame.projected
    n, dim = y.shape
    if laplacian.n != n:
        raise ValueError(f"laplacian size {laplacian.n} does not match {n} points")
    if not 0 <= index < n:
        raise ValueError(f"index {index} out of range")
    diffs = y - y[index]
    row = laplacian.matrix[index]
    h = 0.5 * (diffs.T @ (row[:, None] * diffs))
    h = 0.5 * (h + h.T)
    if dual:
        return MetricEstimate(h, is_dual=True)
    ev, vec = np.linalg.eigh(h)
    if ev.min() <= 0 or ev.max() / ev.min() > INVERSION_CONDITION_LIMIT:
        raise NonInvertibleMetricError(
            index,
            f"dual metric at point {index} is not invertible "
            f"(eigenvalues {ev.min():.3e} .. {ev.max():.3e})",
        )
    inv = (vec / ev) @ vec.T
    inv = 0.5 * (inv + inv.T)
    return MetricEstimate(inv, is_dual=False)
