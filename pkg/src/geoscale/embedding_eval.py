"""Spectral embedding ground-truth harness.

Embeds a noisy cloud and its clean counterpart with Laplacian
Eigenmaps at every bandwidth pair, aligns the embeddings by a full
similarity Procrustes, and reports the RMS discrepancy. Low
discrepancy at a bandwidth means the embedding of the noisy data
recovered the clean structure at that scale.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .dataset import PointCloud
from .kernel_laplacian import EpsilonGrid, heat_kernel, pairwise_sq_dists


class EigensolverError(RuntimeError):
    """Dense symmetric eigendecomposition failed to converge."""


@dataclass
class Embedding:
    """Laplacian Eigenmaps coordinates at one bandwidth.

    Columns are the eigenvectors for the m smallest non-trivial
    Laplacian eigenvalues (constant direction excluded), each scaled to
    unit norm with a fixed sign convention.
    """

    coords: np.ndarray
    epsilon: float
    eigenvalues: np.ndarray


@dataclass
class SmoothingCurve:
    """Best-case embedding discrepancy per noisy-data bandwidth.

    delta[j] is the minimum over the clean-data grid of the Procrustes
    RMS between the two embeddings; best_star[j] is the clean-grid
    bandwidth attaining it. Cells that failed to embed are NaN.
    """

    grid: EpsilonGrid
    delta: np.ndarray
    eps_star_grid: EpsilonGrid
    best_star: np.ndarray

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["epsilon", "delta", "argmin_eps_star"])
            for eps, d, star in zip(self.grid.values, self.delta, self.best_star):
                writer.writerow([f"{eps:.17g}", f"{d:.17g}", f"{star:.17g}"])


def laplacian_eigenmaps(cloud: PointCloud, epsilon: float, m: int) -> Embedding:
    """Embed the cloud into m dimensions with the renormalized kernel.

    Works on the symmetric conjugate of the density-renormalized random
    walk, so a deterministic symmetric eigensolver applies, then maps
    the eigenvectors back. The trivial constant direction is skipped.
    """
    if m < 1:
        raise ValueError(f"m must be at least 1, got {m}")
    if m + 1 > cloud.n:
        raise ValueError(f"m={m} needs more than {cloud.n} points")
    w = heat_kernel(pairwise_sq_dists(cloud), epsilon).weights
    deg = w.sum(axis=1)
    w_prime = w / np.outer(deg, deg)
    deg_prime = w_prime.sum(axis=1)
    inv_sqrt = 1.0 / np.sqrt(deg_prime)
    sym = w_prime * np.outer(inv_sqrt, inv_sqrt)
    sym = 0.5 * (sym + sym.T)
    try:
        ev, vec = np.linalg.eigh(sym)
    except np.linalg.LinAlgError as exc:
        raise EigensolverError(
            f"eigendecomposition failed at epsilon={epsilon:.6g} (n={cloud.n}): {exc}"
        ) from exc
    order = np.argsort(ev)[::-1][1 : m + 1]
    coords = vec[:, order] * inv_sqrt[:, None]
    coords /= np.linalg.norm(coords, axis=0)
    idx = np.argmax(np.abs(coords), axis=0)
    flip = coords[idx, np.arange(m)] < 0
    coords[:, flip] *= -1.0
    lap_eigenvalues = (4.0 / (epsilon * epsilon)) * (1.0 - ev[order])
    return Embedding(coords=coords, epsilon=float(epsilon), eigenvalues=lap_eigenvalues)


def procrustes_align(a: np.ndarray, b: np.ndarray):
    """Best similarity transform of b onto a, and the residual RMS.

    Minimizes the summed squared distance between a and s * b Q + t
    over orthogonal Q (reflections allowed), scale s and translation t.
    Returns (aligned b, rms).
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 2:
        raise ValueError(f"inputs must share an (n, m) shape, got {a.shape} and {b.shape}")
    n = a.shape[0]
    a_mean = a.mean(axis=0)
    b_mean = b.mean(axis=0)
    a_c = a - a_mean
    b_c = b - b_mean
    a_norm2 = float(np.sum(np.square(a_c)))
    b_norm2 = float(np.sum(np.square(b_c)))
    floor = 1e-24 * max(1.0, float(np.abs(a).max()), float(np.abs(b).max())) ** 2
    if a_norm2 <= floor or b_norm2 <= floor:
        raise ValueError("degenerate input: all points identical")
    u, s, vt = np.linalg.svd(b_c.T @ a_c)
    rot = u @ vt
    scale = s.sum() / b_norm2
    aligned = scale * (b_c @ rot) + a_mean
    rms = float(np.sqrt(np.sum(np.square(a - aligned)) / n))
    return aligned, rms


def smoothing_delta(
    clean: PointCloud,
    noisy: PointCloud,
    grid: EpsilonGrid,
    star_grid: EpsilonGrid,
    m: int = 3,
) -> SmoothingCurve:
    """Best-case discrepancy between noisy and clean embeddings.

    Point i of the noisy cloud must be the perturbed version of point i
    of the clean cloud. For every noisy-grid bandwidth the clean data is
    embedded over its own grid and the minimum aligned RMS is kept.
    """
    if clean.n != noisy.n:
        raise ValueError(f"clean and noisy clouds must match in size, got {clean.n} and {noisy.n}")

    clean_embeddings: dict[float, Embedding | None] = {}
    for eps_star in star_grid.values:
        try:
            clean_embeddings[float(eps_star)] = laplacian_eigenmaps(clean, float(eps_star), m)
        except EigensolverError:
            clean_embeddings[float(eps_star)] = None

    delta = np.full(grid.count, np.nan)
    best_star = np.full(grid.count, np.nan)
    for j, eps in enumerate(grid.values):
        try:
            noisy_emb = laplacian_eigenmaps(noisy, float(eps), m)
        except EigensolverError:
            continue
        for eps_star, clean_emb in clean_embeddings.items():
            if clean_emb is None:
                continue
            _, rms = procrustes_align(clean_emb.coords, noisy_emb.coords)
            if np.isnan(delta[j]) or rms < delta[j]:
                delta[j] = rms
                best_star[j] = eps_star
    return SmoothingCurve(grid=grid, delta=delta, eps_star_grid=star_grid, best_star=best_star)
