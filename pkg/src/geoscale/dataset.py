"""Synthetic test manifolds and point-cloud I/O.

Provides the two sampled surfaces used throughout (an hourglass of
revolution and the unit upper hemisphere), noisy high-dimensional
embedding, uniform subsampling, and a strict numeric CSV format.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field

import numpy as np

HOURGLASS_WAIST = 0.3


class ParseError(ValueError):
    """CSV parse failure carrying a 1-based (row, col) file location."""

    def __init__(self, message: str, row: int | None = None, col: int | None = None):
        super().__init__(message)
        self.row = row
        self.col = col


@dataclass
class PointCloud:
    """A finite set of points in Euclidean space, one row per point."""

    points: np.ndarray
    ids: list[str] | None = field(default=None, repr=False)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2:
            raise ValueError(f"points must be a 2-d array, got ndim={pts.ndim}")
        if pts.shape[0] < 2:
            raise ValueError(f"need at least 2 points, got {pts.shape[0]}")
        if pts.shape[1] < 1:
            raise ValueError("ambient dimension must be at least 1")
        if not np.all(np.isfinite(pts)):
            raise ValueError("points must be finite")
        if self.ids is not None and len(self.ids) != pts.shape[0]:
            raise ValueError("ids length must match number of points")
        self.points = pts

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def ambient_dim(self) -> int:
        return self.points.shape[1]


@dataclass
class NoiseSpec:
    """Target ambient dimension and Gaussian noise level for embedding."""

    ambient_dim: int
    sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.ambient_dim < 1:
            raise ValueError("ambient_dim must be at least 1")
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")


def _rng(seed: int, tag: str) -> np.random.Generator:
    # Per-operation stream: same user seed never aliases across operations.
    return np.random.default_rng(np.random.SeedSequence([int(seed), zlib.crc32(tag.encode())]))


def hourglass_radius(z):
    """Radius of the hourglass surface of revolution at height z."""
    return HOURGLASS_WAIST + np.square(z)


def hourglass_area_density(z):
    """Unnormalized surface-area density of the hourglass in z.

    The surface is rho(z) = 0.3 + z^2 revolved around the z axis for
    z in [-1, 1]; the area element is rho * sqrt(1 + rho'^2) dz dtheta.
    """
    return hourglass_radius(z) * np.sqrt(1.0 + 4.0 * np.square(z))


def generate_hourglass(n: int, seed: int = 0) -> PointCloud:
    """Sample n points uniformly by surface area from the hourglass.

    The surface is a revolution around the z axis with a narrow waist
    (radius 0.3 at z=0, flaring to 1.3 at z=+-1). Sampling is by
    rejection on z against the area density, then a uniform angle.
    Deterministic in (n, seed).
    """
    if n < 10:
        raise ValueError(f"n must be at least 10, got {n}")
    rng = _rng(seed, "hourglass")
    density_max = hourglass_area_density(1.0)
    zs = np.empty(0)
    while zs.size < n:
        remaining = n - zs.size
        batch = max(4 * remaining, 128)
        z = rng.uniform(-1.0, 1.0, batch)
        u = rng.uniform(0.0, 1.0, batch)
        accepted = z[u * density_max <= hourglass_area_density(z)]
        zs = np.concatenate([zs, accepted])
    zs = zs[:n]
    theta = rng.uniform(0.0, 2.0 * np.pi, n)
    rho = hourglass_radius(zs)
    pts = np.column_stack([rho * np.cos(theta), rho * np.sin(theta), zs])
    return PointCloud(pts)


def generate_dome(n: int, seed: int = 0) -> PointCloud:
    """Sample n points uniformly by area from the unit upper hemisphere.

    Normalized 3-d Gaussians give the uniform sphere; folding z to |z|
    keeps uniformity on the z >= 0 half. Deterministic in (n, seed).
    """
    if n < 10:
        raise ValueError(f"n must be at least 10, got {n}")
    rng = _rng(seed, "dome")
    g = rng.standard_normal((n, 3))
    norms = np.linalg.norm(g, axis=1)
    while np.any(norms < 1e-12):
        bad = norms < 1e-12
        g[bad] = rng.standard_normal((int(bad.sum()), 3))
        norms = np.linalg.norm(g, axis=1)
    pts = g / norms[:, None]
    pts[:, 2] = np.abs(pts[:, 2])
    return PointCloud(pts)


def embed_with_noise(cloud: PointCloud, spec: NoiseSpec) -> PointCloud:
    """Zero-pad the cloud to spec.ambient_dim, then add iid Gaussian noise.

    Noise with standard deviation spec.sigma is added to every entry of
    every column, original coordinates included. sigma = 0 yields exact
    zero-padding.
    """
    if spec.ambient_dim < cloud.ambient_dim:
        raise ValueError(
            f"ambient_dim {spec.ambient_dim} smaller than cloud dimension {cloud.ambient_dim}"
        )
    padded = np.zeros((cloud.n, spec.ambient_dim))
    padded[:, : cloud.ambient_dim] = cloud.points
    if spec.sigma > 0:
        rng = _rng(spec.seed, "embed_noise")
        padded = padded + rng.normal(0.0, spec.sigma, padded.shape)
    return PointCloud(padded, ids=cloud.ids)


def subsample(cloud: PointCloud, n_eval: int, seed: int = 0) -> np.ndarray:
    """Choose n_eval distinct row indices uniformly without replacement."""
    if not 1 <= n_eval <= cloud.n:
        raise ValueError(f"n_eval must be in [1, {cloud.n}], got {n_eval}")
    rng = _rng(seed, "subsample")
    return np.sort(rng.choice(cloud.n, size=n_eval, replace=False))


def save_csv(cloud: PointCloud, path) -> None:
    """Write points as plain comma-separated numbers, full double precision."""
    np.savetxt(path, cloud.points, fmt="%.17g", delimiter=",")


def load_csv(path) -> PointCloud:
    """Load a rectangular numeric CSV, one point per row.

    A first row with any non-numeric cell is treated as a header and
    skipped. Ragged rows and non-numeric data cells raise ParseError
    naming the 1-based (row, col) file position.
    """
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise ParseError(f"{path}: empty file")

    rows = [line.split(",") for line in lines]
    start = 0
    if _is_header(rows[0]):
        start = 1
    if start >= len(rows):
        raise ParseError(f"{path}: no data rows")

    ncols = len(rows[start])
    data = np.empty((len(rows) - start, ncols))
    for r, cells in enumerate(rows[start:], start=start):
        if len(cells) != ncols:
            raise ParseError(
                f"{path}: row {r + 1}: expected {ncols} columns, found {len(cells)}",
                row=r + 1,
            )
        for c, cell in enumerate(cells):
            try:
                data[r - start, c] = float(cell)
            except ValueError:
                raise ParseError(
                    f"{path}: non-numeric value {cell!r} at row {r + 1}, col {c + 1}",
                    row=r + 1,
                    col=c + 1,
                ) from None
    return PointCloud(data)


def _is_header(cells: list[str]) -> bool:
    for cell in cells:
        try:
            float(cell)
        except ValueError:
            return True
    return False
