"""Heat-kernel bandwidth selection for graph Laplacians by geometric
self-consistency, with baselines and synthetic evaluation harnesses."""

from .baselines import (
    ClmrRange,
    SingularValueProfile,
    clmr_range,
    dominant_gap_dimension,
    multiscale_svd,
    reconstruction_error,
    select_bandwidth_rec,
)
from .dataset import (
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
from .distortion_search import (
    DistortionCurve,
    DistortionResult,
    DistortionUndefinedError,
    SelectionError,
    compute_distortion,
    select_bandwidth,
    spectral_norm,
)
from .embedding_eval import (
    EigensolverError,
    Embedding,
    SmoothingCurve,
    laplacian_eigenmaps,
    procrustes_align,
    smoothing_delta,
)
from .kernel_laplacian import (
    EpsilonGrid,
    GraphLaplacian,
    WeightMatrix,
    epsilon_max,
    epsilon_min,
    heat_kernel,
    log_grid,
    pairwise_sq_dists,
    renormalized_laplacian,
    search_grid,
)
from .tangent_metric import (
    DegenerateSpectrumWarning,
    MetricEstimate,
    NonInvertibleMetricError,
    TangentFrame,
    riemannian_metric,
    tangent_projection,
    weighted_recenter,
)

__version__ = "0.1.0"

__all__ = [
    "ClmrRange",
    "DegenerateSpectrumWarning",
    "DistortionCurve",
    "DistortionResult",
    "DistortionUndefinedError",
    "EigensolverError",
    "Embedding",
    "EpsilonGrid",
    "GraphLaplacian",
    "MetricEstimate",
    "NoiseSpec",
    "NonInvertibleMetricError",
    "ParseError",
    "PointCloud",
    "SelectionError",
    "SingularValueProfile",
    "SmoothingCurve",
    "TangentFrame",
    "WeightMatrix",
    "clmr_range",
    "compute_distortion",
    "dominant_gap_dimension",
    "embed_with_noise",
    "epsilon_max",
    "epsilon_min",
    "generate_dome",
    "generate_hourglass",
    "heat_kernel",
    "laplacian_eigenmaps",
    "load_csv",
    "log_grid",
    "multiscale_svd",
    "pairwise_sq_dists",
    "procrustes_align",
    "reconstruction_error",
    "renormalized_laplacian",
    "riemannian_metric",
    "save_csv",
    "search_grid",
    "select_bandwidth",
    "select_bandwidth_rec",
    "smoothing_delta",
    "spectral_norm",
    "subsample",
    "tangent_projection",
    "weighted_recenter",
]
