"""embedview: interactive landmark-based 2D embedding of large point clouds.

The projection expresses every point through its k nearest landmarks and
solves a tiny weighted least-squares problem per point, so the whole dataset
re-projects every frame while a human steers the landmark model (SOM training
or online k-means plus a force-directed graph layout).
"""

from .core import (
    BITONIC_K_CHOICES,
    Dataset,
    DimStats,
    EmbedParams,
    Frame,
    InputError,
    LandmarkModel,
    ParameterError,
    ParseError,
    Rng,
    compute_dim_stats,
)
from .knn import NeighborList, knn, knn_base, knn_bitonic, sq_euclidean
from .projection import ScoreVector, embed, project_point, projection_system, scores
from .som import SomConfig, bmu, fit_hi_for_new_landmark, quantization_error, som_tick
from .graphmodel import (
    EdgeSet,
    KmeansConfig,
    LayoutState,
    build_knn_graph,
    duplicate_landmark,
    kmeans_tick,
    layout_tick,
    remove_landmark,
)
from .io import (
    TransformSpec,
    apply_transform,
    load_dataset,
    parse_delimited,
    parse_fcs,
    parse_obj_vertices,
    write_delimited,
)
from .engine import Engine, FramePacket, SessionState, color_channel

__version__ = "0.1.0"

__all__ = [
    "BITONIC_K_CHOICES",
    "Dataset",
    "DimStats",
    "EmbedParams",
    "Frame",
    "InputError",
    "LandmarkModel",
    "ParameterError",
    "ParseError",
    "Rng",
    "compute_dim_stats",
    "NeighborList",
    "knn",
    "knn_base",
    "knn_bitonic",
    "sq_euclidean",
    "ScoreVector",
    "embed",
    "project_point",
    "projection_system",
    "scores",
    "SomConfig",
    "bmu",
    "fit_hi_for_new_landmark",
    "quantization_error",
    "som_tick",
    "EdgeSet",
    "KmeansConfig",
    "LayoutState",
    "build_knn_graph",
    "duplicate_landmark",
    "kmeans_tick",
    "layout_tick",
    "remove_landmark",
    "TransformSpec",
    "apply_transform",
    "load_dataset",
    "parse_delimited",
    "parse_fcs",
    "parse_obj_vertices",
    "write_delimited",
    "Engine",
    "FramePacket",
    "SessionState",
    "color_channel",
    "__version__",
]
