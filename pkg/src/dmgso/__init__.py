"""Diffusion maps as graph shift operators: embedding, filtering and graph learning."""

__version__ = "0.1.0"

from .errors import DataError, DMGSOError, NumericalError
from .graph_core import Graph, build_graph, laplacian, radius_graph, random_sensor_graph
from .diffusion_map import (
    SpectralDecomposition,
    TransitionMatrix,
    decompose,
    diffusion_distance,
    embedding,
    gaussian_affinity,
    markov_matrix,
    median_bandwidth,
    pairwise_sq_distances,
    stationary_distribution,
)
from .gso_filters import (
    FilterSpec,
    FourierBasis,
    ShiftOperator,
    apply_filter,
    build_gso,
    check_gso_properties,
    gft,
    igft,
)
from .graph_learning import LearnOptions, LearnResult, learn_pipeline, min_markov_var, min_total_var
from .metrics import nrmse, ree

__all__ = [
    "DMGSOError",
    "DataError",
    "NumericalError",
    "Graph",
    "build_graph",
    "laplacian",
    "radius_graph",
    "random_sensor_graph",
    "SpectralDecomposition",
    "TransitionMatrix",
    "decompose",
    "diffusion_distance",
    "embedding",
    "gaussian_affinity",
    "markov_matrix",
    "median_bandwidth",
    "pairwise_sq_distances",
    "stationary_distribution",
    "FilterSpec",
    "FourierBasis",
    "ShiftOperator",
    "apply_filter",
    "build_gso",
    "check_gso_properties",
    "gft",
    "igft",
    "LearnOptions",
    "LearnResult",
    "learn_pipeline",
    "min_markov_var",
    "min_total_var",
    "nrmse",
    "ree",
]
