"""Sparse similarity graphs from point clouds by non-negative kernel regression."""
from .dataset import PointSet, SwissRollConfig, load_csv, load_idx, make_swiss_roll
from .graph import (
    LocalFit,
    SparseGraph,
    build,
    build_knn,
    build_lle_positive,
    build_nnk,
    build_nnk_greedy,
    edge_density,
)
from .kernel import KernelSpec, bandwidth_from_neighbors
from .neighbors import knn_search
from .nnqp import QPProblem, QPSolution, solve
from .spectral import laplacian, propagate_labels, ssl_experiment

__version__ = "0.1.0"
