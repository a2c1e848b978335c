"""Semi-supervised regression with low-rank co-association matrices.

The ensemble path never forms an n x n matrix: a K-means ensemble gives the
co-association factor ``B`` and the regularized system is solved through
the Woodbury identity on an m x m core. Dense kernel solves and an
H-matrix (ACA) path for smooth kernels are provided for comparison.
"""

from . import _backend
from .core import (
    LabeledProblem,
    Prediction,
    SolverConfig,
    SolverPath,
    build_g_diagonal,
    graph_laplacian,
    laplacian_quadform,
    solve_dense,
    solve_woodbury,
)
from .data import Dataset, generate_mixture, load_forest_fires, quartile_transform, split_labeled
from .ensemble import (
    EnsembleConfig,
    EnsembleFactor,
    Partition,
    Weighting,
    build_factor,
    compute_weights,
    dense_coassociation,
    generate_ensemble,
    kmeans,
)
from .errors import *  # noqa: F401,F403
from .hmatrix import HMatrix, build_cluster_tree, build_hmatrix, h_matvec, solve_ssr_hmatrix
from .kernels import Family, KernelParams, kernel_value, matern, similarity_matrix
from .numerics import cholesky_solve, conjugate_gradient, lu_solve, power_iteration_norm

BACKEND = _backend.NAME
__version__ = "0.1.0"
