"""Adaptive self-supervised robust clustering for unlabelled feature matrices.

The package learns a sparse probability graph from embedding distances,
trains a graph-convolutional autoencoder with a debiased contrastive
term on it, and reads the clusters off robust continuous clustering of
the learned representation -- no cluster count required.
"""

from .config import PRESETS, PipelineConfig, parse_config
from .contrastive import augment_gaussian, fuse_views, info_nce_debiased
from .data import (
    gen_blobs,
    gen_two_moons,
    load_labels,
    load_matrix,
    normalize_minmax,
    save_labels,
    save_matrix,
)
from .encoder import (
    EncoderParams,
    OptimizerState,
    asrc_loss_and_grad,
    decode_distribution,
    encode,
    gae_loss,
    optimizer_step,
)
from .graph import (
    SparseRowGraph,
    SparsitySchedule,
    SymGraph,
    advance_sparsity,
    build_row_graph,
    learn_row_probabilities,
    project_simplex,
    solve_prior_problem,
    sparsity_dual_value,
    symmetrize_normalize,
)
from .metrics import (
    adjusted_mutual_info,
    adjusted_rand_index,
    contingency,
    kmeans_pp,
)
from .numerics import (
    SparseSymOperator,
    cg_solve,
    matrix_spectral_norm,
    pairwise_dist,
    pca_reduce,
    sym_operator_norm,
)
from .pipeline import RunResult, run_asrc, run_variant, run_with_artifacts
from .rcc import (
    RccConfig,
    RccState,
    anneal_alpha,
    assemble_and_solve_u,
    extract_clusters,
    mutual_knn_graph,
    rcc_objective,
    rcc_run,
    update_l,
    update_lambda1,
)
from .rng import SeededRng

__all__ = [
    "PRESETS",
    "PipelineConfig",
    "parse_config",
    "augment_gaussian",
    "fuse_views",
    "info_nce_debiased",
    "gen_blobs",
    "gen_two_moons",
    "load_labels",
    "load_matrix",
    "normalize_minmax",
    "save_labels",
    "save_matrix",
    "EncoderParams",
    "OptimizerState",
    "asrc_loss_and_grad",
    "decode_distribution",
    "encode",
    "gae_loss",
    "optimizer_step",
    "SparseRowGraph",
    "SparsitySchedule",
    "SymGraph",
    "advance_sparsity",
    "build_row_graph",
    "learn_row_probabilities",
    "project_simplex",
    "solve_prior_problem",
    "sparsity_dual_value",
    "symmetrize_normalize",
    "adjusted_mutual_info",
    "adjusted_rand_index",
    "contingency",
    "kmeans_pp",
    "SparseSymOperator",
    "cg_solve",
    "matrix_spectral_norm",
    "pairwise_dist",
    "pca_reduce",
    "sym_operator_norm",
    "RunResult",
    "run_asrc",
    "run_variant",
    "run_with_artifacts",
    "RccConfig",
    "RccState",
    "anneal_alpha",
    "assemble_and_solve_u",
    "extract_clusters",
    "mutual_knn_graph",
    "rcc_objective",
    "rcc_run",
    "update_l",
    "update_lambda1",
    "SeededRng",
    "__version__",
]

__version__ = "0.1.0"
