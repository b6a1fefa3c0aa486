"""Structured latent representation learning for multi-view clustering.

The pipeline: learn a common latent matrix by reconstructing every view
from it, build a kNN graph over that latent space, refine it with
multi-head graph attention, and sharpen cluster structure with a
KL-divergence self-training head. Everything runs on dense float64
numpy, fully seeded, with exact hand-derived gradients.
"""

from .cluster import (
    ClusterState,
    cluster_grads,
    init_centroids,
    kl_loss,
    kmeans,
    soft_assign,
    target_distribution,
)
from .data import (
    MultiViewDataset,
    load_dataset,
    normalize,
    save_dataset,
    split,
    synth_multiview,
)
from .encoder import (
    DecoderParams,
    LatentState,
    decode,
    init_decoders,
    init_latent,
    reconstruction_grads,
    reconstruction_loss,
)
from .gat import GatParams, attention_coeffs, gat_backward, gat_forward, init_gat, init_gat_stack
from .graph import NeighborGraph, build_dot, build_gaussian, build_graph, knn_indices
from .metrics import MetricsReport, accuracy, ari, evaluate, nmi, pair_f_score
from .numerics import finite_diff_grad, make_rng, matmul, relative_error
from .train import TrainConfig, TrainReport, ablate, gradcheck, total_loss, train

__version__ = "0.1.0"

__all__ = [
    "ClusterState",
    "cluster_grads",
    "init_centroids",
    "kl_loss",
    "kmeans",
    "soft_assign",
    "target_distribution",
    "MultiViewDataset",
    "load_dataset",
    "normalize",
    "save_dataset",
    "split",
    "synth_multiview",
    "DecoderParams",
    "LatentState",
    "decode",
    "init_decoders",
    "init_latent",
    "reconstruction_grads",
    "reconstruction_loss",
    "GatParams",
    "attention_coeffs",
    "gat_backward",
    "gat_forward",
    "init_gat",
    "init_gat_stack",
    "NeighborGraph",
    "build_dot",
    "build_gaussian",
    "build_graph",
    "knn_indices",
    "MetricsReport",
    "accuracy",
    "ari",
    "evaluate",
    "nmi",
    "pair_f_score",
    "finite_diff_grad",
    "make_rng",
    "matmul",
    "relative_error",
    "TrainConfig",
    "TrainReport",
    "ablate",
    "gradcheck",
    "total_loss",
    "train",
]
