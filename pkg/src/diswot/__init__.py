"""Training-free student-architecture scoring, search, and rank evaluation.

The package scores randomly initialized candidate networks by how well their
attention and sample-relation structure matches a teacher's, searches
architecture spaces with those scores as fitness, and measures how proxy
rankings correlate with trained accuracy tables.
"""

from .arch import (
    Constraints,
    NB201Cell,
    NB201_OPS,
    S0Depths,
    S2Config,
    S2Stage,
    SearchSpace,
    arch_id,
    clamp_channels,
    descriptor_from_json,
    descriptor_in_space,
    descriptor_to_json,
    enumerate_s0,
    make_space,
    max_descriptor,
    mutate,
    nb201_space,
    parse_nb201,
    s0_space,
    s2_cifar_space,
    s2_imagenet_space,
    sample_descriptor,
    serialize_nb201,
    with_constraints,
)
from .data import (
    Batch,
    ScoreRow,
    load_accuracy_csv,
    load_cifar_batch,
    read_scores_csv,
    synth_batch,
    write_report_csv,
    write_scores_csv,
)
from .kernels import (
    Tensor,
    avg_pool2d,
    batchnorm_batchstats,
    conv2d,
    fc_weight_grad,
    global_avg_pool,
    linear,
    log_softmax,
    relu,
    residual_add,
    softmax,
    softmax_cross_entropy,
)
from .losses import KdLossConfig, loss_diswot_total, loss_kd_kl, loss_relation, loss_semantic
from .metrics import (
    GradCamMaps,
    KD_KINDS,
    ProxyScore,
    SimilarityMatrix,
    cost_proxy,
    diswot_score,
    diswot_score_from_bundles,
    gradcam_maps,
    kd_distance,
    matrix_mean_sq_diff,
    nwot_from_codes,
    nwot_score,
    relation_similarity,
    semantic_similarity,
    similarity_matrix,
)
from .network import (
    ActivationBundle,
    NetworkInstance,
    count_flops,
    count_params,
    sample_random,
    satisfies_constraints,
)
from .rankstats import (
    CoefficientSummary,
    CorrelationReport,
    MissingArchError,
    PairedSeries,
    average_ranks,
    evaluate_proxy,
    format_report_table,
    kendall_tau,
    pearson,
    spearman,
)
from .rng import InitSpec, derive_seed, fan_in, init_tensor, stream
from .search import EvoConfig, SearchState, evolve, get_topk, random_search

__version__ = "0.1.0"

__all__ = [
    "ActivationBundle",
    "Batch",
    "CoefficientSummary",
    "Constraints",
    "CorrelationReport",
    "EvoConfig",
    "GradCamMaps",
    "InitSpec",
    "KD_KINDS",
    "KdLossConfig",
    "MissingArchError",
    "NB201Cell",
    "NB201_OPS",
    "NetworkInstance",
    "PairedSeries",
    "ProxyScore",
    "S0Depths",
    "S2Config",
    "S2Stage",
    "ScoreRow",
    "SearchSpace",
    "SearchState",
    "SimilarityMatrix",
    "Tensor",
    "arch_id",
    "average_ranks",
    "avg_pool2d",
    "batchnorm_batchstats",
    "clamp_channels",
    "conv2d",
    "cost_proxy",
    "count_flops",
    "count_params",
    "derive_seed",
    "descriptor_from_json",
    "descriptor_in_space",
    "descriptor_to_json",
    "diswot_score",
    "diswot_score_from_bundles",
    "enumerate_s0",
    "evaluate_proxy",
    "evolve",
    "fan_in",
    "fc_weight_grad",
    "format_report_table",
    "get_topk",
    "global_avg_pool",
    "gradcam_maps",
    "init_tensor",
    "kd_distance",
    "kendall_tau",
    "linear",
    "load_accuracy_csv",
    "load_cifar_batch",
    "log_softmax",
    "loss_diswot_total",
    "loss_kd_kl",
    "loss_relation",
    "loss_semantic",
    "make_space",
    "matrix_mean_sq_diff",
    "max_descriptor",
    "mutate",
    "nb201_space",
    "nwot_from_codes",
    "nwot_score",
    "parse_nb201",
    "pearson",
    "random_search",
    "read_scores_csv",
    "relation_similarity",
    "relu",
    "residual_add",
    "s0_space",
    "s2_cifar_space",
    "s2_imagenet_space",
    "sample_descriptor",
    "sample_random",
    "satisfies_constraints",
    "semantic_similarity",
    "serialize_nb201",
    "similarity_matrix",
    "softmax",
    "softmax_cross_entropy",
    "spearman",
    "stream",
    "synth_batch",
    "with_constraints",
    "write_report_csv",
    "write_scores_csv",
]
