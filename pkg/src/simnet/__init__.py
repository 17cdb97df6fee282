"""Learned similarity scoring for feature vectors, with baselines and retrieval eval."""

from simnet.baselines import (
    LinearModel,
    cosine_matrix,
    cosine_similarity,
    linear_score,
    neg_euclidean,
    train_linear,
)
from simnet.dataio import (
    FormatError,
    SynthSpec,
    bridge_violation_report,
    generate_synthetic,
    load_checkpoint,
    read_feature_store,
    save_checkpoint,
    write_feature_store,
)
from simnet.nn import (
    Activation,
    DenseLayer,
    ForwardCache,
    GradientSet,
    MomentumState,
    Network,
    OptimizerConfig,
    ShapeError,
    StaleCacheError,
    backprop,
    build_network,
    forward,
    grad_check,
    sgd_step,
)
from simnet.retrieval import (
    Dataset,
    DatasetError,
    EvalReport,
    PairBatch,
    RankedList,
    average_precision,
    mean_average_precision,
    rank,
    sample_balanced_pairs,
    select_queries,
)
from simnet.scorers import (
    cosine_scorer,
    encoder_scorer,
    linear_scorer,
    neg_euclidean_scorer,
    parse_scorer_spec,
    random_scorer,
    simnet_scorer,
)
from simnet.similarity import (
    ARCH_PRESETS,
    ArchConfig,
    Convergence,
    DivergenceError,
    EpochRecord,
    SimNetModel,
    TrainConfig,
    TrainingLog,
    WarmupReport,
    build_model,
    mine_difficult_pairs,
    pair_loss,
    pair_targets,
    score_pair,
    score_pairs,
    train,
    train_end_to_end,
    train_with_refinement,
    warmup,
)

__all__ = [
    # nn core
    "Activation",
    "DenseLayer",
    "ForwardCache",
    "GradientSet",
    "MomentumState",
    "Network",
    "OptimizerConfig",
    "ShapeError",
    "StaleCacheError",
    "backprop",
    "build_network",
    "forward",
    "grad_check",
    "sgd_step",
    # similarity network
    "ARCH_PRESETS",
    "ArchConfig",
    "Convergence",
    "DivergenceError",
    "EpochRecord",
    "SimNetModel",
    "TrainConfig",
    "TrainingLog",
    "WarmupReport",
    "build_model",
    "mine_difficult_pairs",
    "pair_loss",
    "pair_targets",
    "score_pair",
    "score_pairs",
    "train",
    "train_end_to_end",
    "train_with_refinement",
    "warmup",
    # baselines
    "LinearModel",
    "cosine_matrix",
    "cosine_similarity",
    "linear_score",
    "neg_euclidean",
    "train_linear",
    # retrieval evaluation
    "Dataset",
    "DatasetError",
    "EvalReport",
    "PairBatch",
    "RankedList",
    "average_precision",
    "mean_average_precision",
    "rank",
    "sample_balanced_pairs",
    "select_queries",
    # scorer adapters
    "cosine_scorer",
    "encoder_scorer",
    "linear_scorer",
    "neg_euclidean_scorer",
    "parse_scorer_spec",
    "random_scorer",
    "simnet_scorer",
    # data formats and synthetic benchmark
    "FormatError",
    "SynthSpec",
    "bridge_violation_report",
    "generate_synthetic",
    "load_checkpoint",
    "read_feature_store",
    "save_checkpoint",
    "write_feature_store",
]
