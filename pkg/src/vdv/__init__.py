"""Voting ensembles of kernel SVMs over frozen feature vectors.

The model is a two-level majority vote: each feature space (one per upstream
extractor) gets a block of SVMs trained on balanced subsets of the training
data, and the blocks vote once more at the top. Ties break toward the
positive class at both levels.
"""

from .baselines import (
    STRATEGY_NAMES,
    ClassWeights,
    StrategyResult,
    compute_class_weights,
    oversample,
    run_comparison,
    undersample,
)
from .dataset import (
    FeatureSet,
    MiniTrainingSet,
    build_balanced_subsets,
    feature_file_info,
    load_feature_set,
    partition_by_class,
    patient_wise_split,
    random_split,
    save_feature_set,
    synth_imbalanced,
)
from .ensemble import (
    SCORE_RULES,
    BlockModel,
    VdvModel,
    block_predict,
    block_score,
    block_scores,
    block_votes,
    load_block,
    load_model,
    load_vdv,
    majority_vote,
    save_block,
    save_vdv,
    train_block,
    train_vdv,
    vdv_predict,
    vdv_score,
    vdv_scores,
)
from .errors import (
    ConvergenceError,
    DataError,
    FeatureFileError,
    MissingLabelsError,
    ModelFileError,
    UndefinedMetricError,
    VdvError,
)
from .metrics import (
    ConfusionMatrix,
    EvalReport,
    accuracy,
    confusion,
    evaluate,
    f_beta,
    g_mean,
    precision,
    recall,
    roc_auc,
    roc_points,
    specificity,
)
from .pca import PcaModel, fit_pca, pca_reconstruct, pca_transform
from .svm import (
    KernelSpec,
    TrainConfig,
    TrainedSvm,
    TrainingDiagnostics,
    decision_value,
    decision_values,
    kernel_eval,
    kernel_matrix,
    load_svm,
    predict,
    save_svm,
    train_svm,
)

__version__ = "0.1.0"

__all__ = [
    "BlockModel",
    "ClassWeights",
    "ConfusionMatrix",
    "ConvergenceError",
    "DataError",
    "EvalReport",
    "FeatureFileError",
    "FeatureSet",
    "KernelSpec",
    "MiniTrainingSet",
    "MissingLabelsError",
    "ModelFileError",
    "PcaModel",
    "SCORE_RULES",
    "STRATEGY_NAMES",
    "StrategyResult",
    "TrainConfig",
    "TrainedSvm",
    "TrainingDiagnostics",
    "UndefinedMetricError",
    "VdvError",
    "VdvModel",
    "accuracy",
    "block_predict",
    "block_score",
    "block_scores",
    "block_votes",
    "build_balanced_subsets",
    "compute_class_weights",
    "confusion",
    "decision_value",
    "decision_values",
    "evaluate",
    "f_beta",
    "feature_file_info",
    "fit_pca",
    "g_mean",
    "kernel_eval",
    "kernel_matrix",
    "load_block",
    "load_feature_set",
    "load_model",
    "load_svm",
    "load_vdv",
    "majority_vote",
    "oversample",
    "partition_by_class",
    "patient_wise_split",
    "pca_reconstruct",
    "pca_transform",
    "precision",
    "predict",
    "random_split",
    "recall",
    "roc_auc",
    "roc_points",
    "run_comparison",
    "save_block",
    "save_feature_set",
    "save_svm",
    "save_vdv",
    "specificity",
    "synth_imbalanced",
    "train_block",
    "train_svm",
    "train_vdv",
    "undersample",
    "vdv_predict",
    "vdv_score",
    "vdv_scores",
]
