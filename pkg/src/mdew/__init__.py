"""mdew: missingness-aware dynamic ensemble weighting for tabular classification.

Trains a pool of imputation->classification pipelines, estimates each
pipeline's local competence from held-out errors in the neighborhood of the
sample being predicted, and combines pipeline probabilities with per-sample
softmax weights. Ships the full experiment harness: synthetic MCAR/MAR/MNAR
amputation, from-scratch learners and metrics, cross-validated runs, and a
CLI (``mdew``).
"""

__version__ = "0.1.0"

from ._kernels import BACKEND as KERNEL_BACKEND
from .data import (
    Dataset,
    FoldPlan,
    ScalerStats,
    apply_standardizer,
    dataset_from_arrays,
    fit_standardizer,
    invert_standardizer,
    load_csv,
    stratified_kfold,
    take,
    two_stage_split,
    write_csv,
)
from .ensemble import (
    ErrorMatrix,
    FittedPipeline,
    PipelineSpec,
    WeightedPrediction,
    build_error_matrix,
    default_pool,
    fit_pool,
    load_context,
    mdew_predict,
    predict_batch,
    save_context,
    uma_predict,
)
from .errors import ConfigError, ConvergenceError, DataError, MdewError
from .imputers import (
    FittedImputer,
    ImputerSpec,
    fit_imputer,
    impute_dataset,
    imputer_from_dict,
    imputer_to_dict,
    nan_euclidean_distances,
    spec_from_name,
)
from .learners import (
    BayesianRidgeModel,
    DecisionTree,
    GradientBoostedModel,
    KnnRegressor,
    RandomForestModel,
    TreeParams,
    fit_bayes_ridge,
    fit_gbm,
    fit_knn_regressor,
    fit_random_forest,
    fit_tree,
    model_from_dict,
    model_to_dict,
)
from .metrics import (
    CalibrationCurve,
    PlattMap,
    RankTable,
    ScoredSet,
    TTestResult,
    auroc,
    average_precision,
    brier,
    calibration_curve,
    fraction_improved,
    paired_t_test_less,
    per_sample_errors,
    platt_calibrate,
    rank_experiments,
    student_t_cdf,
)
from .missingness import (
    AmputationPlan,
    AmputationResult,
    ampute,
    ampute_mar,
    ampute_mcar,
    ampute_mnar,
    calibrate_intercept,
    imputation_rmse,
)
from .runner import (
    ExperimentConfig,
    ExperimentReport,
    emit_report,
    load_config,
    load_grid_config,
    run_experiment,
    run_grid,
)

__all__ = [
    "KERNEL_BACKEND",
    "__version__",
    # errors
    "MdewError",
    "ConfigError",
    "DataError",
    "ConvergenceError",
    # data
    "Dataset",
    "ScalerStats",
    "FoldPlan",
    "load_csv",
    "write_csv",
    "dataset_from_arrays",
    "take",
    "fit_standardizer",
    "apply_standardizer",
    "invert_standardizer",
    "stratified_kfold",
    "two_stage_split",
    # missingness
    "AmputationPlan",
    "AmputationResult",
    "ampute",
    "ampute_mcar",
    "ampute_mar",
    "ampute_mnar",
    "calibrate_intercept",
    "imputation_rmse",
    # learners
    "TreeParams",
    "DecisionTree",
    "BayesianRidgeModel",
    "KnnRegressor",
    "RandomForestModel",
    "GradientBoostedModel",
    "fit_tree",
    "fit_bayes_ridge",
    "fit_knn_regressor",
    "fit_random_forest",
    "fit_gbm",
    "model_to_dict",
    "model_from_dict",
    # imputers
    "ImputerSpec",
    "FittedImputer",
    "spec_from_name",
    "fit_imputer",
    "impute_dataset",
    "nan_euclidean_distances",
    "imputer_to_dict",
    "imputer_from_dict",
    # ensemble
    "PipelineSpec",
    "FittedPipeline",
    "ErrorMatrix",
    "WeightedPrediction",
    "default_pool",
    "fit_pool",
    "build_error_matrix",
    "mdew_predict",
    "uma_predict",
    "predict_batch",
    "save_context",
    "load_context",
    # metrics
    "ScoredSet",
    "TTestResult",
    "PlattMap",
    "CalibrationCurve",
    "RankTable",
    "auroc",
    "average_precision",
    "brier",
    "per_sample_errors",
    "fraction_improved",
    "paired_t_test_less",
    "student_t_cdf",
    "platt_calibrate",
    "calibration_curve",
    "rank_experiments",
    # runner
    "ExperimentConfig",
    "ExperimentReport",
    "run_experiment",
    "run_grid",
    "emit_report",
    "load_config",
    "load_grid_config",
]
