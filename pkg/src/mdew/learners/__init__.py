"""From-scratch learners: Bayesian ridge, KNN regression, CART trees,
random forests, and gradient boosting, all on the shared tree kernel."""

from .knn import KnnRegressor, fit_knn_regressor
from .ridge import BayesianRidgeModel, fit_bayes_ridge
from .serialize import MODEL_FORMAT, MODEL_VERSION, model_from_dict, model_to_dict
from .trees import (
    PROB_CLIP,
    ConstantModel,
    DecisionTree,
    GradientBoostedModel,
    RandomForestModel,
    TreeParams,
    fit_gbm,
    fit_random_forest,
    fit_tree,
)

__all__ = [
    "BayesianRidgeModel",
    "ConstantModel",
    "DecisionTree",
    "GradientBoostedModel",
    "KnnRegressor",
    "MODEL_FORMAT",
    "MODEL_VERSION",
    "PROB_CLIP",
    "RandomForestModel",
    "TreeParams",
    "fit_bayes_ridge",
    "fit_gbm",
    "fit_knn_regressor",
    "fit_random_forest",
    "fit_tree",
    "model_from_dict",
    "model_to_dict",
]
