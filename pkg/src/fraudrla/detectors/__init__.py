from .engine import (
    FOREST_GRID,
    NETWORK_GRID,
    FraudEngine,
    classification_metrics,
    engine_decide,
    engine_from_dict,
    engine_to_dict,
    fit_model,
    grid_search_cv,
    load_engine,
    save_engine,
)
from .forest import ForestParams, RandomForestModel, forest_fit
from .network import DivergenceError, MlpClassifierModel, NetworkParams, mlp_clf_fit
from .rules import ExtremeValueRule, fit_extreme_rule, rule_predict
