"""Cost-aware routing engine.

Learns per-strategy accuracy and cost predictors over task/strategy
representations and assigns each task a computation strategy, either by
weighted-sum scalarization or under a total cost budget via dynamic
programming. New strategies onboard continually: training one predictor pair
never touches the others.
"""

__version__ = "0.1.0"

from .costs import UsageRecord, flops_scaled, label_costs
from .data import Corpus, CorpusError, PerfLabel, Strategy, TaskRecord, load_corpus, split_corpus
from .evaluation import EvalReport, TransitionReport, best_single_strategy, evaluate, transition_report
from .predictors import (
    PredictorPair,
    Registry,
    RepresentationConfig,
    TrainConfig,
    add_strategy,
    build_input,
    predict,
    predict_matrix,
    train_pair,
)
from .routing import (
    Assignment,
    InfeasibleBudgetError,
    PredictionMatrix,
    brute_force_constrained,
    route_constrained_global,
    route_constrained_local,
    route_unconstrained,
    sweep_pareto,
)
from .synthetic import SyntheticSpec, generate_synthetic, two_cluster_spec

__all__ = [
    "Assignment",
    "Corpus",
    "CorpusError",
    "EvalReport",
    "InfeasibleBudgetError",
    "PerfLabel",
    "PredictionMatrix",
    "PredictorPair",
    "Registry",
    "RepresentationConfig",
    "Strategy",
    "SyntheticSpec",
    "TaskRecord",
    "TrainConfig",
    "TransitionReport",
    "UsageRecord",
    "add_strategy",
    "best_single_strategy",
    "brute_force_constrained",
    "build_input",
    "evaluate",
    "flops_scaled",
    "generate_synthetic",
    "label_costs",
    "load_corpus",
    "predict",
    "predict_matrix",
    "route_constrained_global",
    "route_constrained_local",
    "route_unconstrained",
    "split_corpus",
    "sweep_pareto",
    "train_pair",
    "transition_report",
    "two_cluster_spec",
]
