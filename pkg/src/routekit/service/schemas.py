"""Request/response models for the routing service.

Heavy artifacts (corpora, weight files, matrices, assignments) stay on disk;
requests carry file paths, responses carry summaries. The service and its
clients are assumed to share a filesystem.
"""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, Field


class HealthResponse(BaseModel):
    status: str
    version: str


class IngestRequest(BaseModel):
    tasks_path: str
    labels_path: str


class IngestResponse(BaseModel):
    n_tasks: int
    n_labels: int
    dimension: int
    strategy_ids: list[str]


class SynthRequest(BaseModel):
    out_dir: str
    spec: Optional[dict] = None
    seed: int = 0
    n_tasks: Optional[int] = None
    noise_rate: Optional[float] = None


class SynthResponse(BaseModel):
    tasks_path: str
    labels_path: str
    strategies_path: str
    planted_path: str
    n_tasks: int
    k: int


class TrainingSection(BaseModel):
    epochs: int = 100
    batch_size: int = 32
    learning_rate: float = 1e-3
    hidden_dim: int = 256
    representation: Literal["general-only", "task-specific-only", "both"] = "both"
    early_stop_patience: Optional[int] = None
    holdout_fraction: float = 0.1


class TrainRequest(BaseModel):
    tasks_path: str
    labels_path: str
    strategies_path: str
    registry_dir: str
    seed: int = 0
    strategy_ids: Optional[list[str]] = None
    training: TrainingSection = Field(default_factory=TrainingSection)


class TrainedStrategy(BaseModel):
    strategy_id: str
    train_seconds: float
    epochs_accuracy: Optional[int] = None
    epochs_cost: Optional[int] = None
    single_class_fallback: bool = False


class TrainResponse(BaseModel):
    registry_dir: str
    k: int
    trained: list[TrainedStrategy]
    strategy_ids: list[str]


class AddStrategyRequest(BaseModel):
    tasks_path: str
    labels_path: str
    strategies_path: str
    registry_dir: str
    strategy_id: str
    seed: int = 0
    training: TrainingSection = Field(default_factory=TrainingSection)


class PredictRequest(BaseModel):
    registry_dir: str
    tasks_path: str
    out_path: str


class PredictResponse(BaseModel):
    out_path: str
    n_tasks: int
    n_strategies: int
    strategy_ids: list[str]


class RouteRequest(BaseModel):
    matrix_path: str
    mode: Literal["weighted", "sweep", "global", "local"]
    out_path: str
    w: Optional[float] = None
    num_points: int = 21
    normalize: Optional[bool] = None
    budget_per_task: Optional[float] = None
    resolution: int = 1


class RouteSummary(BaseModel):
    out_path: str
    method: str
    n_tasks: int
    total_predicted_accuracy: float
    total_predicted_cost: float
    over_budget_count: int


class RouteResponse(BaseModel):
    assignments: list[RouteSummary]
    pareto_csv: Optional[str] = None


class EvaluateRequest(BaseModel):
    assignment_path: str
    tasks_path: str
    labels_path: str


class EvalReportModel(BaseModel):
    method: str
    n_tasks: int
    correct_count: int
    accuracy_percent: float
    total_cost: float
    mean_cost: float
    over_budget_count: int


class TableReportRequest(BaseModel):
    assignment_paths: list[str]
    tasks_path: str
    labels_path: str
    include_best_single: bool = True


class TableReportResponse(BaseModel):
    reports: list[EvalReportModel]
    rendered: str


class TransitionsRequest(BaseModel):
    baseline_assignment_path: str
    routed_assignment_path: str
    tasks_path: str
    labels_path: str


class ParetoRequest(BaseModel):
    matrix_path: str
    tasks_path: str
    labels_path: str
    out_csv: str
    num_points: int = 21
    normalize: bool = True


class ParetoPoint(BaseModel):
    w: float
    mean_accuracy: float
    total_cost: float


class ParetoResponse(BaseModel):
    out_csv: str
    points: list[ParetoPoint]


class RunRequest(BaseModel):
    config_path: str
    output_dir: Optional[str] = None


class RunResponse(BaseModel):
    output_dir: str
    artifacts: dict[str, str]
    headline: dict


class ErrorResponse(BaseModel):
    error: str
    detail: str
