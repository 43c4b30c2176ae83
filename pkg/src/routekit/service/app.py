"""FastAPI service wrapping the routing engine.

Run with: uvicorn routekit.service.app:app
"""

from __future__ import annotations

from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__, data, evaluation, experiment, routing, synthetic
from ..costs import CostError
from ..nn import NetworkError
from ..predictors import (
    PredictorError,
    Registry,
    RegistryError,
    TrainConfig,
    add_strategy,
    predict_matrix,
)
from . import schemas

ENGINE_ERRORS = (
    data.CorpusError,
    CostError,
    NetworkError,
    PredictorError,
    RegistryError,
    routing.RoutingError,
    evaluation.EvaluationError,
    synthetic.SyntheticSpecError,
    experiment.ExperimentError,
)


def _train_config(section: schemas.TrainingSection) -> TrainConfig:
    return TrainConfig(
        epochs=section.epochs,
        batch_size=section.batch_size,
        learning_rate=section.learning_rate,
        hidden_dim=section.hidden_dim,
        mode=section.representation,
        early_stop_patience=section.early_stop_patience,
        holdout_fraction=section.holdout_fraction,
    )


def create_app() -> FastAPI:
    app = FastAPI(
        title="routekit",
        version=__version__,
        description="Cost-aware routing: per-strategy accuracy/cost predictors "
                    "with weighted-sum and budget-constrained assignment.",
    )

    async def engine_error_handler(request: Request, exc: Exception):
        status = 409 if isinstance(exc, routing.InfeasibleBudgetError) else 422
        payload = schemas.ErrorResponse(error=type(exc).__name__, detail=str(exc)).model_dump()
        if isinstance(exc, routing.InfeasibleBudgetError):
            payload["min_total_cost"] = exc.min_total_cost
        return JSONResponse(status_code=status, content=payload)

    for exc_type in ENGINE_ERRORS:
        app.add_exception_handler(exc_type, engine_error_handler)

    @app.exception_handler(FileNotFoundError)
    async def missing_file_handler(request: Request, exc: FileNotFoundError):
        return JSONResponse(status_code=404, content=schemas.ErrorResponse(
            error="FileNotFoundError", detail=str(exc)).model_dump())

    @app.get("/health", response_model=schemas.HealthResponse)
    def health():
        return schemas.HealthResponse(status="ok", version=__version__)

    @app.post("/corpus/ingest", response_model=schemas.IngestResponse)
    def ingest(req: schemas.IngestRequest):
        corpus = data.load_corpus(req.tasks_path, req.labels_path)
        return schemas.IngestResponse(
            n_tasks=len(corpus.tasks), n_labels=len(corpus.labels),
            dimension=corpus.dimension, strategy_ids=corpus.strategy_ids())

    @app.post("/corpus/synthetic", response_model=schemas.SynthResponse)
    def gen_synth(req: schemas.SynthRequest):
        if req.spec is not None:
            spec = synthetic.spec_from_dict(req.spec, seed=req.seed)
        else:
            spec = synthetic.two_cluster_spec(
                n_tasks=req.n_tasks or 500, seed=req.seed,
                noise_rate=req.noise_rate if req.noise_rate is not None else 0.03)
        corpus, strategies, planted = synthetic.generate_synthetic(spec)
        out = Path(req.out_dir)
        paths = {
            "tasks": out / "tasks.jsonl",
            "labels": out / "labels.jsonl",
            "strategies": out / "strategies.jsonl",
            "planted": out / "planted.jsonl",
        }
        data.save_corpus(corpus, paths["tasks"], paths["labels"])
        data.save_strategies(strategies, paths["strategies"])
        synthetic.save_planted(planted, paths["planted"])
        return schemas.SynthResponse(
            tasks_path=str(paths["tasks"]), labels_path=str(paths["labels"]),
            strategies_path=str(paths["strategies"]), planted_path=str(paths["planted"]),
            n_tasks=spec.n_tasks, k=spec.k)

    def _trained_summary(registry: Registry, trained_ids: list[str]) -> list[schemas.TrainedStrategy]:
        out = []
        for sid in trained_ids:
            pair = registry.load_pair(sid)
            meta = pair.training_meta
            out.append(schemas.TrainedStrategy(
                strategy_id=sid,
                train_seconds=float(meta.get("train_seconds", 0.0)),
                epochs_accuracy=(meta.get("accuracy") or {}).get("epochs_run"),
                epochs_cost=(meta.get("cost") or {}).get("epochs_run"),
                single_class_fallback=bool(meta.get("single_class_fallback", False))))
        return out

    @app.post("/registry/train", response_model=schemas.TrainResponse)
    def train(req: schemas.TrainRequest):
        corpus = data.load_corpus(req.tasks_path, req.labels_path)
        strategies = data.load_strategies(req.strategies_path)
        wanted = req.strategy_ids or [s.strategy_id for s in strategies]
        by_id = {s.strategy_id: s for s in strategies}
        missing = [sid for sid in wanted if sid not in by_id]
        if missing:
            raise PredictorError(f"strategies file lacks ids {missing}")
        registry = Registry.create(req.registry_dir, corpus.dimension)
        for sid in wanted:
            add_strategy(registry, by_id[sid], corpus, _train_config(req.training), req.seed)
        return schemas.TrainResponse(
            registry_dir=str(registry.root), k=registry.k,
            trained=_trained_summary(registry, wanted), strategy_ids=registry.strategy_ids())

    @app.post("/registry/add-strategy", response_model=schemas.TrainResponse)
    def add_one(req: schemas.AddStrategyRequest):
        corpus = data.load_corpus(req.tasks_path, req.labels_path)
        strategies = data.load_strategies(req.strategies_path)
        by_id = {s.strategy_id: s for s in strategies}
        if req.strategy_id not in by_id:
            raise PredictorError(f"strategies file lacks id {req.strategy_id!r}")
        registry = Registry.load(req.registry_dir)
        add_strategy(registry, by_id[req.strategy_id], corpus, _train_config(req.training), req.seed)
        return schemas.TrainResponse(
            registry_dir=str(registry.root), k=registry.k,
            trained=_trained_summary(registry, [req.strategy_id]),
            strategy_ids=registry.strategy_ids())

    @app.post("/predict/matrix", response_model=schemas.PredictResponse)
    def predict_endpoint(req: schemas.PredictRequest):
        registry = Registry.load(req.registry_dir)
        tasks = data.load_tasks(req.tasks_path)
        matrix = predict_matrix(registry, tasks)
        routing.save_matrix(matrix, req.out_path)
        return schemas.PredictResponse(
            out_path=req.out_path, n_tasks=matrix.n_tasks,
            n_strategies=matrix.n_strategies, strategy_ids=list(matrix.strategy_ids))

    def _route_summary(assignment: routing.Assignment, out_path: str) -> schemas.RouteSummary:
        return schemas.RouteSummary(
            out_path=out_path,
            method=assignment.meta.get("method", "unknown"),
            n_tasks=len(assignment.task_ids),
            total_predicted_accuracy=assignment.total_predicted_accuracy,
            total_predicted_cost=assignment.total_predicted_cost,
            over_budget_count=assignment.over_budget_count)

    @app.post("/route", response_model=schemas.RouteResponse)
    def route(req: schemas.RouteRequest):
        matrix = routing.load_matrix(req.matrix_path)
        if req.mode == "weighted":
            if req.w is None:
                raise routing.RoutingError("weighted mode requires w")
            normalize = bool(req.normalize) if req.normalize is not None else False
            assignment = routing.route_unconstrained(matrix, req.w, normalize)
            routing.save_assignment(assignment, req.out_path)
            return schemas.RouteResponse(assignments=[_route_summary(assignment, req.out_path)])
        if req.mode == "sweep":
            normalize = bool(req.normalize) if req.normalize is not None else True
            points = routing.sweep_pareto(matrix, routing.default_w_grid(req.num_points), normalize)
            out = Path(req.out_path)
            out.mkdir(parents=True, exist_ok=True)
            summaries = []
            for idx, point in enumerate(points):
                path = out / f"assignment_w{idx:02d}.jsonl"
                routing.save_assignment(point.assignment, path)
                summaries.append(_route_summary(point.assignment, str(path)))
            return schemas.RouteResponse(assignments=summaries)
        if req.budget_per_task is None:
            raise routing.RoutingError(f"{req.mode} mode requires budget_per_task")
        if req.mode == "global":
            assignment = routing.route_constrained_global(matrix, req.budget_per_task, req.resolution)
        else:
            assignment = routing.route_constrained_local(matrix, req.budget_per_task)
        routing.save_assignment(assignment, req.out_path)
        return schemas.RouteResponse(assignments=[_route_summary(assignment, req.out_path)])

    @app.post("/evaluate", response_model=schemas.EvalReportModel)
    def evaluate_endpoint(req: schemas.EvaluateRequest):
        corpus = data.load_corpus(req.tasks_path, req.labels_path)
        assignment = routing.load_assignment(req.assignment_path)
        report = evaluation.evaluate(assignment, corpus)
        return schemas.EvalReportModel(**report.as_dict())

    @app.post("/report/table", response_model=schemas.TableReportResponse)
    def report_table(req: schemas.TableReportRequest):
        corpus = data.load_corpus(req.tasks_path, req.labels_path)
        reports = []
        if req.include_best_single:
            sid, best = evaluation.best_single_strategy(corpus)
            reports.append(evaluation.EvalReport(**{**best.as_dict(), "method": f"best-single:{sid}"}))
        for path in req.assignment_paths:
            assignment = routing.load_assignment(path)
            reports.append(evaluation.evaluate(assignment, corpus))
        return schemas.TableReportResponse(
            reports=[schemas.EvalReportModel(**r.as_dict()) for r in reports],
            rendered=evaluation.render_eval_table(reports))

    @app.post("/report/transitions")
    def report_transitions(req: schemas.TransitionsRequest):
        corpus = data.load_corpus(req.tasks_path, req.labels_path)
        baseline = routing.load_assignment(req.baseline_assignment_path)
        routed = routing.load_assignment(req.routed_assignment_path)
        return evaluation.transition_report(baseline, routed, corpus).as_dict()

    @app.post("/report/pareto", response_model=schemas.ParetoResponse)
    def report_pareto(req: schemas.ParetoRequest):
        corpus = data.load_corpus(req.tasks_path, req.labels_path)
        matrix = routing.load_matrix(req.matrix_path)
        points = routing.sweep_pareto(matrix, routing.default_w_grid(req.num_points), req.normalize)
        reports = [evaluation.evaluate(p.assignment, corpus, method=f"sweep:w={p.w:g}") for p in points]
        out_csv = Path(req.out_csv)
        out_csv.parent.mkdir(parents=True, exist_ok=True)
        with open(out_csv, "w", encoding="utf-8") as fh:
            fh.write("w,mean_accuracy,total_cost\n")
            for point, report in zip(points, reports):
                fh.write(f"{point.w:g},{report.accuracy_percent:.1f},{report.total_cost:.2f}\n")
        return schemas.ParetoResponse(
            out_csv=str(out_csv),
            points=[schemas.ParetoPoint(w=point.w, mean_accuracy=report.accuracy_percent,
                                        total_cost=report.total_cost)
                    for point, report in zip(points, reports)])

    @app.post("/experiment/run", response_model=schemas.RunResponse)
    def run(req: schemas.RunRequest):
        result = experiment.run_experiment(req.config_path, req.output_dir)
        doc = result.as_dict()
        return schemas.RunResponse(output_dir=doc["output_dir"], artifacts=doc["artifacts"],
                                   headline=doc["headline"])

    return app


app = create_app()
