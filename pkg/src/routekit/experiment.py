"""End-to-end experiment pipeline driven by one declarative config file.

A run executes: corpus (files or synthetic) -> split -> per-strategy training
(optionally in a continual initial/added sequence) -> prediction matrix ->
routing (sweep / weighted / global / local / best-single) -> realized
evaluation, transition report, and a Pareto CSV.

Every random draw derives from the single config seed. Wall-clock numbers are
confined to timings.json and the registry manifest so that all other report
artifacts are byte-identical across reruns with the same seed.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import yaml

from . import data, evaluation, routing, synthetic
from .nn import derive_seed
from .predictors import (
    MODES,
    Registry,
    RegistryEntry,
    TrainConfig,
    predict_matrix,
    train_pair,
)

DEFAULT_W_POINTS = 21


class ExperimentError(ValueError):
    """Config or pipeline failure, tagged with its stage."""


def _stage(stage: str, exc: Exception) -> ExperimentError:
    return ExperimentError(f"[{stage}] {exc}")


def load_config(path: str | Path) -> dict:
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as fh:
            cfg = yaml.safe_load(fh)
    except (OSError, yaml.YAMLError) as exc:
        raise ExperimentError(f"[config] cannot read {path}: {exc}") from None
    if not isinstance(cfg, dict):
        raise ExperimentError(f"[config] {path} must hold a mapping")
    return cfg


def train_config_from(section: dict) -> TrainConfig:
    mode = section.get("representation", "both")
    if mode not in MODES:
        raise ExperimentError(f"[config] training.representation must be one of {MODES}, got {mode!r}")
    return TrainConfig(
        epochs=int(section.get("epochs", 100)),
        batch_size=int(section.get("batch_size", 32)),
        learning_rate=float(section.get("learning_rate", 1e-3)),
        hidden_dim=int(section.get("hidden_dim", 256)),
        mode=mode,
        early_stop_patience=section.get("early_stop_patience"),
        holdout_fraction=float(section.get("holdout_fraction", 0.1)),
    )


@dataclass
class ExperimentResult:
    output_dir: Path
    artifacts: dict
    headline: dict

    def as_dict(self) -> dict:
        return {
            "output_dir": str(self.output_dir),
            "artifacts": {k: str(v) for k, v in self.artifacts.items()},
            "headline": self.headline,
        }


def _build_corpus(cfg: dict, seed: int, out_dir: Path):
    section = cfg.get("corpus")
    if not isinstance(section, dict):
        raise ExperimentError("[corpus] config needs a corpus section")
    if "synthetic" in section:
        spec = synthetic.spec_from_dict(section["synthetic"], seed=derive_seed(seed, "synthetic"))
        corpus, strategies, planted = synthetic.generate_synthetic(spec)
        corpus_dir = out_dir / "corpus"
        data.save_corpus(corpus, corpus_dir / "tasks.jsonl", corpus_dir / "labels.jsonl")
        data.save_strategies(strategies, corpus_dir / "strategies.jsonl")
        synthetic.save_planted(planted, corpus_dir / "planted.jsonl")
        return corpus, strategies
    if "files" in section:
        files = section["files"]
        try:
            corpus = data.load_corpus(files["tasks"], files["labels"])
            strategies = data.load_strategies(files["strategies"])
        except KeyError as exc:
            raise ExperimentError(f"[corpus] files section missing {exc}") from None
        return corpus, strategies
    raise ExperimentError("[corpus] corpus section needs either 'synthetic' or 'files'")


def _train_phase(registry: Registry, strategies, corpus, train_cfg: TrainConfig,
                 seed: int, parallel: bool) -> list[dict]:
    """Train pairs (optionally concurrently) and register them in list order."""
    timings = []
    if parallel and len(strategies) > 1:
        with ThreadPoolExecutor(max_workers=min(4, len(strategies))) as pool:
            pairs = list(pool.map(
                lambda s: train_pair(s, corpus, train_cfg, seed, registry.root), strategies))
    else:
        pairs = [train_pair(s, corpus, train_cfg, seed, registry.root) for s in strategies]
    for pair in pairs:
        registry.entries.append(RegistryEntry(
            strategy_id=pair.strategy_id,
            accuracy_path=pair.accuracy_path.name,
            cost_path=pair.cost_path.name,
            representation_mode=pair.config.mode,
            trained_at=pair.training_meta.get("trained_at", ""),
            train_seconds=float(pair.training_meta.get("train_seconds", 0.0)),
        ))
        timings.append({
            "strategy_id": pair.strategy_id,
            "seconds": float(pair.training_meta.get("train_seconds", 0.0)),
            "epochs_accuracy": pair.training_meta.get("accuracy", {}).get("epochs_run"),
            "epochs_cost": pair.training_meta.get("cost", {}).get("epochs_run"),
        })
    registry.save_manifest()
    return timings


def _select_best_point(points, reports):
    """Highest realized accuracy, then lower cost, then lower w."""
    best = None
    for point, report in zip(points, reports):
        key = (-report.accuracy_percent, report.total_cost, point.w)
        if best is None or key < best[0]:
            best = (key, point, report)
    return best[1], best[2]


def run_experiment(config: dict | str | Path, output_dir: str | Path | None = None) -> ExperimentResult:
    if not isinstance(config, dict):
        config = load_config(config)
    if output_dir is None:
        output_dir = config.get("output_dir")
    if output_dir is None:
        raise ExperimentError("[config] output_dir must be given in the config or as an argument")
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    seed = int(config.get("seed", 0))
    artifacts: dict[str, Path] = {}

    # corpus
    try:
        corpus, strategies = _build_corpus(config, seed, out)
    except (data.CorpusError, synthetic.SyntheticSpecError) as exc:
        raise _stage("corpus", exc) from exc
    strategy_by_id = {s.strategy_id: s for s in strategies}

    # split
    split_cfg = config.get("split", {})
    try:
        train_corpus, test_corpus = data.split_corpus(
            corpus, float(split_cfg.get("train_fraction", 0.8)), derive_seed(seed, "split"))
    except data.CorpusError as exc:
        raise _stage("split", exc) from exc
    if not test_corpus.tasks or not train_corpus.tasks:
        raise ExperimentError("[split] both splits must be non-empty; adjust train_fraction")

    # training (with optional continual phases)
    train_section = config.get("training", {})
    train_cfg = train_config_from(train_section)
    parallel = bool(train_section.get("parallel", False))
    continual = config.get("continual") or {}
    initial_ids = continual.get("initial", [s.strategy_id for s in strategies])
    added_ids = continual.get("added", [])
    unknown = [sid for sid in [*initial_ids, *added_ids] if sid not in strategy_by_id]
    if unknown:
        raise ExperimentError(f"[train] unknown strategy ids in continual section: {unknown}")
    registry = Registry.create(out / "registry", corpus.dimension)
    train_seed = derive_seed(seed, "train")
    try:
        initial_timings = _train_phase(registry, [strategy_by_id[s] for s in initial_ids],
                                       train_corpus, train_cfg, train_seed, parallel)
        added_timings = _train_phase(registry, [strategy_by_id[s] for s in added_ids],
                                     train_corpus, train_cfg, train_seed, parallel) if added_ids else []
    except Exception as exc:
        raise _stage("train", exc) from exc
    total_seconds = sum(t["seconds"] for t in [*initial_timings, *added_timings]) or 1.0
    timings_doc = {
        "parallel": parallel,
        "per_strategy": [
            {**t, "relative": t["seconds"] / total_seconds}
            for t in [*initial_timings, *added_timings]
        ],
        "initial_seconds": sum(t["seconds"] for t in initial_timings),
        "added_seconds": sum(t["seconds"] for t in added_timings),
        "total_seconds": total_seconds,
        "note": "wall-clock values; excluded from determinism comparisons",
    }
    artifacts["timings"] = out / "timings.json"
    _write_json(timings_doc, artifacts["timings"])

    # prediction matrix on the test split
    try:
        matrix = predict_matrix(registry, list(test_corpus.tasks))
    except Exception as exc:
        raise _stage("predict", exc) from exc
    artifacts["matrix"] = out / "matrix.jsonl"
    routing.save_matrix(matrix, artifacts["matrix"])

    # routing + evaluation
    routing_cfg = config.get("routing", {})
    reports: list[evaluation.EvalReport] = []
    try:
        best_sid, best_single_report = evaluation.best_single_strategy(
            test_corpus, among=list(matrix.strategy_ids))
    except evaluation.EvaluationError as exc:
        raise _stage("evaluate", exc) from exc
    baseline = routing.single_strategy_assignment(matrix, best_sid)
    artifacts["assignment_best_single"] = out / "assignment_best_single.jsonl"
    routing.save_assignment(baseline, artifacts["assignment_best_single"])
    reports.append(evaluation.EvalReport(**{**best_single_report.as_dict(),
                                            "method": f"best-single:{best_sid}"}))

    sweep_cfg = routing_cfg.get("sweep", {})
    sweep_points = None
    routed_for_transitions = None
    if sweep_cfg is not None:
        num_points = int(sweep_cfg.get("num_points", DEFAULT_W_POINTS))
        normalize = bool(sweep_cfg.get("normalize", True))
        try:
            sweep_points = routing.sweep_pareto(matrix, routing.default_w_grid(num_points), normalize)
            sweep_reports = [evaluation.evaluate(p.assignment, test_corpus, method=f"sweep:w={p.w:g}")
                             for p in sweep_points]
        except (routing.RoutingError, evaluation.EvaluationError) as exc:
            raise _stage("route:sweep", exc) from exc
        artifacts["pareto"] = out / "pareto.csv"
        _write_pareto_csv(sweep_points, sweep_reports, artifacts["pareto"])
        best_point, best_point_report = _select_best_point(sweep_points, sweep_reports)
        artifacts["assignment_sweep_best"] = out / "assignment_sweep_best.jsonl"
        routing.save_assignment(best_point.assignment, artifacts["assignment_sweep_best"])
        reports.append(evaluation.EvalReport(**{**best_point_report.as_dict(),
                                                "method": f"sweep-best:w={best_point.w:g}"}))
        routed_for_transitions = best_point.assignment

    if "weighted" in routing_cfg:
        wcfg = routing_cfg["weighted"]
        w_val = float(wcfg.get("w", 0.5))
        try:
            weighted = routing.route_unconstrained(matrix, w_val, bool(wcfg.get("normalize", False)))
            reports.append(evaluation.evaluate(weighted, test_corpus, method=f"weighted:w={w_val:g}"))
        except (routing.RoutingError, evaluation.EvaluationError) as exc:
            raise _stage("route:weighted", exc) from exc
        artifacts["assignment_weighted"] = out / "assignment_weighted.jsonl"
        routing.save_assignment(weighted, artifacts["assignment_weighted"])
        if routed_for_transitions is None:
            routed_for_transitions = weighted

    if "global" in routing_cfg:
        gcfg = routing_cfg["global"]
        try:
            glob = routing.route_constrained_global(matrix, float(gcfg["budget_per_task"]),
                                                    int(gcfg.get("resolution", 1)))
            reports.append(evaluation.evaluate(glob, test_corpus, method="global"))
        except (routing.RoutingError, evaluation.EvaluationError, KeyError) as exc:
            raise _stage("route:global", exc) from exc
        artifacts["assignment_global"] = out / "assignment_global.jsonl"
        routing.save_assignment(glob, artifacts["assignment_global"])

    if "local" in routing_cfg:
        lcfg = routing_cfg["local"]
        try:
            local = routing.route_constrained_local(matrix, float(lcfg["budget_per_task"]))
            reports.append(evaluation.evaluate(local, test_corpus, method="local"))
        except (routing.RoutingError, evaluation.EvaluationError, KeyError) as exc:
            raise _stage("route:local", exc) from exc
        artifacts["assignment_local"] = out / "assignment_local.jsonl"
        routing.save_assignment(local, artifacts["assignment_local"])

    artifacts["eval_reports"] = out / "eval_reports.json"
    _write_json([r.as_dict() for r in reports], artifacts["eval_reports"])

    if routed_for_transitions is not None:
        try:
            transitions = evaluation.transition_report(baseline, routed_for_transitions, test_corpus)
        except evaluation.EvaluationError as exc:
            raise _stage("report:transitions", exc) from exc
        artifacts["transitions"] = out / "transitions.json"
        _write_json(transitions.as_dict(), artifacts["transitions"])

    headline = {
        "n_train_tasks": len(train_corpus.tasks),
        "n_test_tasks": len(test_corpus.tasks),
        "strategies": registry.strategy_ids(),
        "methods": {r.method: {"accuracy_percent": round(r.accuracy_percent, 1),
                               "total_cost": round(r.total_cost, 2)} for r in reports},
    }
    artifacts["result"] = out / "result.json"
    result = ExperimentResult(out, artifacts, headline)
    _write_json(result.as_dict(), artifacts["result"])
    return result


# Artifacts whose bytes must match across same-seed reruns (timing files and
# the registry manifest legitimately differ).
DETERMINISTIC_ARTIFACTS = (
    "matrix", "pareto", "eval_reports", "transitions", "result",
    "assignment_best_single", "assignment_sweep_best", "assignment_weighted",
    "assignment_global", "assignment_local",
)


def _write_json(doc, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_pareto_csv(points, reports, path: Path) -> None:
    """w, realized mean accuracy (percent, 1 dp), realized total cost (2 dp)."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("w,mean_accuracy,total_cost\n")
        for point, report in zip(points, reports):
            fh.write(f"{point.w:g},{report.accuracy_percent:.1f},{report.total_cost:.2f}\n")
