import json

import pytest
import yaml
from fastapi.testclient import TestClient

from routekit.service.app import create_app


@pytest.fixture(scope="module")
def client():
    with TestClient(create_app()) as c:
        yield c


@pytest.fixture(scope="module")
def workspace(client, tmp_path_factory):
    """Synthetic corpus + trained registry + prediction matrix, shared per module."""
    root = tmp_path_factory.mktemp("svc")
    synth = client.post("/corpus/synthetic", json={
        "out_dir": str(root / "corpus"), "seed": 5, "n_tasks": 80, "noise_rate": 0.02})
    assert synth.status_code == 200, synth.text
    paths = synth.json()
    train = client.post("/registry/train", json={
        "tasks_path": paths["tasks_path"], "labels_path": paths["labels_path"],
        "strategies_path": paths["strategies_path"], "registry_dir": str(root / "registry"),
        "seed": 1, "training": {"epochs": 6, "hidden_dim": 16}})
    assert train.status_code == 200, train.text
    predict = client.post("/predict/matrix", json={
        "registry_dir": str(root / "registry"), "tasks_path": paths["tasks_path"],
        "out_path": str(root / "matrix.jsonl")})
    assert predict.status_code == 200, predict.text
    return {"root": root, **paths, "registry_dir": str(root / "registry"),
            "matrix_path": str(root / "matrix.jsonl")}


class TestHealth:
    def test_health(self, client):
        body = client.get("/health").json()
        assert body["status"] == "ok"


class TestCorpusEndpoints:
    def test_ingest_reports_counts(self, client, workspace):
        res = client.post("/corpus/ingest", json={
            "tasks_path": workspace["tasks_path"], "labels_path": workspace["labels_path"]})
        assert res.status_code == 200
        body = res.json()
        assert body["n_tasks"] == 80
        assert body["n_labels"] == 160
        assert body["dimension"] == 16
        assert body["strategy_ids"] == ["small-vanilla", "big-cot"]

    def test_ingest_missing_file_is_404(self, client):
        res = client.post("/corpus/ingest", json={
            "tasks_path": "/nope/tasks.jsonl", "labels_path": "/nope/labels.jsonl"})
        assert res.status_code == 404

    def test_ingest_invalid_corpus_is_422(self, client, tmp_path):
        tasks = tmp_path / "tasks.jsonl"
        tasks.write_text('{"task_id": "t", "text": "x", "embedding": [1.0]}\n')
        labels = tmp_path / "labels.jsonl"
        labels.write_text('{"task_id": "t", "strategy_id": "s", "accuracy": 0.5, "cost": 1}\n')
        res = client.post("/corpus/ingest", json={
            "tasks_path": str(tasks), "labels_path": str(labels)})
        assert res.status_code == 422
        assert res.json()["error"] == "CorpusError"


class TestTrainingEndpoints:
    def test_train_summary(self, client, workspace):
        res = client.post("/registry/train", json={
            "tasks_path": workspace["tasks_path"], "labels_path": workspace["labels_path"],
            "strategies_path": workspace["strategies_path"],
            "registry_dir": str(workspace["root"] / "registry2"),
            "seed": 1, "strategy_ids": ["small-vanilla"],
            "training": {"epochs": 2, "hidden_dim": 8}})
        assert res.status_code == 200
        body = res.json()
        assert body["strategy_ids"] == ["small-vanilla"]
        assert body["trained"][0]["epochs_accuracy"] == 2

    def test_add_strategy_and_duplicate(self, client, workspace):
        res = client.post("/registry/add-strategy", json={
            "tasks_path": workspace["tasks_path"], "labels_path": workspace["labels_path"],
            "strategies_path": workspace["strategies_path"],
            "registry_dir": str(workspace["root"] / "registry2"),
            "strategy_id": "big-cot", "seed": 1, "training": {"epochs": 2, "hidden_dim": 8}})
        assert res.status_code == 200
        assert res.json()["strategy_ids"] == ["small-vanilla", "big-cot"]
        dup = client.post("/registry/add-strategy", json={
            "tasks_path": workspace["tasks_path"], "labels_path": workspace["labels_path"],
            "strategies_path": workspace["strategies_path"],
            "registry_dir": str(workspace["root"] / "registry2"),
            "strategy_id": "big-cot", "seed": 1, "training": {"epochs": 2, "hidden_dim": 8}})
        assert dup.status_code == 422
        assert dup.json()["error"] == "RegistryError"


class TestRouteEndpoints:
    def test_weighted(self, client, workspace):
        out = str(workspace["root"] / "weighted.jsonl")
        res = client.post("/route", json={
            "matrix_path": workspace["matrix_path"], "mode": "weighted", "w": 0.8,
            "normalize": True, "out_path": out})
        assert res.status_code == 200
        summary = res.json()["assignments"][0]
        assert summary["method"] == "weighted"
        assert summary["n_tasks"] == 80

    def test_sweep_writes_per_w_assignments(self, client, workspace):
        out = str(workspace["root"] / "sweep")
        res = client.post("/route", json={
            "matrix_path": workspace["matrix_path"], "mode": "sweep",
            "num_points": 5, "out_path": out})
        assert res.status_code == 200
        assert len(res.json()["assignments"]) == 5

    def test_global_and_local(self, client, workspace):
        for mode in ("global", "local"):
            out = str(workspace["root"] / f"{mode}.jsonl")
            res = client.post("/route", json={
                "matrix_path": workspace["matrix_path"], "mode": mode,
                "budget_per_task": 20.0, "resolution": 10, "out_path": out})
            assert res.status_code == 200, res.text

    def test_infeasible_budget_is_409(self, client, workspace):
        res = client.post("/route", json={
            "matrix_path": workspace["matrix_path"], "mode": "global",
            "budget_per_task": 0.001, "out_path": str(workspace["root"] / "x.jsonl")})
        assert res.status_code == 409
        body = res.json()
        assert body["error"] == "InfeasibleBudgetError"
        assert body["min_total_cost"] > 0

    def test_weighted_requires_w(self, client, workspace):
        res = client.post("/route", json={
            "matrix_path": workspace["matrix_path"], "mode": "weighted",
            "out_path": str(workspace["root"] / "x.jsonl")})
        assert res.status_code == 422


class TestEvaluationEndpoints:
    def test_evaluate_assignment(self, client, workspace):
        out = str(workspace["root"] / "eval_me.jsonl")
        client.post("/route", json={
            "matrix_path": workspace["matrix_path"], "mode": "weighted", "w": 1.0,
            "out_path": out})
        res = client.post("/evaluate", json={
            "assignment_path": out, "tasks_path": workspace["tasks_path"],
            "labels_path": workspace["labels_path"]})
        assert res.status_code == 200
        body = res.json()
        assert 0.0 <= body["accuracy_percent"] <= 100.0
        assert body["n_tasks"] == 80

    def test_table_report(self, client, workspace):
        out = str(workspace["root"] / "for_table.jsonl")
        client.post("/route", json={
            "matrix_path": workspace["matrix_path"], "mode": "local",
            "budget_per_task": 25.0, "out_path": out})
        res = client.post("/report/table", json={
            "assignment_paths": [out], "tasks_path": workspace["tasks_path"],
            "labels_path": workspace["labels_path"]})
        assert res.status_code == 200
        body = res.json()
        assert any(r["method"].startswith("best-single") for r in body["reports"])
        assert "acc%" in body["rendered"]

    def test_transitions_report(self, client, workspace):
        baseline = str(workspace["root"] / "baseline.jsonl")
        routed = str(workspace["root"] / "routed.jsonl")
        client.post("/route", json={"matrix_path": workspace["matrix_path"], "mode": "weighted",
                                    "w": 1.0, "out_path": baseline})
        client.post("/route", json={"matrix_path": workspace["matrix_path"], "mode": "weighted",
                                    "w": 0.5, "normalize": True, "out_path": routed})
        res = client.post("/report/transitions", json={
            "baseline_assignment_path": baseline, "routed_assignment_path": routed,
            "tasks_path": workspace["tasks_path"], "labels_path": workspace["labels_path"]})
        assert res.status_code == 200
        buckets = res.json()["transitions_percent"]
        assert sum(buckets.values()) == pytest.approx(100.0, abs=0.01)

    def test_pareto_report(self, client, workspace):
        out_csv = str(workspace["root"] / "pareto.csv")
        res = client.post("/report/pareto", json={
            "matrix_path": workspace["matrix_path"], "tasks_path": workspace["tasks_path"],
            "labels_path": workspace["labels_path"], "out_csv": out_csv, "num_points": 5})
        assert res.status_code == 200
        assert len(res.json()["points"]) == 5
        lines = (workspace["root"] / "pareto.csv").read_text().splitlines()
        assert lines[0] == "w,mean_accuracy,total_cost"


class TestRunEndpoint:
    def test_run_experiment(self, client, tmp_path):
        cfg = {
            "seed": 2,
            "corpus": {"synthetic": {
                "n_tasks": 60, "k": 8, "noise_rate": 0.0,
                "clusters": [{"name": "A", "weight": 1.0}],
                "strategies": [
                    {"strategy_id": "s1", "param_count": 10 ** 9, "tokens_mean": 50,
                     "accuracy_by_cluster": {"A": 0.8}},
                    {"strategy_id": "s2", "param_count": 4 * 10 ** 9, "tokens_mean": 100,
                     "accuracy_by_cluster": {"A": 0.9}},
                ],
            }},
            "training": {"epochs": 3, "hidden_dim": 8},
            "routing": {"sweep": {"num_points": 5}},
        }
        config_path = tmp_path / "config.yaml"
        config_path.write_text(yaml.safe_dump(cfg))
        res = client.post("/experiment/run", json={
            "config_path": str(config_path), "output_dir": str(tmp_path / "out")})
        assert res.status_code == 200, res.text
        body = res.json()
        assert "matrix" in body["artifacts"]
        assert (tmp_path / "out" / "pareto.csv").exists()
