import json

import yaml

from routekit.cli import main


def run_cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    # a rendered table may precede the JSON body
    json_start = out.index("{")
    return code, json.loads(out[json_start:]), out[:json_start]


class TestCliPipeline:
    def test_full_pipeline_in_process(self, tmp_path, capsys):
        corpus_dir = tmp_path / "corpus"
        code, synth, _ = run_cli(capsys, "gen-synth", "--out", str(corpus_dir),
                                 "--seed", "5", "--n-tasks", "60")
        assert code == 0
        assert synth["n_tasks"] == 60

        code, trained, _ = run_cli(
            capsys, "train", "--tasks", synth["tasks_path"], "--labels", synth["labels_path"],
            "--strategies", synth["strategies_path"], "--registry", str(tmp_path / "registry"),
            "--epochs", "4", "--hidden-dim", "8", "--seed", "1")
        assert code == 0
        assert trained["strategy_ids"] == ["small-vanilla", "big-cot"]

        matrix = tmp_path / "matrix.jsonl"
        code, predicted, _ = run_cli(capsys, "predict", "--registry", str(tmp_path / "registry"),
                                     "--tasks", synth["tasks_path"], "--out", str(matrix))
        assert code == 0
        assert predicted["n_strategies"] == 2

        assignment = tmp_path / "assignment.jsonl"
        code, routed, _ = run_cli(capsys, "route", "--matrix", str(matrix), "--mode", "weighted",
                                  "--w", "0.8", "--normalize", "--out", str(assignment))
        assert code == 0
        assert routed["assignments"][0]["n_tasks"] == 60

        code, report, _ = run_cli(capsys, "evaluate", "--assignment", str(assignment),
                                  "--tasks", synth["tasks_path"], "--labels", synth["labels_path"])
        assert code == 0
        assert 0 <= report["accuracy_percent"] <= 100

        code, table, rendered = run_cli(
            capsys, "report", "--kind", "table", "--tasks", synth["tasks_path"],
            "--labels", synth["labels_path"], "--assignments", str(assignment))
        assert code == 0
        assert "acc%" in rendered
        assert len(table["reports"]) == 2

        pareto = tmp_path / "pareto.csv"
        code, pareto_body, _ = run_cli(
            capsys, "report", "--kind", "pareto", "--tasks", synth["tasks_path"],
            "--labels", synth["labels_path"], "--matrix", str(matrix),
            "--out", str(pareto), "--num-points", "5")
        assert code == 0
        assert len(pareto_body["points"]) == 5
        assert pareto.exists()

    def test_add_strategy_subcommand(self, tmp_path, capsys):
        code, synth, _ = run_cli(capsys, "gen-synth", "--out", str(tmp_path / "c"),
                                 "--seed", "2", "--n-tasks", "40")
        assert code == 0
        code, _, _ = run_cli(
            capsys, "train", "--tasks", synth["tasks_path"], "--labels", synth["labels_path"],
            "--strategies", synth["strategies_path"], "--registry", str(tmp_path / "reg"),
            "--only", "small-vanilla", "--epochs", "2", "--hidden-dim", "8")
        assert code == 0
        code, added, _ = run_cli(
            capsys, "add-strategy", "--tasks", synth["tasks_path"],
            "--labels", synth["labels_path"], "--strategies", synth["strategies_path"],
            "--registry", str(tmp_path / "reg"), "--strategy-id", "big-cot",
            "--epochs", "2", "--hidden-dim", "8")
        assert code == 0
        assert added["strategy_ids"] == ["small-vanilla", "big-cot"]

    def test_run_subcommand(self, tmp_path, capsys):
        cfg = {
            "seed": 3,
            "corpus": {"synthetic": {
                "n_tasks": 50, "k": 8, "noise_rate": 0.0,
                "clusters": [{"name": "A", "weight": 1.0}],
                "strategies": [{"strategy_id": "s1", "param_count": 10 ** 9,
                                "tokens_mean": 60, "accuracy_by_cluster": {"A": 0.7}},
                               {"strategy_id": "s2", "param_count": 2 * 10 ** 9,
                                "tokens_mean": 80, "accuracy_by_cluster": {"A": 0.9}}],
            }},
            "training": {"epochs": 2, "hidden_dim": 8},
            "routing": {"sweep": {"num_points": 3}},
        }
        config = tmp_path / "config.yaml"
        config.write_text(yaml.safe_dump(cfg))
        code, body, _ = run_cli(capsys, "run", "--config", str(config),
                                "--out", str(tmp_path / "out"))
        assert code == 0
        assert "headline" in body

    def test_error_paths_exit_nonzero(self, tmp_path, capsys):
        code = main(["ingest", "--tasks", "/missing.jsonl", "--labels", "/missing2.jsonl"])
        captured = capsys.readouterr()
        assert code == 1
        assert "FileNotFoundError" in captured.err

    def test_transitions_requires_both_assignments(self, capsys, tmp_path):
        code = main(["report", "--kind", "transitions",
                     "--tasks", "x", "--labels", "y"])
        assert code == 2
