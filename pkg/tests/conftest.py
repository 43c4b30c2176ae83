from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest

from routekit.data import Corpus, PerfLabel, Strategy, TaskRecord


def make_task(task_id: str, embedding, text: str | None = None) -> TaskRecord:
    return TaskRecord(task_id, text or f"text for {task_id}", np.asarray(embedding, dtype=np.float32))


def make_strategy(strategy_id: str, k: int = 4, param_count: int = 7_000_000_000,
                  model_id: str | None = None, decoding_id: str = "vanilla",
                  seed: int = 0) -> Strategy:
    rng = np.random.default_rng(seed)
    return Strategy(strategy_id, model_id or f"model-{strategy_id}", decoding_id,
                    param_count, rng.normal(size=k), rng.normal(size=k))


def tiny_corpus(k: int = 4) -> Corpus:
    """3 tasks x 2 strategies, fully labeled (6 labels)."""
    tasks = [make_task(f"t{i}", np.arange(k, dtype=float) + i) for i in range(3)]
    labels = []
    for i, task in enumerate(tasks):
        labels.append(PerfLabel(task.task_id, "s-a", i % 2, 2.0 + i))
        labels.append(PerfLabel(task.task_id, "s-b", (i + 1) % 2, 10.0 + i))
    return Corpus(tuple(tasks), tuple(labels), k)


def separable_corpus(n: int = 200, k: int = 4, strategy_id: str = "s-a",
                     seed: int = 5, cost_value: float = 5.0) -> Corpus:
    """Labels: correct iff embedding[0] > 0; constant cost."""
    rng = np.random.default_rng(seed)
    tasks = []
    labels = []
    for i in range(n):
        emb = rng.normal(size=k)
        emb[0] = rng.choice([-1.0, 1.0]) * rng.uniform(0.5, 2.0)
        task = make_task(f"t{i:04d}", emb)
        tasks.append(task)
        labels.append(PerfLabel(task.task_id, strategy_id, int(emb[0] > 0), cost_value))
    return Corpus(tuple(tasks), tuple(labels), k)


def sample_gradcheck_case(rng, kind, mode, kink_margin=1e-2):
    """Draw (net, embeddings, targets) for finite-difference checking.

    Central differences are only valid where the loss is smooth, so resample
    until every hidden pre-activation sits clear of the rectifier kink by
    more than the probe step can reach.
    """
    from routekit.nn import KIND_CLASSIFIER
    from routekit.predictors import PredictorNet, RepresentationConfig

    while True:
        k = int(rng.integers(1, 5))
        hidden = int(rng.integers(1, 6))
        strategy = make_strategy(f"s-grad-{rng.integers(10 ** 6)}", k=k,
                                 seed=int(rng.integers(0, 10 ** 6)))
        net = PredictorNet.init(kind, RepresentationConfig(mode, k), hidden,
                                strategy, seed=int(rng.integers(0, 2 ** 31)))
        batch = int(rng.integers(1, 4))
        embs = rng.normal(size=(batch, k))
        _, cache = net.forward_batch(embs)
        if np.min(np.abs(cache["z1"])) >= kink_margin:
            if kind == KIND_CLASSIFIER:
                targets = rng.integers(0, 2, size=batch).astype(float)
            else:
                targets = rng.normal(size=batch)
            return net, embs, targets


def write_jsonl(path: Path, records: list[dict]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")
    return path


@pytest.fixture
def corpus_files(tmp_path):
    """Write tiny_corpus-style files and return (tasks_path, labels_path)."""
    tasks = [
        {"task_id": f"t{i}", "text": f"text {i}", "embedding": [float(i), 1.5, -2.25, 0.125]}
        for i in range(3)
    ]
    labels = []
    for i in range(3):
        labels.append({"task_id": f"t{i}", "strategy_id": "s-a", "accuracy": i % 2, "cost": 2.0 + i})
        labels.append({"task_id": f"t{i}", "strategy_id": "s-b", "accuracy": (i + 1) % 2, "cost": 10.0 + i})
    return (write_jsonl(tmp_path / "tasks.jsonl", tasks),
            write_jsonl(tmp_path / "labels.jsonl", labels))
