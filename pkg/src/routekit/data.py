"""Domain data model and corpus ingestion.

A corpus couples tasks (text + fixed-dimension embedding) with ground-truth
performance labels (binary accuracy, scaled-FLOPs cost) for (task, strategy)
pairs. Everything here is immutable after construction; loading is fail-loud
with line numbers on malformed input.

Embeddings are stored as float32. Serialization writes the exact double value
of each float32 component, so a JSON round trip is bit-exact at 32-bit
precision.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


class CorpusError(ValueError):
    """A corpus file or record violates the data contract."""


def _freeze(vec, *, what: str) -> np.ndarray:
    arr = np.asarray(vec, dtype=np.float32)
    if arr.ndim != 1:
        raise CorpusError(f"{what}: embedding must be a flat vector, got shape {arr.shape}")
    if arr.size == 0:
        raise CorpusError(f"{what}: embedding is empty")
    if not np.all(np.isfinite(arr)):
        raise CorpusError(f"{what}: embedding contains non-finite values")
    arr.setflags(write=False)
    return arr


def embedding_to_json(arr: np.ndarray) -> list[float]:
    """Decimal literals that round-trip bit-exactly through float32."""
    return [float(v) for v in np.asarray(arr, dtype=np.float32)]


@dataclass(frozen=True, eq=False)
class TaskRecord:
    """One routable task: question plus any supporting context, pre-encoded."""

    task_id: str
    text: str
    embedding: np.ndarray

    def __post_init__(self):
        if not self.task_id:
            raise CorpusError("task_id must be a non-empty string")
        object.__setattr__(self, "embedding", _freeze(self.embedding, what=f"task {self.task_id!r}"))

    @property
    def dimension(self) -> int:
        return int(self.embedding.shape[0])


@dataclass(frozen=True, eq=False)
class Strategy:
    """A (model, decoding method) pair with description encodings and size."""

    strategy_id: str
    model_id: str
    decoding_id: str
    param_count: int
    model_desc_embedding: np.ndarray
    decoding_desc_embedding: np.ndarray

    def __post_init__(self):
        if not self.strategy_id:
            raise CorpusError("strategy_id must be a non-empty string")
        if int(self.param_count) <= 0:
            raise CorpusError(f"strategy {self.strategy_id!r}: param_count must be positive")
        object.__setattr__(self, "param_count", int(self.param_count))
        object.__setattr__(
            self, "model_desc_embedding",
            _freeze(self.model_desc_embedding, what=f"strategy {self.strategy_id!r} model_desc"))
        object.__setattr__(
            self, "decoding_desc_embedding",
            _freeze(self.decoding_desc_embedding, what=f"strategy {self.strategy_id!r} decoding_desc"))
        if self.model_desc_embedding.shape != self.decoding_desc_embedding.shape:
            raise CorpusError(f"strategy {self.strategy_id!r}: description embeddings differ in dimension")

    @property
    def dimension(self) -> int:
        return int(self.model_desc_embedding.shape[0])


@dataclass(frozen=True)
class PerfLabel:
    """Ground truth for one (task, strategy) pair: binary accuracy, scaled cost."""

    task_id: str
    strategy_id: str
    accuracy: int
    cost: float

    def __post_init__(self):
        acc = self.accuracy
        if isinstance(acc, bool):
            acc = int(acc)
        if not isinstance(acc, (int, float)) or float(acc) not in (0.0, 1.0):
            raise CorpusError(
                f"label ({self.task_id!r}, {self.strategy_id!r}): accuracy must be 0 or 1, got {self.accuracy!r}")
        cost = float(self.cost)
        if not math.isfinite(cost) or cost < 0:
            raise CorpusError(
                f"label ({self.task_id!r}, {self.strategy_id!r}): cost must be finite and >= 0, got {self.cost!r}")
        object.__setattr__(self, "accuracy", int(acc))
        object.__setattr__(self, "cost", cost)


@dataclass(frozen=True, eq=False)
class Corpus:
    """Validated bundle of tasks and labels sharing one embedding dimension."""

    tasks: tuple[TaskRecord, ...]
    labels: tuple[PerfLabel, ...]
    dimension: int
    _task_index: dict = field(repr=False, default_factory=dict)
    _label_index: dict = field(repr=False, default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "tasks", tuple(self.tasks))
        object.__setattr__(self, "labels", tuple(self.labels))
        task_index: dict[str, TaskRecord] = {}
        for task in self.tasks:
            if task.task_id in task_index:
                raise CorpusError(f"duplicate task_id {task.task_id!r}")
            if task.dimension != self.dimension:
                raise CorpusError(
                    f"task {task.task_id!r}: embedding dimension {task.dimension} != corpus dimension {self.dimension}")
            task_index[task.task_id] = task
        label_index: dict[tuple[str, str], PerfLabel] = {}
        for label in self.labels:
            if label.task_id not in task_index:
                raise CorpusError(f"label references unknown task_id {label.task_id!r}")
            key = (label.task_id, label.strategy_id)
            if key in label_index:
                raise CorpusError(f"duplicate label for task {label.task_id!r} / strategy {label.strategy_id!r}")
            label_index[key] = label
        object.__setattr__(self, "_task_index", task_index)
        object.__setattr__(self, "_label_index", label_index)

    def __len__(self) -> int:
        return len(self.tasks)

    def task(self, task_id: str) -> TaskRecord:
        try:
            return self._task_index[task_id]
        except KeyError:
            raise CorpusError(f"unknown task_id {task_id!r}") from None

    def label(self, task_id: str, strategy_id: str) -> PerfLabel | None:
        return self._label_index.get((task_id, strategy_id))

    def labels_for_strategy(self, strategy_id: str) -> list[PerfLabel]:
        return [l for l in self.labels if l.strategy_id == strategy_id]

    def strategy_ids(self) -> list[str]:
        """Strategy ids present in the labels, in first-seen order."""
        seen: dict[str, None] = {}
        for label in self.labels:
            seen.setdefault(label.strategy_id, None)
        return list(seen)


# ----------------------------------------------------------------------------
# JSONL ingestion / emission
# ----------------------------------------------------------------------------

def _iter_jsonl(path: Path) -> Iterable[tuple[int, dict]]:
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{path}:{lineno}: malformed JSON ({exc.msg})") from None
            if not isinstance(obj, dict):
                raise CorpusError(f"{path}:{lineno}: expected a JSON object")
            yield lineno, obj


def _require(obj: dict, keys: Sequence[str], where: str) -> None:
    missing = [k for k in keys if k not in obj]
    if missing:
        raise CorpusError(f"{where}: missing fields {missing}")


def load_tasks(path: str | Path) -> list[TaskRecord]:
    """Read a tasks JSONL file (task_id, text, embedding)."""
    path = Path(path)
    tasks = []
    for lineno, obj in _iter_jsonl(path):
        _require(obj, ("task_id", "text", "embedding"), f"{path}:{lineno}")
        try:
            tasks.append(TaskRecord(obj["task_id"], obj["text"], obj["embedding"]))
        except (CorpusError, TypeError, ValueError) as exc:
            raise CorpusError(f"{path}:{lineno}: {exc}") from None
    return tasks


def load_labels(path: str | Path) -> list[PerfLabel]:
    """Read a labels JSONL file (task_id, strategy_id, accuracy, cost)."""
    path = Path(path)
    labels = []
    for lineno, obj in _iter_jsonl(path):
        _require(obj, ("task_id", "strategy_id", "accuracy", "cost"), f"{path}:{lineno}")
        try:
            labels.append(PerfLabel(obj["task_id"], obj["strategy_id"], obj["accuracy"], obj["cost"]))
        except CorpusError as exc:
            raise CorpusError(f"{path}:{lineno}: {exc}") from None
    return labels


def load_strategies(path: str | Path) -> list[Strategy]:
    """Read a strategies JSONL file; enforces unique (model_id, decoding_id)."""
    path = Path(path)
    strategies = []
    seen_ids: set[str] = set()
    seen_pairs: set[tuple[str, str]] = set()
    for lineno, obj in _iter_jsonl(path):
        _require(obj, ("strategy_id", "model_id", "decoding_id", "param_count",
                       "model_desc_embedding", "decoding_desc_embedding"), f"{path}:{lineno}")
        try:
            strat = Strategy(obj["strategy_id"], obj["model_id"], obj["decoding_id"],
                             obj["param_count"], obj["model_desc_embedding"], obj["decoding_desc_embedding"])
        except CorpusError as exc:
            raise CorpusError(f"{path}:{lineno}: {exc}") from None
        if strat.strategy_id in seen_ids:
            raise CorpusError(f"{path}:{lineno}: duplicate strategy_id {strat.strategy_id!r}")
        pair = (strat.model_id, strat.decoding_id)
        if pair in seen_pairs:
            raise CorpusError(f"{path}:{lineno}: duplicate (model_id, decoding_id) pair {pair!r}")
        seen_ids.add(strat.strategy_id)
        seen_pairs.add(pair)
        strategies.append(strat)
    return strategies


def load_corpus(tasks_path: str | Path, labels_path: str | Path) -> Corpus:
    """Load and validate a corpus; dimension inferred from the first task."""
    tasks = load_tasks(tasks_path)
    labels = load_labels(labels_path)
    if not tasks:
        raise CorpusError(f"{tasks_path}: no tasks found")
    dimension = tasks[0].dimension
    return Corpus(tuple(tasks), tuple(labels), dimension)


def save_tasks(tasks: Iterable[TaskRecord], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for task in tasks:
            fh.write(json.dumps({
                "task_id": task.task_id,
                "text": task.text,
                "embedding": embedding_to_json(task.embedding),
            }) + "\n")


def save_labels(labels: Iterable[PerfLabel], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for label in labels:
            fh.write(json.dumps({
                "task_id": label.task_id,
                "strategy_id": label.strategy_id,
                "accuracy": label.accuracy,
                "cost": label.cost,
            }) + "\n")


def save_strategies(strategies: Iterable[Strategy], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for strat in strategies:
            fh.write(json.dumps({
                "strategy_id": strat.strategy_id,
                "model_id": strat.model_id,
                "decoding_id": strat.decoding_id,
                "param_count": strat.param_count,
                "model_desc_embedding": embedding_to_json(strat.model_desc_embedding),
                "decoding_desc_embedding": embedding_to_json(strat.decoding_desc_embedding),
            }) + "\n")


def save_corpus(corpus: Corpus, tasks_path: str | Path, labels_path: str | Path) -> None:
    save_tasks(corpus.tasks, tasks_path)
    save_labels(corpus.labels, labels_path)


# ----------------------------------------------------------------------------
# Splitting
# ----------------------------------------------------------------------------

def split_corpus(corpus: Corpus, train_fraction: float, seed: int) -> tuple[Corpus, Corpus]:
    """Seed-reproducible task partition; labels follow their tasks.

    Train size is floor(n * train_fraction), so a 1-task corpus at 0.5 puts
    the task in the test split.
    """
    if not (0.0 < train_fraction < 1.0):
        raise CorpusError(f"train_fraction must be in (0, 1), got {train_fraction}")
    if not corpus.tasks:
        raise CorpusError("cannot split an empty corpus")
    n = len(corpus.tasks)
    n_train = math.floor(n * train_fraction)
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    train_positions = set(int(i) for i in perm[:n_train])
    train_tasks = tuple(t for i, t in enumerate(corpus.tasks) if i in train_positions)
    test_tasks = tuple(t for i, t in enumerate(corpus.tasks) if i not in train_positions)
    train_ids = {t.task_id for t in train_tasks}
    train_labels = tuple(l for l in corpus.labels if l.task_id in train_ids)
    test_labels = tuple(l for l in corpus.labels if l.task_id not in train_ids)
    return (Corpus(train_tasks, train_labels, corpus.dimension),
            Corpus(test_tasks, test_labels, corpus.dimension))
