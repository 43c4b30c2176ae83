"""Seeded synthetic corpora with planted cluster structure.

Tasks fall into clusters that are linearly recoverable from their embeddings
(cluster centroids sit on separate axes, well outside the noise). Each
strategy has a per-cluster correctness rate; labels are the planted draw with
an optional flip-noise applied on top, and costs come from the token/size
cost model so every unit matches the rest of the engine.

The planted map (intended correctness before noise) is emitted alongside the
corpus so oracle routers can be computed exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .costs import UsageRecord, flops_scaled
from .data import Corpus, PerfLabel, Strategy, TaskRecord

CLUSTER_CENTROID_SCALE = 4.0
EMBEDDING_NOISE_SIGMA = 0.6


class SyntheticSpecError(ValueError):
    """Degenerate synthetic-corpus specification."""


@dataclass(frozen=True)
class ClusterSpec:
    name: str
    weight: float

    def __post_init__(self):
        if self.weight <= 0:
            raise SyntheticSpecError(f"cluster {self.name!r}: weight must be positive")


@dataclass(frozen=True)
class PlantedStrategy:
    """Strategy blueprint: size, token usage, and per-cluster correctness."""

    strategy_id: str
    model_id: str
    decoding_id: str
    param_count: int
    tokens_mean: int
    tokens_jitter: int
    accuracy_by_cluster: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.param_count <= 0:
            raise SyntheticSpecError(f"strategy {self.strategy_id!r}: param_count must be positive")
        if self.tokens_mean <= 0 or self.tokens_jitter < 0 or self.tokens_jitter >= self.tokens_mean:
            raise SyntheticSpecError(f"strategy {self.strategy_id!r}: bad token parameters")
        for cluster, prob in self.accuracy_by_cluster.items():
            if not (0.0 <= prob <= 1.0):
                raise SyntheticSpecError(
                    f"strategy {self.strategy_id!r}: accuracy for cluster {cluster!r} outside [0, 1]")

    def mean_cost(self) -> float:
        """Expected scaled-FLOPs cost of one call."""
        return flops_scaled(self.param_count, UsageRecord("", self.strategy_id, 0, self.tokens_mean))


@dataclass(frozen=True)
class SyntheticSpec:
    n_tasks: int
    k: int
    seed: int
    noise_rate: float
    clusters: tuple[ClusterSpec, ...]
    strategies: tuple[PlantedStrategy, ...]

    def __post_init__(self):
        object.__setattr__(self, "clusters", tuple(self.clusters))
        object.__setattr__(self, "strategies", tuple(self.strategies))
        if self.n_tasks < 1:
            raise SyntheticSpecError("n_tasks must be >= 1")
        if not self.clusters:
            raise SyntheticSpecError("need at least one cluster")
        if not self.strategies:
            raise SyntheticSpecError("need at least one strategy")
        if self.k < len(self.clusters):
            raise SyntheticSpecError(f"k={self.k} too small for {len(self.clusters)} axis-aligned clusters")
        if not (0.0 <= self.noise_rate <= 1.0):
            raise SyntheticSpecError(f"noise_rate must lie in [0, 1], got {self.noise_rate}")
        names = [c.name for c in self.clusters]
        if len(set(names)) != len(names):
            raise SyntheticSpecError("cluster names must be unique")
        sids = [s.strategy_id for s in self.strategies]
        if len(set(sids)) != len(sids):
            raise SyntheticSpecError("strategy ids must be unique")
        for strat in self.strategies:
            missing = [n for n in names if n not in strat.accuracy_by_cluster]
            if missing:
                raise SyntheticSpecError(
                    f"strategy {strat.strategy_id!r} lacks accuracy for clusters {missing}")


def generate_synthetic(spec: SyntheticSpec) -> tuple[Corpus, list[Strategy], list[dict]]:
    """Returns (corpus, strategy records, planted map entries)."""
    rng = np.random.default_rng(spec.seed)
    weights = np.asarray([c.weight for c in spec.clusters], dtype=np.float64)
    weights /= weights.sum()
    cluster_idx = rng.choice(len(spec.clusters), size=spec.n_tasks, p=weights)

    tasks = []
    for i in range(spec.n_tasks):
        c = int(cluster_idx[i])
        emb = rng.normal(0.0, EMBEDDING_NOISE_SIGMA, spec.k)
        emb[c] += CLUSTER_CENTROID_SCALE
        tasks.append(TaskRecord(f"task-{i:05d}", f"synthetic task {i:05d}", emb))

    strategies = []
    for planted in spec.strategies:
        strategies.append(Strategy(
            strategy_id=planted.strategy_id,
            model_id=planted.model_id,
            decoding_id=planted.decoding_id,
            param_count=planted.param_count,
            model_desc_embedding=rng.normal(0.0, 1.0, spec.k),
            decoding_desc_embedding=rng.normal(0.0, 1.0, spec.k),
        ))

    labels = []
    planted_map = []
    for i, task in enumerate(tasks):
        cluster = spec.clusters[int(cluster_idx[i])].name
        for planted in spec.strategies:
            intended = int(rng.random() < planted.accuracy_by_cluster[cluster])
            flipped = bool(rng.random() < spec.noise_rate)
            accuracy = intended ^ int(flipped)
            tokens = int(planted.tokens_mean + rng.integers(-planted.tokens_jitter,
                                                            planted.tokens_jitter + 1))
            cost = flops_scaled(planted.param_count,
                                UsageRecord(task.task_id, planted.strategy_id, 0, tokens))
            labels.append(PerfLabel(task.task_id, planted.strategy_id, accuracy, cost))
            planted_map.append({
                "task_id": task.task_id,
                "strategy_id": planted.strategy_id,
                "cluster": cluster,
                "intended": intended,
                "flipped": flipped,
                "cost": cost,
            })
    corpus = Corpus(tuple(tasks), tuple(labels), spec.k)
    return corpus, strategies, planted_map


def save_planted(planted: list[dict], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for entry in planted:
            fh.write(json.dumps(entry) + "\n")


def two_cluster_spec(n_tasks: int = 500, k: int = 16, seed: int = 0,
                     noise_rate: float = 0.03) -> SyntheticSpec:
    """The stock benchmark corpus: a cheap specialist vs a large generalist.

    Cluster A holds 60% of tasks. The cheap strategy is correct almost only
    there; the big strategy is correct on 90% of everything at ~8x the cost,
    so an oracle router beats routing everything to the big strategy on cost
    at equal-or-better accuracy.
    """
    return SyntheticSpec(
        n_tasks=n_tasks,
        k=k,
        seed=seed,
        noise_rate=noise_rate,
        clusters=(ClusterSpec("A", 0.6), ClusterSpec("B", 0.4)),
        strategies=(
            PlantedStrategy("small-vanilla", "small-1.5b", "vanilla", 1_500_000_000,
                            tokens_mean=100, tokens_jitter=10,
                            accuracy_by_cluster={"A": 0.97, "B": 0.05}),
            PlantedStrategy("big-cot", "big-8b", "cot", 8_000_000_000,
                            tokens_mean=150, tokens_jitter=15,
                            accuracy_by_cluster={"A": 0.9, "B": 0.9}),
        ),
    )


def spec_from_dict(obj: dict, seed: int | None = None) -> SyntheticSpec:
    """Build a SyntheticSpec from a config mapping (nested dicts/lists)."""
    if seed is None:
        seed = int(obj.get("seed", 0))
    try:
        clusters = tuple(ClusterSpec(c["name"], float(c["weight"])) for c in obj["clusters"])
        strategies = tuple(PlantedStrategy(
            strategy_id=s["strategy_id"],
            model_id=s.get("model_id", s["strategy_id"]),
            decoding_id=s.get("decoding_id", "vanilla"),
            param_count=int(s["param_count"]),
            tokens_mean=int(s["tokens_mean"]),
            tokens_jitter=int(s.get("tokens_jitter", 0)),
            accuracy_by_cluster=dict(s["accuracy_by_cluster"]),
        ) for s in obj["strategies"])
        return SyntheticSpec(
            n_tasks=int(obj["n_tasks"]),
            k=int(obj.get("k", 16)),
            seed=int(seed),
            noise_rate=float(obj.get("noise_rate", 0.0)),
            clusters=clusters,
            strategies=strategies,
        )
    except KeyError as exc:
        raise SyntheticSpecError(f"synthetic spec missing field {exc}") from None
