"""Per-strategy predictor pairs and the continual registry.

For every registered strategy we train two independently parameterized
networks: a binary classifier estimating whether the strategy answers a task
correctly, and a regressor estimating its scaled-FLOPs cost. Each network
sees a 6k input built from two halves:

  general half   [task embedding ; model description ; decoding description]
  specific half  [projected task embedding ; learned model vector ; learned decoding vector]

The general half is frozen encoder output (constants); the specific half is
trained (a k x k projection plus two learned k-vectors). Ablation modes zero
one half so the input width never changes.

Because predictors are per strategy, onboarding a new strategy trains and
persists exactly one pair and never touches existing weight files.
"""

from __future__ import annotations

import json
import logging
import math
import re
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from hashlib import sha1
from pathlib import Path

import numpy as np

from .data import Corpus, Strategy, TaskRecord
from .nn import (
    KIND_CLASSIFIER,
    KIND_REGRESSOR,
    AdamState,
    DenseLayer,
    Mlp,
    NetSpec,
    NetworkError,
    PROB_CLAMP,
    adam_step,
    derive_seed,
    glorot_uniform,
    init_vector,
    load_weights,
    loss_bce,
    loss_mse,
    save_weights,
)

logger = logging.getLogger(__name__)

MODE_GENERAL = "general-only"
MODE_SPECIFIC = "task-specific-only"
MODE_BOTH = "both"
MODES = (MODE_GENERAL, MODE_SPECIFIC, MODE_BOTH)

MANIFEST_NAME = "manifest.json"
MANIFEST_VERSION = 1

# Single-class strategies get a constant classifier at the empirical rate,
# clamped away from 0/1.
CONSTANT_RATE_CLAMP = (0.01, 0.99)


class PredictorError(ValueError):
    """Training/prediction contract violation."""


class RegistryError(ValueError):
    """Registry manifest violation (duplicate id, missing file, ...)."""


@dataclass(frozen=True)
class RepresentationConfig:
    mode: str = MODE_BOTH
    k: int = 768

    def __post_init__(self):
        if self.mode not in MODES:
            raise PredictorError(f"representation mode must be one of {MODES}, got {self.mode!r}")
        if self.k <= 0:
            raise PredictorError(f"k must be positive, got {self.k}")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100
    batch_size: int = 32
    learning_rate: float = 1e-3
    hidden_dim: int = 256
    mode: str = MODE_BOTH
    early_stop_patience: int | None = None
    holdout_fraction: float = 0.1


class PredictorNet:
    """One trained network (classifier or regressor) for one strategy.

    Owns the trainable projection, the two learned strategy vectors, and the
    MLP; holds the strategy's frozen description embeddings as constants.
    """

    def __init__(self, kind: str, config: RepresentationConfig, mlp: Mlp,
                 proj: np.ndarray, model_vec: np.ndarray, decoding_vec: np.ndarray,
                 model_desc: np.ndarray, decoding_desc: np.ndarray, seed: int):
        k = config.k
        if mlp.spec.input_dim != 6 * k:
            raise PredictorError(f"MLP input_dim {mlp.spec.input_dim} != 6k for k={k}")
        self.kind = kind
        self.config = config
        self.mlp = mlp
        self.proj = np.asarray(proj, dtype=np.float64)
        self.model_vec = np.asarray(model_vec, dtype=np.float64)
        self.decoding_vec = np.asarray(decoding_vec, dtype=np.float64)
        self.model_desc = np.asarray(model_desc, dtype=np.float64)
        self.decoding_desc = np.asarray(decoding_desc, dtype=np.float64)
        self.seed = int(seed)
        for name, arr, shape in (("proj", self.proj, (k, k)),
                                 ("model_vec", self.model_vec, (k,)),
                                 ("decoding_vec", self.decoding_vec, (k,)),
                                 ("model_desc", self.model_desc, (k,)),
                                 ("decoding_desc", self.decoding_desc, (k,))):
            if arr.shape != shape:
                raise PredictorError(f"{name} has shape {arr.shape}, expected {shape}")

    @classmethod
    def init(cls, kind: str, config: RepresentationConfig, hidden_dim: int,
             strategy: Strategy, seed: int) -> "PredictorNet":
        rng = np.random.default_rng(seed)
        k = config.k
        proj = glorot_uniform(rng, k, k)
        model_vec = init_vector(rng, k)
        decoding_vec = init_vector(rng, k)
        mlp = Mlp.init(NetSpec(6 * k, hidden_dim, kind), rng)
        return cls(kind, config, mlp, proj, model_vec, decoding_vec,
                   strategy.model_desc_embedding, strategy.decoding_desc_embedding, seed)

    # -- forward / backward over a (batch, k) block of task embeddings ------

    def build_input_batch(self, task_embs: np.ndarray) -> np.ndarray:
        task_embs = np.asarray(task_embs, dtype=np.float64)
        if task_embs.ndim != 2 or task_embs.shape[1] != self.config.k:
            raise PredictorError(f"task embeddings have shape {task_embs.shape}, expected (*, {self.config.k})")
        b, k = task_embs.shape
        x = np.zeros((b, 6 * k))
        if self.config.mode != MODE_SPECIFIC:
            x[:, 0:k] = task_embs
            x[:, k:2 * k] = self.model_desc
            x[:, 2 * k:3 * k] = self.decoding_desc
        if self.config.mode != MODE_GENERAL:
            x[:, 3 * k:4 * k] = task_embs @ self.proj.T
            x[:, 4 * k:5 * k] = self.model_vec
            x[:, 5 * k:6 * k] = self.decoding_vec
        return x

    def forward_batch(self, task_embs: np.ndarray) -> tuple[np.ndarray, dict]:
        task_embs = np.asarray(task_embs, dtype=np.float64)
        x = self.build_input_batch(task_embs)
        out, cache = self.mlp.forward(x)
        cache["task_embs"] = task_embs
        return np.asarray(out), cache

    def backward_batch(self, cache: dict, dz2: np.ndarray) -> dict[str, np.ndarray]:
        """Gradients for every trainable tensor given d(loss)/d(pre-output)."""
        grads = self.mlp.backward(cache, dz2)
        dx = grads.pop("input")
        if self.config.mode != MODE_GENERAL:
            k = self.config.k
            grads["proj"] = dx[:, 3 * k:4 * k].T @ cache["task_embs"]
            grads["model_vec"] = dx[:, 4 * k:5 * k].sum(axis=0)
            grads["decoding_vec"] = dx[:, 5 * k:6 * k].sum(axis=0)
        return grads

    def trainable(self) -> dict[str, np.ndarray]:
        params = dict(self.mlp.params())
        if self.config.mode != MODE_GENERAL:
            params["proj"] = self.proj
            params["model_vec"] = self.model_vec
            params["decoding_vec"] = self.decoding_vec
        return params

    def predict_batch(self, task_embs: np.ndarray) -> np.ndarray:
        out, _ = self.forward_batch(task_embs)
        if self.kind == KIND_CLASSIFIER:
            return np.clip(out, PROB_CLAMP, 1.0 - PROB_CLAMP)
        return np.maximum(out, 0.0)

    # -- persistence ---------------------------------------------------------

    def tensors(self) -> dict[str, np.ndarray]:
        return {
            "proj": self.proj,
            "model_vec": self.model_vec,
            "decoding_vec": self.decoding_vec,
            "hidden.weights": self.mlp.hidden.weights,
            "hidden.bias": self.mlp.hidden.bias,
            "output.weights": self.mlp.output.weights,
            "output.bias": self.mlp.output.bias,
            "const.model_desc": self.model_desc,
            "const.decoding_desc": self.decoding_desc,
        }

    def save(self, path: Path, training_meta: dict) -> None:
        meta = dict(training_meta)
        meta["representation_mode"] = self.config.mode
        meta["k"] = self.config.k
        save_weights(path, self.mlp.spec, self.tensors(), self.seed, meta)

    @classmethod
    def load(cls, path: Path) -> tuple["PredictorNet", dict]:
        spec, tensors, seed, meta = load_weights(path)
        try:
            config = RepresentationConfig(meta["representation_mode"], meta["k"])
        except KeyError as exc:
            raise NetworkError(f"{path}: training_meta missing {exc}") from None
        mlp = Mlp(spec, DenseLayer(tensors["hidden.weights"], tensors["hidden.bias"]),
                  DenseLayer(tensors["output.weights"], tensors["output.bias"]))
        net = cls(spec.kind, config, mlp, tensors["proj"], tensors["model_vec"],
                  tensors["decoding_vec"], tensors["const.model_desc"],
                  tensors["const.decoding_desc"], seed)
        return net, meta


@dataclass
class PredictorPair:
    """Accuracy classifier + cost regressor for one strategy, plus metadata."""

    strategy_id: str
    accuracy_net: PredictorNet
    cost_net: PredictorNet
    config: RepresentationConfig
    training_meta: dict = field(default_factory=dict)
    accuracy_path: Path | None = None
    cost_path: Path | None = None


def build_input(task: TaskRecord, strategy: Strategy, pair: PredictorPair, which: str) -> np.ndarray:
    """The 6k input vector [general half ; task-specific half] for one task."""
    if which == "accuracy":
        net = pair.accuracy_net
    elif which == "cost":
        net = pair.cost_net
    else:
        raise PredictorError(f"which must be 'accuracy' or 'cost', got {which!r}")
    if task.dimension != net.config.k:
        raise PredictorError(f"task {task.task_id!r} has dimension {task.dimension}, predictor expects {net.config.k}")
    if strategy.strategy_id != pair.strategy_id:
        raise PredictorError(f"strategy {strategy.strategy_id!r} does not match pair {pair.strategy_id!r}")
    return net.build_input_batch(task.embedding[None, :].astype(np.float64))[0]


def predict(pair: PredictorPair, task: TaskRecord, strategy: Strategy | None = None) -> tuple[float, float]:
    """(accuracy estimate in (0,1), cost estimate clamped to >= 0)."""
    if strategy is not None and strategy.strategy_id != pair.strategy_id:
        raise PredictorError(f"strategy {strategy.strategy_id!r} does not match pair {pair.strategy_id!r}")
    if task.dimension != pair.config.k:
        raise PredictorError(f"task {task.task_id!r} has dimension {task.dimension}, predictor expects {pair.config.k}")
    embs = task.embedding[None, :].astype(np.float64)
    a_hat = float(pair.accuracy_net.predict_batch(embs)[0])
    c_hat = float(pair.cost_net.predict_batch(embs)[0])
    return a_hat, c_hat


# ----------------------------------------------------------------------------
# Training
# ----------------------------------------------------------------------------

def _epoch_losses(kind: str, out: np.ndarray, targets: np.ndarray) -> np.ndarray:
    if kind == KIND_CLASSIFIER:
        return loss_bce(out, targets)
    return loss_mse(out, targets)


def _train_net(net: PredictorNet, task_embs: np.ndarray, targets: np.ndarray,
               config: TrainConfig, rng: np.random.Generator) -> dict:
    """Adam minibatch loop; returns {epochs_run, final_loss, initial_loss}."""
    n = task_embs.shape[0]
    holdout_idx = np.empty(0, dtype=int)
    train_idx = np.arange(n)
    if config.early_stop_patience is not None and n >= 10:
        n_hold = max(1, int(math.floor(n * config.holdout_fraction)))
        perm = rng.permutation(n)
        holdout_idx, train_idx = perm[:n_hold], perm[n_hold:]
    state = AdamState(lr=config.learning_rate)
    params = net.trainable()
    best_holdout = float("inf")
    since_best = 0
    epochs_run = 0
    initial_loss = None
    final_loss = float("nan")
    for epoch in range(config.epochs):
        perm = rng.permutation(len(train_idx))
        loss_sum = 0.0
        for b, start in enumerate(range(0, len(train_idx), config.batch_size)):
            idx = train_idx[perm[start:start + config.batch_size]]
            out, cache = net.forward_batch(task_embs[idx])
            losses = _epoch_losses(net.kind, out, targets[idx])
            batch_loss = float(np.mean(losses))
            if not math.isfinite(batch_loss):
                raise PredictorError(f"non-finite training loss at epoch {epoch}, batch {b}")
            loss_sum += float(np.sum(losses))
            if net.kind == KIND_CLASSIFIER:
                dz2 = (out - targets[idx]) / len(idx)
            else:
                dz2 = 2.0 * (out - targets[idx]) / len(idx)
            grads = net.backward_batch(cache, dz2)
            adam_step(params, grads, state)
        epoch_loss = loss_sum / len(train_idx)
        if initial_loss is None:
            initial_loss = epoch_loss
        final_loss = epoch_loss
        epochs_run = epoch + 1
        if holdout_idx.size:
            hold_out, _ = net.forward_batch(task_embs[holdout_idx])
            hold_loss = float(np.mean(_epoch_losses(net.kind, hold_out, targets[holdout_idx])))
            if hold_loss < best_holdout - 1e-12:
                best_holdout = hold_loss
                since_best = 0
            else:
                since_best += 1
                if since_best >= config.early_stop_patience:
                    break
    return {"epochs_run": epochs_run, "final_loss": final_loss, "initial_loss": initial_loss}


def _constant_classifier(net: PredictorNet, rate: float) -> None:
    """Zero the MLP and set the output bias so every prediction equals rate."""
    net.mlp.hidden.weights[:] = 0.0
    net.mlp.hidden.bias[:] = 0.0
    net.mlp.output.weights[:] = 0.0
    net.mlp.output.bias[:] = math.log(rate / (1.0 - rate))


def _file_stem(strategy_id: str) -> str:
    safe = re.sub(r"[^A-Za-z0-9._-]", "_", strategy_id)
    if safe != strategy_id:
        safe = f"{safe}-{sha1(strategy_id.encode('utf-8')).hexdigest()[:8]}"
    return safe


def train_pair(strategy: Strategy, corpus: Corpus, config: TrainConfig,
               seed: int, out_dir: str | Path) -> PredictorPair:
    """Train both networks on this strategy's labels only and persist them.

    Returns the pair reloaded from disk, so in-memory parameters match the
    stored float32 values exactly.
    """
    sid = strategy.strategy_id
    labels = corpus.labels_for_strategy(sid)
    if not labels:
        raise PredictorError(f"corpus has no labels for strategy {sid!r}")
    k = corpus.dimension
    if strategy.dimension != k:
        raise PredictorError(f"strategy {sid!r} embeddings have dimension {strategy.dimension}, corpus has {k}")
    rep = RepresentationConfig(config.mode, k)
    task_embs = np.stack([corpus.task(l.task_id).embedding for l in labels]).astype(np.float64)
    acc_targets = np.asarray([l.accuracy for l in labels], dtype=np.float64)
    cost_targets = np.asarray([l.cost for l in labels], dtype=np.float64)

    started = time.perf_counter()
    acc_seed = derive_seed(seed, sid, "accuracy")
    cost_seed = derive_seed(seed, sid, "cost")
    acc_net = PredictorNet.init(KIND_CLASSIFIER, rep, config.hidden_dim, strategy, acc_seed)
    cost_net = PredictorNet.init(KIND_REGRESSOR, rep, config.hidden_dim, strategy, cost_seed)

    meta: dict = {"strategy_id": sid, "single_class_fallback": False}
    classes = np.unique(acc_targets)
    if classes.size == 1:
        rate = float(np.clip(classes[0], *CONSTANT_RATE_CLAMP))
        logger.warning("strategy %r has single-class accuracy labels; using constant predictor at %.2f", sid, rate)
        _constant_classifier(acc_net, rate)
        meta["single_class_fallback"] = True
        meta["constant_rate"] = rate
        meta["accuracy"] = {"epochs_run": 0, "final_loss": None, "initial_loss": None}
    else:
        meta["accuracy"] = _train_net(acc_net, task_embs, acc_targets, config,
                                      np.random.default_rng(derive_seed(acc_seed, "shuffle")))
    meta["cost"] = _train_net(cost_net, task_embs, cost_targets, config,
                              np.random.default_rng(derive_seed(cost_seed, "shuffle")))
    meta["train_seconds"] = time.perf_counter() - started
    meta["trained_at"] = datetime.now(timezone.utc).isoformat()
    meta["n_labels"] = len(labels)

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = _file_stem(sid)
    acc_path = out_dir / f"{stem}.accuracy.json"
    cost_path = out_dir / f"{stem}.cost.json"
    acc_net.save(acc_path, meta)
    cost_net.save(cost_path, meta)
    return load_pair_files(sid, acc_path, cost_path)


def load_pair_files(strategy_id: str, accuracy_path: Path, cost_path: Path) -> PredictorPair:
    acc_net, meta = PredictorNet.load(accuracy_path)
    cost_net, _ = PredictorNet.load(cost_path)
    if acc_net.kind != KIND_CLASSIFIER or cost_net.kind != KIND_REGRESSOR:
        raise RegistryError(f"weight files for {strategy_id!r} have swapped or wrong kinds")
    if acc_net.config != cost_net.config:
        raise RegistryError(f"weight files for {strategy_id!r} disagree on representation config")
    return PredictorPair(strategy_id, acc_net, cost_net, acc_net.config, meta,
                         Path(accuracy_path), Path(cost_path))


# ----------------------------------------------------------------------------
# Registry
# ----------------------------------------------------------------------------

@dataclass
class RegistryEntry:
    strategy_id: str
    accuracy_path: str
    cost_path: str
    representation_mode: str
    trained_at: str
    train_seconds: float


@dataclass
class Registry:
    """Manifest of trained predictor pairs; one entry per strategy."""

    root: Path
    k: int
    entries: list[RegistryEntry] = field(default_factory=list)
    version: int = MANIFEST_VERSION

    @property
    def manifest_path(self) -> Path:
        return self.root / MANIFEST_NAME

    @classmethod
    def create(cls, root: str | Path, k: int) -> "Registry":
        root = Path(root)
        root.mkdir(parents=True, exist_ok=True)
        reg = cls(root=root, k=int(k))
        reg.save_manifest()
        return reg

    @classmethod
    def load(cls, root: str | Path) -> "Registry":
        root = Path(root)
        path = root / MANIFEST_NAME
        try:
            with open(path, "r", encoding="utf-8") as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise RegistryError(f"cannot read registry manifest {path}: {exc}") from None
        if doc.get("version") != MANIFEST_VERSION:
            raise RegistryError(f"{path}: unsupported manifest version {doc.get('version')!r}")
        entries = [RegistryEntry(**e) for e in doc.get("strategies", [])]
        reg = cls(root=root, k=int(doc["k"]), entries=entries, version=doc["version"])
        for entry in entries:
            for p in (entry.accuracy_path, entry.cost_path):
                if not (root / p).is_file():
                    raise RegistryError(f"registry references missing weight file {root / p}")
        return reg

    def save_manifest(self) -> None:
        doc = {
            "version": self.version,
            "k": self.k,
            "strategies": [vars(e) for e in self.entries],
        }
        tmp = self.manifest_path.with_suffix(".json.tmp")
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
        tmp.replace(self.manifest_path)

    def strategy_ids(self) -> list[str]:
        return [e.strategy_id for e in self.entries]

    def has(self, strategy_id: str) -> bool:
        return any(e.strategy_id == strategy_id for e in self.entries)

    def load_pair(self, strategy_id: str) -> PredictorPair:
        for entry in self.entries:
            if entry.strategy_id == strategy_id:
                return load_pair_files(strategy_id, self.root / entry.accuracy_path,
                                       self.root / entry.cost_path)
        raise RegistryError(f"strategy {strategy_id!r} is not registered")


def add_strategy(registry: Registry, strategy: Strategy, corpus: Corpus,
                 config: TrainConfig, seed: int) -> Registry:
    """Train and register one new strategy; existing weight files are untouched."""
    sid = strategy.strategy_id
    if registry.has(sid):
        raise RegistryError(f"strategy {sid!r} is already registered")
    if corpus.dimension != registry.k:
        raise RegistryError(f"corpus dimension {corpus.dimension} != registry k {registry.k}")
    pair = train_pair(strategy, corpus, config, seed, registry.root)
    registry.entries.append(RegistryEntry(
        strategy_id=sid,
        accuracy_path=pair.accuracy_path.name,
        cost_path=pair.cost_path.name,
        representation_mode=pair.config.mode,
        trained_at=pair.training_meta.get("trained_at", ""),
        train_seconds=float(pair.training_meta.get("train_seconds", 0.0)),
    ))
    registry.save_manifest()
    return registry


def predict_matrix(registry: Registry, tasks: list[TaskRecord]):
    """Dense (tasks x registered strategies) matrix of (a_hat, c_hat).

    Rows follow task input order; columns follow manifest order.
    """
    from .routing import PredictionMatrix

    if not registry.entries:
        raise RegistryError("registry has no trained strategies")
    if not tasks:
        raise PredictorError("predict_matrix needs at least one task")
    for task in tasks:
        if task.dimension != registry.k:
            raise PredictorError(f"task {task.task_id!r} has dimension {task.dimension}, registry k is {registry.k}")
    embs = np.stack([t.embedding for t in tasks]).astype(np.float64)
    n, s = len(tasks), len(registry.entries)
    acc = np.zeros((n, s))
    cost = np.zeros((n, s))
    for j, entry in enumerate(registry.entries):
        pair = registry.load_pair(entry.strategy_id)
        acc[:, j] = pair.accuracy_net.predict_batch(embs)
        cost[:, j] = pair.cost_net.predict_batch(embs)
    return PredictionMatrix(acc, cost, tuple(t.task_id for t in tasks),
                            tuple(registry.strategy_ids()))
