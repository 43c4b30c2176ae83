"""Minimal dense-network toolkit: two linear layers with a rectifier between,
binary-cross-entropy / squared-error losses, Adam, and a finite-difference
gradient checker.

Parameters are float64 in memory for numerically clean gradients; weight
files store row-major float32, written as decimal literals that round-trip
bit-exactly at 32-bit precision.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping

import numpy as np

WEIGHT_FORMAT_VERSION = 1


def derive_seed(master: int, *parts: str) -> int:
    """Stable per-component seed fan-out from one master seed."""
    digest = hashlib.sha256(":".join([str(int(master)), *parts]).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") % (2 ** 63)

# Probabilities are clamped into [PROB_CLAMP, 1 - PROB_CLAMP] before the
# cross-entropy log, so the loss is always finite.
PROB_CLAMP = 1e-7

KIND_CLASSIFIER = "binary-classifier"
KIND_REGRESSOR = "scalar-regressor"
KINDS = (KIND_CLASSIFIER, KIND_REGRESSOR)


class NetworkError(ValueError):
    """Shape mismatch, non-finite input, or corrupt weight file."""


@dataclass(frozen=True)
class NetSpec:
    input_dim: int
    hidden_dim: int
    kind: str

    def __post_init__(self):
        if self.input_dim <= 0 or self.hidden_dim <= 0:
            raise NetworkError(f"dims must be positive, got {self.input_dim}x{self.hidden_dim}")
        if self.kind not in KINDS:
            raise NetworkError(f"kind must be one of {KINDS}, got {self.kind!r}")


# ----------------------------------------------------------------------------
# Initialization
# ----------------------------------------------------------------------------

def glorot_uniform(rng: np.random.Generator, out_dim: int, in_dim: int) -> np.ndarray:
    """Uniform on +-sqrt(6 / (fan_in + fan_out))."""
    limit = math.sqrt(6.0 / (in_dim + out_dim))
    return rng.uniform(-limit, limit, size=(out_dim, in_dim))


def init_vector(rng: np.random.Generator, dim: int, scale: float = 0.1) -> np.ndarray:
    """Uniform on +-scale; used for learned strategy vectors."""
    return rng.uniform(-scale, scale, size=dim)


@dataclass
class DenseLayer:
    """y = W x + b with W of shape (out_dim, in_dim)."""

    weights: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weights.ndim != 2 or self.bias.shape != (self.weights.shape[0],):
            raise NetworkError(
                f"inconsistent dense shapes: weights {self.weights.shape}, bias {self.bias.shape}")
        if not (np.all(np.isfinite(self.weights)) and np.all(np.isfinite(self.bias))):
            raise NetworkError("dense layer parameters must be finite")

    @classmethod
    def init(cls, rng: np.random.Generator, out_dim: int, in_dim: int) -> "DenseLayer":
        return cls(glorot_uniform(rng, out_dim, in_dim), np.zeros(out_dim))

    def forward(self, x: np.ndarray) -> np.ndarray:
        return x @ self.weights.T + self.bias

    def backward(self, x: np.ndarray, dout: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Returns (dW, db, dx) for inputs stacked along axis 0."""
        dw = dout.T @ x
        db = dout.sum(axis=0)
        dx = dout @ self.weights
        return dw, db, dx


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


class Mlp:
    """Hidden linear layer, rectifier, output linear layer.

    Classifiers push the output through the logistic function; regressors
    return the raw scalar. forward accepts a single vector or a (batch, in)
    matrix and returns outputs of matching leading shape.
    """

    def __init__(self, spec: NetSpec, hidden: DenseLayer, output: DenseLayer):
        if hidden.weights.shape != (spec.hidden_dim, spec.input_dim):
            raise NetworkError(f"hidden layer shape {hidden.weights.shape} does not match spec {spec}")
        if output.weights.shape != (1, spec.hidden_dim):
            raise NetworkError(f"output layer shape {output.weights.shape} does not match spec {spec}")
        self.spec = spec
        self.hidden = hidden
        self.output = output

    @classmethod
    def init(cls, spec: NetSpec, rng: np.random.Generator) -> "Mlp":
        return cls(spec, DenseLayer.init(rng, spec.hidden_dim, spec.input_dim),
                   DenseLayer.init(rng, 1, spec.hidden_dim))

    def forward(self, x: np.ndarray) -> tuple[np.ndarray | float, dict]:
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        xb = x[None, :] if single else x
        if xb.ndim != 2 or xb.shape[1] != self.spec.input_dim:
            raise NetworkError(f"input dimension {x.shape} does not match input_dim={self.spec.input_dim}")
        if not np.all(np.isfinite(xb)):
            raise NetworkError("non-finite network input")
        z1 = self.hidden.forward(xb)
        h = relu(z1)
        z2 = self.output.forward(h)[:, 0]
        if self.spec.kind == KIND_CLASSIFIER:
            # saturated float64 sigmoids round to exactly 0/1; keep the open interval
            y = np.clip(sigmoid(z2), PROB_CLAMP, 1.0 - PROB_CLAMP)
        else:
            y = z2
        cache = {"x": xb, "z1": z1, "h": h, "z2": z2, "y": y, "single": single}
        out = float(y[0]) if single else y
        return out, cache

    def backward(self, cache: dict, dz2: np.ndarray | float) -> dict[str, np.ndarray]:
        """Backprop from d(loss)/d(pre-output z2); returns grads plus d/d(input).

        For classifiers the caller supplies dL/dz2 directly (p - label for
        cross-entropy), which is both exact and numerically stable.
        """
        dz2 = np.atleast_1d(np.asarray(dz2, dtype=np.float64))
        if dz2.shape != cache["z2"].shape:
            raise NetworkError(f"stale cache: got gradient shape {dz2.shape} for batch {cache['z2'].shape}")
        dw2, db2, dh = self.output.backward(cache["h"], dz2[:, None])
        dz1 = dh * (cache["z1"] > 0)
        dw1, db1, dx = self.hidden.backward(cache["x"], dz1)
        if cache["single"]:
            dx = dx[0]
        return {"hidden.weights": dw1, "hidden.bias": db1,
                "output.weights": dw2, "output.bias": db2, "input": dx}

    def params(self) -> dict[str, np.ndarray]:
        return {"hidden.weights": self.hidden.weights, "hidden.bias": self.hidden.bias,
                "output.weights": self.output.weights, "output.bias": self.output.bias}


# ----------------------------------------------------------------------------
# Losses
# ----------------------------------------------------------------------------

def loss_bce(prediction, label):
    """Binary cross-entropy with the probability clamped for finiteness."""
    p = np.clip(prediction, PROB_CLAMP, 1.0 - PROB_CLAMP)
    out = -(np.asarray(label, dtype=np.float64) * np.log(p) + (1.0 - np.asarray(label, dtype=np.float64)) * np.log1p(-p))
    return float(out) if np.isscalar(prediction) or np.ndim(prediction) == 0 else out


def loss_mse(prediction, target):
    """(target - prediction)^2, elementwise."""
    d = np.asarray(target, dtype=np.float64) - np.asarray(prediction, dtype=np.float64)
    out = d * d
    return float(out) if np.ndim(out) == 0 else out


# ----------------------------------------------------------------------------
# Adam
# ----------------------------------------------------------------------------

@dataclass
class AdamState:
    """Bias-corrected Adam moments, one pair per named parameter tensor."""

    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    t: int = 0
    first_moment: dict[str, np.ndarray] = field(default_factory=dict)
    second_moment: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(params: dict[str, np.ndarray], grads: Mapping[str, np.ndarray], state: AdamState) -> None:
    """One in-place Adam update over all named tensors; t increments by 1."""
    for name, param in params.items():
        if name not in grads:
            raise NetworkError(f"missing gradient for tensor {name!r}")
        grad = np.asarray(grads[name], dtype=np.float64)
        if grad.shape != param.shape:
            raise NetworkError(f"gradient shape {grad.shape} != parameter shape {param.shape} for {name!r}")
        if not np.all(np.isfinite(grad)):
            raise NetworkError(f"non-finite gradient for tensor {name!r}")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    for name, param in params.items():
        grad = np.asarray(grads[name], dtype=np.float64)
        m = state.first_moment.setdefault(name, np.zeros_like(param))
        v = state.second_moment.setdefault(name, np.zeros_like(param))
        m *= b1
        m += (1.0 - b1) * grad
        v *= b2
        v += (1.0 - b2) * grad * grad
        m_hat = m / (1.0 - b1 ** state.t)
        v_hat = v / (1.0 - b2 ** state.t)
        param -= state.lr * m_hat / (np.sqrt(v_hat) + state.epsilon)


# ----------------------------------------------------------------------------
# Finite-difference gradient checking
# ----------------------------------------------------------------------------

def finite_difference_gradients(loss_fn: Callable[[], float],
                                params: dict[str, np.ndarray],
                                step: float = 1e-4) -> dict[str, np.ndarray]:
    """Central differences of loss_fn with respect to every entry of params.

    loss_fn must read the (mutated in place) params; entries are restored
    after probing.
    """
    grads = {}
    for name, param in params.items():
        grad = np.zeros_like(param)
        flat = param.reshape(-1)
        gflat = grad.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            up = loss_fn()
            flat[i] = orig - step
            down = loss_fn()
            flat[i] = orig
            gflat[i] = (up - down) / (2.0 * step)
        grads[name] = grad
    return grads


def max_relative_error(analytic: Mapping[str, np.ndarray],
                       numeric: Mapping[str, np.ndarray]) -> float:
    """max over entries of |a - n| / max(|a| + |n|, 1e-6)."""
    worst = 0.0
    for name in numeric:
        a = np.asarray(analytic[name], dtype=np.float64)
        n_ = np.asarray(numeric[name], dtype=np.float64)
        denom = np.maximum(np.abs(a) + np.abs(n_), 1e-6)
        worst = max(worst, float(np.max(np.abs(a - n_) / denom)))
    return worst


# ----------------------------------------------------------------------------
# Weight persistence
# ----------------------------------------------------------------------------

def _tensor_to_json(arr: np.ndarray) -> dict:
    f32 = np.asarray(arr, dtype=np.float32)
    return {"shape": list(f32.shape), "data": [float(v) for v in f32.reshape(-1)]}


def _tensor_from_json(obj: dict, name: str) -> np.ndarray:
    try:
        shape = tuple(obj["shape"])
        data = np.asarray(obj["data"], dtype=np.float32)
    except (KeyError, TypeError, ValueError):
        raise NetworkError(f"corrupt tensor entry {name!r}") from None
    expected = int(np.prod(shape, dtype=np.int64)) if shape else 1
    if data.size != expected:
        raise NetworkError(f"tensor {name!r}: data length does not match shape {shape}")
    return data.reshape(shape).astype(np.float64)


def save_weights(path: str | Path, spec: NetSpec, tensors: Mapping[str, np.ndarray],
                 seed: int, training_meta: dict) -> None:
    """Versioned JSON weight document; tensors stored row-major float32."""
    doc = {
        "version": WEIGHT_FORMAT_VERSION,
        "spec": {"input_dim": spec.input_dim, "hidden_dim": spec.hidden_dim, "kind": spec.kind},
        "tensors": {name: _tensor_to_json(arr) for name, arr in tensors.items()},
        "seed": int(seed),
        "training_meta": training_meta,
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True)


def load_weights(path: str | Path) -> tuple[NetSpec, dict[str, np.ndarray], int, dict]:
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise NetworkError(f"cannot read weight file {path}: {exc}") from None
    if doc.get("version") != WEIGHT_FORMAT_VERSION:
        raise NetworkError(f"{path}: unsupported weight format version {doc.get('version')!r}")
    try:
        spec = NetSpec(doc["spec"]["input_dim"], doc["spec"]["hidden_dim"], doc["spec"]["kind"])
        tensors = {name: _tensor_from_json(obj, name) for name, obj in doc["tensors"].items()}
        return spec, tensors, int(doc["seed"]), doc.get("training_meta", {})
    except (KeyError, TypeError) as exc:
        raise NetworkError(f"{path}: corrupt weight document ({exc})") from None
