"""Small fully connected ReLU networks trained by mini-batch gradient descent.

The network class is deliberately plain: ``depth`` hidden layers of equal
``width``, ReLU activations, a single identity output unit, and a hard clamp
of the output to ``[-clamp_bound, clamp_bound]``.  Fitting minimizes the
weight-normalized empirical risk

    (1 / sum(w)) * sum_i w_i * loss(f(x_i), y_i)

with ``loss`` either the square loss ``(f - y)**2`` or the logistic loss
``-y*f + log(1 + exp(f))`` (``f`` is then a logit and ``y`` a 0/1 label).
The clamp participates in training: its subgradient is 1 strictly inside the
interval and 0 at or beyond the boundary.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, replace

import numpy as np
from scipy.special import expit

from .errors import (
    ConfigurationError,
    DivergenceError,
    EmptySubgroupError,
    InputError,
)

_LOSSES = ("square", "logistic")


@dataclass(frozen=True)
class MLPConfig:
    """Architecture and training hyperparameters.

    ``clamp_bound=None`` defers the output bound until fitting, where it
    resolves to ``2 * 1.1 * max|target|`` (floored at 1.0 so degenerate
    all-zero targets still yield a valid bound).
    """

    depth: int = 2
    width: int = 16
    loss: str = "square"
    epochs: int = 100
    batch_size: int = 64
    step_size: float = 0.05
    seed: int = 0
    validation_fraction: float = 0.2
    clamp_bound: float | None = None

    def __post_init__(self) -> None:
        if self.depth < 1:
            raise ConfigurationError(f"depth must be >= 1, got {self.depth}")
        if self.width < 1:
            raise ConfigurationError(f"width must be >= 1, got {self.width}")
        if self.loss not in _LOSSES:
            raise ConfigurationError(f"loss must be one of {_LOSSES}, got {self.loss!r}")
        if self.epochs < 1:
            raise ConfigurationError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigurationError(f"batch_size must be >= 1, got {self.batch_size}")
        if not (self.step_size > 0 and np.isfinite(self.step_size)):
            raise ConfigurationError(f"step_size must be positive, got {self.step_size}")
        if not 0.0 <= self.validation_fraction <= 0.5:
            raise ConfigurationError(
                f"validation_fraction must lie in [0, 0.5], got {self.validation_fraction}"
            )
        if self.clamp_bound is not None and not (
            self.clamp_bound > 0 and np.isfinite(self.clamp_bound)
        ):
            raise ConfigurationError(f"clamp_bound must be positive, got {self.clamp_bound}")


@dataclass(frozen=True)
class MLPModel:
    """An immutable fitted (or freshly initialized) network.

    ``weights`` holds one matrix per layer: hidden layers are
    ``(width, fan_in)`` and the output layer is ``(1, width)``.  ``biases``
    matches with vectors of length ``width`` and 1.
    """

    config: MLPConfig
    input_dim: int
    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]
    training_loss: tuple[float, ...] = ()
    validation_loss: tuple[float, ...] = ()

    def predict(self, x: np.ndarray) -> np.ndarray:
        return mlp_predict(self, x)

    @property
    def n_parameters(self) -> int:
        return sum(w.size for w in self.weights) + sum(b.size for b in self.biases)


def _frozen(arrays) -> tuple[np.ndarray, ...]:
    out = []
    for a in arrays:
        a = np.ascontiguousarray(a, dtype=np.float64)
        a.flags.writeable = False
        out.append(a)
    return tuple(out)


def mlp_init(config: MLPConfig, input_dim: int) -> MLPModel:
    """He-initialized network: weights ~ N(0, 2 / fan_in), biases zero."""
    if input_dim < 1:
        raise ConfigurationError(f"input_dim must be >= 1, got {input_dim}")
    rng = np.random.default_rng(config.seed)
    weights, biases = [], []
    fan_in = input_dim
    for _ in range(config.depth):
        weights.append(rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(config.width, fan_in)))
        biases.append(np.zeros(config.width))
        fan_in = config.width
    weights.append(rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(1, fan_in)))
    biases.append(np.zeros(1))
    return MLPModel(config, input_dim, _frozen(weights), _frozen(biases))


def _check_x(x: np.ndarray, input_dim: int | None = None) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise InputError(f"x must be 2-D (n, p), got shape {x.shape}")
    if input_dim is not None and x.shape[1] != input_dim:
        raise InputError(f"x has {x.shape[1]} columns, model expects {input_dim}")
    if not np.all(np.isfinite(x)):
        raise InputError("x contains non-finite values")
    return x


def _forward(weights, biases, x):
    """Return (activations, raw_output); activations[0] is x itself."""
    acts = [x]
    a = x
    for w, b in zip(weights[:-1], biases[:-1]):
        a = np.maximum(a @ w.T + b, 0.0)
        acts.append(a)
    raw = a @ weights[-1][0] + biases[-1][0]
    return acts, raw


def _raw_output(weights, biases, x):
    a = x
    for w, b in zip(weights[:-1], biases[:-1]):
        a = np.maximum(a @ w.T + b, 0.0)
    return a @ weights[-1][0] + biases[-1][0]


def _clamp(raw, bound):
    if bound is None:
        return raw
    return np.clip(raw, -bound, bound)


def mlp_predict(model: MLPModel, x: np.ndarray) -> np.ndarray:
    """Clamped network output; for logistic loss this is the clamped logit."""
    x = _check_x(x, model.input_dim)
    return _clamp(_raw_output(model.weights, model.biases, x), model.config.clamp_bound)


def _loss_value(loss, bound, weights, biases, x, y, w, w_sum):
    f = _clamp(_raw_output(weights, biases, x), bound)
    if loss == "square":
        per = (f - y) ** 2
    else:
        per = np.logaddexp(0.0, f) - y * f
    return float(np.dot(w, per) / w_sum)


def _loss_grad(loss, bound, weights, biases, x, y, w, w_sum):
    """Weight-normalized loss and its gradient in the parameters."""
    acts, raw = _forward(weights, biases, x)
    f = _clamp(raw, bound)
    if loss == "square":
        per = (f - y) ** 2
        dldf = 2.0 * (f - y)
    else:
        per = np.logaddexp(0.0, f) - y * f
        dldf = expit(f) - y
    value = float(np.dot(w, per) / w_sum)
    # Clamp subgradient: pass-through strictly inside, zero at the boundary.
    if bound is not None:
        dldf = np.where(np.abs(raw) < bound, dldf, 0.0)
    g = (w * dldf) / w_sum
    grad_w = [None] * len(weights)
    grad_b = [None] * len(biases)
    grad_w[-1] = (g @ acts[-1])[None, :]
    grad_b[-1] = np.array([g.sum()])
    d = g[:, None] * weights[-1][0]
    for layer in range(len(weights) - 2, -1, -1):
        d = d * (acts[layer + 1] > 0)
        grad_w[layer] = d.T @ acts[layer]
        grad_b[layer] = d.sum(axis=0)
        if layer > 0:
            d = d @ weights[layer]
    return value, grad_w, grad_b


def mlp_loss_grad(model: MLPModel, x: np.ndarray, y: np.ndarray, sample_weight=None):
    """Loss and parameter gradient of the weight-normalized empirical risk.

    Returns ``(loss, grad_weights, grad_biases)`` with gradient entries shaped
    like ``model.weights`` / ``model.biases``.
    """
    x = _check_x(x, model.input_dim)
    y = np.asarray(y, dtype=np.float64)
    n = x.shape[0]
    w = _check_weights(sample_weight, n)
    w_sum = w.sum()
    if w_sum <= 0:
        raise EmptySubgroupError("all sample weights are zero")
    value, gw, gb = _loss_grad(
        model.config.loss, model.config.clamp_bound, model.weights, model.biases, x, y, w, w_sum
    )
    return value, gw, gb


def _check_weights(sample_weight, n) -> np.ndarray:
    if sample_weight is None:
        return np.ones(n)
    w = np.asarray(sample_weight, dtype=np.float64)
    if w.shape != (n,):
        raise InputError(f"sample_weight must have shape ({n},), got {w.shape}")
    if not np.all(np.isfinite(w)) or np.any(w < 0):
        raise InputError("sample weights must be finite and non-negative")
    return w


def mlp_fit(x: np.ndarray, y: np.ndarray, config: MLPConfig, sample_weight=None) -> MLPModel:
    """Fit by mini-batch gradient descent with a fixed step size.

    Zero-weight rows are discarded up front, so they cannot affect batch
    composition.  After each epoch the full training loss is recorded (a
    non-finite value raises DivergenceError naming the epoch) and, when a
    validation fraction is held out, the parameters with the best validation
    loss are returned (ties resolve to the earliest epoch).
    """
    x = _check_x(x)
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (x.shape[0],):
        raise InputError(f"y must have shape ({x.shape[0]},), got {y.shape}")
    if not np.all(np.isfinite(y)):
        raise InputError("y contains non-finite values")
    w = _check_weights(sample_weight, x.shape[0])
    keep = w > 0
    if not np.any(keep):
        raise EmptySubgroupError("all sample weights are zero")
    x, y, w = x[keep], y[keep], w[keep]
    if config.loss == "logistic" and not np.all((y == 0) | (y == 1)):
        raise InputError("logistic loss requires 0/1 targets")

    if config.clamp_bound is None:
        bound = max(2.0 * 1.1 * float(np.max(np.abs(y))), 1.0)
        config = replace(config, clamp_bound=bound)
    model0 = mlp_init(config, x.shape[1])
    weights = [np.array(a) for a in model0.weights]
    biases = [np.array(a) for a in model0.biases]

    rng = np.random.default_rng([config.seed, 1])
    n = x.shape[0]
    n_val = int(np.floor(n * config.validation_fraction))
    perm = rng.permutation(n)
    val_idx, train_idx = perm[:n_val], perm[n_val:]
    xt, yt, wt = x[train_idx], y[train_idx], w[train_idx]
    if n_val > 0:
        xv, yv, wv = x[val_idx], y[val_idx], w[val_idx]
        wv_sum = wv.sum()
        use_val = wv_sum > 0
    else:
        use_val = False
    n_train = xt.shape[0]
    wt_sum_full = wt.sum()

    loss, bound, step = config.loss, config.clamp_bound, config.step_size
    train_trace, val_trace = [], []
    best_val = np.inf
    best_weights = best_biases = None
    # Overflow inside a diverging run is expected; the loss check below reports it.
    with np.errstate(over="ignore", invalid="ignore"):
        for epoch in range(1, config.epochs + 1):
            order = rng.permutation(n_train)
            for start in range(0, n_train, config.batch_size):
                idx = order[start : start + config.batch_size]
                bw = wt[idx]
                bw_sum = bw.sum()
                _, gw, gb = _loss_grad(loss, bound, weights, biases, xt[idx], yt[idx], bw, bw_sum)
                for p, g in zip(weights, gw):
                    p -= step * g
                for p, g in zip(biases, gb):
                    p -= step * g
            epoch_loss = _loss_value(loss, bound, weights, biases, xt, yt, wt, wt_sum_full)
            train_trace.append(epoch_loss)
            if not np.isfinite(epoch_loss):
                raise DivergenceError(f"non-finite training loss at epoch {epoch}")
            if use_val:
                v = _loss_value(loss, bound, weights, biases, xv, yv, wv, wv_sum)
                val_trace.append(v)
                if v < best_val:
                    best_val = v
                    best_weights = [p.copy() for p in weights]
                    best_biases = [p.copy() for p in biases]

    if use_val and best_weights is not None:
        weights, biases = best_weights, best_biases
    return MLPModel(
        config,
        x.shape[1],
        _frozen(weights),
        _frozen(biases),
        tuple(train_trace),
        tuple(val_trace),
    )


def mlp_to_dict(model: MLPModel) -> dict:
    return {
        "kind": "mlp",
        "config": asdict(model.config),
        "input_dim": model.input_dim,
        "weights": [w.tolist() for w in model.weights],
        "biases": [b.tolist() for b in model.biases],
    }


def mlp_from_dict(doc: dict) -> MLPModel:
    if doc.get("kind") != "mlp":
        raise InputError(f"expected kind 'mlp', got {doc.get('kind')!r}")
    config = MLPConfig(**doc["config"])
    weights = _frozen([np.asarray(w) for w in doc["weights"]])
    biases = _frozen([np.asarray(b) for b in doc["biases"]])
    return MLPModel(config, int(doc["input_dim"]), weights, biases)


def mlp_to_json(model: MLPModel) -> str:
    return json.dumps(mlp_to_dict(model), sort_keys=True)


def mlp_from_json(text: str) -> MLPModel:
    return mlp_from_dict(json.loads(text))
