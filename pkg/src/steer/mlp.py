"""Nonlinear alignment: an MLP trained with a composite security loss.

The map is a plain feed-forward network (ReLU hidden layers, linear
output) trained to send local-space rows to their server-space
counterparts. The objective combines four terms:

    total = mse + alpha * cos_dist + beta * huber + gamma * sim_penalty

where ``mse`` is the mean squared row distance, ``cos_dist`` the mean
cosine distance (1 - cos), ``huber`` the mean per-coordinate Huber
penalty, and ``sim_penalty`` a hinge ``mean(max(cos_i - tau, 0))`` that
discourages predictions from hugging the target direction too closely
(over-faithful alignment is what makes inversion attacks work).

Parameters are stored as float32; all arithmetic (forward, loss,
gradients, Adam state) runs in float64 so analytic gradients survive
finite-difference scrutiny. Everything is seeded and single-threaded,
so identical inputs reproduce identical parameters bitwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import AlignmentPairs, EmbeddingSet, ensure_valid_pairs
from .errors import (
    DegenerateVectorError,
    DimensionMismatchError,
    InputError,
    TrainingDivergedError,
)

# Hidden-layer widths per capacity preset; input/output dims come from the data.
PRESET_HIDDEN: dict[str, tuple[int, ...]] = {
    "small": (1024,),
    "medium": (2048,),
    "base": (4096, 4096),
}

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass(frozen=True)
class TrainConfig:
    """Every knob the training loop needs, with reproducible defaults."""

    alpha: float = 0.5
    beta: float = 0.1
    gamma: float = 0.1
    tau: float = 0.9
    huber_delta: float = 1.0
    learning_rate: float = 1e-3
    epochs: int = 100
    batch_size: int = 256
    seed: int = 0
    shuffle: bool = True

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0 or self.gamma < 0:
            raise InputError("alpha, beta, gamma must be >= 0")
        if not -1.0 <= self.tau <= 1.0:
            raise InputError(f"tau must be in [-1, 1], got {self.tau}")
        if self.huber_delta <= 0:
            raise InputError(f"huber_delta must be > 0, got {self.huber_delta}")
        if self.learning_rate <= 0:
            raise InputError("learning_rate must be > 0")
        if self.epochs < 1 or self.batch_size < 1:
            raise InputError("epochs and batch_size must be >= 1")

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "beta": self.beta,
            "gamma": self.gamma,
            "tau": self.tau,
            "huber_delta": self.huber_delta,
            "learning_rate": self.learning_rate,
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "seed": self.seed,
            "shuffle": self.shuffle,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        unknown = set(data) - set(cls().to_dict())
        if unknown:
            raise InputError(f"unknown train-config keys: {sorted(unknown)}")
        return cls(**data)


@dataclass(frozen=True)
class LossBreakdown:
    """The four loss components and their weighted total."""

    mse: float
    cos_dist: float
    huber: float
    sim_penalty: float
    total: float

    def as_row(self) -> tuple[float, float, float, float, float]:
        return (self.mse, self.cos_dist, self.huber, self.sim_penalty, self.total)


@dataclass(frozen=True)
class MlpModel:
    """Feed-forward alignment network; float32 parameters, immutable."""

    layer_dims: tuple[int, ...]
    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]
    activation: str = "relu"
    preset_name: str = "custom"

    def __post_init__(self):
        dims = tuple(int(d) for d in self.layer_dims)
        if len(dims) < 2 or any(d < 1 for d in dims):
            raise InputError(f"layer_dims must be >= 2 positive ints, got {dims}")
        if self.activation != "relu":
            raise InputError(f"unsupported activation {self.activation!r}")
        weights = []
        biases = []
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            w = np.ascontiguousarray(w, dtype=np.float32)
            b = np.ascontiguousarray(b, dtype=np.float32)
            if w.shape != (dims[i], dims[i + 1]) or b.shape != (dims[i + 1],):
                raise InputError(
                    f"layer {i}: weight {w.shape} / bias {b.shape} inconsistent "
                    f"with dims {dims[i]}->{dims[i + 1]}"
                )
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise InputError(f"layer {i} has non-finite parameters")
            w.flags.writeable = False
            b.flags.writeable = False
            weights.append(w)
            biases.append(b)
        if len(weights) != len(dims) - 1:
            raise InputError("layer count inconsistent with layer_dims")
        object.__setattr__(self, "layer_dims", dims)
        object.__setattr__(self, "weights", tuple(weights))
        object.__setattr__(self, "biases", tuple(biases))

    @property
    def source_dim(self) -> int:
        return self.layer_dims[0]

    @property
    def target_dim(self) -> int:
        return self.layer_dims[-1]

    @property
    def param_count(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))


def init_mlp(layer_dims: Sequence[int], seed: int, preset_name: str = "custom") -> MlpModel:
    """Kaiming-uniform weights (fan-in scaling) and zero biases, seeded."""
    rng = np.random.default_rng(seed)
    weights = []
    biases = []
    dims = [int(d) for d in layer_dims]
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = np.sqrt(6.0 / fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)).astype(np.float32))
        biases.append(np.zeros(fan_out, dtype=np.float32))
    return MlpModel(tuple(dims), tuple(weights), tuple(biases), "relu", preset_name)


def resolve_layer_dims(
    preset: str | Sequence[int], source_dim: int, target_dim: int
) -> tuple[tuple[int, ...], str]:
    """Turn a preset name or an explicit dim list into full layer dims."""
    if isinstance(preset, str):
        if preset not in PRESET_HIDDEN:
            raise InputError(
                f"unknown preset {preset!r}; choose one of {sorted(PRESET_HIDDEN)} "
                "or pass explicit layer dims"
            )
        return (source_dim, *PRESET_HIDDEN[preset], target_dim), preset
    dims = tuple(int(d) for d in preset)
    if len(dims) < 2:
        raise InputError("custom layer dims need at least [input, output]")
    if dims[0] != source_dim or dims[-1] != target_dim:
        raise InputError(
            f"custom dims must start with {source_dim} and end with {target_dim}, got {dims}"
        )
    return dims, "custom"


def _forward_pass(
    weights: list[np.ndarray], biases: list[np.ndarray], x: np.ndarray
) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Forward through all layers; returns (post-activations, pre-activations).

    ``activations[0]`` is the input; ``activations[-1]`` the linear output.
    """
    activations = [x]
    preacts = []
    last = len(weights) - 1
    for i, (w, b) in enumerate(zip(weights, biases)):
        z = activations[-1] @ w + b
        preacts.append(z)
        activations.append(z if i == last else np.maximum(z, 0.0))
    return activations, preacts


def _params64(model: MlpModel) -> tuple[list[np.ndarray], list[np.ndarray]]:
    return (
        [w.astype(np.float64) for w in model.weights],
        [b.astype(np.float64) for b in model.biases],
    )


def mlp_forward(model: MlpModel, batch: np.ndarray) -> np.ndarray:
    """Deterministic forward pass; returns a float64 (m, target_dim) matrix."""
    x = np.asarray(batch, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.source_dim:
        raise DimensionMismatchError(
            f"batch shape {x.shape} incompatible with source dim {model.source_dim}"
        )
    weights, biases = _params64(model)
    activations, _ = _forward_pass(weights, biases, x)
    return activations[-1]


def _cosine_rows(pred: np.ndarray, target: np.ndarray):
    """Row cosines plus the norms needed by the backward pass."""
    pn = np.linalg.norm(pred, axis=1)
    tn = np.linalg.norm(target, axis=1)
    for norms, side in ((pn, "prediction"), (tn, "target")):
        zero = np.where(norms == 0.0)[0]
        if zero.size:
            raise DegenerateVectorError(
                f"zero-norm {side} row at index {int(zero[0])} while computing cosine"
            )
    cos = np.einsum("ij,ij->i", pred, target) / (pn * tn)
    return np.clip(cos, -1.0, 1.0), pn, tn


def _loss_terms(
    pred: np.ndarray, target: np.ndarray, cfg: TrainConfig
) -> tuple[LossBreakdown, dict]:
    """Loss components for a prediction batch, plus backward-pass context."""
    m = pred.shape[0]
    resid = pred - target
    mse = float(np.mean(np.sum(resid * resid, axis=1)))

    cos, pred_norm, target_norm = _cosine_rows(pred, target)
    cos_dist = float(np.mean(1.0 - cos))

    delta = cfg.huber_delta
    absr = np.abs(resid)
    hub = np.where(absr <= delta, 0.5 * resid * resid, delta * (absr - 0.5 * delta))
    huber = float(np.mean(hub))

    gap = cos - cfg.tau
    sim_penalty = float(np.mean(np.maximum(gap, 0.0)))

    total = mse + cfg.alpha * cos_dist + cfg.beta * huber + cfg.gamma * sim_penalty
    breakdown = LossBreakdown(mse, cos_dist, huber, sim_penalty, total)
    ctx = {
        "resid": resid,
        "cos": cos,
        "pred_norm": pred_norm,
        "target_norm": target_norm,
        "active": gap > 0,
        "m": m,
    }
    return breakdown, ctx


def _output_gradient(pred, target, cfg: TrainConfig, ctx) -> np.ndarray:
    """d(total)/d(pred) for the composite loss."""
    m = ctx["m"]
    resid = ctx["resid"]
    cos = ctx["cos"]
    pn = ctx["pred_norm"][:, None]
    tn = ctx["target_norm"][:, None]

    grad = (2.0 / m) * resid

    # d cos_i / d pred_i, shared by the cosine-distance and hinge terms.
    dcos = target / (pn * tn) - cos[:, None] * pred / (pn * pn)
    if cfg.alpha != 0.0:
        grad -= (cfg.alpha / m) * dcos
    if cfg.gamma != 0.0:
        grad += (cfg.gamma / m) * ctx["active"][:, None] * dcos

    if cfg.beta != 0.0:
        delta = cfg.huber_delta
        dh = np.clip(resid, -delta, delta)
        grad += cfg.beta * dh / (m * pred.shape[1])
    return grad


def _loss_and_grad(
    weights: list[np.ndarray],
    biases: list[np.ndarray],
    x: np.ndarray,
    y: np.ndarray,
    cfg: TrainConfig,
    want_grad: bool = True,
):
    activations, preacts = _forward_pass(weights, biases, x)
    pred = activations[-1]
    breakdown, ctx = _loss_terms(pred, y, cfg)
    if not want_grad:
        return breakdown, None, None

    grad_w = [np.empty(0)] * len(weights)
    grad_b = [np.empty(0)] * len(weights)
    delta = _output_gradient(pred, y, cfg, ctx)
    for layer in range(len(weights) - 1, -1, -1):
        grad_w[layer] = activations[layer].T @ delta
        grad_b[layer] = delta.sum(axis=0)
        if layer > 0:
            delta = (delta @ weights[layer].T) * (preacts[layer - 1] > 0)
    return breakdown, grad_w, grad_b


def _check_batch(model: MlpModel, batch_local, batch_server):
    x = np.asarray(batch_local, dtype=np.float64)
    y = np.asarray(batch_server, dtype=np.float64)
    if x.ndim != 2 or y.ndim != 2 or x.shape[0] != y.shape[0]:
        raise DimensionMismatchError(
            f"batch shapes {x.shape} / {y.shape} must share the row count"
        )
    if x.shape[1] != model.source_dim or y.shape[1] != model.target_dim:
        raise DimensionMismatchError(
            f"batch dims {x.shape[1]}->{y.shape[1]} incompatible with model "
            f"{model.source_dim}->{model.target_dim}"
        )
    return x, y


def loss(model: MlpModel, batch_local, batch_server, cfg: TrainConfig) -> LossBreakdown:
    """Composite loss of the model on one batch of (local, server) rows."""
    x, y = _check_batch(model, batch_local, batch_server)
    weights, biases = _params64(model)
    breakdown, _, _ = _loss_and_grad(weights, biases, x, y, cfg, want_grad=False)
    return breakdown


def composite_loss(pred, target, cfg: TrainConfig) -> LossBreakdown:
    """Loss components for already-computed predictions (model-free).

    Useful for scoring a linear fit with the same yardstick as the MLP
    and for checking the loss terms against hand-computed values.
    """
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.ndim != 2 or pred.shape != target.shape:
        raise DimensionMismatchError(
            f"prediction shape {pred.shape} must match target shape {target.shape}"
        )
    breakdown, _ = _loss_terms(pred, target, cfg)
    return breakdown


def loss_gradient(
    model: MlpModel, batch_local, batch_server, cfg: TrainConfig
) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Analytic gradient of the total loss w.r.t. every weight and bias.

    Returns (weight_grads, bias_grads) as float64 arrays shaped like the
    model's parameters, layer by layer.
    """
    x, y = _check_batch(model, batch_local, batch_server)
    weights, biases = _params64(model)
    _, grad_w, grad_b = _loss_and_grad(weights, biases, x, y, cfg, want_grad=True)
    return grad_w, grad_b


def train_mlp(
    pairs: AlignmentPairs,
    preset: str | Sequence[int],
    cfg: TrainConfig,
) -> tuple[MlpModel, list[LossBreakdown]]:
    """Train an alignment MLP with Adam; returns the model and per-epoch losses.

    The history holds one full-training-set :class:`LossBreakdown` per
    epoch, evaluated after that epoch's updates. Aborts with
    :class:`TrainingDivergedError` the moment any batch loss goes
    non-finite.
    """
    ensure_valid_pairs(pairs)
    # Training runs in float32 throughout: parameters are stored as float32
    # anyway, and the narrower dtype doubles effective memory bandwidth on
    # the optimizer's elementwise passes. Loss reporting stays float64 via
    # the scalar conversions in _loss_terms.
    x_all = pairs.local.vectors.astype(np.float32)
    y_all = pairs.server.vectors.astype(np.float32)
    m = x_all.shape[0]

    layer_dims, preset_name = resolve_layer_dims(preset, x_all.shape[1], y_all.shape[1])
    seed_model = init_mlp(layer_dims, cfg.seed, preset_name)
    weights = [w.copy() for w in seed_model.weights]
    biases = [b.copy() for b in seed_model.biases]

    # One (m1, v1, scratch) triple per parameter tensor. The scratch buffer
    # keeps the update loop free of large temporaries.
    params = list(weights) + list(biases)
    adam_m = [np.zeros_like(p) for p in params]
    adam_v = [np.zeros_like(p) for p in params]
    scratches = [np.empty_like(p) for p in params]

    rng = np.random.default_rng(cfg.seed)
    history: list[LossBreakdown] = []
    step = 0
    # Divergence shows up as inf/nan flowing through the arithmetic before
    # the isfinite checks catch it; silence the intermediate warnings and
    # report through TrainingDivergedError instead. Epoch/batch numbers in
    # diagnostics are 1-based, matching the train log.
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(m) if cfg.shuffle else np.arange(m)
        for batch_idx, start in enumerate(range(0, m, cfg.batch_size), start=1):
            rows = order[start : start + cfg.batch_size]
            with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
                breakdown, grad_w, grad_b = _loss_and_grad(
                    weights, biases, x_all[rows], y_all[rows], cfg
                )
            if not np.isfinite(breakdown.total):
                raise TrainingDivergedError(epoch, batch_idx, f"total={breakdown.total}")
            step += 1
            bc2_sqrt = math.sqrt(1.0 - ADAM_BETA2**step)
            # lr*(m1/bc1)/(sqrt(v1/bc2)+eps) rewritten with the bias
            # corrections folded into the step size and epsilon.
            step_size = cfg.learning_rate * bc2_sqrt / (1.0 - ADAM_BETA1**step)
            eps_hat = ADAM_EPS * bc2_sqrt
            grads = list(grad_w) + list(grad_b)
            for param, grad, m1, v1, scratch in zip(
                params, grads, adam_m, adam_v, scratches
            ):
                m1 *= ADAM_BETA1
                np.multiply(grad, 1.0 - ADAM_BETA1, out=scratch)
                m1 += scratch
                v1 *= ADAM_BETA2
                np.multiply(grad, grad, out=scratch)
                scratch *= 1.0 - ADAM_BETA2
                v1 += scratch
                np.sqrt(v1, out=scratch)
                scratch += eps_hat
                np.divide(m1, scratch, out=scratch)
                scratch *= step_size
                param -= scratch
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            epoch_loss, _, _ = _loss_and_grad(
                weights, biases, x_all, y_all, cfg, want_grad=False
            )
        if not np.isfinite(epoch_loss.total):
            raise TrainingDivergedError(
                epoch, 0, f"full-set total={epoch_loss.total} after epoch updates"
            )
        history.append(epoch_loss)

    model = MlpModel(
        tuple(layer_dims),
        tuple(w.astype(np.float32) for w in weights),
        tuple(b.astype(np.float32) for b in biases),
        "relu",
        preset_name,
    )
    return model, history


def apply_mlp(model: MlpModel, emb_set: EmbeddingSet) -> EmbeddingSet:
    """Map a whole embedding set through the network; labeled "approx"."""
    if emb_set.dim != model.source_dim:
        raise DimensionMismatchError(
            f"set dim {emb_set.dim} != model source dim {model.source_dim}"
        )
    out = mlp_forward(model, emb_set.vectors)
    return EmbeddingSet(emb_set.ids, out.astype(np.float32), "approx", validate=False)
