"""Predictive pair scorers: pair-MLP and two-tower encoders.

Both models are small enough to train with hand-written numpy gradients
and the AdamW update. Training applies the safeguard stack — class
weighting, hard-negative mining, positive-unlabeled downweighting,
early stopping on validation MCC — then fits a calibration temperature
and tunes the decision threshold. Attribution is exact group Shapley
over the pair-tensor blocks.
"""

from __future__ import annotations

import copy
import json
import math
import struct
from dataclasses import dataclass, field, replace
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy.special import erf

from .core import derive_seed
from .errors import PairforgeError
from .metrics import calibrate_scores, fit_temperature, tune_threshold

ARCHITECTURES = ("pair_mlp", "two_tower")
ACTIVATIONS = ("relu", "gelu", "tanh", "silu")
LOSSES = ("bce", "focal")

#: the full-scale network; the desk-scale default is (64, 32)
FULL_SCALE_HIDDEN_SIZES = (512, 256, 128)

CHECKPOINT_MAGIC = b"PFCK"
CHECKPOINT_VERSION = 1

GROUP_NAMES = ("a_emb", "b_emb", "a_zacc", "b_zacc", "a_eacc", "b_eacc",
               "contrast", "concordance")


@dataclass(frozen=True)
class ModelSpec:
    """Architecture and loss choices for one trained scorer."""

    architecture: str = "pair_mlp"
    hidden_sizes: Tuple[int, ...] = (64, 32)
    activation: str = "relu"
    loss: str = "bce"
    focal_gamma: float = 2.0
    tower_dim: int = 32
    temperature: float = 1.0
    symmetrize_scores: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.architecture not in ARCHITECTURES:
            raise PairforgeError("BAD_SPEC",
                                 f"unknown architecture {self.architecture!r}")
        if self.activation not in ACTIVATIONS:
            raise PairforgeError("BAD_SPEC",
                                 f"unknown activation {self.activation!r}")
        if self.loss not in LOSSES:
            raise PairforgeError("BAD_SPEC", f"unknown loss {self.loss!r}")
        if not self.hidden_sizes or any(h <= 0 for h in self.hidden_sizes):
            raise PairforgeError("BAD_DIMENSION",
                                 "hidden sizes must be positive and nonempty")
        if self.tower_dim <= 0:
            raise PairforgeError("BAD_DIMENSION", "tower dimension must be > 0")
        if self.temperature <= 0:
            raise PairforgeError("BAD_SPEC", "temperature must be > 0")
        if self.focal_gamma < 0:
            raise PairforgeError("BAD_SPEC", "focal gamma must be >= 0")


@dataclass(frozen=True)
class TrainConfig:
    """Optimizer settings and the safeguard stack."""

    learning_rate: float = 1e-3
    weight_decay: float = 1e-4
    batch_size: int = 32
    max_epochs: int = 100
    patience: int = 10
    class_weighting: bool = False
    hard_negative_mining: bool = False
    mining_floor: float = 0.7
    mining_multiplier: float = 2.0
    pu_downweighting: bool = False
    pu_floor: float = 0.9
    pu_factor: float = 0.5
    bag_count: int = 3

    def __post_init__(self):
        if self.learning_rate <= 0 or self.batch_size <= 0:
            raise PairforgeError("BAD_CONFIG",
                                 "learning rate and batch size must be > 0")
        if self.weight_decay < 0 or self.max_epochs < 0 or self.patience < 0:
            raise PairforgeError("BAD_CONFIG", "negative training budget")
        if self.mining_multiplier < 1.0:
            raise PairforgeError("BAD_CONFIG", "mining multiplier must be >= 1")
        if not 0.0 < self.pu_factor <= 1.0:
            raise PairforgeError("BAD_CONFIG", "PU factor must be in (0, 1]")
        if self.bag_count < 1:
            raise PairforgeError("BAD_CONFIG", "bag count must be >= 1")


@dataclass
class TrainedModel:
    spec: ModelSpec
    input_dim: int  # full pair dim for pair_mlp, per-tower dim for two_tower
    params: Dict[str, np.ndarray]
    temperature: float = 1.0
    threshold: float = 0.5
    history: Tuple[Mapping[str, float], ...] = ()

    @property
    def param_count(self) -> int:
        return sum(p.size for p in self.params.values())

    @property
    def pair_dim(self) -> int:
        if self.spec.architecture == "pair_mlp":
            return self.input_dim
        return 4 * self.input_dim


# ---------------------------------------------------------------------------
# Architecture: initialization and forward/backward passes


def _layer_dims(spec: ModelSpec, input_dim: int) -> List[int]:
    out = 1 if spec.architecture == "pair_mlp" else spec.tower_dim
    return [input_dim, *spec.hidden_sizes, out]


def build_model(spec: ModelSpec, input_dim: int) -> TrainedModel:
    """Seeded uniform fan-in initialization; deterministic given the seed."""
    if input_dim <= 0:
        raise PairforgeError("BAD_DIMENSION", f"input dimension {input_dim}")
    if spec.architecture == "pair_mlp" and input_dim % 4:
        raise PairforgeError("BAD_DIMENSION",
                             "pair tensors stack four equal channels; "
                             f"{input_dim} is not divisible by 4")
    rng = np.random.default_rng(derive_seed(spec.seed, "init"))
    dims = _layer_dims(spec, input_dim)
    params: Dict[str, np.ndarray] = {}
    for i, (fan_in, fan_out) in enumerate(zip(dims, dims[1:])):
        bound = 1.0 / math.sqrt(fan_in)
        params[f"w{i}"] = rng.uniform(-bound, bound, size=(fan_in, fan_out))
        params[f"b{i}"] = rng.uniform(-bound, bound, size=fan_out)
    if spec.architecture == "two_tower":
        params["log_t"] = np.array(math.log(spec.temperature))
    return TrainedModel(spec=spec, input_dim=input_dim, params=params)


def _activate(name: str, a: np.ndarray) -> np.ndarray:
    if name == "relu":
        return np.maximum(0.0, a)
    if name == "gelu":
        return 0.5 * a * (1.0 + erf(a / math.sqrt(2.0)))
    if name == "tanh":
        return np.tanh(a)
    sig = _sigmoid(a)
    return a * sig


def _activate_grad(name: str, a: np.ndarray) -> np.ndarray:
    if name == "relu":
        return (a > 0).astype(np.float64)
    if name == "gelu":
        pdf = np.exp(-0.5 * a * a) / math.sqrt(2.0 * math.pi)
        return 0.5 * (1.0 + erf(a / math.sqrt(2.0))) + a * pdf
    if name == "tanh":
        t = np.tanh(a)
        return 1.0 - t * t
    sig = _sigmoid(a)
    return sig * (1.0 + a * (1.0 - sig))


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _encode(spec: ModelSpec, params: Mapping[str, np.ndarray],
            x: np.ndarray) -> Tuple[np.ndarray, List[Tuple[np.ndarray, np.ndarray]]]:
    """Hidden layers with activation, then a final linear layer."""
    caches = []
    h = x
    n_layers = len(spec.hidden_sizes) + 1
    for i in range(n_layers):
        a = h @ params[f"w{i}"] + params[f"b{i}"]
        caches.append((h, a))
        h = _activate(spec.activation, a) if i < n_layers - 1 else a
    return h, caches


def _encode_backward(spec: ModelSpec, params: Mapping[str, np.ndarray],
                     caches, d_out: np.ndarray,
                     grads: Dict[str, np.ndarray]) -> None:
    """Accumulate parameter gradients for one encoder pass into ``grads``."""
    n_layers = len(spec.hidden_sizes) + 1
    delta = d_out
    for i in reversed(range(n_layers)):
        h_in, a = caches[i]
        if i < n_layers - 1:
            delta = delta * _activate_grad(spec.activation, a)
        grads[f"w{i}"] += h_in.T @ delta
        grads[f"b{i}"] += delta.sum(axis=0)
        if i > 0:
            delta = delta @ params[f"w{i}"].T
        else:
            delta = None


_NORM_FLOOR = 1e-12


def _split_towers(x: np.ndarray, tower_dim: int) -> Tuple[np.ndarray, np.ndarray]:
    if x.shape[1] != 4 * tower_dim:
        raise PairforgeError(
            "DIMENSION_MISMATCH",
            f"expected pair tensors of width {4 * tower_dim}, got {x.shape[1]}")
    return x[:, :tower_dim], x[:, tower_dim:2 * tower_dim]


def _forward(spec: ModelSpec, params: Mapping[str, np.ndarray],
             x: np.ndarray, input_dim: int):
    """Raw logits plus the caches needed for the backward pass."""
    if spec.architecture == "pair_mlp":
        if x.shape[1] != input_dim:
            raise PairforgeError("DIMENSION_MISMATCH",
                                 f"expected width {input_dim}, got {x.shape[1]}")
        out, caches = _encode(spec, params, x)
        return out[:, 0], {"caches": caches}
    a, b = _split_towers(x, input_dim)
    u, cache_a = _encode(spec, params, a)
    v, cache_b = _encode(spec, params, b)
    nu = np.linalg.norm(u, axis=1)
    nv = np.linalg.norm(v, axis=1)
    denom = np.maximum(nu * nv, _NORM_FLOOR)
    cos = np.einsum("ij,ij->i", u, v) / denom
    inv_t = math.exp(-float(params["log_t"]))
    logits = cos * inv_t
    return logits, {"cache_a": cache_a, "cache_b": cache_b, "u": u, "v": v,
                    "nu": nu, "nv": nv, "denom": denom, "cos": cos,
                    "inv_t": inv_t}


def _backward(spec: ModelSpec, params: Mapping[str, np.ndarray], cache,
              d_logits: np.ndarray) -> Dict[str, np.ndarray]:
    grads = {k: np.zeros_like(p) for k, p in params.items()}
    if spec.architecture == "pair_mlp":
        _encode_backward(spec, params, cache["caches"], d_logits[:, None], grads)
        return grads
    u, v = cache["u"], cache["v"]
    cos, denom = cache["cos"], cache["denom"]
    inv_t = cache["inv_t"]
    d_cos = d_logits * inv_t
    # d logit / d log_t = -cos * exp(-log_t) = -logit
    grads["log_t"] = np.array(-(d_logits * cos * inv_t).sum())
    nu2 = np.maximum(cache["nu"] ** 2, _NORM_FLOOR)
    nv2 = np.maximum(cache["nv"] ** 2, _NORM_FLOOR)
    d_u = d_cos[:, None] * (v / denom[:, None] - u * (cos / nu2)[:, None])
    d_v = d_cos[:, None] * (u / denom[:, None] - v * (cos / nv2)[:, None])
    _encode_backward(spec, params, cache["cache_a"], d_u, grads)
    _encode_backward(spec, params, cache["cache_b"], d_v, grads)
    return grads


def _loss_terms(spec: ModelSpec, logits: np.ndarray,
                y: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Per-sample loss and its derivative with respect to the logit.

    Non-finite inputs propagate silently; the trainer turns a non-finite
    batch loss into a structured error with its epoch/batch coordinates.
    """
    with np.errstate(invalid="ignore", over="ignore"):
        p = _sigmoid(logits)
        if spec.loss == "bce":
            losses = np.logaddexp(0.0, logits) - y * logits
            d_logit = p - y
            return losses, d_logit
        gamma = spec.focal_gamma
        p_t = np.clip(y * p + (1.0 - y) * (1.0 - p), 1e-12, 1.0)
        one_m = 1.0 - p_t
        losses = -(one_m ** gamma) * np.log(p_t)
        d_pt = (gamma * (one_m ** (gamma - 1.0)) * np.log(p_t)
                - (one_m ** gamma) / p_t)
        d_logit = d_pt * (2.0 * y - 1.0) * p * (1.0 - p)
        return losses, d_logit


def loss_and_gradients(spec: ModelSpec, params: Mapping[str, np.ndarray],
                       x: np.ndarray, y: np.ndarray, input_dim: int,
                       weights: Optional[np.ndarray] = None,
                       ) -> Tuple[float, Dict[str, np.ndarray]]:
    """Weighted mean loss over a batch and its analytic parameter gradients."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    w = np.ones_like(y) if weights is None else np.asarray(weights, np.float64)
    logits, cache = _forward(spec, params, x, input_dim)
    losses, d_logit = _loss_terms(spec, logits, y)
    n = x.shape[0]
    loss = float(np.sum(w * losses) / n)
    grads = _backward(spec, params, cache, w * d_logit / n)
    return loss, grads


# ---------------------------------------------------------------------------
# Inference


def _raw_logits(model: TrainedModel, x: np.ndarray) -> np.ndarray:
    logits, _ = _forward(model.spec, model.params, x, model.input_dim)
    return logits


def _swap_channels(x: np.ndarray) -> np.ndarray:
    quarter = x.shape[1] // 4
    return np.concatenate([x[:, quarter:2 * quarter], x[:, :quarter],
                           x[:, 2 * quarter:]], axis=1)


def score_batch(model: TrainedModel, x: np.ndarray) -> np.ndarray:
    """Calibrated probabilities for a batch of pair tensors."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    scores = calibrate_scores(_raw_logits(model, x), model.temperature)
    if model.spec.symmetrize_scores:
        swapped = calibrate_scores(_raw_logits(model, _swap_channels(x)),
                                   model.temperature)
        scores = (scores + swapped) / 2.0
    return scores


def forward_score(model: TrainedModel, features: Sequence[float]) -> float:
    """Probability that one pair interacts."""
    return float(score_batch(model, np.asarray(features, np.float64)[None, :])[0])


def ensemble_predict(models: Sequence[TrainedModel],
                     x: np.ndarray) -> np.ndarray:
    """Unweighted mean of the calibrated per-model probabilities."""
    if not models:
        raise PairforgeError("EMPTY_ENSEMBLE", "no models to ensemble")
    widths = {m.pair_dim for m in models}
    if len(widths) > 1:
        raise PairforgeError("DIMENSION_MISMATCH",
                             f"models disagree on input width: {sorted(widths)}")
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    return np.mean([score_batch(m, x) for m in models], axis=0)


# ---------------------------------------------------------------------------
# Training


class _AdamW:
    def __init__(self, params: Mapping[str, np.ndarray], lr: float, wd: float,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr, self.wd, self.beta1, self.beta2, self.eps = lr, wd, beta1, beta2, eps
        self.m = {k: np.zeros_like(p) for k, p in params.items()}
        self.v = {k: np.zeros_like(p) for k, p in params.items()}
        self.t = 0

    def step(self, params: Dict[str, np.ndarray],
             grads: Mapping[str, np.ndarray]) -> None:
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for key, p in params.items():
            g = grads[key]
            self.m[key] = self.beta1 * self.m[key] + (1.0 - self.beta1) * g
            self.v[key] = self.beta2 * self.v[key] + (1.0 - self.beta2) * g * g
            update = (self.m[key] / bc1) / (np.sqrt(self.v[key] / bc2) + self.eps)
            p -= self.lr * update + self.lr * self.wd * p


def class_weights(labels: np.ndarray) -> np.ndarray:
    """Inverse-frequency per-sample weights, normalized to mean one."""
    y = np.asarray(labels)
    n = y.size
    counts = {c: max(int(np.sum(y == c)), 1) for c in (0, 1)}
    per_class = {c: n / (2.0 * counts[c]) for c in (0, 1)}
    return np.array([per_class[int(v)] for v in y])


def _epoch_weights(cfg: TrainConfig, base: np.ndarray, y: np.ndarray,
                   previous_scores: Optional[np.ndarray]) -> np.ndarray:
    weights = base.copy()
    if previous_scores is None:
        return weights
    negatives = y == 0
    if cfg.hard_negative_mining:
        hard = negatives & (previous_scores > cfg.mining_floor)
        weights[hard] *= cfg.mining_multiplier
    if cfg.pu_downweighting:
        likely_positive = negatives & (previous_scores > cfg.pu_floor)
        weights[likely_positive] *= cfg.pu_factor
    return weights


def train_model(spec: ModelSpec, cfg: TrainConfig, x_train: np.ndarray,
                y_train: np.ndarray, x_val: np.ndarray,
                y_val: np.ndarray) -> TrainedModel:
    """Mini-batch AdamW with the safeguard stack and post-hoc calibration.

    Training is a deterministic function of the spec seed: batch order,
    initialization, and every weight update replay identically.
    """
    x_train = np.atleast_2d(np.asarray(x_train, np.float64))
    x_val = np.atleast_2d(np.asarray(x_val, np.float64))
    y_train = np.asarray(y_train, np.float64)
    y_val = np.asarray(y_val, np.int64)
    if x_train.shape[0] == 0 or x_val.shape[0] == 0:
        raise PairforgeError("EMPTY_SPLIT", "empty training or validation split")

    pair_dim = x_train.shape[1]
    if spec.architecture == "two_tower":
        if pair_dim % 4:
            raise PairforgeError("DIMENSION_MISMATCH",
                                 f"pair width {pair_dim} not divisible by 4")
        input_dim = pair_dim // 4
    else:
        input_dim = pair_dim
    model = build_model(spec, input_dim)
    params = model.params

    base = class_weights(y_train) if cfg.class_weighting else np.ones_like(y_train)
    optimizer = _AdamW(params, cfg.learning_rate, cfg.weight_decay)
    rng = np.random.default_rng(derive_seed(spec.seed, "batches"))

    history: List[Mapping[str, float]] = []
    best_mcc = -math.inf
    best_params = copy.deepcopy(params)
    epochs_since_best = 0
    previous_scores: Optional[np.ndarray] = None
    n = x_train.shape[0]

    for epoch in range(cfg.max_epochs):
        weights = _epoch_weights(cfg, base, y_train, previous_scores)
        order = rng.permutation(n)
        loss_sum = 0.0
        for batch_index, start in enumerate(range(0, n, cfg.batch_size)):
            idx = order[start:start + cfg.batch_size]
            loss, grads = loss_and_gradients(spec, params, x_train[idx],
                                             y_train[idx], input_dim,
                                             weights[idx])
            if not math.isfinite(loss):
                raise PairforgeError("NON_FINITE_LOSS",
                                     f"loss diverged at epoch {epoch}",
                                     epoch=epoch, batch=batch_index)
            optimizer.step(params, grads)
            loss_sum += loss * idx.size
        train_loss = loss_sum / n

        val_logits = _raw_logits(model, x_val)
        val_losses, _ = _loss_terms(spec, val_logits, y_val.astype(np.float64))
        val_loss = float(val_losses.mean())
        _, val_mcc = tune_threshold(y_val, _sigmoid(val_logits), "mcc")
        history.append({"epoch": epoch, "train_loss": train_loss,
                        "val_loss": val_loss, "val_mcc": val_mcc})

        if val_mcc > best_mcc:
            best_mcc = val_mcc
            best_params = copy.deepcopy(params)
            epochs_since_best = 0
        else:
            epochs_since_best += 1
            if epochs_since_best >= cfg.patience:
                break
        previous_scores = _sigmoid(_raw_logits(model, x_train))

    model.params = best_params
    model.history = tuple(history)
    if history:
        val_logits = _raw_logits(model, x_val)
        model.temperature = fit_temperature(y_val, val_logits)
        calibrated = calibrate_scores(val_logits, model.temperature)
        threshold, _ = tune_threshold(y_val, calibrated, "mcc")
    else:
        # degenerate budget: untouched parameters, raw-score threshold
        threshold, _ = tune_threshold(y_val, _sigmoid(_raw_logits(model, x_val)),
                                      "mcc")
    model.threshold = min(1.0, max(0.0, threshold))
    return model


def train_bag(spec: ModelSpec, cfg: TrainConfig, x_train: np.ndarray,
              y_train: np.ndarray, x_val: np.ndarray, y_val: np.ndarray,
              ) -> Tuple[List[TrainedModel], float]:
    """Seed-level replicas plus an ensemble threshold tuned on pooled scores."""
    models = []
    for i in range(cfg.bag_count):
        seed = derive_seed(spec.seed, f"bag:{i}")
        models.append(train_model(replace(spec, seed=seed), cfg,
                                  x_train, y_train, x_val, y_val))
    pooled = ensemble_predict(models, x_val)
    threshold, _ = tune_threshold(y_val, pooled, "mcc")
    return models, min(1.0, max(0.0, threshold))


# ---------------------------------------------------------------------------
# Checkpoints


def _spec_to_dict(spec: ModelSpec) -> Dict[str, object]:
    return {
        "architecture": spec.architecture,
        "hidden_sizes": list(spec.hidden_sizes),
        "activation": spec.activation,
        "loss": spec.loss,
        "focal_gamma": spec.focal_gamma,
        "tower_dim": spec.tower_dim,
        "temperature": spec.temperature,
        "symmetrize_scores": spec.symmetrize_scores,
        "seed": spec.seed,
    }


def _spec_from_dict(data: Mapping[str, object]) -> ModelSpec:
    return ModelSpec(
        architecture=data["architecture"],
        hidden_sizes=tuple(data["hidden_sizes"]),
        activation=data["activation"],
        loss=data["loss"],
        focal_gamma=data["focal_gamma"],
        tower_dim=data["tower_dim"],
        temperature=data["temperature"],
        symmetrize_scores=data["symmetrize_scores"],
        seed=data["seed"],
    )


def checkpoint_bytes(model: TrainedModel) -> bytes:
    """Versioned binary: JSON header plus 64-bit parameter buffers."""
    names = sorted(model.params)
    header = json.dumps({
        "spec": _spec_to_dict(model.spec),
        "input_dim": model.input_dim,
        "temperature": model.temperature,
        "threshold": model.threshold,
        "params": [{"name": n, "shape": list(model.params[n].shape)}
                   for n in names],
    }, sort_keys=True).encode("utf-8")
    chunks = [CHECKPOINT_MAGIC, struct.pack("<HI", CHECKPOINT_VERSION,
                                            len(header)), header]
    for name in names:
        chunks.append(np.ascontiguousarray(model.params[name],
                                           dtype="<f8").tobytes())
    return b"".join(chunks)


def parse_checkpoint(blob: bytes) -> TrainedModel:
    if blob[:4] != CHECKPOINT_MAGIC:
        raise PairforgeError("BAD_MAGIC", "not a model checkpoint")
    version, header_len = struct.unpack_from("<HI", blob, 4)
    if version != CHECKPOINT_VERSION:
        raise PairforgeError("UNSUPPORTED_VERSION",
                             f"checkpoint version {version}")
    offset = 10
    header = json.loads(blob[offset:offset + header_len].decode("utf-8"))
    offset += header_len
    params: Dict[str, np.ndarray] = {}
    for entry in header["params"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        end = offset + 8 * count
        if end > len(blob):
            raise PairforgeError("MALFORMED_ROW", "truncated checkpoint")
        buf = np.frombuffer(blob[offset:end], dtype="<f8").reshape(shape)
        params[entry["name"]] = buf.astype(np.float64)
        offset = end
    return TrainedModel(spec=_spec_from_dict(header["spec"]),
                        input_dim=header["input_dim"], params=params,
                        temperature=header["temperature"],
                        threshold=header["threshold"])


def save_checkpoint(model: TrainedModel, path) -> None:
    """Write the binary checkpoint and a training-history TSV sidecar."""
    with open(path, "wb") as fh:
        fh.write(checkpoint_bytes(model))
    with open(f"{path}.history.tsv", "w", encoding="utf-8") as fh:
        fh.write(history_tsv(model))


def load_checkpoint(path) -> TrainedModel:
    with open(path, "rb") as fh:
        return parse_checkpoint(fh.read())


def history_tsv(model: TrainedModel) -> str:
    lines = ["epoch\ttrain_loss\tval_loss\tval_mcc"]
    for row in model.history:
        lines.append(f"{row['epoch']}\t{row['train_loss']!r}"
                     f"\t{row['val_loss']!r}\t{row['val_mcc']!r}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Group Shapley attribution


@dataclass(frozen=True)
class AttributionReport:
    mode: str
    group_names: Tuple[str, ...]
    mean_abs: Mapping[str, float]
    signed_mean: Mapping[str, float]
    efficiency_residual: float
    baseline: str
    values: np.ndarray = field(repr=False)  # (instances, groups)
    standard_error: Optional[Mapping[str, float]] = None


def default_attribution_groups(embedding_dim: int,
                               max_lag: int = 5) -> Dict[str, np.ndarray]:
    """Index groups for the [A | B | contrast | concordance] pair tensor.

    Per-protein blocks follow the feature layout: embedding, then the
    z-scale descriptors (5 per lag), then the hydropathy descriptors.
    """
    z_len = 5 * max_lag
    per_protein = embedding_dim + z_len + max_lag
    emb = np.arange(embedding_dim)
    zacc = np.arange(embedding_dim, embedding_dim + z_len)
    eacc = np.arange(embedding_dim + z_len, per_protein)
    return {
        "a_emb": emb,
        "b_emb": per_protein + emb,
        "a_zacc": zacc,
        "b_zacc": per_protein + zacc,
        "a_eacc": eacc,
        "b_eacc": per_protein + eacc,
        "contrast": np.arange(2 * per_protein, 3 * per_protein),
        "concordance": np.arange(3 * per_protein, 4 * per_protein),
    }


def _check_partition(groups: Mapping[str, np.ndarray], width: int) -> None:
    combined = np.concatenate([np.asarray(v, dtype=np.int64)
                               for v in groups.values()])
    if not np.array_equal(np.sort(combined), np.arange(width)):
        raise PairforgeError("DIMENSION_MISMATCH",
                             "groups must partition the feature coordinates")


def _coalition_scores(model: TrainedModel, instances: np.ndarray,
                      baseline: np.ndarray, index_lists: Sequence[np.ndarray],
                      mask: int) -> np.ndarray:
    x = np.tile(baseline, (instances.shape[0], 1))
    for g, idx in enumerate(index_lists):
        if mask >> g & 1:
            x[:, idx] = instances[:, idx]
    return score_batch(model, x)


def group_attribution(model: TrainedModel, instances: np.ndarray,
                      groups: Optional[Mapping[str, np.ndarray]] = None,
                      mode: str = "exact",
                      baseline: Optional[np.ndarray] = None,
                      permutations: int = 256,
                      seed: int = 0) -> AttributionReport:
    """Shapley values over feature groups against a reference vector.

    The coalition value is the model probability with in-coalition groups
    taken from the instance and all other coordinates from the baseline
    (training mean when provided, zeros otherwise). Exact mode enumerates
    every coalition; sampled mode averages seeded permutations.
    """
    instances = np.atleast_2d(np.asarray(instances, np.float64))
    if instances.shape[0] == 0:
        raise PairforgeError("EMPTY_INSTANCES", "no instances to attribute")
    width = instances.shape[1]
    if width != model.pair_dim:
        raise PairforgeError("DIMENSION_MISMATCH",
                             f"expected width {model.pair_dim}, got {width}")
    if groups is None:
        per_protein = width // 4
        embedding_dim = per_protein - 30  # default descriptor layout, lag 5
        if embedding_dim <= 0:
            raise PairforgeError("DIMENSION_MISMATCH",
                                 "feature width too small for default groups; "
                                 "pass explicit groups")
        groups = default_attribution_groups(embedding_dim)
    _check_partition(groups, width)
    names = tuple(groups)
    index_lists = [np.asarray(groups[n], dtype=np.int64) for n in names]
    n_groups = len(names)

    if baseline is None:
        baseline = np.zeros(width)
        baseline_desc = "zeros"
    else:
        baseline = np.asarray(baseline, np.float64)
        baseline_desc = "training mean"

    n = instances.shape[0]
    if mode == "exact":
        if n_groups > 12:
            raise PairforgeError("TOO_MANY_GROUPS",
                                 f"{n_groups} groups exceed the exact limit of 12")
        values = {mask: _coalition_scores(model, instances, baseline,
                                          index_lists, mask)
                  for mask in range(1 << n_groups)}
        phi = np.zeros((n, n_groups))
        fact = [math.factorial(k) for k in range(n_groups + 1)]
        for g in range(n_groups):
            bit = 1 << g
            for mask in range(1 << n_groups):
                if mask & bit:
                    continue
                size = bin(mask).count("1")
                weight = fact[size] * fact[n_groups - size - 1] / fact[n_groups]
                phi[:, g] += weight * (values[mask | bit] - values[mask])
        residual = float(np.max(np.abs(
            phi.sum(axis=1) - (values[(1 << n_groups) - 1] - values[0]))))
        std_err = None
    elif mode == "sampled":
        rng = np.random.default_rng(derive_seed(seed, "shapley"))
        draws = np.zeros((permutations, n, n_groups))
        for m in range(permutations):
            order = rng.permutation(n_groups)
            mask = 0
            current = _coalition_scores(model, instances, baseline,
                                        index_lists, mask)
            for g in order:
                mask |= 1 << g
                nxt = _coalition_scores(model, instances, baseline,
                                        index_lists, mask)
                draws[m, :, g] = nxt - current
                current = nxt
        phi = draws.mean(axis=0)
        spread = draws.std(axis=0, ddof=1) / math.sqrt(permutations)
        std_err = {name: float(spread[:, g].mean())
                   for g, name in enumerate(names)}
        full = _coalition_scores(model, instances, baseline, index_lists,
                                 (1 << n_groups) - 1)
        empty = _coalition_scores(model, instances, baseline, index_lists, 0)
        residual = float(np.max(np.abs(phi.sum(axis=1) - (full - empty))))
    else:
        raise PairforgeError("BAD_SPEC", f"unknown attribution mode {mode!r}")

    mean_abs = {name: float(np.abs(phi[:, g]).mean())
                for g, name in enumerate(names)}
    signed = {name: float(phi[:, g].mean()) for g, name in enumerate(names)}
    return AttributionReport(mode=mode, group_names=names, mean_abs=mean_abs,
                             signed_mean=signed, efficiency_residual=residual,
                             baseline=baseline_desc, values=phi,
                             standard_error=std_err)
