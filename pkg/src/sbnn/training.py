"""BNN training: binarized forward pass, batch norm with fixed gamma=1 and
beta=0, softmax cross-entropy, straight-through backward pass, Adam updates
on real shadow weights with clipping to [-1, 1], and moving-average batch
statistics.

Three input regimes are supported. GRAYSCALE feeds the real image X in
[0, 1] to the first layer (the conventional setup). BLACK_WHITE feeds the
deterministic +/-1 thresholding of X. STOCHASTIC(T) replaces each image,
freshly every epoch, by the sum of T Bernoulli-sampled +/-1 presentations,
which matches the inference-time accumulation of first-layer
pre-activations over T samples.

The per-epoch accuracy log uses inference semantics (binarized weights,
running statistics, sign(z - mu) hidden activations, argmax(z - mu)
output), so an exported model reproduces the logged eval predictions
bit for bit under the deterministic input encodings (stochastic-mode
logs resample presentations and agree in distribution instead).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .bitcore import BitMatrix
from .encoder import BitSource, RngKind, sample_sign_batch
from .errors import (
    DimensionMismatch,
    EmptyBatch,
    InvalidConfig,
    InvalidLabel,
    InvalidPixel,
    NonFiniteGradient,
    NonFiniteWeight,
    TrainingDiverged,
)
from .model import BinaryLayer, BnnModel, FirstLayerReal, derive_seed


class InputMode(str, Enum):
    GRAYSCALE = "grayscale"
    STOCHASTIC = "stochastic"
    BLACK_WHITE = "bw"


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 20
    batch_size: int = 100
    alpha: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps_adam: float = 1e-8
    dropout: float = 0.2
    bn_momentum: float = 0.9
    eps_bn: float = 1e-5
    input_mode: InputMode = InputMode.GRAYSCALE
    t: int = 1
    bw_threshold: float = 0.5
    rng_kind: RngKind = RngKind.COUNTER64
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 0 or self.batch_size < 1:
            raise InvalidConfig("epochs must be >= 0 and batch_size >= 1")
        if not 0 <= self.dropout < 1:
            raise InvalidConfig(f"dropout {self.dropout} outside [0, 1)")
        if not 0 <= self.bn_momentum < 1:
            raise InvalidConfig(f"bn momentum {self.bn_momentum} outside [0, 1)")
        if self.eps_bn <= 0 or self.eps_adam <= 0 or self.alpha <= 0:
            raise InvalidConfig("alpha and epsilons must be positive")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise InvalidConfig("Adam betas must lie in [0, 1)")
        if self.t < 1:
            raise InvalidConfig(f"presentation count must be >= 1, got {self.t}")
        object.__setattr__(self, "input_mode", InputMode(self.input_mode))
        object.__setattr__(self, "rng_kind", RngKind(self.rng_kind))


@dataclass
class TrainableLayer:
    """Real shadow weights plus Adam moments and running batch statistics."""

    w_real: np.ndarray
    m: np.ndarray
    v: np.ndarray
    bn_mean: np.ndarray
    bn_std: np.ndarray

    @classmethod
    def initial(cls, n_out: int, n_in: int, rng: np.random.Generator):
        return cls(
            w_real=rng.uniform(-1.0, 1.0, size=(n_out, n_in)),
            m=np.zeros((n_out, n_in)),
            v=np.zeros((n_out, n_in)),
            bn_mean=np.zeros(n_out),
            bn_std=np.ones(n_out),
        )

    def copy(self) -> "TrainableLayer":
        return TrainableLayer(
            self.w_real.copy(),
            self.m.copy(),
            self.v.copy(),
            self.bn_mean.copy(),
            self.bn_std.copy(),
        )


def init_train_state(layer_sizes, seed: int = 0) -> list[TrainableLayer]:
    """Uniform [-1, 1] shadow weights for the size chain (d0, n1, ..., nL)."""
    sizes = tuple(int(s) for s in layer_sizes)
    if len(sizes) < 2:
        raise InvalidConfig("need at least an input and an output size")
    rng = np.random.default_rng(seed)
    return [
        TrainableLayer.initial(sizes[k + 1], sizes[k], rng)
        for k in range(len(sizes) - 1)
    ]


def binarize_weights(w_real: np.ndarray) -> BitMatrix:
    """sign(W_a) packed as bits, with sign(0) = +1."""
    w_real = np.asarray(w_real, dtype=np.float64)
    if not np.isfinite(w_real).all():
        raise NonFiniteWeight("weight matrix contains NaN or infinity")
    return BitMatrix.from_bit_rows(w_real >= 0)


def _sign_pm(w: np.ndarray) -> np.ndarray:
    return np.where(w >= 0, 1.0, -1.0)


def batchnorm_forward(z, bn_mean, bn_std, eps_bn: float, training: bool):
    """Normalize z by batch stats (training) or running stats (eval).

    Returns (z_hat, mu_batch, sigma_batch); the batch stats are None in
    eval mode. Normalization is (z - mu) / (sigma + eps_bn).
    """
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 2:
        raise DimensionMismatch("expected a (batch, neurons) matrix")
    if z.shape[0] == 0:
        raise EmptyBatch("batch-norm on an empty batch")
    if training:
        mu_b = z.mean(axis=0)
        sigma_b = z.std(axis=0)
        return (z - mu_b) / (sigma_b + eps_bn), mu_b, sigma_b
    return (z - bn_mean) / (bn_std + eps_bn), None, None


def batchnorm_backward(g, z_hat, sigma_b, eps_bn: float):
    """Exact gradient of the training-mode normalization (gamma=1, beta=0).

    d z_hat_i / d z_j couples the batch through the mean and the standard
    deviation; the 1/sigma factor of the sigma path is floored at eps_bn
    so degenerate (zero-variance) batches stay finite.
    """
    g = np.asarray(g, dtype=np.float64)
    if g.shape != z_hat.shape:
        raise DimensionMismatch(f"gradient {g.shape} vs cache {z_hat.shape}")
    denom = sigma_b + eps_bn
    sigma_safe = np.maximum(sigma_b, eps_bn)
    return (g - g.mean(axis=0)) / denom - z_hat * (g * z_hat).mean(axis=0) / sigma_safe


def ste_mask(g, z_hat):
    """Straight-through estimator: derivative of Clip(., -1, 1) in place of sign."""
    g = np.asarray(g, dtype=np.float64)
    z_hat = np.asarray(z_hat, dtype=np.float64)
    if g.shape != z_hat.shape:
        raise DimensionMismatch(f"gradient {g.shape} vs pre-activation {z_hat.shape}")
    return g * (np.abs(z_hat) <= 1.0)


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def softmax_xent_backward(a_out: np.ndarray, y_onehot: np.ndarray) -> np.ndarray:
    """Gradient of summed cross-entropy through softmax: a - y."""
    a_out = np.asarray(a_out, dtype=np.float64)
    y_onehot = np.asarray(y_onehot, dtype=np.float64)
    if a_out.shape != y_onehot.shape:
        raise DimensionMismatch(f"{a_out.shape} vs {y_onehot.shape}")
    one_hot_ok = ((y_onehot == 0) | (y_onehot == 1)).all() and (
        y_onehot.sum(axis=1) == 1
    ).all()
    if not one_hot_ok:
        raise InvalidLabel("targets are not one-hot")
    if not np.allclose(a_out.sum(axis=1), 1.0, atol=1e-6):
        raise InvalidConfig("rows of the softmax output do not sum to 1")
    return a_out - y_onehot


def adam_clip_update(
    layer: TrainableLayer,
    grad: np.ndarray,
    step: int,
    alpha: float = 1e-3,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps_adam: float = 1e-8,
) -> TrainableLayer:
    """One bias-corrected Adam step on the shadow weights, then clip to [-1, 1]."""
    grad = np.asarray(grad, dtype=np.float64)
    if not np.isfinite(grad).all():
        raise NonFiniteGradient("gradient contains NaN or infinity")
    if step < 1:
        raise InvalidConfig("Adam step index starts at 1")
    layer.m = beta1 * layer.m + (1 - beta1) * grad
    layer.v = beta2 * layer.v + (1 - beta2) * grad**2
    m_hat = layer.m / (1 - beta1**step)
    v_hat = layer.v / (1 - beta2**step)
    layer.w_real = np.clip(
        layer.w_real - alpha * m_hat / (np.sqrt(v_hat) + eps_adam), -1.0, 1.0
    )
    return layer


def _encode_inputs(
    images: np.ndarray, cfg: TrainConfig, source: BitSource | None
) -> np.ndarray:
    if cfg.input_mode is InputMode.GRAYSCALE:
        return images
    if cfg.input_mode is InputMode.BLACK_WHITE:
        return np.where(images > cfg.bw_threshold, 1.0, -1.0)
    acc = np.zeros(images.shape, dtype=np.float64)
    for _ in range(cfg.t):
        acc += sample_sign_batch(images, source)
    return acc


def graph_eval_predictions(
    state: list[TrainableLayer], inputs: np.ndarray
) -> np.ndarray:
    """Predictions of the training graph in inference semantics.

    Binarized weights and running means as thresholds: hidden layers fire
    on z >= mu, the output layer takes argmax(z - mu). Equivalent to the
    batch-norm eval pass followed by sign/argmax, since the positive
    sigma scaling changes neither signs nor the argmax winner per neuron
    threshold comparison.
    """
    a = np.asarray(inputs, dtype=np.float64)
    for layer in state[:-1]:
        z = a @ _sign_pm(layer.w_real).T
        a = np.where(z >= layer.bn_mean, 1.0, -1.0)
    z = a @ _sign_pm(state[-1].w_real).T
    return np.argmax(z - state[-1].bn_mean, axis=1).astype(np.int64)


def export_model(state: list[TrainableLayer], cfg: TrainConfig) -> BnnModel:
    """Freeze shadow weights and running stats into an inference model.

    The first-layer threshold is stored in the [0, 1]-input domain. The
    z-statistics seen during training live in the input domain that the
    training mode used, so they are mapped back: for a +/-1 input domain
    (BLACK_WHITE) mu_x = (mu_z + sum w) / 2, and for a sum of t
    presentations (STOCHASTIC) mu_x = (mu_z / t + sum w) / 2.
    """
    first_w = binarize_weights(state[0].w_real)
    mu_z = state[0].bn_mean
    if cfg.input_mode is InputMode.GRAYSCALE:
        mu_x = mu_z.copy()
    elif cfg.input_mode is InputMode.BLACK_WHITE:
        mu_x = (mu_z + first_w.row_sign_sums()) / 2.0
    else:
        mu_x = (mu_z / cfg.t + first_w.row_sign_sums()) / 2.0
    first = FirstLayerReal(first_w, mu_x)
    layers = [
        BinaryLayer(binarize_weights(l.w_real), l.bn_mean.copy()) for l in state[1:]
    ]
    meta = {"input_mode": cfg.input_mode.value, "t": cfg.t}
    return BnnModel(first, layers, meta)


def _one_hot(labels: np.ndarray, n_classes: int) -> np.ndarray:
    out = np.zeros((labels.size, n_classes))
    out[np.arange(labels.size), labels] = 1.0
    return out


def fit(
    model_init: list[TrainableLayer],
    dataset,
    cfg: TrainConfig,
    test=None,
):
    """Mini-batch training of the whole stack; returns (final state, log).

    `dataset` and optional `test` provide .images (N, D) in [0, 1] and
    .labels (N,). The log carries one dict per epoch with keys epoch,
    loss, train_acc, test_acc (test_acc is NaN without a test set).
    """
    images = np.asarray(dataset.images, dtype=np.float64)
    labels = np.asarray(dataset.labels, dtype=np.int64)
    if images.ndim != 2 or images.shape[0] != labels.size:
        raise DimensionMismatch("dataset images/labels shapes do not chain")
    if images.size and (images.min() < -1e-6 or images.max() > 1 + 1e-6):
        raise InvalidPixel("training images outside [0,1]")
    images = np.clip(images, 0.0, 1.0)

    state = [l.copy() for l in model_init]
    if state[0].w_real.shape[1] != images.shape[1]:
        raise DimensionMismatch(
            f"model expects {state[0].w_real.shape[1]} inputs, got {images.shape[1]}"
        )
    n_classes = state[-1].w_real.shape[0]
    y_full = _one_hot(labels, n_classes)

    rng = np.random.default_rng(cfg.seed)
    enc_source = (
        BitSource(cfg.rng_kind, derive_seed(cfg.seed, 0xE17C0DE), images.shape[1])
        if cfg.input_mode is InputMode.STOCHASTIC
        else None
    )
    eval_source = (
        BitSource(cfg.rng_kind, derive_seed(cfg.seed, 0xE7A1), images.shape[1])
        if cfg.input_mode is InputMode.STOCHASTIC
        else None
    )

    log: list[dict] = []
    step = 0
    n = images.shape[0]
    depth = len(state)

    for epoch in range(cfg.epochs):
        encoded = _encode_inputs(images, cfg, enc_source)
        order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            a = encoded[idx]
            y = y_full[idx]
            b = idx.size

            # Forward: cache per layer (input, z_hat, sigma_b, dropout mask).
            caches = []
            for k, layer in enumerate(state):
                w_pm = _sign_pm(layer.w_real)
                z = a @ w_pm.T
                z_hat, mu_b, sigma_b = batchnorm_forward(
                    z, layer.bn_mean, layer.bn_std, cfg.eps_bn, training=True
                )
                layer.bn_mean = cfg.bn_momentum * layer.bn_mean + (1 - cfg.bn_momentum) * mu_b
                layer.bn_std = np.maximum(
                    cfg.bn_momentum * layer.bn_std + (1 - cfg.bn_momentum) * sigma_b,
                    cfg.eps_bn,
                )
                if k < depth - 1:
                    out = np.where(z_hat >= 0, 1.0, -1.0)
                    if cfg.dropout > 0:
                        mask = (rng.random(out.shape) >= cfg.dropout) / (1 - cfg.dropout)
                        out = out * mask
                    else:
                        mask = None
                    caches.append((a, w_pm, z_hat, sigma_b, mask))
                    a = out
                else:
                    probs = softmax(z_hat)
                    caches.append((a, w_pm, z_hat, sigma_b, None))

            loss = -np.mean(
                np.log(np.clip(probs[np.arange(b), labels[idx]], 1e-12, None))
            )
            if not np.isfinite(loss):
                raise TrainingDiverged(epoch)
            epoch_loss += loss * b

            # Backward.
            g_zhat = softmax_xent_backward(probs, y) / b
            grads = [None] * depth
            for k in range(depth - 1, -1, -1):
                a_in, w_pm, z_hat, sigma_b, mask = caches[k]
                g_z = batchnorm_backward(g_zhat, z_hat, sigma_b, cfg.eps_bn)
                grads[k] = g_z.T @ a_in
                if k > 0:
                    g_a = g_z @ w_pm
                    prev_mask = caches[k - 1][4]
                    if prev_mask is not None:
                        g_a = g_a * prev_mask
                    g_zhat = ste_mask(g_a, caches[k - 1][2])

            step += 1
            try:
                for layer, grad in zip(state, grads):
                    adam_clip_update(
                        layer, grad, step, cfg.alpha, cfg.beta1, cfg.beta2, cfg.eps_adam
                    )
            except NonFiniteGradient as exc:
                # NaNs can pass the sign() activation with a finite loss but
                # still poison the backward pass; that is divergence too.
                raise TrainingDiverged(epoch, str(exc)) from exc

        train_acc = float(
            np.mean(
                graph_eval_predictions(state, _encode_inputs(images, cfg, eval_source))
                == labels
            )
        )
        if test is not None:
            test_images = np.clip(np.asarray(test.images, dtype=np.float64), 0, 1)
            test_acc = float(
                np.mean(
                    graph_eval_predictions(
                        state, _encode_inputs(test_images, cfg, eval_source)
                    )
                    == np.asarray(test.labels)
                )
            )
        else:
            test_acc = float("nan")
        log.append(
            {
                "epoch": epoch,
                "loss": epoch_loss / n,
                "train_acc": train_acc,
                "test_acc": test_acc,
            }
        )

    return state, log


def train(
    model_init: list[TrainableLayer],
    dataset,
    cfg: TrainConfig,
    test=None,
):
    """fit() followed by export_model(); returns (BnnModel, log)."""
    state, log = fit(model_init, dataset, cfg, test)
    return export_model(state, cfg), log
