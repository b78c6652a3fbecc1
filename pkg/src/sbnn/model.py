"""BNN model representation and the two inference procedures.

Conventional inference keeps the first layer non-binary: activations are
sign(W1 . X - mu1) with X real in [0, 1]. Stochastic inference replaces X
by T Bernoulli presentations and accumulates popcount pre-activations at a
chosen layer k*; layers before k* run once per presentation, layers after
it run once on the binarized accumulated result.

Threshold domains. Trained thresholds are kept as reals. Hidden layers
operate on +/-1 activations, so a threshold mu on z = w . a folds exactly
to the popcount comparison p >= ceil((mu + n) / 2). The first layer is
trained on X in [0, 1] but sampled presentations are +/-1 bits whose
expectation is 2X - 1, so the stochastic path rescales the first-layer
threshold to mu_pm = 2 mu - sum_j(w_j), which makes the T -> infinity
stochastic decision agree exactly with the conventional one. Accumulated
comparisons sum(2p - n) >= T * mu are evaluated exactly (rational
comparison at the float boundary), never through drifting float products.

sign(0) = +1 everywhere; argmax ties break to the lowest class index.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .bitcore import (
    BitMatrix,
    BitVector,
    _n_words,
    _pack_bits,
    binary_gemm_popcount,
    binary_gemv,
)
from .encoder import StochasticConfig, presentation_word_stack, _mix64, _SPLITMIX_GAMMA
from .errors import (
    DegenerateBatchNorm,
    DimensionMismatch,
    InvalidConfig,
    InvalidPixel,
)

PIXEL_TOLERANCE = 1e-6


def _fold_fractions(mus: list[Fraction], fan_in: int) -> tuple[np.ndarray, int]:
    """Exact popcount-domain thresholds ceil((mu + n)/2), clamped to [0, n]."""
    theta = np.empty(len(mus), dtype=np.int64)
    clamped = 0
    for i, mu in enumerate(mus):
        t = -((-(mu + fan_in)) // 2)  # ceil for Fractions
        t = int(t)
        if t < 0:
            t, clamped = 0, clamped + 1
        elif t > fan_in:
            t, clamped = fan_in, clamped + 1
        theta[i] = t
    return theta, clamped


def fold_thresholds(mu, sigma, fan_in: int) -> np.ndarray:
    """Fold batch-norm thresholds into integer popcount comparisons.

    With sigma > 0, sign((z - mu)/sigma) == sign(z - mu), and with
    z = 2*popcount - n the activation fires iff popcount >= ceil((mu+n)/2).
    Out-of-range thresholds are clamped to [0, fan_in] with a warning.
    """
    mu = np.asarray(mu, dtype=np.float64)
    sigma = np.asarray(sigma, dtype=np.float64)
    if sigma.size and np.min(sigma) <= 0:
        raise DegenerateBatchNorm(f"sigma must be positive, min={np.min(sigma)}")
    theta, clamped = _fold_fractions([Fraction(float(m)) for m in mu], fan_in)
    if clamped:
        warnings.warn(
            f"{clamped} folded thresholds fell outside [0, {fan_in}] and were clamped",
            stacklevel=2,
        )
    return theta


def ge_scaled_threshold(lhs: np.ndarray, t: int, mu: np.ndarray) -> np.ndarray:
    """Exact elementwise test lhs >= t * mu for integer lhs and float mu.

    Fast float compare away from the boundary; entries within rounding
    distance are re-decided with exact rational arithmetic.
    """
    lhs = np.asarray(lhs, dtype=np.int64)
    mu = np.asarray(mu, dtype=np.float64)
    rhs = t * mu
    approx = lhs - rhs
    out = approx >= 0
    tol = 1e-9 * (1.0 + np.abs(lhs) + np.abs(rhs))
    near = np.abs(approx) <= tol
    if near.any():
        for i in np.flatnonzero(near):
            out[i] = Fraction(int(lhs[i]), 1) >= t * Fraction(float(mu[i]))
    return out


def _check_pixels(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64).ravel()
    if x.size and (np.min(x) < -PIXEL_TOLERANCE or np.max(x) > 1 + PIXEL_TOLERANCE):
        raise InvalidPixel("input pixels outside [0,1] beyond tolerance")
    return np.clip(x, 0.0, 1.0)


@dataclass
class BinaryLayer:
    """Fully-binary layer: packed weights plus real thresholds on z = w . a."""

    weights: BitMatrix
    mu: np.ndarray

    def __post_init__(self):
        self.mu = np.asarray(self.mu, dtype=np.float64)
        if self.mu.shape != (self.weights.rows,):
            raise DimensionMismatch(
                f"{self.mu.shape} thresholds for {self.weights.rows} neurons"
            )
        self._theta = None

    @property
    def rows(self) -> int:
        return self.weights.rows

    @property
    def cols(self) -> int:
        return self.weights.cols

    @property
    def theta(self) -> np.ndarray:
        """Folded integer thresholds (cached)."""
        if self._theta is None:
            theta, clamped = _fold_fractions(
                [Fraction(float(m)) for m in self.mu], self.cols
            )
            if clamped:
                warnings.warn(f"{clamped} thresholds clamped to [0, {self.cols}]")
            self._theta = theta
        return self._theta


@dataclass
class FirstLayerReal:
    """First layer with binary weights but real-valued input in [0, 1]."""

    weights: BitMatrix
    mu: np.ndarray
    input_bits: int = 8

    def __post_init__(self):
        self.mu = np.asarray(self.mu, dtype=np.float64)
        if self.mu.shape != (self.weights.rows,):
            raise DimensionMismatch(
                f"{self.mu.shape} thresholds for {self.weights.rows} neurons"
            )
        self._signs = None
        self._theta_pm = None

    @property
    def rows(self) -> int:
        return self.weights.rows

    @property
    def cols(self) -> int:
        return self.weights.cols

    @property
    def sign_matrix(self) -> np.ndarray:
        """float64 +/-1 weight matrix for the real-arithmetic path."""
        if self._signs is None:
            self._signs = self.weights.to_signs().astype(np.float64)
        return self._signs

    @property
    def mu_pm(self) -> np.ndarray:
        """Thresholds rescaled to the +/-1 input domain: 2*mu - sum(w)."""
        return 2.0 * self.mu - self.weights.row_sign_sums()

    @property
    def theta_pm(self) -> np.ndarray:
        """Popcount-domain thresholds for single-presentation binary input."""
        if self._theta_pm is None:
            fracs = [
                2 * Fraction(float(m)) - int(s)
                for m, s in zip(self.mu, self.weights.row_sign_sums())
            ]
            self._theta_pm, _ = _fold_fractions(fracs, self.cols)
        return self._theta_pm


@dataclass
class BnnModel:
    """First layer plus the chain of binary layers; the last layer is argmax."""

    first: FirstLayerReal
    layers: list[BinaryLayer] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        prev = self.first.rows
        for i, layer in enumerate(self.layers):
            if layer.cols != prev:
                raise DimensionMismatch(
                    f"layer {i + 2} expects {layer.cols} inputs, got {prev}"
                )
            prev = layer.rows

    @property
    def depth(self) -> int:
        return 1 + len(self.layers)

    @property
    def layer_sizes(self) -> tuple[int, ...]:
        return (self.first.cols, self.first.rows) + tuple(l.rows for l in self.layers)

    @property
    def n_classes(self) -> int:
        return self.layer_sizes[-1]


def layer_forward_binary(layer: BinaryLayer, a: BitVector) -> BitVector:
    """Binary layer activation: bit i fires iff popcount_i >= theta_i."""
    p = binary_gemv(layer.weights, a)
    return BitVector.from_bits(p >= layer.theta)


def first_layer_forward_real(layer: FirstLayerReal, x) -> BitVector:
    """Eq-style first layer: bit i fires iff sum_j w_ij x_j >= mu_i."""
    x = _check_pixels(x)
    if x.size != layer.cols:
        raise DimensionMismatch(f"expected {layer.cols} pixels, got {x.size}")
    z = layer.sign_matrix @ x
    return BitVector.from_bits(z >= layer.mu)


def _output_scores_binary(layer: BinaryLayer, a: BitVector) -> np.ndarray:
    p = binary_gemv(layer.weights, a)
    return (2 * p - layer.cols) - layer.mu


def infer_conventional(model: BnnModel, x) -> int:
    """Alg-1 style inference: real first layer, binary interior, argmax output."""
    if model.depth == 1:
        x = _check_pixels(x)
        if x.size != model.first.cols:
            raise DimensionMismatch(f"expected {model.first.cols} pixels, got {x.size}")
        scores = model.first.sign_matrix @ x - model.first.mu
        return int(np.argmax(scores))
    a = first_layer_forward_real(model.first, x)
    for layer in model.layers[:-1]:
        a = layer_forward_binary(layer, a)
    return int(np.argmax(_output_scores_binary(model.layers[-1], a)))


def _pack_rows(bits: np.ndarray) -> np.ndarray:
    """(t, n) bool/0-1 matrix -> (t, n_words) packed uint64."""
    t, n = bits.shape
    out = np.zeros((t, _n_words(n)), dtype=np.uint64)
    for i in range(t):
        out[i] = _pack_bits(bits[i])
    return out


def stochastic_forward(model: BnnModel, pres_words: np.ndarray, k_star: int) -> int:
    """Class decision from pre-sampled presentations (packed word rows).

    Presentations run through layers 1..k*-1 individually; popcounts of
    layer k* are summed across presentations and thresholded against
    T * mu; the remaining layers run once.
    """
    t = pres_words.shape[0]
    depth = model.depth
    if not 1 <= k_star <= depth:
        raise InvalidConfig(f"accumulation layer {k_star} outside [1, {depth}]")
    seq = [model.first] + list(model.layers)

    words = pres_words
    cols = model.first.cols
    for k in range(1, k_star):
        layer = seq[k - 1]
        p = binary_gemm_popcount(layer.weights, words, cols)
        theta = layer.theta_pm if k == 1 else layer.theta
        bits = p >= theta
        words = _pack_rows(bits)
        cols = layer.rows

    acc_layer = seq[k_star - 1]
    p_sum = binary_gemm_popcount(acc_layer.weights, words, cols).sum(axis=0)
    mu = acc_layer.mu_pm if k_star == 1 else acc_layer.mu
    n = acc_layer.cols

    if k_star == depth:
        scores = (2 * p_sum - t * n) - t * mu
        return int(np.argmax(scores))

    bits = ge_scaled_threshold(2 * p_sum - t * n, t, mu)
    a = BitVector.from_bits(bits)
    for layer in seq[k_star : depth - 1]:
        a = layer_forward_binary(layer, a)
    return int(np.argmax(_output_scores_binary(seq[depth - 1], a)))


def infer_stochastic(model: BnnModel, x, cfg: StochasticConfig) -> int:
    """Stochastic-computing inference. Deterministic in (model, x, cfg)."""
    if not 1 <= cfg.accumulation_layer <= model.depth:
        raise InvalidConfig(
            f"accumulation layer {cfg.accumulation_layer} outside [1, {model.depth}]"
        )
    x = _check_pixels(x)
    if x.size != model.first.cols:
        raise DimensionMismatch(f"expected {model.first.cols} pixels, got {x.size}")
    words = presentation_word_stack(x, cfg)
    return stochastic_forward(model, words, cfg.accumulation_layer)


def derive_seed(seed: int, index: int) -> int:
    """Decorrelated per-item seed for batch evaluations and sweeps."""
    with np.errstate(over="ignore"):
        h = _mix64(np.uint64(seed) + _SPLITMIX_GAMMA * np.uint64(index + 1))
    return int(h)


def predict_conventional_batch(model: BnnModel, images: np.ndarray) -> np.ndarray:
    """Vectorized conventional inference over rows of `images`."""
    images = np.asarray(images, dtype=np.float64)
    z = images @ model.first.sign_matrix.T
    if model.depth == 1:
        return np.argmax(z - model.first.mu, axis=1).astype(np.int64)
    a = np.where(z >= model.first.mu, 1.0, -1.0)
    for layer in model.layers[:-1]:
        z = a @ layer.weights.to_signs().astype(np.float64).T
        a = np.where(z >= layer.mu, 1.0, -1.0)
    out = model.layers[-1]
    z = a @ out.weights.to_signs().astype(np.float64).T
    return np.argmax(z - out.mu, axis=1).astype(np.int64)


def predict_stochastic_batch(
    model: BnnModel, images: np.ndarray, cfg: StochasticConfig
) -> np.ndarray:
    """Stochastic inference over rows of `images`, one derived seed per row."""
    images = np.asarray(images, dtype=np.float64)
    out = np.empty(images.shape[0], dtype=np.int64)
    for i in range(images.shape[0]):
        cfg_i = StochasticConfig(
            t=cfg.t,
            rng_kind=cfg.rng_kind,
            seed=derive_seed(cfg.seed, i),
            accumulation_layer=cfg.accumulation_layer,
        )
        out[i] = infer_stochastic(model, images[i], cfg_i)
    return out
