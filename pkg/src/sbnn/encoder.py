"""Stochastic binarization of real inputs in [0, 1].

A pixel value p becomes a random bit that is 1 with probability
round(p * 256) / 256: the sampler draws one byte u per pixel and fires
iff u < round(p * 256). The 8-bit resolution matches the fixed-point
precision assumed for the non-binary first layer.

Three byte sources are available:

* COUNTER64 - splittable counter-based generator (splitmix64 finalizer
  over (seed, presentation, pixel)); default for experiments, fully
  reproducible and order-independent.
* LFSR8     - one free-running 8-bit maximal-length LFSR per pixel
  (polynomial x^8 + x^6 + x^5 + x^4 + 1), seeded per pixel from
  (seed, pixel). Mirrors the hardware random generator that the cost
  model prices; its 255-byte period makes long streams periodic, so it
  is exempt from the independence checks.
* OS_ENTROPY - bytes from the operating system; not reproducible.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .bitcore import BitVector, _n_words, _pack_bits
from .errors import DegenerateLfsrState, InvalidConfig, InvalidPixel

PIXEL_TOLERANCE = 1e-6

# x^8 + x^6 + x^5 + x^4 + 1 -> a[n+8] = a[n+6] ^ a[n+5] ^ a[n+4] ^ a[n]
# Register bit i holds a[n+i]; feedback taps are bits {6, 5, 4, 0}.
LFSR8_FEEDBACK_MASK = 0x71
LFSR8_PERIOD = 255

_U64 = np.uint64
_SPLITMIX_GAMMA = np.uint64(0x9E3779B97F4A7C15)


class RngKind(str, Enum):
    LFSR8 = "lfsr8"
    COUNTER64 = "counter64"
    OS_ENTROPY = "os"


@dataclass(frozen=True)
class StochasticConfig:
    """How stochastic inference presents an input.

    t: number of Bernoulli presentations summed at the accumulation layer.
    accumulation_layer: 1-based layer index at which presentation
        pre-activations are summed (validated against model depth at use).
    """

    t: int = 1
    rng_kind: RngKind = RngKind.COUNTER64
    seed: int = 0
    accumulation_layer: int = 1

    def __post_init__(self):
        if self.t < 1:
            raise InvalidConfig(f"presentation count must be >= 1, got {self.t}")
        if self.accumulation_layer < 1:
            raise InvalidConfig(
                f"accumulation layer must be >= 1, got {self.accumulation_layer}"
            )
        object.__setattr__(self, "rng_kind", RngKind(self.rng_kind))
        object.__setattr__(self, "seed", int(self.seed) & 0xFFFFFFFFFFFFFFFF)


@dataclass(frozen=True)
class Lfsr8State:
    """8-bit Fibonacci LFSR register; all-zero is the absorbing state."""

    state: int
    taps: int = LFSR8_FEEDBACK_MASK

    def __post_init__(self):
        if not 0 <= self.state <= 0xFF:
            raise InvalidConfig(f"LFSR register must fit 8 bits, got {self.state}")


def lfsr8_step(state: Lfsr8State) -> tuple[int, Lfsr8State]:
    """Advance one bit; returns (emitted bit, new state)."""
    s = state.state
    if s == 0:
        raise DegenerateLfsrState("all-zero LFSR register")
    out = s & 1
    fb = (s & state.taps).bit_count() & 1
    return out, Lfsr8State((s >> 1) | (fb << 7), state.taps)


def lfsr8_next(state: Lfsr8State) -> tuple[int, Lfsr8State]:
    """Advance 8 bits; returns (byte of emitted bits LSB-first, new state)."""
    byte = 0
    for k in range(8):
        bit, state = lfsr8_step(state)
        byte |= bit << k
    return byte, state


def _mix64(x) -> np.ndarray:
    """splitmix64 finalizer on uint64 arrays (wrapping arithmetic)."""
    with np.errstate(over="ignore"):
        x = np.asarray(x, dtype=np.uint64) + _SPLITMIX_GAMMA
        x = (x ^ (x >> _U64(30))) * _U64(0xBF58476D1CE4E5B9)
        x = (x ^ (x >> _U64(27))) * _U64(0x94D049BB133111EB)
        return x ^ (x >> _U64(31))


def _counter_bytes(seed: int, t: int, n_pixels: int) -> np.ndarray:
    """One byte per pixel for presentation t, pure in (seed, t, pixel)."""
    with np.errstate(over="ignore"):
        base = _mix64(_U64(seed) + _SPLITMIX_GAMMA * np.asarray(t, dtype=np.uint64))
        j = np.arange(n_pixels, dtype=np.uint64)
        return (_mix64(base + _SPLITMIX_GAMMA * j) & _U64(0xFF)).astype(np.uint8)


def _lfsr_seed_states(seed: int, n_pixels: int) -> np.ndarray:
    """Nonzero initial registers for a bank of per-pixel LFSRs."""
    with np.errstate(over="ignore"):
        j = np.arange(n_pixels, dtype=np.uint64)
        h = _mix64(_mix64(_U64(seed)) + _SPLITMIX_GAMMA * j)
        return (1 + (h % _U64(255))).astype(np.uint16)


def _lfsr_bytes_vec(states: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Advance a bank of registers 8 steps; returns (bytes, new states)."""
    s = states.astype(np.uint16, copy=True)
    out = np.zeros(s.shape, dtype=np.uint8)
    for k in range(8):
        bit = (s & 1).astype(np.uint8)
        fb = np.bitwise_count(s & LFSR8_FEEDBACK_MASK) & 1
        s = (s >> 1) | (fb.astype(np.uint16) << 7)
        out |= bit << k
    return out, s


class BitSource:
    """Stateful per-presentation byte source over a fixed pixel count.

    Call k of presentation_bytes() returns the byte vector for
    presentation index k (starting at 0), so replaying a source from the
    same (kind, seed) reproduces the same stream.
    """

    def __init__(self, kind: RngKind, seed: int, n_pixels: int):
        self.kind = RngKind(kind)
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self.n_pixels = n_pixels
        self.t = 0
        self._lfsr_states = (
            _lfsr_seed_states(self.seed, n_pixels)
            if self.kind is RngKind.LFSR8
            else None
        )

    def presentation_bytes(self) -> np.ndarray:
        t = self.t
        self.t += 1
        if self.kind is RngKind.COUNTER64:
            return _counter_bytes(self.seed, t, self.n_pixels)
        if self.kind is RngKind.LFSR8:
            out, self._lfsr_states = _lfsr_bytes_vec(self._lfsr_states)
            return out
        return np.frombuffer(os.urandom(self.n_pixels), dtype=np.uint8).copy()


def make_bit_source(cfg: StochasticConfig, n_pixels: int) -> BitSource:
    return BitSource(cfg.rng_kind, cfg.seed, n_pixels)


def _pixel_thresholds(x: np.ndarray) -> np.ndarray:
    """Validate/clamp pixels and return the byte thresholds round(x*256)."""
    x = np.asarray(x, dtype=np.float64)
    if x.size and (np.min(x) < -PIXEL_TOLERANCE or np.max(x) > 1 + PIXEL_TOLERANCE):
        worst = x[np.argmax(np.abs(x - 0.5))]
        raise InvalidPixel(f"pixel {worst} outside [0,1] beyond tolerance")
    x = np.clip(x, 0.0, 1.0)
    return np.rint(x * 256.0).astype(np.int64)


def sample_binarized(x, rng: BitSource) -> BitVector:
    """One Bernoulli presentation: bit j fires with probability ~x[j]."""
    x = np.asarray(x, dtype=np.float64).ravel()
    if x.size != rng.n_pixels:
        raise InvalidConfig(f"source built for {rng.n_pixels} pixels, got {x.size}")
    thr = _pixel_thresholds(x)
    u = rng.presentation_bytes()
    return BitVector.from_bits(u.astype(np.int64) < thr)


def sample_presentations(x, t: int, rng: BitSource) -> list[BitVector]:
    """t independent presentations of the same input."""
    if t < 1:
        raise InvalidConfig(f"presentation count must be >= 1, got {t}")
    return [sample_binarized(x, rng) for _ in range(t)]


def presentation_word_stack(x, cfg: StochasticConfig) -> np.ndarray:
    """Packed words of presentations 0..t-1, shape (t, n_words).

    Pure in (cfg.seed, cfg.rng_kind, x); the row for presentation k equals
    sample_binarized's k-th draw from a fresh source.
    """
    x = np.asarray(x, dtype=np.float64).ravel()
    thr = _pixel_thresholds(x)
    n = x.size
    src = make_bit_source(cfg, n)
    out = np.zeros((cfg.t, _n_words(n)), dtype=np.uint64)
    for k in range(cfg.t):
        u = src.presentation_bytes()
        out[k] = _pack_bits(u.astype(np.int64) < thr)
    return out


def sample_sign_batch(images: np.ndarray, source: BitSource) -> np.ndarray:
    """One presentation per row of `images`, returned as a +/-1 int8 matrix.

    Each row consumes one presentation index from the source, exactly as a
    sample_binarized call per image would.
    """
    images = np.asarray(images, dtype=np.float64)
    n, d = images.shape
    if d != source.n_pixels:
        raise InvalidConfig(f"source built for {source.n_pixels} pixels, got {d}")
    thr = _pixel_thresholds(images)
    if source.kind is RngKind.COUNTER64:
        t0 = source.t
        source.t += n
        with np.errstate(over="ignore"):
            tt = np.arange(t0, t0 + n, dtype=np.uint64)
            base = _mix64(_U64(source.seed) + _SPLITMIX_GAMMA * tt)
            j = np.arange(d, dtype=np.uint64)
            u = (
                _mix64(base[:, None] + _SPLITMIX_GAMMA * j[None, :]) & _U64(0xFF)
            ).astype(np.uint8)
    elif source.kind is RngKind.OS_ENTROPY:
        source.t += n
        u = np.frombuffer(os.urandom(n * d), dtype=np.uint8).reshape(n, d).copy()
    else:
        u = np.stack([source.presentation_bytes() for _ in range(n)])
    return np.where(u.astype(np.int64) < thr, 1, -1).astype(np.int8)
