"""Procedural grayscale benchmark for desk-scale experiments.

Generates 28x28 images of class-specific blob constellations with random
translation, per-blob amplitude jitter, and smooth background noise. The
images are deliberately rich in mid-gray pixels so that single-shot
Bernoulli binarization destroys information, which is the regime where
stochastic-presentation effects (accuracy vs T, adapted training) are
visible. Used by the test suite and demos when no MNIST-format dataset
is available; any IDX dataset can be substituted through sbnn.dataio.
"""

from __future__ import annotations

import numpy as np

from .dataio import Dataset


def _box_blur(images: np.ndarray) -> np.ndarray:
    """3x3 box blur over the trailing two axes (edge-padded)."""
    padded = np.pad(images, ((0, 0), (1, 1), (1, 1)), mode="edge")
    out = np.zeros_like(images)
    for dy in range(3):
        for dx in range(3):
            out += padded[:, dy : dy + images.shape[1], dx : dx + images.shape[2]]
    return out / 9.0


def _render(centers, sigmas, amps, side: int) -> np.ndarray:
    """Additive gaussian blobs: centers (n, k, 2), sigmas (n, k), amps (n, k)."""
    yy, xx = np.mgrid[0:side, 0:side].astype(np.float64)
    d2 = (yy[None, None] - centers[:, :, 0, None, None]) ** 2 + (
        xx[None, None] - centers[:, :, 1, None, None]
    ) ** 2
    blobs = amps[:, :, None, None] * np.exp(-d2 / (2 * sigmas[:, :, None, None] ** 2))
    return blobs.sum(axis=1)


def make_benchmark(
    n_train: int,
    n_test: int,
    n_classes: int = 10,
    side: int = 28,
    n_blobs: int = 3,
    seed: int = 1234,
) -> tuple[Dataset, Dataset]:
    """Deterministic (train, test) pair of blob-image datasets."""
    rng = np.random.default_rng(seed)
    proto_centers = rng.uniform(7, side - 7, size=(n_classes, n_blobs, 2))
    proto_sigmas = rng.uniform(2.4, 4.4, size=(n_classes, n_blobs))
    proto_amps = rng.uniform(0.9, 1.5, size=(n_classes, n_blobs))

    def sample(n: int) -> Dataset:
        labels = rng.integers(0, n_classes, size=n)
        images = np.empty((n, side * side))
        chunk = 512
        for start in range(0, n, chunk):
            idx = labels[start : start + chunk]
            m = idx.size
            shift = rng.integers(-3, 4, size=(m, 1, 2)).astype(np.float64)
            centers = proto_centers[idx] + shift
            sigmas = proto_sigmas[idx] * rng.uniform(0.9, 1.1, size=(m, n_blobs))
            amps = proto_amps[idx] * rng.uniform(0.75, 1.25, size=(m, n_blobs))
            img = _render(centers, sigmas, amps, side)
            coarse = rng.uniform(0, 0.12, size=(m, side // 4, side // 4))
            noise = _box_blur(np.kron(coarse, np.ones((4, 4))))
            img = np.clip(img + noise, 0.0, 1.0)
            images[start : start + m] = img.reshape(m, -1)
        return Dataset(images, labels)

    return sample(n_train), sample(n_test)
