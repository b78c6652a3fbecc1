"""Shared fixtures: desk-scale datasets and a cache of trained models.

Desk-scale experiments run on Fashion-MNIST (or MNIST) IDX files when
SBNN_DATA_DIR points at them; a procedurally generated grayscale
benchmark with the same geometry stands in when no dataset is available
in the environment.
"""

import os
from pathlib import Path

import numpy as np
import pytest

from sbnn.dataio import Dataset, load_idx
from sbnn.synth import make_benchmark
from sbnn.training import InputMode, TrainConfig, export_model, fit, init_train_state

DESK_TRAIN = 10_000
DESK_TEST = 2_000
DESK_HIDDEN = (128, 128)
DESK_EPOCHS = 20

_IDX_NAMES = {
    "train_images": ("train-images-idx3-ubyte", "train-images-idx3-ubyte.gz"),
    "train_labels": ("train-labels-idx1-ubyte", "train-labels-idx1-ubyte.gz"),
    "test_images": ("t10k-images-idx3-ubyte", "t10k-images-idx3-ubyte.gz"),
    "test_labels": ("t10k-labels-idx1-ubyte", "t10k-labels-idx1-ubyte.gz"),
}


def load_real_desk_data():
    """(train, test) Datasets from SBNN_DATA_DIR, or None if unavailable."""
    root = os.environ.get("SBNN_DATA_DIR")
    if not root:
        return None
    root = Path(root)
    paths = {}
    for key, candidates in _IDX_NAMES.items():
        hit = next((root / c for c in candidates if (root / c).exists()), None)
        if hit is None:
            return None
        paths[key] = hit
    train = load_idx(paths["train_images"], paths["train_labels"])
    test = load_idx(paths["test_images"], paths["test_labels"])
    return train.subset(DESK_TRAIN), test.subset(DESK_TEST)


@pytest.fixture(scope="session")
def desk_sources():
    """Mapping of benchmark name -> (train, test); synthetic always present."""
    sources = {"synthetic": make_benchmark(DESK_TRAIN, DESK_TEST, seed=7)}
    real = load_real_desk_data()
    if real is not None:
        sources["mnist-idx"] = real
    return sources


@pytest.fixture(scope="session")
def desk_model_cache(desk_sources):
    """Lazily trained desk-scale models keyed by (source, mode, t, seed)."""
    cache = {}

    def get(source: str, mode: InputMode, t: int, seed: int):
        key = (source, mode, t, seed)
        if key not in cache:
            train_ds, test_ds = desk_sources[source]
            cfg = TrainConfig(
                epochs=DESK_EPOCHS,
                batch_size=100,
                seed=seed,
                input_mode=mode,
                t=t,
            )
            sizes = [train_ds.images.shape[1], *DESK_HIDDEN, train_ds.n_classes]
            state = init_train_state(sizes, seed=seed)
            state, log = fit(state, train_ds, cfg, test=test_ds)
            cache[key] = (export_model(state, cfg), log)
        return cache[key]

    return get


@pytest.fixture()
def small_data():
    """Quick 1200/400 split of the synthetic benchmark for mechanics tests."""
    return make_benchmark(1200, 400, seed=31)


def random_bnn(rng: np.random.Generator, sizes, mu_scale=4.0):
    """Random BnnModel over the given layer-size chain."""
    from sbnn.bitcore import BitMatrix
    from sbnn.model import BinaryLayer, BnnModel, FirstLayerReal

    first = FirstLayerReal(
        BitMatrix.from_sign_matrix(rng.choice([-1, 1], (sizes[1], sizes[0]))),
        rng.normal(0, mu_scale, sizes[1]),
    )
    layers = [
        BinaryLayer(
            BitMatrix.from_sign_matrix(rng.choice([-1, 1], (sizes[k + 1], sizes[k]))),
            rng.normal(0, mu_scale, sizes[k + 1]),
        )
        for k in range(1, len(sizes) - 1)
    ]
    return BnnModel(first, layers)
