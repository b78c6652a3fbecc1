"""Dataset ingestion (IDX files, optionally gzipped) and model serialization.

The model container ("SBNN" magic) is platform-independent: packed weight
bits are stored LSB-first in little-endian 64-bit words, thresholds as
little-endian IEEE float64, and a CRC32 over everything that precedes it
closes the file. IDX headers are big-endian per the de-facto standard.
"""

from __future__ import annotations

import gzip
import struct
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .bitcore import BitMatrix, _n_words
from .errors import (
    ChecksumError,
    FormatError,
    LabelMismatch,
    TruncatedError,
)
from .model import BinaryLayer, BnnModel, FirstLayerReal

IDX_IMAGE_MAGIC = 0x00000803
IDX_LABEL_MAGIC = 0x00000801

MODEL_MAGIC = b"SBNN"
MODEL_VERSION = 1

_MODE_CODES = {"grayscale": 0, "stochastic": 1, "bw": 2}
_MODE_NAMES = {v: k for k, v in _MODE_CODES.items()}


@dataclass
class Dataset:
    """Images as an (N, D) matrix in [0, 1] plus integer labels."""

    images: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        self.images = np.asarray(self.images, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.images.shape[0] != self.labels.shape[0]:
            raise LabelMismatch(
                f"{self.images.shape[0]} images vs {self.labels.shape[0]} labels"
            )

    def __len__(self) -> int:
        return self.images.shape[0]

    @property
    def n_classes(self) -> int:
        return int(self.labels.max()) + 1 if len(self) else 0

    def subset(self, n: int, offset: int = 0) -> "Dataset":
        return Dataset(self.images[offset : offset + n], self.labels[offset : offset + n])


def _read_file(path) -> bytes:
    data = Path(path).read_bytes()
    if data[:2] == b"\x1f\x8b":
        data = gzip.decompress(data)
    return data


def _read_be32(data: bytes, offset: int, what: str) -> int:
    if offset + 4 > len(data):
        raise TruncatedError(f"{what}: header ends early")
    return struct.unpack_from(">I", data, offset)[0]


def load_idx_images(path) -> np.ndarray:
    """(N, rows*cols) float64 matrix in [0, 1] (pixels divided by 255)."""
    data = _read_file(path)
    magic = _read_be32(data, 0, "image file")
    if magic != IDX_IMAGE_MAGIC:
        raise FormatError(f"bad image magic 0x{magic:08x}")
    count = _read_be32(data, 4, "image file")
    rows = _read_be32(data, 8, "image file")
    cols = _read_be32(data, 12, "image file")
    need = 16 + count * rows * cols
    if len(data) < need:
        raise TruncatedError(f"image payload: have {len(data)}, need {need}")
    pixels = np.frombuffer(data, dtype=np.uint8, count=count * rows * cols, offset=16)
    return pixels.reshape(count, rows * cols).astype(np.float64) / 255.0


def load_idx_labels(path) -> np.ndarray:
    data = _read_file(path)
    magic = _read_be32(data, 0, "label file")
    if magic != IDX_LABEL_MAGIC:
        raise FormatError(f"bad label magic 0x{magic:08x}")
    count = _read_be32(data, 4, "label file")
    if len(data) < 8 + count:
        raise TruncatedError(f"label payload: have {len(data)}, need {8 + count}")
    return np.frombuffer(data, dtype=np.uint8, count=count, offset=8).astype(np.int64)


def load_idx(images_path, labels_path) -> Dataset:
    """Load an IDX image/label pair into a Dataset, cross-checking counts."""
    images = load_idx_images(images_path)
    labels = load_idx_labels(labels_path)
    if images.shape[0] != labels.shape[0]:
        raise LabelMismatch(f"{images.shape[0]} images vs {labels.shape[0]} labels")
    return Dataset(images, labels)


def save_idx(images_u8: np.ndarray, labels: np.ndarray, images_path, labels_path):
    """Write an IDX pair (uint8 images of shape (N, rows, cols))."""
    images_u8 = np.asarray(images_u8, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)
    n, rows, cols = images_u8.shape
    img = struct.pack(">IIII", IDX_IMAGE_MAGIC, n, rows, cols) + images_u8.tobytes()
    lab = struct.pack(">II", IDX_LABEL_MAGIC, labels.size) + labels.tobytes()
    for path, payload in ((images_path, img), (labels_path, lab)):
        path = Path(path)
        if path.suffix == ".gz":
            path.write_bytes(gzip.compress(payload))
        else:
            path.write_bytes(payload)


def _layer_bytes(rows: int, cols: int, words: np.ndarray, mu: np.ndarray) -> bytes:
    return (
        struct.pack("<II", rows, cols)
        + words.astype("<u8").tobytes()
        + mu.astype("<f8").tobytes()
    )


def save_model(model: BnnModel) -> bytes:
    """Serialize a model; the layout is summarized in the module docstring."""
    mode = _MODE_CODES.get(model.meta.get("input_mode", ""), 255)
    t = int(model.meta.get("t", 1))
    out = bytearray()
    out += MODEL_MAGIC
    out += struct.pack("<BBBB", MODEL_VERSION, mode, 0, 0)
    out += struct.pack("<II", t, model.depth)
    first = model.first
    out += _layer_bytes(first.rows, first.cols, first.weights.words, first.mu)
    for layer in model.layers:
        out += _layer_bytes(layer.rows, layer.cols, layer.weights.words, layer.mu)
    out += struct.pack("<I", zlib.crc32(bytes(out)))
    return bytes(out)


def load_model(data: bytes) -> BnnModel:
    if len(data) < 16:
        raise TruncatedError("model file shorter than its header")
    if data[:4] != MODEL_MAGIC:
        raise FormatError(f"bad model magic {data[:4]!r}")
    version, mode, _, _ = struct.unpack_from("<BBBB", data, 4)
    if version != MODEL_VERSION:
        raise FormatError(f"unsupported model version {version}")
    (stored_crc,) = struct.unpack_from("<I", data, len(data) - 4)
    if zlib.crc32(data[:-4]) != stored_crc:
        raise ChecksumError("model payload checksum mismatch")
    t, depth = struct.unpack_from("<II", data, 8)
    offset = 16

    def read_layer(off):
        if off + 8 > len(data) - 4:
            raise TruncatedError("layer header ends early")
        rows, cols = struct.unpack_from("<II", data, off)
        off += 8
        nw = _n_words(cols)
        wbytes = rows * nw * 8
        mbytes = rows * 8
        if off + wbytes + mbytes > len(data) - 4:
            raise TruncatedError("layer payload ends early")
        words = np.frombuffer(data, dtype="<u8", count=rows * nw, offset=off).reshape(
            rows, nw
        )
        off += wbytes
        mu = np.frombuffer(data, dtype="<f8", count=rows, offset=off).copy()
        off += mbytes
        return BitMatrix(rows, cols, words.astype(np.uint64)), mu, off

    weights, mu, offset = read_layer(offset)
    first = FirstLayerReal(weights, mu)
    layers = []
    for _ in range(depth - 1):
        weights, mu, offset = read_layer(offset)
        layers.append(BinaryLayer(weights, mu))
    if offset != len(data) - 4:
        raise FormatError(f"{len(data) - 4 - offset} trailing bytes before checksum")
    meta = {"t": int(t)}
    if mode in _MODE_NAMES:
        meta["input_mode"] = _MODE_NAMES[mode]
    return BnnModel(first, layers, meta)


def write_model(path, model: BnnModel):
    Path(path).write_bytes(save_model(model))


def read_model(path) -> BnnModel:
    return load_model(Path(path).read_bytes())
