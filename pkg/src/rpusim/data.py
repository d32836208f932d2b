"""Dataset ingestion: MNIST IDX files, plain-text character corpora and a synthetic toy set."""

from __future__ import annotations

import gzip
import os
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import List

import numpy as np

DATA_ROOT_ENV = "RPUSIM_DATA"

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801

MNIST_FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}


class DataFormatError(ValueError):
    pass


@dataclass
class Dataset:
    """Flattened samples ``x`` (n, features) with integer labels ``y``."""

    x: np.ndarray
    y: np.ndarray

    def __len__(self):
        return len(self.y)

    def subset(self, size: int = None) -> "Dataset":
        if size is None or size >= len(self):
            return self
        if size < 0:
            raise ValueError("subset size must be non-negative")
        return Dataset(self.x[:size], self.y[:size])


@dataclass
class TextData:
    symbols: np.ndarray
    vocab: List[str]

    def __len__(self):
        return len(self.symbols)


def data_root() -> Path:
    return Path(os.environ.get(DATA_ROOT_ENV, "data"))


def _open(path: Path):
    path = Path(path)
    if not path.exists() and Path(str(path) + ".gz").exists():
        path = Path(str(path) + ".gz")
    if path.suffix == ".gz":
        return gzip.open(path, "rb")
    return path.open("rb")


def read_idx(path, expected_magic: int) -> np.ndarray:
    """Read one IDX file of unsigned bytes and return it with its stored shape."""
    with _open(path) as fh:
        raw = fh.read()
    if len(raw) < 8:
        raise DataFormatError(f"{path}: file too short for an IDX header")
    magic = struct.unpack(">I", raw[:4])[0]
    if magic != expected_magic:
        raise DataFormatError(f"{path}: magic 0x{magic:08x}, expected 0x{expected_magic:08x}")
    ndim = magic & 0xFF
    header = 4 + 4 * ndim
    if len(raw) < header:
        raise DataFormatError(f"{path}: truncated header")
    dims = struct.unpack(f">{ndim}I", raw[4:header])
    count = int(np.prod(dims))
    if len(raw) - header < count:
        raise DataFormatError(f"{path}: truncated, expected {count} bytes of data, found {len(raw) - header}")
    return np.frombuffer(raw, dtype=np.uint8, count=count, offset=header).reshape(dims)


def load_mnist_idx(images_path, labels_path) -> Dataset:
    """Images scaled to [0, 1] and flattened to 784 features, labels 0-9."""
    images = read_idx(images_path, IMAGE_MAGIC)
    labels = read_idx(labels_path, LABEL_MAGIC)
    if images.shape[0] != labels.shape[0]:
        raise DataFormatError(f"{images.shape[0]} images but {labels.shape[0]} labels")
    x = images.reshape(images.shape[0], -1).astype(np.float64) / 255.0
    return Dataset(x, labels.astype(np.int64))


def load_mnist(root=None, split: str = "train") -> Dataset:
    """Load the standard MNIST split from ``root`` (defaults to $RPUSIM_DATA/mnist)."""
    if split not in MNIST_FILES:
        raise ValueError(f"split must be one of {list(MNIST_FILES)}")
    root = Path(root) if root is not None else data_root() / "mnist"
    images, labels = MNIST_FILES[split]
    return load_mnist_idx(root / images, root / labels)


def load_char_corpus(path, test_size: int = None, train_fraction: float = 0.9):
    """Split a text file into head (train) and tail (test) symbol sequences.

    ``test_size`` fixes the tail length in characters; otherwise the split is
    at ``train_fraction``.  The vocabulary is the sorted set of distinct
    characters in the whole file.
    """
    text = Path(path).read_text(encoding="utf-8")
    if not text:
        raise DataFormatError(f"{path}: empty corpus")
    vocab = sorted(set(text))
    index = {ch: i for i, ch in enumerate(vocab)}
    symbols = np.fromiter((index[ch] for ch in text), dtype=np.int64, count=len(text))
    if test_size is None:
        boundary = int(round(len(text) * train_fraction))
    else:
        boundary = len(text) - test_size
    if not 0 <= boundary <= len(text):
        raise ValueError("split boundary outside the corpus")
    return TextData(symbols[:boundary], vocab), TextData(symbols[boundary:], vocab), vocab


def make_toy(n_train: int = 600, n_test: int = 400, inputs: int = 8, classes: int = 4, seed: int = 0,
             spread: float = 0.15):
    """Gaussian blobs around random class centres in [0, 1]^inputs; linearly separable at the default spread."""
    rng = np.random.default_rng(seed)
    centres = rng.uniform(0.0, 1.0, (classes, inputs))

    def draw(n):
        y = rng.integers(0, classes, n)
        x = np.clip(centres[y] + spread * rng.standard_normal((n, inputs)), 0.0, 1.0)
        return Dataset(x, y)

    return draw(n_train), draw(n_test)
