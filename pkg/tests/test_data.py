import gzip
import struct

import numpy as np
import pytest

from rpusim.data import (
    IMAGE_MAGIC,
    LABEL_MAGIC,
    DataFormatError,
    load_char_corpus,
    load_mnist,
    load_mnist_idx,
    make_toy,
    read_idx,
)


def write_idx(path, array, magic_type=0x08):
    array = np.asarray(array, dtype=np.uint8)
    header = struct.pack(">BBBB", 0, 0, magic_type, array.ndim) + struct.pack(f">{array.ndim}I", *array.shape)
    path.write_bytes(header + array.tobytes())
    return path


def reference_first_image(path):
    """Minimal independent decoder: header fields by hand, then the first 28x28 block."""
    with open(path, "rb") as fh:
        magic, n, rows, cols = struct.unpack(">IIII", fh.read(16))
        pixels = list(fh.read(rows * cols))
    return magic, n, rows, cols, pixels


@pytest.fixture
def tiny_idx(tmp_path):
    rng = np.random.default_rng(0)
    images = rng.integers(0, 256, (5, 28, 28))
    labels = rng.integers(0, 10, 5)
    return (write_idx(tmp_path / "img", images), write_idx(tmp_path / "lbl", labels), images, labels)


class TestIdx:
    def test_round_trip(self, tiny_idx):
        img, lbl, images, labels = tiny_idx
        ds = load_mnist_idx(img, lbl)
        assert ds.x.shape == (5, 784)
        np.testing.assert_allclose(ds.x, images.reshape(5, -1) / 255.0)
        np.testing.assert_array_equal(ds.y, labels)
        assert ds.x.min() >= 0 and ds.x.max() <= 1

    def test_gzip(self, tiny_idx, tmp_path):
        img, _, images, _ = tiny_idx
        gz = tmp_path / "img.gz"
        gz.write_bytes(gzip.compress(img.read_bytes()))
        np.testing.assert_array_equal(read_idx(gz, IMAGE_MAGIC), images)

    def test_wrong_magic(self, tiny_idx):
        img, lbl, _, _ = tiny_idx
        with pytest.raises(DataFormatError, match="magic"):
            read_idx(img, LABEL_MAGIC)
        with pytest.raises(DataFormatError):
            load_mnist_idx(lbl, lbl)

    def test_truncated(self, tiny_idx, tmp_path):
        img, _, _, _ = tiny_idx
        cut = tmp_path / "cut"
        cut.write_bytes(img.read_bytes()[:-10])
        with pytest.raises(DataFormatError, match="truncated"):
            read_idx(cut, IMAGE_MAGIC)
        short = tmp_path / "short"
        short.write_bytes(b"\x00\x00")
        with pytest.raises(DataFormatError):
            read_idx(short, IMAGE_MAGIC)

    def test_count_mismatch(self, tiny_idx, tmp_path):
        img, _, _, _ = tiny_idx
        lbl = write_idx(tmp_path / "lbl4", np.zeros(4))
        with pytest.raises(DataFormatError, match="labels"):
            load_mnist_idx(img, lbl)


class TestMnist:
    def test_training_set_size(self, mnist_dir):
        train = load_mnist(mnist_dir, "train")
        assert len(train) == 60000
        assert set(np.unique(train.y)) == set(range(10))
        assert len(load_mnist(mnist_dir, "test")) == 10000

    def test_first_image_matches_independent_decoder(self, mnist_dir):
        magic, n, rows, cols, pixels = reference_first_image(mnist_dir / "train-images-idx3-ubyte")
        assert (magic, n, rows, cols) == (0x803, 60000, 28, 28)
        train = load_mnist(mnist_dir, "train")
        assert int(np.rint(train.x[0] * 255).sum()) == sum(pixels)
        np.testing.assert_array_equal(np.rint(train.x[0] * 255).astype(int), pixels)

    def test_env_root(self, mnist_dir, monkeypatch):
        monkeypatch.setenv("RPUSIM_DATA", str(mnist_dir.parent))
        assert len(load_mnist(split="test")) == 10000

    def test_bad_split(self, mnist_dir):
        with pytest.raises(ValueError):
            load_mnist(mnist_dir, "validation")


class TestCorpus:
    def test_split_sizes(self, tmp_path):
        p = tmp_path / "c.txt"
        p.write_text("abcdefghij")
        train, test, vocab = load_char_corpus(p, train_fraction=0.8)
        assert (len(train), len(test)) == (8, 2)
        assert "".join(vocab[i] for i in test.symbols) == "ij"

    def test_fixed_test_size(self, tmp_path):
        p = tmp_path / "c.txt"
        p.write_text("hello world, hello corpus")
        train, test, vocab = load_char_corpus(p, test_size=6)
        assert len(test) == 6 and len(train) == 19

    def test_vocab_sorted_unique(self, tmp_path):
        p = tmp_path / "c.txt"
        p.write_text("zebra apple zebra\n")
        _, _, vocab = load_char_corpus(p)
        assert vocab == sorted(set(vocab)) == sorted(set("zebra apple zebra\n"))

    def test_empty(self, tmp_path):
        p = tmp_path / "e.txt"
        p.write_text("")
        with pytest.raises(DataFormatError):
            load_char_corpus(p)

    def test_bad_split(self, tmp_path):
        p = tmp_path / "c.txt"
        p.write_text("abc")
        with pytest.raises(ValueError):
            load_char_corpus(p, test_size=10)


def test_toy_is_deterministic():
    a_train, a_test = make_toy(seed=3)
    b_train, _ = make_toy(seed=3)
    np.testing.assert_array_equal(a_train.x, b_train.x)
    assert a_train.x.shape == (600, 8) and len(a_test) == 400
    assert a_train.x.min() >= 0 and a_train.x.max() <= 1
