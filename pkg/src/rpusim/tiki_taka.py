"""Coupled A/C matrix optimizer for asymmetric devices.

Gradients accumulate on a calibrated fast matrix ``A``; every ``ns`` samples
one probe vector reads ``A`` and the result is written as a rank-one update
into the slow matrix ``C``.  The layer's effective weight is ``gamma*A + C``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .device import DevicePopulationConfig
from .tile import AnalogTile, PeripheryConfig, STOCHASTIC

ONE_HOT = "onehot"
HADAMARD2 = "hadamard2"
HADAMARD4 = "hadamard4"
TRANSFER_KINDS = (ONE_HOT, HADAMARD2, HADAMARD4)

SGD = "sgd"
TIKI_TAKA = "tikitaka"


@dataclass
class TikiTakaConfig:
    """Hyperparameters of one coupled layer.

    ``hadamard_norm`` selects the entry magnitude of Hadamard probe vectors:
    ``"inverse"`` uses +-1/k, ``"unit"`` uses +-1/sqrt(k) (unit-norm rows).
    ``transfer_read_noise_std`` overrides the read noise of the A read only.
    """

    gamma: float = 1.0
    lambda_c: float = 0.02
    ns: int = 1
    transfer_vectors: str = ONE_HOT
    threshold_tv: float = 0.0
    hadamard_norm: str = "inverse"
    transfer_read_noise_std: float = None

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.gamma < 0:
            raise ValueError("gamma must be non-negative")
        # lambda_c == 0 disables transfers (pure SGD on A shifted by C)
        if self.lambda_c < 0:
            raise ValueError("lambda_c must be non-negative")
        if self.ns < 1:
            raise ValueError("ns must be >= 1")
        if self.threshold_tv < 0:
            raise ValueError("threshold_tv must be non-negative")
        if self.transfer_vectors not in TRANSFER_KINDS:
            raise ValueError(f"transfer_vectors must be one of {TRANSFER_KINDS}")
        if self.hadamard_norm not in ("inverse", "unit"):
            raise ValueError("hadamard_norm must be 'inverse' or 'unit'")


def _sylvester(k: int) -> np.ndarray:
    h = np.array([[1.0]])
    while h.shape[0] < k:
        h = np.block([[h, h], [h, -h]])
    return h


class TransferVectors:
    """Cyclic generator of probe vectors ``u_t`` of length ``n``.

    One-hot cycles e_1..e_n.  Hadamard-k walks each consecutive k-block
    through the k sign patterns before moving to the next block; a trailing
    partial block falls back to one-hot vectors.
    """

    def __init__(self, kind: str, n: int, norm: str = "inverse"):
        if n < 1:
            raise ValueError("n must be >= 1")
        if kind not in TRANSFER_KINDS:
            raise ValueError(f"unknown transfer vector kind {kind!r}")
        self.kind = kind
        self.n = n
        self.t = 0
        k = {ONE_HOT: 1, HADAMARD2: 2, HADAMARD4: 4}[kind]
        self.k = k
        self._patterns = _sylvester(k) * ((1.0 / k) if norm == "inverse" else (1.0 / np.sqrt(k)))
        self._full_blocks = n // k if k > 1 else 0

    @property
    def period(self) -> int:
        return self.n

    def vector(self, t: int) -> np.ndarray:
        t %= self.n
        u = np.zeros(self.n)
        covered = self._full_blocks * self.k
        if t < covered:
            block, pattern = divmod(t, self.k)
            u[block * self.k:(block + 1) * self.k] = self._patterns[pattern]
        else:
            u[t] = 1.0
        return u

    def __next__(self) -> np.ndarray:
        u = self.vector(self.t)
        self.t = (self.t + 1) % self.n
        return u

    def __iter__(self):
        return self


def next_transfer_vector(gen: TransferVectors, n: int = None) -> np.ndarray:
    if n is not None and n != gen.n:
        raise ValueError(f"generator built for length {gen.n}, asked for {n}")
    return next(gen)


def threshold_filter(v, tv: float) -> np.ndarray:
    """Pass entries with ``|v| > tv`` through, zero the rest."""
    v = np.asarray(v, dtype=float)
    if tv <= 0:
        return v.copy()
    return np.where(np.abs(v) > tv, v, 0.0)


def cycle_count(mode: str, ns: int, samples: int, weight_sharing: int = 1) -> int:
    """Number of array cycles (forward, backward, update, read A, update C) for a run."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    base = 3 * weight_sharing * samples
    if mode == SGD:
        return base
    if mode == TIKI_TAKA:
        return base + 2 * (samples // ns)
    raise ValueError(f"unknown mode {mode!r}")


class TikiTakaLayer:
    """A pair of equally shaped tiles ``A`` and ``C`` with the transfer state."""

    def __init__(self, rows: int, cols: int, cfg: TikiTakaConfig = None, device: DevicePopulationConfig = None,
                 periphery: PeripheryConfig = None, seed=None, update_mode: str = STOCHASTIC,
                 device_c: DevicePopulationConfig = None):
        self.cfg = cfg if cfg is not None else TikiTakaConfig()
        ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
        a_seed, c_seed, own_seed = ss.spawn(3)
        self.A = AnalogTile(rows, cols, device, periphery, seed=a_seed, update_mode=update_mode)
        self.C = AnalogTile(rows, cols, device_c if device_c is not None else device, periphery,
                            seed=c_seed, update_mode=update_mode)
        self.rng = np.random.default_rng(own_seed)
        self.transfer = TransferVectors(self.cfg.transfer_vectors, cols, self.cfg.hadamard_norm)
        self.sample_counter = 0
        self.transfer_count = 0
        self.calibrated = False

    @property
    def rows(self) -> int:
        return self.A.rows

    @property
    def cols(self) -> int:
        return self.A.cols

    @property
    def transfer_index(self) -> int:
        return self.transfer.t

    def effective_weights(self) -> np.ndarray:
        return self.cfg.gamma * self.A.read_weights() + self.C.read_weights()

    def forward(self, x, rng: np.random.Generator = None) -> np.ndarray:
        y = self.C.forward(x, rng)
        if self.cfg.gamma != 0:
            y = y + self.cfg.gamma * self.A.forward(x, rng)
        return y

    def backward(self, d, rng: np.random.Generator = None) -> np.ndarray:
        z = self.C.backward(d, rng)
        if self.cfg.gamma != 0:
            z = z + self.cfg.gamma * self.A.backward(d, rng)
        return z

    def update_a(self, x, d, eta: float, rng: np.random.Generator = None) -> None:
        """Accumulate the gradient of one sample on ``A``.

        Matrix arguments (columns = weight-sharing positions) are applied
        column by column; the sample counter advances once either way.
        """
        x = np.asarray(x, dtype=float)
        d = np.asarray(d, dtype=float)
        if x.ndim == 1:
            self.A.update(x, d, eta, rng)
        else:
            for j in range(x.shape[1]):
                self.A.update(x[:, j], d[:, j], eta, rng)
        self.sample_counter += 1

    def maybe_transfer(self, rng: np.random.Generator = None) -> bool:
        """Run the read-A / update-C pair when ``ns`` samples have accumulated."""
        if self.sample_counter < self.cfg.ns:
            return False
        rng = rng if rng is not None else self.rng
        self.sample_counter = 0
        u = next(self.transfer)
        v = self.A.forward(u, rng, noise_std=self.cfg.transfer_read_noise_std)
        fv = threshold_filter(v, self.cfg.threshold_tv)
        if self.cfg.lambda_c > 0 and np.any(fv):
            # descent form with d = -f(v) adds lambda * f(v) u^T to C
            self.C.update(u, -fv, self.cfg.lambda_c, rng)
        self.transfer_count += 1
        return True

    # aliases matching the array-operation vocabulary
    composite_forward = forward
    composite_backward = backward
