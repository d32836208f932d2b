"""Weight storage backends shared by every network layer.

A backend answers the three array operations for one weight matrix:
``forward(X)``, ``backward(D)`` and ``update(X, D, eta)`` for a sample,
plus ``finish_sample()`` which runs any per-sample bookkeeping (the
Tiki-Taka transfer).  ``X`` and ``D`` may be vectors or matrices whose
columns are weight-sharing positions.  Cycle counters only advance for
training calls (``count=True``).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..tile import AnalogTile
from ..tiki_taka import TikiTakaLayer


@dataclass
class CycleCounter:
    forward: int = 0
    backward: int = 0
    update: int = 0
    transfer: int = 0

    @property
    def sgd_cycles(self) -> int:
        return self.forward + self.backward + self.update

    @property
    def total_cycles(self) -> int:
        return self.sgd_cycles + 2 * self.transfer


def _columns(a) -> int:
    a = np.asarray(a)
    return 1 if a.ndim == 1 else a.shape[1]


class FloatWeights:
    """Exact floating-point reference."""

    def __init__(self, weights: np.ndarray):
        self.w = np.array(weights, dtype=float)
        self.cycles = CycleCounter()

    @property
    def shape(self):
        return self.w.shape

    def matrix(self) -> np.ndarray:
        return self.w.copy()

    def forward(self, x, rng=None, count=True):
        if count:
            self.cycles.forward += _columns(x)
        return self.w @ x

    def backward(self, d, rng=None, count=True):
        if count:
            self.cycles.backward += _columns(d)
        return self.w.T @ d

    def update(self, x, d, eta, rng=None):
        x = np.asarray(x)
        self.cycles.update += _columns(x)
        if x.ndim == 1:
            self.w -= eta * np.outer(d, x)
        else:
            self.w -= eta * (d @ x.T)

    def finish_sample(self, rng=None) -> bool:
        return False


class AnalogWeights:
    """One analog tile trained with plain SGD."""

    def __init__(self, tile: AnalogTile):
        self.tile = tile
        self.cycles = CycleCounter()

    @property
    def shape(self):
        return self.tile.shape

    @property
    def tiles(self):
        return [self.tile]

    def matrix(self) -> np.ndarray:
        return self.tile.read_weights()

    def forward(self, x, rng=None, count=True):
        if count:
            self.cycles.forward += _columns(x)
        return self.tile.forward(x, rng)

    def backward(self, d, rng=None, count=True):
        if count:
            self.cycles.backward += _columns(d)
        return self.tile.backward(d, rng)

    def update(self, x, d, eta, rng=None):
        x = np.asarray(x)
        d = np.asarray(d)
        if x.ndim == 1:
            self.tile.update(x, d, eta, rng)
            self.cycles.update += 1
        else:
            for j in range(x.shape[1]):
                self.tile.update(x[:, j], d[:, j], eta, rng)
            self.cycles.update += x.shape[1]

    def finish_sample(self, rng=None) -> bool:
        return False


class TikiTakaWeights:
    """A coupled A/C pair; ``W = gamma*A + C``."""

    def __init__(self, layer: TikiTakaLayer):
        self.layer = layer
        self.cycles = CycleCounter()

    @property
    def shape(self):
        return (self.layer.rows, self.layer.cols)

    @property
    def tiles(self):
        return [self.layer.A, self.layer.C]

    def matrix(self) -> np.ndarray:
        return self.layer.effective_weights()

    def forward(self, x, rng=None, count=True):
        if count:
            self.cycles.forward += _columns(x)
        return self.layer.forward(x, rng)

    def backward(self, d, rng=None, count=True):
        if count:
            self.cycles.backward += _columns(d)
        return self.layer.backward(d, rng)

    def update(self, x, d, eta, rng=None):
        self.cycles.update += _columns(x)
        self.layer.update_a(x, d, eta, rng)

    def finish_sample(self, rng=None) -> bool:
        fired = self.layer.maybe_transfer(rng)
        if fired:
            self.cycles.transfer += 1
        return fired
