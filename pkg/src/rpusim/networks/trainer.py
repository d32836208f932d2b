"""Floating-point reference training and analog training (plain SGD or Tiki-Taka)."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict

import numpy as np

from ..calibration import CalibrationConfig, calibrate
from ..device import DevicePopulationConfig
from ..tile import AnalogTile, PeripheryConfig, STOCHASTIC, EXPECTED
from ..tiki_taka import TikiTakaConfig, TikiTakaLayer
from .backends import AnalogWeights, FloatWeights, TikiTakaWeights
from .model import FeedForwardNet, LSTMNet
from .spec import NetworkSpec

FP = "fp"
ANALOG_SGD = "analog_sgd"
ANALOG_TIKI_TAKA = "analog_tikitaka"
MODES = (FP, ANALOG_SGD, ANALOG_TIKI_TAKA)


class CalibrationError(RuntimeError):
    """Raised when a Tiki-Taka layer trains without a calibrated A tile."""


@dataclass
class TrainerConfig:
    mode: str = FP
    eta: float = 0.01
    epochs: int = 1
    seed: int = 0
    unroll_steps: int = 100
    minibatch: int = 1
    update_mode: str = STOCHASTIC
    calibrate: bool = True
    allow_uncalibrated: bool = False
    tiki_per_layer: Dict[int, TikiTakaConfig] = field(default_factory=dict)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.minibatch != 1:
            raise ValueError("only a mini-batch size of 1 is supported")
        if self.eta <= 0:
            raise ValueError("eta must be positive")
        if self.epochs < 0:
            raise ValueError("epochs must be non-negative")
        if self.update_mode not in (STOCHASTIC, EXPECTED):
            raise ValueError(f"update_mode must be {STOCHASTIC!r} or {EXPECTED!r}")


def initial_weights(spec: NetworkSpec, rng: np.random.Generator):
    """Uniform in +-1/sqrt(fan_in) for every column, bias included."""
    weights = []
    for rows, cols in spec.matrix_shapes():
        fan_in = cols - int(spec.bias)
        bound = 1.0 / np.sqrt(max(fan_in, 1))
        weights.append(rng.uniform(-bound, bound, (rows, cols)))
    return weights


class NetworkState:
    """A network with its backends and the random streams driving training."""

    def __init__(self, spec: NetworkSpec, cfg: TrainerConfig, device: DevicePopulationConfig = None,
                 periphery: PeripheryConfig = None, tiki: TikiTakaConfig = None,
                 calibration: CalibrationConfig = None):
        self.spec = spec
        self.cfg = cfg
        self.device = device if device is not None else DevicePopulationConfig()
        self.periphery = periphery if periphery is not None else PeripheryConfig()
        self.tiki = tiki if tiki is not None else TikiTakaConfig()
        self.calibration = calibration if calibration is not None else CalibrationConfig()
        n = len(spec.layers)
        root = np.random.SeedSequence(cfg.seed)
        init_ss, data_ss, noise_ss, *layer_ss = root.spawn(3 + n)
        self.data_rng = np.random.default_rng(data_ss)
        self.noise_rng = np.random.default_rng(noise_ss)
        self.initial = initial_weights(spec, np.random.default_rng(init_ss))
        self.calibration_stats = []
        self.samples_seen = 0
        backends = [self._make_backend(i, w0, layer_ss[i]) for i, w0 in enumerate(self.initial)]
        net_cls = LSTMNet if spec.is_recurrent else FeedForwardNet
        self.net = net_cls(spec, backends)
        self.weight_sharing = spec.weight_sharing(cfg.unroll_steps)

    def _make_backend(self, index, w0, seed):
        cfg = self.cfg
        rows, cols = w0.shape
        if cfg.mode == FP:
            return FloatWeights(w0)
        if cfg.mode == ANALOG_SGD:
            tile = AnalogTile(rows, cols, self.device, self.periphery, seed=seed, update_mode=cfg.update_mode)
            tile.program_weights(w0)
            return AnalogWeights(tile)
        tiki = cfg.tiki_per_layer.get(index, self.tiki)
        layer = TikiTakaLayer(rows, cols, tiki, self.device, self.periphery, seed=seed, update_mode=cfg.update_mode)
        if cfg.calibrate:
            self.calibration_stats.append(calibrate(layer.A, self.calibration))
            layer.calibrated = True
        layer.C.program_weights(w0)
        return TikiTakaWeights(layer)

    @property
    def backends(self):
        return self.net.backends

    def weights(self):
        return [b.matrix() for b in self.backends]

    def prob_clamps(self) -> int:
        total = 0
        for b in self.backends:
            for tile in getattr(b, "tiles", []):
                total += tile.counters.prob_clamps
        return total

    def cycle_counters(self):
        return [b.cycles for b in self.backends]

    def bottleneck_layer(self) -> int:
        """Index of the layer with the largest weight sharing (first on ties)."""
        return int(np.argmax(self.weight_sharing))

    def check_ready(self):
        if self.cfg.mode != ANALOG_TIKI_TAKA or self.cfg.allow_uncalibrated:
            return
        for i, b in enumerate(self.backends):
            if not b.layer.calibrated:
                raise CalibrationError(f"layer {i}: A tile is not calibrated")


def fp_forward_backward(net, sample):
    """Exact loss and weight gradients for one sample on any network.

    ``sample`` is ``(x, label)`` for feed-forward nets or ``(inputs, targets)``
    symbol sequences for LSTM nets.  Cycle counters are left untouched.
    """
    if isinstance(net, LSTMNet):
        inputs, targets = sample
        loss, steps = net.forward(inputs, targets, count=False)
        pairs = net.backward(steps, count=False)
        return loss, net.gradients(pairs)
    x, label = sample
    probs, cache = net.forward(x, count=False)
    loss = -float(np.log(max(probs[label], 1e-12)))
    pairs = net.backward(probs, label, cache, count=False)
    return loss, net.gradients(pairs)


def train_step(state: NetworkState, sample) -> float:
    """One sample: forward, backward, update every layer, then per-layer transfers."""
    state.check_ready()
    net = state.net
    rng = state.noise_rng
    eta = state.cfg.eta
    if isinstance(net, LSTMNet):
        inputs, targets = sample
        loss, steps = net.forward(inputs, targets, rng)
        pairs = net.backward(steps, rng)
        loss /= max(len(inputs), 1)
    else:
        x, label = sample
        probs, cache = net.forward(x, rng)
        loss = -float(np.log(max(probs[label], 1e-12)))
        pairs = net.backward(probs, label, cache, rng)
    for backend, (X, D) in zip(net.backends, pairs):
        backend.update(X, D, eta, rng)
    for backend in net.backends:
        backend.finish_sample(rng)
    state.samples_seen += 1
    return loss


def train_epoch(state: NetworkState, data, limit: int = None) -> float:
    """One shuffled pass over ``data``; returns the mean training loss."""
    losses = []
    if isinstance(state.net, LSTMNet):
        state.net.reset_state()
        symbols = data.symbols
        T = state.cfg.unroll_steps
        n_chunks = (len(symbols) - 1) // T
        for k in range(n_chunks if limit is None else min(limit, n_chunks)):
            chunk = symbols[k * T:(k + 1) * T + 1]
            losses.append(train_step(state, (chunk[:-1], chunk[1:])))
    else:
        order = state.data_rng.permutation(len(data.y))
        if limit is not None:
            order = order[:limit]
        for idx in order:
            losses.append(train_step(state, (data.x[idx], int(data.y[idx]))))
    return float(np.mean(losses)) if losses else float("nan")


def evaluate(state: NetworkState, data, batch: int = 1000) -> float:
    """Test error in percent for classifiers, mean per-symbol cross-entropy for LSTM nets."""
    net = state.net
    rng = state.noise_rng
    if isinstance(net, LSTMNet):
        symbols = data.symbols
        if len(symbols) < 2:
            raise ValueError("empty test set")
        saved = net.state
        net.reset_state()
        loss, _ = net.forward(symbols[:-1], symbols[1:], rng, count=False)
        net.state = saved
        return loss / (len(symbols) - 1)
    n = len(data.y)
    if n == 0:
        raise ValueError("empty test set")
    wrong = 0
    for start in range(0, n, batch):
        xs = data.x[start:start + batch].T
        probs = net.predict_batch(xs, rng)
        wrong += int(np.count_nonzero(np.argmax(probs, axis=0) != data.y[start:start + batch]))
    return 100.0 * wrong / n
