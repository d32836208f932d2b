"""Analog cross-point tile: noisy bounded MVMs and pulsed outer-product updates."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .device import DeviceParams, DevicePopulationConfig, fg_decompose, sample_devices

STOCHASTIC = "stochastic"
EXPECTED = "expected"


@dataclass
class PeripheryConfig:
    """Read/write periphery of a tile.

    Inputs live in [-1, 1]; analog outputs are clipped at +-``output_bound``
    before the ADC.  ``update_management`` rebalances the pulse probabilities
    of the two sides of an update so that neither saturates needlessly; the
    product (and thus the expected number of coincidences) is unchanged.
    """

    mvm_noise_std: float = 0.06
    output_bound: float = 12.0
    input_bits: int = 7
    output_bits: int = 9
    noise_management: bool = True
    bound_management: bool = True
    bit_length: int = 10
    quantization_enabled: bool = True
    update_management: bool = True
    max_bm_retries: int = 5

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.mvm_noise_std < 0:
            raise ValueError("mvm_noise_std must be non-negative")
        if self.output_bound <= 0:
            raise ValueError("output_bound must be positive")
        if self.input_bits < 1 or self.output_bits < 1:
            raise ValueError("quantizer bit counts must be >= 1")
        if self.bit_length < 1:
            raise ValueError("bit_length must be >= 1")

    @classmethod
    def ideal(cls, output_bound: float = 1e9) -> "PeripheryConfig":
        """Noise-free, unquantized, unmanaged periphery with effectively no clipping."""
        return cls(
            mvm_noise_std=0.0,
            output_bound=output_bound,
            noise_management=False,
            bound_management=False,
            quantization_enabled=False,
        )


def quantize(v, bits: int, bound: float = 1.0):
    """Round onto ``2**bits - 1`` uniform levels symmetric about zero.

    The step is ``2*bound/(2**bits - 1)`` and zero is a level, so the
    outermost levels sit half a step inside +-bound and ``|v - Q(v)| <= step/2``
    holds on the whole range.
    """
    n = 2 ** bits - 1
    step = 2.0 * bound / n
    k = n // 2
    return np.clip(np.rint(np.asarray(v) / step), -k, k) * step


def sample_coincidences(px, pd, bit_length: int, rng: np.random.Generator, trials: int = 1) -> np.ndarray:
    """Coincidence counts of Bernoulli pulse trains, shape (trials, len(pd), len(px)).

    Each of ``bit_length`` slots fires column i with probability ``px[i]``
    and row j with ``pd[j]``; a slot where both fire is one coincidence.
    """
    bx = (rng.random((trials, bit_length, len(px))) < px).astype(float)
    bd = (rng.random((trials, bit_length, len(pd))) < pd).astype(float)
    # float products are exact for these small integers and use BLAS
    return np.rint(bd.transpose(0, 2, 1) @ bx).astype(np.int64)


@dataclass
class TileCounters:
    forward: int = 0
    backward: int = 0
    update: int = 0
    bm_retries: int = 0
    bm_exhausted: int = 0
    prob_clamps: int = 0


class AnalogTile:
    """An M x N grid of differential device pairs plus its periphery."""

    def __init__(self, rows: int, cols: int, device: DevicePopulationConfig = None,
                 periphery: PeripheryConfig = None, seed=None, update_mode: str = STOCHASTIC,
                 devices: DeviceParams = None):
        self.rows = int(rows)
        self.cols = int(cols)
        self.device_cfg = device if device is not None else DevicePopulationConfig()
        self.periphery = periphery if periphery is not None else PeripheryConfig()
        if update_mode not in (STOCHASTIC, EXPECTED):
            raise ValueError(f"unknown update mode {update_mode!r}")
        self.update_mode = update_mode
        self.seed = seed
        self.rng = np.random.default_rng(seed)
        if devices is None:
            devices = sample_devices(self.device_cfg, self.rng, (self.rows, self.cols))
        if np.shape(devices.w) != (self.rows, self.cols):
            raise ValueError("device grid does not match tile shape")
        self.devices = devices
        self.counters = TileCounters()
        self.refresh_bounds()

    @property
    def shape(self):
        return (self.rows, self.cols)

    @property
    def dw_min(self) -> float:
        """The single step size the periphery assumes when generating pulses."""
        return self.device_cfg.dw_min0_mean

    def refresh_bounds(self):
        """Recompute cached weight bounds; call after editing ``devices`` directly."""
        self._w_hi = np.asarray(self.devices.w_hi, dtype=float)
        self._w_lo = np.asarray(self.devices.w_lo, dtype=float)

    # -- introspection -------------------------------------------------

    def read_weights(self) -> np.ndarray:
        return np.array(self.devices.w, dtype=float, copy=True)

    def set_weights(self, weights) -> None:
        """Overwrite stored weights directly (clipped to device bounds)."""
        weights = np.broadcast_to(np.asarray(weights, dtype=float), self.shape)
        self.devices.w = np.clip(weights, self._w_lo, self._w_hi).copy()

    def program_weights(self, target, iterations: int = 100) -> None:
        """Write ``target`` with a write-and-verify loop of expected pulse trains.

        Each pass sizes a pulse train from the local step at the current
        weight and applies the device's saturating response to it.  Steps
        shrink towards the bound being approached, so a pass never
        overshoots and the error falls geometrically.  Targets outside a
        device's bounds end up close to that bound.
        """
        target = np.broadcast_to(np.asarray(target, dtype=float), self.shape)
        dev = self.devices
        for _ in range(iterations):
            w = dev.w
            diff = target - w
            if not np.any(np.abs(diff) > 1e-12):
                break
            up = diff > 0
            rel = w - dev.w_s
            step = np.where(up, dev.dw_min0 * (1.0 - dev.slope_p * rel), dev.dw_min0 * (1.0 + dev.slope_n * rel))
            step = np.maximum(step, 0.0)
            # unbounded (zero-slope) sides produce inf arithmetic that np.where discards
            with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
                pulses = np.where(step > 0, np.abs(diff) / step, 0.0)
                # continuous solution of dw/dn = step(w) for n pulses
                decay_up = np.exp(-dev.dw_min0 * dev.slope_p * pulses)
                decay_dn = np.exp(-dev.dw_min0 * dev.slope_n * pulses)
                w_up = np.where(dev.slope_p > 0, self._w_hi - (self._w_hi - w) * decay_up, w + dev.dw_min0 * pulses)
                w_dn = np.where(dev.slope_n > 0, self._w_lo + (w - self._w_lo) * decay_dn, w - dev.dw_min0 * pulses)
            dev.w = np.clip(np.where(up, w_up, w_dn), self._w_lo, self._w_hi)

    # -- array operations ----------------------------------------------

    def forward(self, x, rng: np.random.Generator = None, noise_std: float = None) -> np.ndarray:
        """``y = W x`` through the analog periphery.  ``x`` may be (N,) or (N, B)."""
        return self._mvm(x, transpose=False, rng=rng, noise_std=noise_std)

    def backward(self, d, rng: np.random.Generator = None, noise_std: float = None) -> np.ndarray:
        """``z = W^T d`` through the analog periphery.  ``d`` may be (M,) or (M, B)."""
        return self._mvm(d, transpose=True, rng=rng, noise_std=noise_std)

    def _mvm(self, x, transpose: bool, rng, noise_std):
        rng = rng if rng is not None else self.rng
        p = self.periphery
        sigma = p.mvm_noise_std if noise_std is None else noise_std
        x = np.asarray(x, dtype=float)
        expected_len = self.rows if transpose else self.cols
        if x.shape[0] != expected_len:
            raise ValueError(f"input length {x.shape[0]} does not match tile dimension {expected_len}")
        vector = x.ndim == 1
        x2 = x[:, None] if vector else x
        batch = x2.shape[1]
        if transpose:
            self.counters.backward += batch
        else:
            self.counters.forward += batch
        weights = self.devices.w.T if transpose else self.devices.w

        if p.noise_management:
            scale = np.max(np.abs(x2), axis=0)
            scale[scale == 0] = 1.0
        else:
            scale = np.ones(batch)
        xs = np.clip(x2 / scale, -1.0, 1.0)

        alpha = p.output_bound
        factor = np.ones(batch)
        out = np.empty((weights.shape[0], batch))
        todo = np.arange(batch)
        for attempt in range(p.max_bm_retries + 1):
            xin = xs[:, todo] * factor[todo]
            if p.quantization_enabled:
                xin = quantize(xin, p.input_bits)
            raw = weights @ xin
            if sigma > 0:
                raw = raw + sigma * rng.standard_normal(raw.shape)
            out[:, todo] = raw
            if not p.bound_management:
                break
            saturated = np.any(np.abs(raw) >= alpha, axis=0)
            if not np.any(saturated):
                break
            if attempt == p.max_bm_retries:
                self.counters.bm_exhausted += int(np.count_nonzero(saturated))
                break
            todo = todo[saturated]
            factor[todo] *= 0.5
            self.counters.bm_retries += len(todo)

        out = np.clip(out, -alpha, alpha)
        if p.quantization_enabled:
            out = quantize(out, p.output_bits, alpha)
        out = out / factor * scale
        return out[:, 0] if vector else out

    def update(self, x, d, eta: float, rng: np.random.Generator = None) -> None:
        """Descent update ``W <- W - eta * d x^T`` realized per the tile's update mode."""
        if self.update_mode == EXPECTED:
            self.expected_update(x, d, eta)
        else:
            self.stochastic_update(x, d, eta, rng)

    def pulse_probabilities(self, x, d, eta: float):
        """Per-line Bernoulli probabilities (unclamped) for one update."""
        s = math.sqrt(eta / (self.periphery.bit_length * self.dw_min))
        ax = np.abs(x)
        ad = np.abs(d)
        px = ax * s
        pd = ad * s
        if self.periphery.update_management:
            mx = ax.max(initial=0.0)
            md = ad.max(initial=0.0)
            if mx > 0 and md > 0:
                m = math.sqrt(md / mx)
                px = px * m
                pd = pd / m
        return px, pd

    def stochastic_update(self, x, d, eta: float, rng: np.random.Generator = None) -> None:
        """Stochastic pulse-coincidence update of every cross-point in parallel.

        Each of the ``bit_length`` trials fires column i with probability
        ``px_i`` and row j with ``pd_j``; a coincidence pulses device (j, i)
        once.  Devices whose gradient ``x_i d_j`` is negative are pulsed up
        and the rest down, so each device sees a single polarity per cycle
        and the order of the two polarity phases does not matter.
        """
        rng = rng if rng is not None else self.rng
        x = np.asarray(x, dtype=float)
        d = np.asarray(d, dtype=float)
        if x.shape != (self.cols,) or d.shape != (self.rows,):
            raise ValueError("update vectors do not match tile shape")
        if eta <= 0:
            raise ValueError("learning rate must be positive")
        self.counters.update += 1
        px, pd = self._clamped_probabilities(x, d, eta)
        cols = np.flatnonzero(px)
        rows = np.flatnonzero(pd)
        if len(cols) == 0 or len(rows) == 0:
            return
        counts = sample_coincidences(px[cols], pd[rows], self.periphery.bit_length, rng)[0]
        keep_r = counts.any(axis=1)
        keep_c = counts.any(axis=0)
        if not keep_r.any():
            return
        rows, cols = rows[keep_r], cols[keep_c]
        counts = counts[np.ix_(keep_r, keep_c)]

        sub = np.ix_(rows, cols)
        dev = self.devices
        w = dev.w[sub]
        ws = dev.w_s[sub]
        dw = dev.dw_min0[sub]
        sp = dev.slope_p[sub]
        sn = dev.slope_n[sub]
        lo = self._w_lo[sub]
        hi = self._w_hi[sub]
        up = np.outer(np.sign(d[rows]), np.sign(x[cols])) < 0
        noise = self.device_cfg.cycle_noise_rel_std
        for k in range(1, int(counts.max()) + 1):
            m = counts >= k
            wm = w[m]
            rel = wm - ws[m]
            upm = up[m]
            step = np.where(upm, dw[m] * (1.0 - sp[m] * rel), dw[m] * (1.0 + sn[m] * rel))
            step = np.maximum(step, 0.0)
            if noise > 0:
                step = step * np.maximum(1.0 + noise * rng.standard_normal(step.shape), 0.0)
            w[m] = np.clip(np.where(upm, wm + step, wm - step), lo[m], hi[m])
        dev.w[sub] = w

    def _clamped_probabilities(self, x, d, eta):
        px, pd = self.pulse_probabilities(x, d, eta)
        clamps = int(np.count_nonzero(px > 1.0) + np.count_nonzero(pd > 1.0))
        if clamps:
            self.counters.prob_clamps += clamps
            px = np.minimum(px, 1.0)
            pd = np.minimum(pd, 1.0)
        return px, pd

    def coincidence_counts(self, x, d, eta: float, trials: int, rng: np.random.Generator = None) -> np.ndarray:
        """Pulse coincidences of ``trials`` independent update cycles, shape (trials, M, N).

        Draws exactly what :meth:`stochastic_update` draws per cycle but
        leaves the devices untouched.
        """
        rng = rng if rng is not None else self.rng
        x = np.asarray(x, dtype=float)
        d = np.asarray(d, dtype=float)
        px, pd = self._clamped_probabilities(x, d, eta)
        return sample_coincidences(px, pd, self.periphery.bit_length, rng, trials)

    def expected_update(self, x, d, eta: float) -> None:
        """Deterministic update in expectation: ``w - eta*dW*F(w) - eta*|dW|*G(w)``.

        F and G are normalized by the periphery's assumed step size, so this
        is exactly the mean of :meth:`stochastic_update` when no probability
        clamps and no cycle noise are involved.
        """
        x = np.asarray(x, dtype=float)
        d = np.asarray(d, dtype=float)
        if x.shape != (self.cols,) or d.shape != (self.rows,):
            raise ValueError("update vectors do not match tile shape")
        self.counters.update += 1
        self._expected_apply(np.outer(d, x), eta)

    def _expected_apply(self, grad, eta: float) -> None:
        f, g = fg_decompose(self.devices, dw_ref=self.dw_min)
        w = self.devices.w - eta * grad * f - eta * np.abs(grad) * g
        self.devices.w = np.clip(w, self._w_lo, self._w_hi)

    # -- checkpointing ---------------------------------------------------

    def save_weights(self, path) -> None:
        """Row-major CSV weight dump with a ``# rows,cols,seed`` header."""
        path = Path(path)
        header = f"rows={self.rows},cols={self.cols},seed={self.seed}"
        np.savetxt(path, self.devices.w, delimiter=",", header=header, fmt="%.17g")

    def load_weights(self, path) -> None:
        """Restore weights saved by :meth:`save_weights` into a tile of the same shape."""
        path = Path(path)
        with path.open() as fh:
            header = fh.readline().lstrip("#").strip()
        meta = dict(item.split("=", 1) for item in header.split(","))
        if int(meta["rows"]) != self.rows or int(meta["cols"]) != self.cols:
            raise ValueError(f"checkpoint shape {meta['rows']}x{meta['cols']} does not match tile {self.shape}")
        if meta.get("seed") != str(self.seed):
            raise ValueError("checkpoint was written by a tile with a different seed")
        weights = np.loadtxt(path, delimiter=",", ndmin=2)
        self.devices.w = weights.reshape(self.shape)
