"""Differential device-pair model with state-dependent, asymmetric switching.

All quantities are in effective weight units (the gain between conductance
and weight is folded to 1).  Every function here works elementwise, so a
:class:`DeviceParams` may hold plain floats for a single cross-point or
equally-shaped arrays for a whole tile.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Union

import numpy as np

ArrayLike = Union[float, np.ndarray]

UP = "up"
DOWN = "down"


@dataclass
class DevicePopulationConfig:
    """Gaussian population statistics the per-device parameters are drawn from.

    Relative stds are fractions of the corresponding mean.  The defaults
    are the asymmetric baseline device.
    """

    dw_min0_mean: float = 0.001
    slope_p_mean: float = 1.66
    slope_n_mean: float = 1.66
    dw_min0_rel_std: float = 0.30
    slope_p_rel_std: float = 0.25
    slope_n_rel_std: float = 0.25
    cycle_noise_rel_std: float = 0.30
    symmetry_offset_std: float = 0.0

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.dw_min0_mean <= 0:
            raise ValueError("dw_min0_mean must be positive")
        # zero slopes are the ideal (linear) device and stay allowed
        if self.slope_p_mean < 0 or self.slope_n_mean < 0:
            raise ValueError("slope means must be non-negative")
        for name in ("dw_min0_rel_std", "slope_p_rel_std", "slope_n_rel_std", "cycle_noise_rel_std"):
            value = getattr(self, name)
            if not 0.0 <= value < 1.0:
                raise ValueError(f"{name} must lie in [0, 1), got {value}")
        if self.symmetry_offset_std < 0:
            raise ValueError("symmetry_offset_std must be non-negative")

    @classmethod
    def ideal(cls, dw_min0: float = 0.001, cycle_noise_rel_std: float = 0.0) -> "DevicePopulationConfig":
        """Linear, symmetric devices with no device-to-device spread."""
        return cls(
            dw_min0_mean=dw_min0,
            slope_p_mean=0.0,
            slope_n_mean=0.0,
            dw_min0_rel_std=0.0,
            slope_p_rel_std=0.0,
            slope_n_rel_std=0.0,
            cycle_noise_rel_std=cycle_noise_rel_std,
        )

    @classmethod
    def symmetric(cls, **kwargs) -> "DevicePopulationConfig":
        """Baseline variability but zero slopes, i.e. perfectly symmetric switching."""
        return cls(slope_p_mean=0.0, slope_n_mean=0.0, **kwargs)


@dataclass
class DeviceParams:
    """Switching parameters and current state of one device pair (or a grid of them).

    ``w_s`` is the weight at which up and down steps are equal; ``w`` is the
    current effective weight.
    """

    dw_min0: ArrayLike
    slope_p: ArrayLike
    slope_n: ArrayLike
    w_s: ArrayLike = 0.0
    w: ArrayLike = 0.0

    @property
    def w_hi(self) -> ArrayLike:
        return self.w_s + _inverse_slope(self.slope_p)

    @property
    def w_lo(self) -> ArrayLike:
        return self.w_s - _inverse_slope(self.slope_n)

    def copy(self) -> "DeviceParams":
        return DeviceParams(*(np.copy(v) if isinstance(v, np.ndarray) else v for v in
                              (self.dw_min0, self.slope_p, self.slope_n, self.w_s, self.w)))


def _inverse_slope(slope: ArrayLike) -> ArrayLike:
    # a non-positive slope never saturates on that side
    slope = np.asarray(slope, dtype=float)
    out = np.full(slope.shape, np.inf)
    with np.errstate(over="ignore"):
        np.divide(1.0, slope, out=out, where=slope > 0)
    return out[()] if out.ndim == 0 else out


def _positive_gaussian(rng: np.random.Generator, mean: float, std: float, size) -> np.ndarray:
    values = rng.normal(mean, std, size)
    if mean <= 0 or std == 0:
        return values
    bad = values <= 0
    while np.any(bad):
        values[bad] = rng.normal(mean, std, int(np.count_nonzero(bad)))
        bad = values <= 0
    return values


def sample_devices(cfg: DevicePopulationConfig, rng: np.random.Generator, shape=(), w0: ArrayLike = 0.0) -> DeviceParams:
    """Draw device parameters for a grid of the given shape.

    Step sizes and positive slope means are redrawn until strictly positive.
    """
    dw = _positive_gaussian(rng, cfg.dw_min0_mean, cfg.dw_min0_rel_std * cfg.dw_min0_mean, shape)
    sp = _positive_gaussian(rng, cfg.slope_p_mean, cfg.slope_p_rel_std * cfg.slope_p_mean, shape)
    sn = _positive_gaussian(rng, cfg.slope_n_mean, cfg.slope_n_rel_std * cfg.slope_n_mean, shape)
    if cfg.symmetry_offset_std > 0:
        ws = rng.normal(0.0, cfg.symmetry_offset_std, shape)
    else:
        ws = np.zeros(shape)
    w = np.broadcast_to(np.asarray(w0, dtype=float), shape).copy()
    d = DeviceParams(dw, sp, sn, ws, w)
    if shape == ():
        d = DeviceParams(*(float(v) for v in (dw, sp, sn, ws, w)))
    d.w = np.clip(d.w, d.w_lo, d.w_hi)
    if shape == ():
        d.w = float(d.w)
    return d


def sample_device(cfg: DevicePopulationConfig, rng: np.random.Generator, w0: float = 0.0) -> DeviceParams:
    """Draw a single device."""
    return sample_devices(cfg, rng, (), w0)


def expected_step(d: DeviceParams, direction: str, w: ArrayLike = None) -> ArrayLike:
    """Magnitude of the expected weight change for one pulse in ``direction``.

    Evaluated at the device's current weight unless ``w`` is given.
    """
    if w is None:
        w = d.w
    x = np.asarray(w) - d.w_s
    if direction == UP:
        step = d.dw_min0 * (1.0 - d.slope_p * x)
    elif direction == DOWN:
        step = d.dw_min0 * (1.0 + d.slope_n * x)
    else:
        raise ValueError(f"unknown direction {direction!r}")
    return np.maximum(step, 0.0)


def _noisy_magnitude(step, noise: float, rng: np.random.Generator):
    if noise <= 0:
        return step
    factor = 1.0 + noise * rng.standard_normal(np.shape(step))
    return step * np.maximum(factor, 0.0)


def apply_pulse(d: DeviceParams, direction: str, rng: np.random.Generator,
                cycle_noise_rel_std: float = 0.30) -> DeviceParams:
    """Return the device state after one coincidence pulse."""
    step = _noisy_magnitude(expected_step(d, direction), cycle_noise_rel_std, rng)
    sign = 1.0 if direction == UP else -1.0
    w = np.clip(d.w + sign * step, d.w_lo, d.w_hi)
    if np.ndim(w) == 0:
        w = float(w)
    return replace(d, w=w)


def pulse_inplace(d: DeviceParams, index, sign: np.ndarray, rng: np.random.Generator,
                  cycle_noise_rel_std: float, lo=None, hi=None) -> None:
    """Apply one pulse to the grid cells selected by ``index`` (mutates ``d.w``).

    ``sign`` holds +1 (up) or -1 (down) for each selected cell.  Precomputed
    bound arrays may be passed as ``lo``/``hi`` (already indexed).
    """
    w = d.w[index]
    ws = d.w_s[index]
    dw = d.dw_min0[index]
    x = w - ws
    step = np.where(sign > 0, dw * (1.0 - d.slope_p[index] * x), dw * (1.0 + d.slope_n[index] * x))
    step = _noisy_magnitude(np.maximum(step, 0.0), cycle_noise_rel_std, rng)
    if hi is None:
        hi = ws + _inverse_slope(d.slope_p[index])
    if lo is None:
        lo = ws - _inverse_slope(d.slope_n[index])
    d.w[index] = np.clip(w + sign * step, lo, hi)


def fg_decompose(d: DeviceParams, w: ArrayLike = None, dw_ref: ArrayLike = None):
    """Split the up/down responses into symmetric ``F`` and antisymmetric ``G`` parts.

    With ``dW = x * delta`` the realized expected update is
    ``w - eta*dW*F(w) - eta*|dW|*G(w)``.  A positive gradient drives down
    pulses, so ``G = (down - up) / (2*dw_ref)``, which makes ``G`` a
    restoring force about the symmetry point.  ``dw_ref`` defaults to the
    device's own ``dw_min0``.
    """
    if dw_ref is None:
        dw_ref = d.dw_min0
    up = expected_step(d, UP, w)
    down = expected_step(d, DOWN, w)
    f = (up + down) / (2.0 * dw_ref)
    g = (down - up) / (2.0 * dw_ref)
    return f, g


def branch_steps_from_fg(f: ArrayLike, g: ArrayLike, dw_ref: ArrayLike):
    """Inverse of :func:`fg_decompose`: return (up, down) expected step magnitudes."""
    return dw_ref * (f - g), dw_ref * (f + g)
