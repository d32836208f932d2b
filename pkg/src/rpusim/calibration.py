"""Symmetry-point shifting: drive devices to their symmetry point, then re-zero the reference."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tile import AnalogTile


@dataclass
class CalibrationConfig:
    """``programming_error_std`` of None means: reuse the device population's symmetry offset std."""

    n_pairs: int = 2000
    programming_error_std: float = None

    def __post_init__(self):
        if self.n_pairs < 1:
            raise ValueError("n_pairs must be >= 1")
        if self.programming_error_std is not None and self.programming_error_std < 0:
            raise ValueError("programming_error_std must be non-negative")


def alternating_pulse_drive(tile: AnalogTile, n_pairs: int, rng: np.random.Generator = None) -> None:
    """Apply ``n_pairs`` (up, down) pulse pairs to every device of the tile in parallel."""
    if n_pairs < 1:
        raise ValueError("n_pairs must be >= 1")
    rng = rng if rng is not None else tile.rng
    dev = tile.devices
    noise = tile.device_cfg.cycle_noise_rel_std
    w = dev.w
    lo, hi = tile._w_lo, tile._w_hi
    up_gain = dev.dw_min0 * dev.slope_p
    dn_gain = dev.dw_min0 * dev.slope_n
    for _ in range(n_pairs):
        rel = w - dev.w_s
        step = np.maximum(dev.dw_min0 - up_gain * rel, 0.0)
        if noise > 0:
            step *= np.maximum(1.0 + noise * rng.standard_normal(step.shape), 0.0)
        w = np.clip(w + step, lo, hi)
        rel = w - dev.w_s
        step = np.maximum(dev.dw_min0 + dn_gain * rel, 0.0)
        if noise > 0:
            step *= np.maximum(1.0 + noise * rng.standard_normal(step.shape), 0.0)
        w = np.clip(w - step, lo, hi)
    dev.w = w


def transfer_to_reference(tile: AnalogTile, programming_error_std: float, rng: np.random.Generator = None,
                          keep_drive_residual: bool = False) -> None:
    """Copy each device's present state onto its reference device.

    Afterwards every weight reads zero and the symmetry point sits at the
    reference programming error, drawn from Gaussian(0, std).  With
    ``keep_drive_residual`` the leftover distance between the driven state
    and the true symmetry point is carried into the new offset as well.
    """
    rng = rng if rng is not None else tile.rng
    dev = tile.devices
    residual = rng.normal(0.0, programming_error_std, tile.shape) if programming_error_std > 0 else np.zeros(tile.shape)
    if keep_drive_residual:
        residual = residual + (dev.w_s - dev.w)
    dev.w_s = residual
    dev.w = np.zeros(tile.shape)
    tile.refresh_bounds()


def calibrate(tile: AnalogTile, cfg: CalibrationConfig, rng: np.random.Generator = None) -> dict:
    """Drive then transfer; return offset statistics before and after."""
    rng = rng if rng is not None else tile.rng
    std = cfg.programming_error_std
    if std is None:
        std = tile.device_cfg.symmetry_offset_std
    before = np.abs(tile.devices.w - tile.devices.w_s)
    alternating_pulse_drive(tile, cfg.n_pairs, rng)
    driven = np.abs(tile.devices.w - tile.devices.w_s)
    transfer_to_reference(tile, std, rng)
    offsets = tile.devices.w_s
    return {
        "n_devices": int(offsets.size),
        "mean_abs_offset_before": float(before.mean()),
        "mean_abs_offset_driven": float(driven.mean()),
        "offset_std_after": float(np.std(offsets)),
        "mean_abs_offset_after": float(np.mean(np.abs(offsets))),
    }
