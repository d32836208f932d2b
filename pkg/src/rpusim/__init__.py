"""Simulation of neural-network training on resistive cross-point arrays."""

from .device import DeviceParams, DevicePopulationConfig, apply_pulse, expected_step, fg_decompose, sample_device
from .tile import AnalogTile, PeripheryConfig, quantize
from .calibration import CalibrationConfig, alternating_pulse_drive, calibrate, transfer_to_reference
from .tiki_taka import TikiTakaConfig, TikiTakaLayer, TransferVectors, cycle_count, threshold_filter

__version__ = "0.1.0"
