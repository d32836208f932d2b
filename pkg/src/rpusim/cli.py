"""Command-line entry point: ``rpusim {train,calibrate,sweep,device-curves} <config>``."""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from .calibration import calibrate
from .config import ConfigError, ExperimentConfig, load_config, parse_pairs, serialize_config
from .device import DevicePopulationConfig, DeviceParams, pulse_inplace, sample_devices
from .experiment import SWEEP_AXES, run_experiment, run_sweep
from .tile import AnalogTile


def _overrides(pairs):
    return parse_pairs(pairs or [])


def _load(args) -> ExperimentConfig:
    cfg = load_config(args.config, _overrides(args.set))
    if args.out:
        cfg.output.dir = args.out
    return cfg


def _out_dir(cfg) -> Path:
    out = Path(cfg.output.dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_train(args) -> int:
    cfg = _load(args)
    records = run_experiment(cfg)
    for r in records:
        print(f"epoch {r.epoch}: train_loss={r.train_loss:.4f} test={r.test_metric:.4f} "
              f"cycles={r.sgd_cycles}/{r.tt_cycles} clamps={r.pulse_prob_clamps}")
    print(f"metrics written to {Path(cfg.output.dir) / cfg.output.metrics_path}")
    return 0


def cmd_sweep(args) -> int:
    cfg = _load(args)
    values = [v.strip() for v in args.values.split(",") if v.strip()]
    if not values:
        raise ConfigError("--values needs at least one value")
    results = run_sweep(cfg, args.axis, values, jobs=args.jobs)
    for value, records in results.items():
        final = records[-1].test_metric if records else float("nan")
        print(f"{args.axis}={value}: final test metric {final:.4f}")
    print(f"comparison written to {Path(cfg.output.dir) / 'sweep.csv'}")
    return 0


def cmd_calibrate(args) -> int:
    """Calibrate one tile whose devices start at random weights within their bounds."""
    cfg = _load(args)
    out = _out_dir(cfg)
    rng = np.random.default_rng(cfg.seed)
    tile = AnalogTile(args.rows, args.cols, cfg.device, cfg.periphery, seed=cfg.seed)
    dev = tile.devices
    lo = np.maximum(tile._w_lo, -1.0)
    hi = np.minimum(tile._w_hi, 1.0)
    dev.w = rng.uniform(lo, hi)
    stats = calibrate(tile, cfg.calibration, rng)
    (out / "config.txt").write_text(serialize_config(cfg))
    with (out / "calibration.csv").open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["statistic", "value"])
        for key, value in stats.items():
            writer.writerow([key, repr(value)])
            print(f"{key}: {value}")
    if cfg.output.plot:
        from .plotting import plot_histogram

        plot_histogram(dev.w_s.ravel(), out / "calibration_offsets.svg", "symmetry point after calibration")
    return 0


def pulse_response(device: DeviceParams, n_up: int, n_down: int, noise: float, rng) -> np.ndarray:
    """Weights after each of ``n_up`` up pulses followed by ``n_down`` down pulses."""
    d = DeviceParams(*(np.atleast_1d(np.asarray(v, dtype=float)).copy() for v in
                       (device.dw_min0, device.slope_p, device.slope_n, device.w_s, device.w)))
    trace = [float(d.w[0])]
    for k in range(n_up + n_down):
        sign = np.array([1.0 if k < n_up else -1.0])
        pulse_inplace(d, slice(None), sign, rng, noise)
        trace.append(float(d.w[0]))
    return np.array(trace)


def symmetry_drive(device_cfg: DevicePopulationConfig, n_devices: int, n_pairs: int, rng) -> np.ndarray:
    """Distance to the symmetry point after each alternating pair, shape (n_pairs + 1, n_devices)."""
    d = sample_devices(device_cfg, rng, (n_devices,))
    lo = np.maximum(d.w_lo, -1.0)
    hi = np.minimum(d.w_hi, 1.0)
    d.w = np.linspace(0.0, 1.0, n_devices) * (hi - lo) + lo
    every = slice(None)
    up = np.ones(n_devices)
    trace = [d.w - d.w_s]
    for _ in range(n_pairs):
        pulse_inplace(d, every, up, rng, device_cfg.cycle_noise_rel_std)
        pulse_inplace(d, every, -up, rng, device_cfg.cycle_noise_rel_std)
        trace.append(d.w - d.w_s)
    return np.array(trace)


def cmd_device_curves(args) -> int:
    cfg = _load(args)
    out = _out_dir(cfg)
    rng = np.random.default_rng(cfg.seed)
    dev = cfg.device
    noise = dev.cycle_noise_rel_std
    mean_device = DeviceParams(dev.dw_min0_mean, dev.slope_p_mean, dev.slope_n_mean, 0.0, 0.0)
    kinds = {
        "ideal": DeviceParams(dev.dw_min0_mean, 0.0, 0.0, 0.0, 0.0),
        "symmetric": DeviceParams(dev.dw_min0_mean, dev.slope_p_mean, dev.slope_p_mean, 0.0, 0.0),
        "asymmetric": mean_device,
    }
    curves = {name: pulse_response(d, args.pulses, args.pulses, noise, rng) for name, d in kinds.items()}
    with (out / "pulse_response.csv").open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["pulse", *curves])
        for k in range(2 * args.pulses + 1):
            writer.writerow([k, *(repr(float(c[k])) for c in curves.values())])

    drive = symmetry_drive(dev, args.devices, args.pairs, rng)
    with (out / "symmetry_drive.csv").open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["pair", *(f"device_{i}" for i in range(drive.shape[1]))])
        for k, row in enumerate(drive):
            writer.writerow([k, *(repr(float(v)) for v in row)])
    (out / "config.txt").write_text(serialize_config(cfg))
    if cfg.output.plot:
        from .plotting import plot_pulse_response, plot_symmetry_drive

        plot_pulse_response(curves, out / "pulse_response.svg")
        plot_symmetry_drive(drive.T, out / "symmetry_drive.svg")
    print(f"pulse-response curves written to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rpusim", description="Resistive-array training simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("config", help="experiment config file (key = value lines)")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config value")
        p.add_argument("--out", help="output directory (overrides output.dir)")

    p = sub.add_parser("train", help="train one configuration")
    common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("calibrate", help="run symmetry-point calibration on one tile")
    common(p)
    p.add_argument("--rows", type=int, default=32)
    p.add_argument("--cols", type=int, default=32)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("sweep", help="train once per value of one parameter")
    common(p)
    p.add_argument("--axis", required=True, choices=sorted(SWEEP_AXES))
    p.add_argument("--values", required=True, help="comma-separated values")
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("device-curves", help="write pulse-response and symmetry-drive curves")
    common(p)
    p.add_argument("--pulses", type=int, default=1500, help="up pulses, then the same number of down pulses")
    p.add_argument("--pairs", type=int, default=1000, help="alternating pulse pairs")
    p.add_argument("--devices", type=int, default=8, help="devices in the symmetry-drive trace")
    p.set_defaults(func=cmd_device_curves)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # every failure maps to a nonzero exit
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
