"""Run orchestration: build a network from a config, train, evaluate and persist per-epoch records."""

from __future__ import annotations

import csv
import dataclasses
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterator, List, Sequence

from .config import ConfigError, ExperimentConfig, build_config, serialize_config
from .data import data_root, load_char_corpus, load_mnist, make_toy
from .networks import spec as presets
from .networks.trainer import NetworkState, evaluate, train_epoch

# sweepable axes and the config key each one sets
SWEEP_AXES = {
    "gamma": "tiki.gamma",
    "lambda_c": "tiki.lambda_c",
    "ns": "tiki.ns",
    "transfer_vectors": "tiki.transfer_vectors",
    "threshold_Tv": "tiki.threshold_tv",
    "symmetry_offset_std": "device.symmetry_offset_std",
    "mvm_noise_std": "periphery.mvm_noise_std",
    "mode": "trainer.mode",
    "eta": "trainer.eta",
}


class ExperimentError(RuntimeError):
    pass


@dataclass
class RunRecord:
    epoch: int
    train_loss: float
    test_metric: float
    sgd_cycles: int
    tt_cycles: int
    pulse_prob_clamps: int
    wall_seconds: float


# wall-clock time varies between identical runs, so it goes to a separate file
METRIC_FIELDS = [f.name for f in dataclasses.fields(RunRecord) if f.name != "wall_seconds"]
TIMING_FIELDS = ["epoch", "wall_seconds"]


def build_spec(cfg: ExperimentConfig, vocab_size: int = None) -> presets.NetworkSpec:
    m = cfg.model
    if cfg.preset == "fcn_mnist":
        return presets.fcn_mnist(m.hidden)
    if cfg.preset == "cnn_mnist":
        return presets.cnn_mnist()
    if cfg.preset == "lstm_wp":
        return presets.lstm_wp(vocab_size, m.lstm_hidden)
    return presets.toy(m.toy_inputs, m.toy_hidden, m.toy_classes)


def _subset(ds, size: int, what: str):
    if size and size > len(ds):
        raise ConfigError(f"{what} subset size {size} exceeds the {len(ds)} available samples")
    return ds.subset(size) if size else ds


def load_data(cfg: ExperimentConfig):
    """Return (train, test) for the preset, honouring the configured subset sizes."""
    d = cfg.data
    if cfg.preset in ("fcn_mnist", "cnn_mnist"):
        root = Path(d.mnist_dir) if d.mnist_dir else data_root() / "mnist"
        if not root.is_dir():
            raise ConfigError(f"MNIST directory {root} does not exist")
        train = _subset(load_mnist(root, "train"), d.train_subset_size, "train")
        test = _subset(load_mnist(root, "test"), d.test_subset_size, "test")
        return train, test
    if cfg.preset == "lstm_wp":
        path = Path(d.corpus_path) if d.corpus_path else data_root() / "corpus.txt"
        if not path.is_file():
            raise ConfigError(f"corpus file {path} does not exist")
        train, test, _ = load_char_corpus(path, d.corpus_test_size or None)
        if d.train_subset_size:
            train = dataclasses.replace(train, symbols=train.symbols[:d.train_subset_size])
        if d.test_subset_size:
            test = dataclasses.replace(test, symbols=test.symbols[:d.test_subset_size])
        return train, test
    m = cfg.model
    # the toy data are fixed; the run seed only drives initialization, shuffling and noise
    return make_toy(d.toy_train, d.toy_test, m.toy_inputs, m.toy_classes, seed=0)


def build_state(cfg: ExperimentConfig, train=None) -> NetworkState:
    vocab = len(train.vocab) if cfg.preset == "lstm_wp" else None
    spec = build_spec(cfg, vocab)
    return NetworkState(spec, cfg.trainer_config(), cfg.device, cfg.periphery, cfg.tiki, cfg.calibration)


def _record(state: NetworkState, epoch: int, loss: float, metric: float, seconds: float) -> RunRecord:
    counter = state.cycle_counters()[state.bottleneck_layer()]
    return RunRecord(epoch, loss, metric, counter.sgd_cycles, counter.total_cycles, state.prob_clamps(), seconds)


def iter_experiment(cfg: ExperimentConfig, train=None, test=None) -> Iterator[RunRecord]:
    """Yield one record per epoch.  Data may be passed in to share it between runs."""
    if train is None or test is None:
        train, test = load_data(cfg)
    state = build_state(cfg, train)
    for epoch in range(1, cfg.trainer.epochs + 1):
        start = time.perf_counter()
        loss = train_epoch(state, train)
        metric = evaluate(state, test)
        yield _record(state, epoch, loss, metric, time.perf_counter() - start)


def _fmt(value):
    return repr(value) if isinstance(value, float) else str(value)


def write_records(records: Sequence[RunRecord], path, fields=METRIC_FIELDS, extra: Dict[str, object] = None):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    extra = extra or {}
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([*extra, *fields])
        for r in records:
            writer.writerow([*map(_fmt, extra.values()), *(_fmt(getattr(r, f)) for f in fields)])
    return path


def read_records(path) -> List[dict]:
    with Path(path).open() as fh:
        return list(csv.DictReader(fh))


def metric_label(cfg: ExperimentConfig) -> str:
    return "test cross-entropy" if cfg.preset == "lstm_wp" else "test error (%)"


def run_experiment(cfg: ExperimentConfig, out_dir=None, train=None, test=None) -> List[RunRecord]:
    """Train per ``cfg`` and write the resolved config, metrics.csv, timing.csv and an optional plot.

    Module errors are re-raised as :class:`ExperimentError` with the run context.
    """
    out = Path(out_dir if out_dir is not None else cfg.output.dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.txt").write_text(serialize_config(cfg))
    records = []
    try:
        for record in iter_experiment(cfg, train, test):
            records.append(record)
            # rewrite after every epoch so a partial run still leaves usable output
            write_records(records, out / cfg.output.metrics_path)
            write_records(records, out / "timing.csv", TIMING_FIELDS)
    except ConfigError:
        raise
    except Exception as exc:
        raise ExperimentError(f"{cfg.preset}/{cfg.trainer.mode} run with seed {cfg.seed} failed: {exc}") from exc
    if not records:
        write_records(records, out / cfg.output.metrics_path)
    if cfg.output.plot and records:
        from .plotting import plot_learning_curves

        plot_learning_curves({cfg.trainer.mode: ([r.epoch for r in records], [r.test_metric for r in records])},
                             out / cfg.output.plot_path, metric_label(cfg), log_y=cfg.preset == "lstm_wp")
    return records


def sweep_key(axis: str) -> str:
    if axis in SWEEP_AXES:
        return SWEEP_AXES[axis]
    raise ConfigError(f"unknown sweep axis {axis!r}; choose from {sorted(SWEEP_AXES)}")


def _sweep_one(args):
    cfg, out_dir = args
    return run_experiment(cfg, out_dir)


def run_sweep(base: ExperimentConfig, axis: str, values: Sequence, out_dir=None, jobs: int = 1):
    """One run per value in ``<out>/<axis>=<value>/`` plus a combined ``sweep.csv`` and plot.

    Returns ``{value: records}`` keyed by the value's string form.
    """
    key = sweep_key(axis)
    out = Path(out_dir if out_dir is not None else base.output.dir)
    labels = [str(v) for v in values]
    if len(set(labels)) != len(labels):
        raise ConfigError("sweep values must be distinct")
    jobs_args = []
    for label in labels:
        run_dir = out / f"{axis}={label}"
        cfg = build_config({key: label, "output.dir": str(run_dir)}, base)
        jobs_args.append((cfg, run_dir))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_sweep_one, jobs_args))
    else:
        shared = None
        if base.preset != "toy":
            shared = load_data(base)
        results = [run_experiment(cfg, d, *(shared or (None, None))) for cfg, d in jobs_args]
    by_value = dict(zip(labels, results))

    rows = []
    with (out / "sweep.csv").open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["axis", "value", *METRIC_FIELDS])
        for label, records in by_value.items():
            for r in records:
                writer.writerow([axis, label, *(_fmt(getattr(r, f)) for f in METRIC_FIELDS)])
                rows.append(r)
    if base.output.plot and rows:
        from .plotting import plot_learning_curves

        series = {f"{axis}={label}": ([r.epoch for r in recs], [r.test_metric for r in recs])
                  for label, recs in by_value.items()}
        plot_learning_curves(series, out / "sweep.svg", metric_label(base), log_y=base.preset == "lstm_wp")
    return by_value
