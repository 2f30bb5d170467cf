"""Command-line experiment runner.

    simwave <mode> [--config cfg.json] [--out DIR] [--seed N] [--quiet]

Modes: fit-operator, train-classifier, evaluate, gen-dataset, grad-check.
Exit status: 0 on success, 1 on numerical failure or a failed check,
2 on configuration or I/O errors.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from simwave import io
from simwave.channel import ground_array_positions, los_component, sample_rician
from simwave.config import MODES, ExperimentConfig, dump_config, parse_config
from simwave.core import (PhaseProfile, SimGeometry, build_propagation_set, cascade_response,
                          exit_aperture_positions, source_positions)
from simwave.errors import ConfigError, DomainError, NumericalError
from simwave.optimize import finite_difference_check, fit_operator, quadratic_loss
from simwave.tasks.classifier import (ClassifierConfig, classifier_setup, evaluate_classifier,
                                      train_classifier)
from simwave.tasks.data import gen_synthetic_dataset
from simwave.tasks.dnn import dnn_baseline, matched_hidden_dim
from simwave.tasks.operators import dft_target, sum_rate, zf_target


class RunError(Exception):
    """Failure that maps to a nonzero exit status."""

    def __init__(self, message: str, status: int = 2):
        super().__init__(message)
        self.status = status


def _load_dataset(cfg: ExperimentConfig, geometry: SimGeometry):
    c = cfg["classifier"]
    if c["dataset_path"]:
        path = Path(c["dataset_path"])
        if not path.is_file():
            raise RunError(f"dataset file not found: {path}")
        data = io.read_dataset(path, seed=cfg.seed)
    else:
        data = gen_synthetic_dataset(c["class_count"], c["per_class"], geometry.per_layer,
                                     seed=cfg.seed, grid=(geometry.n_y, geometry.n_x))
    if data.dim != geometry.per_layer:
        raise RunError(f"dataset dim {data.dim} does not match the {geometry.per_layer} "
                       "layer-1 elements")
    if data.class_count != c["class_count"]:
        raise RunError(f"dataset has {data.class_count} classes, config expects {c['class_count']}")
    return data


def _classifier_config(cfg: ExperimentConfig) -> ClassifierConfig:
    c = cfg["classifier"]
    return ClassifierConfig(class_count=c["class_count"], readout_antennas=c["class_count"],
                            rotation_deg=c["rotation_deg"], rotation_enabled=c["rotation_enabled"],
                            beta=c["beta"], train=cfg.train(), channel=cfg.channel())


def run_grad_check(cfg: ExperimentConfig, out: Path) -> str:
    gc = cfg["grad_check"]
    base = cfg.geometry()
    geometry = SimGeometry(layers=gc["layers"], n_x=gc["n_x"], n_y=gc["n_y"],
                           depth=base.depth, carrier_freq=base.carrier_freq)
    props = build_propagation_set(geometry, 2, exit_aperture_positions(geometry),
                                  sources=source_positions(geometry, 2))
    rows = []
    for trial in range(gc["trials"]):
        rng = np.random.default_rng([cfg.seed, trial])
        phases = PhaseProfile.random(geometry, rng)
        G = cascade_response(props, phases).G
        scale = np.sqrt(np.mean(np.abs(G) ** 2))
        target = scale * (rng.standard_normal(G.shape) + 1j * rng.standard_normal(G.shape))
        report = finite_difference_check(props, phases, quadratic_loss(target), gc["step"])
        rows.append((trial, report.max_rel_error))
    io.write_csv(out / "grad_check.csv", ["trial", "max_rel_error"], rows)
    worst = max(e for _, e in rows)
    summary = (f"grad-check: max_rel_error={worst:.3e} over {len(rows)} stacks "
               f"(tolerance {gc['tolerance']:.0e})")
    if worst >= gc["tolerance"]:
        raise RunError(summary + " FAILED", status=1)
    return summary


def run_fit_operator(cfg: ExperimentConfig, out: Path) -> str:
    op = cfg["operator"]
    geometry = cfg.geometry()
    if op["target"] == "dft":
        n = op["size"]
        sources = source_positions(geometry, n)
        outputs = sources.copy()
        outputs[:, 2] = geometry.layers * geometry.layer_gap
        target = dft_target(n)
        H = None
    else:
        chan_cfg = cfg.channel()
        n = chan_cfg.rx_count
        sources = source_positions(geometry, n)
        outputs = exit_aperture_positions(geometry)
        los = los_component(geometry, ground_array_positions(geometry, chan_cfg))
        H = sample_rician(chan_cfg, los, draw=0, carrier_freq=geometry.carrier_freq).H
        target = zf_target(H, op["power"])
    props = build_propagation_set(geometry, n, outputs, sources=sources)
    train = cfg.train()
    try:
        result = fit_operator(props, target, train)
    except NumericalError as exc:
        part = exc.partial
        _write_fit_history(out, part.losses, part.quantized_losses)
        raise RunError(str(exc), status=1) from exc
    _write_fit_history(out, result.losses, result.quantized_losses)
    io.write_weights(out / "weights.simp", result.phases, geometry.n_x, geometry.n_y)
    summary = f"fit-operator ({op['target']}): initial NMSE {result.losses[0]:.4e}, best {result.best_loss:.4e}"
    if H is not None:
        noise = cfg.channel().noise_power
        G_fit = cascade_response(props, result.phases).G
        G_init = cascade_response(props, PhaseProfile(
            np.random.default_rng(train.seed).uniform(0, 2 * np.pi, (props.depth, props.per_layer)))).G

        def at_power(P):
            return P * np.sqrt(op["power"] / np.vdot(P, P).real)
        rates = [("zf_digital", sum_rate(H, target, noise)),
                 ("sim_fitted", sum_rate(H, at_power(G_fit), noise)),
                 ("sim_initial", sum_rate(H, at_power(G_init), noise))]
        io.write_csv(out / "sum_rate.csv", ["precoder", "sum_rate"], rates)
        summary += f", sum rate {rates[1][1]:.3f} bit/s/Hz (digital ZF {rates[0][1]:.3f})"
    return summary


def _write_fit_history(out: Path, losses, qlosses) -> None:
    io.write_csv(out / "loss_history.csv", ["epoch", "loss", "quantized_loss"],
                 ((e, l, q) for e, (l, q) in enumerate(zip(losses, qlosses))))


def run_gen_dataset(cfg: ExperimentConfig, out: Path) -> str:
    geometry = cfg.geometry()
    c = cfg["classifier"]
    data = gen_synthetic_dataset(c["class_count"], c["per_class"], geometry.per_layer,
                                 seed=cfg.seed, grid=(geometry.n_y, geometry.n_x))
    io.write_dataset(out / "dataset.simd", data)
    n_train = int(data.is_train.sum())
    return (f"gen-dataset: {len(data)} samples ({n_train} train / {len(data) - n_train} test), "
            f"{data.class_count} classes, dim {data.dim}")


def run_train_classifier(cfg: ExperimentConfig, out: Path) -> str:
    geometry = cfg.geometry()
    data = _load_dataset(cfg, geometry)
    ccfg = _classifier_config(cfg)
    props, chan = classifier_setup(geometry, ccfg.channel, draw=cfg["classifier"]["channel_draw"])
    try:
        result = train_classifier(data, props, ccfg, chan)
    except NumericalError as exc:
        io.write_history(out / "history.csv", exc.partial)
        raise RunError(str(exc), status=1) from exc
    io.write_history(out / "history.csv", result.history)
    io.write_weights(out / "weights.simp", result.phases, geometry.n_x, geometry.n_y)
    rot = ccfg.rotation_deg if ccfg.rotation_enabled else 0.0
    cm = evaluate_classifier(result.phases, props, chan, data.split("test"), rot)
    io.write_confusion(out / "confusion.csv", cm.counts)
    summary = f"train-classifier: test accuracy {cm.accuracy:.4f} (best epoch {result.best_epoch})"

    c = cfg["classifier"]
    if c["dnn_baseline"]:
        phases = geometry.total_elements
        hidden = c["dnn_hidden"] or matched_hidden_dim(phases, data.dim, data.class_count)
        try:
            dnn = dnn_baseline(data, hidden, ccfg.train, phase_count=phases, rotation_deg=rot)
        except NumericalError as exc:
            io.write_history(out / "dnn_history.csv", exc.partial)
            raise RunError(str(exc), status=1) from exc
        io.write_history(out / "dnn_history.csv", dnn.history)
        io.write_confusion(out / "dnn_confusion.csv", dnn.confusion.counts)
        summary += f", DNN test accuracy {dnn.confusion.accuracy:.4f} (hidden {hidden})"
    return summary


def run_evaluate(cfg: ExperimentConfig, out: Path) -> str:
    c = cfg["classifier"]
    if not c["weights_path"]:
        raise RunError("evaluate needs classifier.weights_path")
    path = Path(c["weights_path"])
    if not path.is_file():
        raise RunError(f"weights file not found: {path}")
    phases, n_x, n_y = io.read_weights(path)
    geometry = cfg.geometry()
    if (phases.layers, n_x, n_y) != (geometry.layers, geometry.n_x, geometry.n_y):
        raise RunError(f"weights {path} are for a {phases.layers}x{n_x}x{n_y} stack, "
                       f"config describes {geometry.layers}x{geometry.n_x}x{geometry.n_y}")
    data = _load_dataset(cfg, geometry)
    ccfg = _classifier_config(cfg)
    props, chan = classifier_setup(geometry, ccfg.channel, draw=c["channel_draw"])
    rot = ccfg.rotation_deg if ccfg.rotation_enabled else 0.0
    cm = evaluate_classifier(phases, props, chan, data.split("test"), rot)
    io.write_confusion(out / "confusion.csv", cm.counts)
    return f"evaluate: test accuracy {cm.accuracy:.4f} over {cm.total} samples"


RUNNERS = {
    "grad-check": run_grad_check,
    "fit-operator": run_fit_operator,
    "gen-dataset": run_gen_dataset,
    "train-classifier": run_train_classifier,
    "evaluate": run_evaluate,
}


def run(cfg: ExperimentConfig, quiet: bool = False) -> int:
    """Execute one experiment; returns the process exit status."""
    out = Path(cfg.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        (out / "resolved_config.json").write_text(dump_config(cfg), encoding="utf-8")
        summary = RUNNERS[cfg.mode](cfg, out)
    except RunError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.status
    except (DomainError, ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if not quiet:
        print(summary)
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="simwave", description=__doc__.splitlines()[0])
    parser.add_argument("mode", choices=MODES)
    parser.add_argument("--config", help="JSON configuration file (defaults apply when omitted)")
    parser.add_argument("--out", help="output directory (overrides output_dir)")
    parser.add_argument("--seed", type=int, help="seed for every random stream (overrides config)")
    parser.add_argument("--quiet", action="store_true", help="suppress the summary line")
    args = parser.parse_args(argv)

    try:
        text = Path(args.config).read_text(encoding="utf-8") if args.config else ""
        cfg = parse_config(text, mode=args.mode, seed=args.seed, output_dir=args.out)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: cannot read config {args.config}: {exc}", file=sys.stderr)
        return 2
    return run(cfg, quiet=args.quiet)


if __name__ == "__main__":
    sys.exit(main())
