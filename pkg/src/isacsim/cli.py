"""Command-line entry point.

Subcommands: calibrate, simulate, train, evaluate, sweep, ratio-study,
fd-check. Each reads a dotted-key config file, writes its outputs plus a
run manifest into --out, and exits 0 on success, 2 on configuration or
usage errors, 3 on numerical failures.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from . import admap, arrays, channel, estimator, gradients, harness, training
from .config import ExperimentConfig, config_hash, load_config
from .errors import (BudgetExhaustedError, CalibrationUnderpoweredError,
                     DegenerateCombinationError, NumericalFailureError,
                     SingularSystemError)
from .metrics import CSV_COLUMNS, build_manifest, write_csv, write_manifest
from .precoding import IsacKnobs

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

FD_TOLERANCE = 1e-6


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="isacsim",
                                     description="OFDM sensing/communication simulator")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in [
        ("calibrate", "calibrate the detection threshold on target-free episodes"),
        ("simulate", "dump per-episode simulation results"),
        ("train", "run the configured learning schedule"),
        ("evaluate", "measure detection/estimation/decoding metrics"),
        ("sweep", "trace the sensing/communication trade-off grid"),
        ("ratio-study", "train and evaluate across labeled-data ratios"),
        ("fd-check", "compare analytic gradients against finite differences"),
    ]:
        cmd = sub.add_parser(name, help=text)
        cmd.add_argument("--config", type=str, default=None, help="experiment file")
        cmd.add_argument("--seed", type=int, default=None, help="master seed override")
        cmd.add_argument("--out", type=str, default=None, help="output directory")
        cmd.add_argument("--method", type=str, default=None, help="method override")
        cmd.add_argument("--threads", type=int, default=1,
                         help="worker threads (speed only, never results)")
        if name == "simulate":
            cmd.add_argument("--episodes", type=int, default=100)
        if name in ("evaluate", "sweep"):
            cmd.add_argument("--checkpoint", type=str, default=None,
                             help="trained-state file for the mbml method")
        if name == "evaluate":
            cmd.add_argument("--eta", type=float, default=1.0)
            cmd.add_argument("--phic", type=float, default=0.0)
        if name == "fd-check":
            cmd.add_argument("--configs", type=int, default=20,
                             help="number of random spacing/episode draws")
    return parser


def _load_experiment(args) -> ExperimentConfig:
    if args.config is not None:
        if not os.path.exists(args.config):
            raise FileNotFoundError(f"config file not found: {args.config}")
        exp = load_config(args.config)
    else:
        exp = ExperimentConfig()
    if args.seed is not None:
        exp = exp.replace(scenario=exp.scenario.replace(master_seed=args.seed))
    if args.method is not None:
        exp = exp.replace(method=args.method)
    if args.out is not None:
        exp = exp.replace(out_dir=args.out)
    os.makedirs(exp.out_dir, exist_ok=True)
    return exp


def _finish(exp: ExperimentConfig, payloads: dict[str, bytes], started: float,
            warnings: list[str], extra: dict | None = None) -> None:
    manifest = build_manifest(exp, payloads, time.monotonic() - started,
                              warnings, extra)
    write_manifest(manifest, os.path.join(exp.out_dir, "manifest.json"))


def _load_spacings(exp: ExperimentConfig, checkpoint: str | None):
    if checkpoint is None:
        return None
    state = training.load_checkpoint(checkpoint)
    return state.spacings


def _cmd_calibrate(exp: ExperimentConfig, args) -> int:
    started = time.monotonic()
    cfg = exp.scenario
    d_true = channel.sample_impairment(cfg)
    spacings = harness.method_spacings(exp.method, cfg, d_true, None)
    f = harness.method_precoder(cfg, spacings, IsacKnobs(eta=1.0))
    calib = admap.calibrate_threshold(exp.evaluation.target_pfa,
                                      exp.evaluation.n_calibration, cfg, spacings, f)
    out = {
        "target_pfa": calib.target_pfa,
        "threshold": calib.threshold,
        "threshold_hex": calib.threshold.hex(),
        "n_samples": calib.n_samples,
        "empirical_pfa": calib.empirical_pfa,
    }
    path = os.path.join(exp.out_dir, "calibration.json")
    payload = (json.dumps(out, indent=1, sort_keys=True) + "\n").encode()
    with open(path, "wb") as fh:
        fh.write(payload)
    _finish(exp, {"calibration.json": payload}, started, [])
    print(f"threshold {calib.threshold:.6g} at target pfa {calib.target_pfa:g} "
          f"(empirical {calib.empirical_pfa:.4g})")
    return EXIT_OK


def _cmd_simulate(exp: ExperimentConfig, args) -> int:
    started = time.monotonic()
    cfg = exp.scenario
    d_true = channel.sample_impairment(cfg)
    spacings = harness.method_spacings(exp.method, cfg, d_true, None)
    f = harness.method_precoder(cfg, spacings, IsacKnobs(eta=1.0))
    calib = admap.calibrate_threshold(exp.evaluation.target_pfa,
                                      exp.evaluation.n_calibration, cfg, spacings, f)
    grids = admap.sector_grids(cfg)
    phi_m = arrays.steering_matrix(grids.angles, spacings, cfg)
    phi_d = arrays.delay_matrix(grids.delays, cfg)
    table = channel.constellation(cfg.constellation_size)

    lines = ["episode,present,theta_rad,range_m,peak,detected,angle_est_rad,"
             "range_est_m,symbol_errors"]
    batch = channel.sample_episode_batch(cfg, d_true, np.arange(args.episodes),
                                         "evaluation")
    filtered = channel.filtered_observations(batch, f, cfg)
    values = admap.batch_map_values(filtered, phi_m, phi_d)
    received, csi = channel.comm_observations(batch, f, d_true, cfg)
    decoded = channel.mle_decode(received, csi, table)
    for e in range(args.episodes):
        one = admap.AngleDelayMap(values=values[e], angles=grids.angles,
                                  delays=grids.delays)
        det = admap.maprt_detect(one, calib.threshold)
        errs = int((decoded[e] != batch.messages[e]).sum())
        lines.append(",".join([
            repr(int(batch.ids[e])), repr(bool(batch.present[e])),
            repr(float(batch.theta[e])), repr(float(batch.range_m[e])),
            repr(det.peak), repr(det.detected),
            repr(det.angle) if det.detected else "nan",
            repr(det.range_m) if det.detected else "nan",
            repr(errs),
        ]))
    payload = ("\n".join(lines) + "\n").encode()
    path = os.path.join(exp.out_dir, "episodes.csv")
    with open(path, "wb") as fh:
        fh.write(payload)
    _finish(exp, {"episodes.csv": payload}, started, [],
            extra={"threshold": calib.threshold})
    print(f"wrote {args.episodes} episodes to {path}")
    return EXIT_OK


def _cmd_train(exp: ExperimentConfig, args) -> int:
    started = time.monotonic()
    cfg = exp.scenario
    if not exp.train_phases:
        raise ValueError("train requires train.phases in the config")
    d_true = channel.sample_impairment(cfg)
    state = training.train(cfg, exp.train_phases, d_true,
                           labeled_budget=exp.labeled_budget,
                           temperature=exp.train_temperature)
    ckpt_path = os.path.join(exp.out_dir, "checkpoint.json")
    training.save_checkpoint(state, ckpt_path, config_hash(exp))

    lines = ["iteration,loss"]
    for it, loss in enumerate(state.loss_history):
        lines.append(f"{it},{loss!r}")
    payload = ("\n".join(lines) + "\n").encode()
    loss_path = os.path.join(exp.out_dir, "training_loss.csv")
    with open(loss_path, "wb") as fh:
        fh.write(payload)
    _finish(exp, {"training_loss.csv": payload}, started, [],
            extra={"checkpoint": ckpt_path, "final_loss": state.loss_history[-1]
                   if state.loss_history else None})
    print(f"trained {state.step_count} iterations; checkpoint at {ckpt_path}")
    return EXIT_OK


def _cmd_evaluate(exp: ExperimentConfig, args) -> int:
    started = time.monotonic()
    d_hat = _load_spacings(exp, args.checkpoint)
    record, detail = harness.evaluate(
        exp, d_hat=d_hat, knobs=IsacKnobs(eta=args.eta, phi_c=args.phic),
        threads=args.threads,
    )
    payload = write_csv([record], os.path.join(exp.out_dir, "metrics.csv"))
    _finish(exp, {"metrics.csv": payload}, started, list(detail.warnings),
            extra={"threshold": detail.threshold})
    print(f"{record.method}: pmd={record.pmd!r} pfa={record.pfa!r} "
          f"rmse_m={record.rmse_m!r} ser={record.ser!r}")
    return EXIT_OK


def _cmd_sweep(exp: ExperimentConfig, args) -> int:
    started = time.monotonic()
    d_hat = _load_spacings(exp, args.checkpoint)
    result = harness.pareto_sweep(exp, methods=[exp.method], d_hat=d_hat,
                                  threads=args.threads)
    records = result[exp.method]["records"]
    front = result[exp.method]["front"]
    payloads = {
        "metrics.csv": write_csv(records, os.path.join(exp.out_dir, "metrics.csv")),
        "pareto.csv": write_csv(front, os.path.join(exp.out_dir, "pareto.csv")),
    }
    _finish(exp, payloads, started, [],
            extra={"threshold": result[exp.method]["threshold"]})
    print(f"swept {len(records)} points; front keeps {len(front)}")
    return EXIT_OK


def _cmd_ratio_study(exp: ExperimentConfig, args) -> int:
    started = time.monotonic()
    rows = harness.labeled_ratio_study(exp, threads=args.threads)
    lines = ["ratio," + ",".join(CSV_COLUMNS)]
    for row in rows:
        r = row["record"]
        lines.append(",".join([
            repr(row["ratio"]), r.method, repr(r.seed), repr(r.eta), repr(r.phic),
            repr(r.pmd), repr(r.pfa), repr(r.rmse_m), repr(r.ser), repr(r.n_eval),
        ]))
    payload = ("\n".join(lines) + "\n").encode()
    path = os.path.join(exp.out_dir, "ratio_study.csv")
    with open(path, "wb") as fh:
        fh.write(payload)
    warnings = [w for row in rows for w in row["detail"].warnings]
    _finish(exp, {"ratio_study.csv": payload}, started, warnings)
    print(f"wrote {len(rows)} ratio rows to {path}")
    return EXIT_OK


def _cmd_fd_check(exp: ExperimentConfig, args) -> int:
    started = time.monotonic()
    cfg = exp.scenario.replace(n_antennas=8, n_subcarriers=16, n_angle_grid=90,
                               n_range_grid=25)
    window = estimator.resolution_window(cfg)
    worst = 0.0
    rng = np.random.default_rng(cfg.master_seed)
    for trial in range(args.configs):
        d_hat = channel.sample_impairment(cfg, rng=rng)
        d_true = channel.sample_impairment(cfg, rng=rng)
        sector = cfg.target_angle_prior
        batch = channel.sample_episode_batch(cfg, d_true, [trial], "fd-check",
                                             sector=sector, force_present=True)
        for kind in ("sl", "ul"):
            for flags in (gradients.PathFlags(rx=True, tx=False),
                          gradients.PathFlags(rx=True, tx=True)):
                report = gradients.batch_loss_and_gradient(
                    d_hat, batch, cfg, sector, kind, flags=flags, window=window)
                fd = gradients.finite_difference_gradient(
                    d_hat, batch, cfg, sector, kind, flags=flags, window=window)
                err = float(np.linalg.norm(report.grad - fd)
                            / max(np.linalg.norm(fd), 1e-300))
                worst = max(worst, err)
    out = {"configs": args.configs, "max_relative_error": worst,
           "tolerance": FD_TOLERANCE}
    payload = (json.dumps(out, indent=1, sort_keys=True) + "\n").encode()
    with open(os.path.join(exp.out_dir, "fd_check.json"), "wb") as fh:
        fh.write(payload)
    _finish(exp, {"fd_check.json": payload}, started, [])
    print(f"max relative error {worst:.3e} over {args.configs} configurations")
    if not worst < FD_TOLERANCE:
        print(f"exceeds tolerance {FD_TOLERANCE:g}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


_COMMANDS = {
    "calibrate": _cmd_calibrate,
    "simulate": _cmd_simulate,
    "train": _cmd_train,
    "evaluate": _cmd_evaluate,
    "sweep": _cmd_sweep,
    "ratio-study": _cmd_ratio_study,
    "fd-check": _cmd_fd_check,
}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        exp = _load_experiment(args)
        return _COMMANDS[args.command](exp, args)
    except (FileNotFoundError, ValueError, CalibrationUnderpoweredError,
            BudgetExhaustedError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalFailureError, SingularSystemError,
            DegenerateCombinationError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
