"""Command-line entry point for landing trials and experiments."""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import harness, simworld
from .errors import ConfigError, IoFailure

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_TIMEOUT = 3


def _parse_args(argv):
    parser = argparse.ArgumentParser(
        prog="land-sim",
        description="Closed-loop monocular landing simulation")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a single landing trial")
    run.add_argument("--config", required=True)
    run.add_argument("--controller", choices=["p", "pd", "pid"])
    run.add_argument("--seed", type=int)
    run.add_argument("--out", default=".")

    exp = sub.add_parser("experiment", help="run several seeded trials")
    exp.add_argument("--config", required=True)
    exp.add_argument("--trials", type=int, required=True)
    exp.add_argument("--seeds", help="comma-separated seed list")
    exp.add_argument("--controller", choices=["p", "pd", "pid"])
    exp.add_argument("--out", default=".")

    sweep = sub.add_parser("detector-sweep",
                           help="static-hover raw vs. filtered error tables")
    sweep.add_argument("--config", required=True)
    sweep.add_argument("--frames", type=int, default=1000)
    sweep.add_argument("--seed", type=int, default=0)
    sweep.add_argument("--out", default=".")

    wind = sub.add_parser("wind-sweep",
                          help="landing robustness across wind biases")
    wind.add_argument("--config", required=True)
    wind.add_argument("--bias-list", default="0,0.25,0.5")
    wind.add_argument("--trials", type=int, default=5)
    wind.add_argument("--out", default=".")

    return parser.parse_args(argv)


def _overrides(args) -> dict:
    ov = {}
    if getattr(args, "controller", None):
        ov["controller"] = args.controller
    if getattr(args, "seed", None) is not None:
        ov["seed"] = args.seed
    return ov


def _write_trial(log, out_dir: Path, name: str) -> None:
    harness.export_csv(harness.TRIAL_COLUMNS, harness.trial_rows(log),
                       out_dir / name)


def _cmd_run(args, out_dir: Path) -> int:
    cfg = harness.load_config(args.config, _overrides(args))
    log = harness.run_trial(cfg)
    _write_trial(log, out_dir, f"trial_{cfg.controller_kind}_{cfg.seed}.csv")
    summary = harness.summarize_errors(log)
    harness.export_csv(harness.SUMMARY_COLUMNS,
                       harness.summary_rows([summary]), out_dir / "summary.csv")
    if log.timed_out:
        print("trial timed out without touchdown")
        return EXIT_TIMEOUT
    print(f"touchdown at {log.touchdown_time:.2f} s, "
          f"offset {np.linalg.norm(summary.land_offset_m):.3f} m")
    return EXIT_OK


def _cmd_experiment(args, out_dir: Path) -> int:
    cfg = harness.load_config(args.config, _overrides(args))
    if args.seeds:
        seeds = [int(s) for s in args.seeds.split(",") if s]
    else:
        seeds = list(range(args.trials))
    if len(seeds) != args.trials:
        raise ConfigError("--trials must match the number of --seeds")
    logs, summaries, agg = harness.run_experiment(cfg, seeds)
    for log in logs:
        _write_trial(log, out_dir,
                     f"trial_{log.cfg.controller_kind}_{log.cfg.seed}.csv")
    harness.export_csv(harness.SUMMARY_COLUMNS,
                       harness.summary_rows(summaries), out_dir / "summary.csv")
    print(f"success rate {agg['success_rate']:.2f}, "
          f"mean offset {agg['mean_offset_m']:.3f} m, "
          f"mean touchdown {agg['mean_touchdown_s']:.1f} s")
    return EXIT_OK


def _cmd_detector_sweep(args, out_dir: Path) -> int:
    cfg = harness.load_config(args.config)
    presets = {k: v for k, v in simworld.NOISE_PRESETS.items() if k != "zero"}
    results = harness.detector_noise_sweep(cfg, presets, args.frames,
                                           args.seed)
    variables = ["xc_px", "yc_px", "ow_px", "oh_px", "theta_deg"]
    for name, res in results.items():
        rows = [[var, res["raw_avg"][i], res["raw_std"][i],
                 res["filt_avg"][i], res["filt_std"][i]]
                for i, var in enumerate(variables)]
        harness.export_csv(
            ["variable", "raw_avg", "raw_std", "filt_avg", "filt_std"],
            rows, out_dir / f"detector_{name}.csv")
        print(f"{name}: raw avg {res['raw_avg'].round(3)}, "
              f"filtered avg {res['filt_avg'].round(3)}")
    return EXIT_OK


def _cmd_wind_sweep(args, out_dir: Path) -> int:
    cfg = harness.load_config(args.config)
    biases = [float(b) for b in args.bias_list.split(",") if b]
    seeds = list(range(args.trials))
    rows = []
    for bias in biases:
        wcfg = replace(cfg, wind=simworld.WindModel(bias=np.array([bias, 0.0])))
        _, summaries, agg = harness.run_experiment(wcfg, seeds)
        rows.append([bias, agg["success_rate"], agg["mean_offset_m"],
                     agg["mean_angle_deg"], agg["mean_touchdown_s"]])
        print(f"bias {bias} m/s: success {agg['success_rate']:.2f}")
    harness.export_csv(
        ["wind_bias_mps", "success_rate", "mean_offset_m",
         "mean_angle_deg", "mean_touchdown_s"],
        rows, out_dir / "wind_sweep.csv")
    return EXIT_OK


def main(argv=None) -> int:
    args = _parse_args(argv if argv is not None else sys.argv[1:])
    try:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        handler = {
            "run": _cmd_run,
            "experiment": _cmd_experiment,
            "detector-sweep": _cmd_detector_sweep,
            "wind-sweep": _cmd_wind_sweep,
        }[args.command]
        return handler(args, out_dir)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except IoFailure as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
