"""Command line entry point.

``dualpulse <experiment> [options]`` runs one experiment and writes its
artifacts (config snapshot, CSV tables, JSON summary, PNG figures) into an
output directory.  The summary is also printed to stdout as JSON.

Exit codes: 0 on success, 2 on configuration or usage errors, 1 on
unexpected failures; errors are reported as a JSON object on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import __version__
from .channel import Target
from .experiments import (
    ExperimentBundle,
    default_range_grid,
    load_bundle,
    load_targets,
    run_detector_compare,
    run_metric_sweep,
    run_min_rcs,
    run_multi_target,
    run_pd_vs_range,
    run_rdmap,
    run_sequence_verify,
)
from .metrics import bin_range_m
from .units import dbsm_to_sqm
from .waveform import read_mapping

EXPERIMENTS = (
    "rdmap",
    "pd_vs_range",
    "min_rcs",
    "multi_target",
    "detector_compare",
    "metric_sweep",
    "sequence_verify",
)


def _common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="JSON or key=value config file")
    sub.add_argument("--output-dir", help="run directory (default runs/<experiment>)")
    sub.add_argument("--seed", type=int, default=1234)
    sub.add_argument("--sic-db", type=float, help="override the SIC level in dB")
    sub.add_argument("--no-figures", action="store_true", help="skip PNG rendering")


def _weight_args(sub: argparse.ArgumentParser, default: str = "optimal") -> None:
    sub.add_argument("--weight-mode", default=default,
                     choices=("optimal", "matched", "fixed", "high_only", "low_only"))
    sub.add_argument("--weight-value", type=float,
                     help="filter weight for 'fixed', RCS in dBsm for 'matched'")


def _range_args(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--range-min", type=float)
    sub.add_argument("--range-max", type=float)
    sub.add_argument("--range-points", type=int)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="dualpulse",
        description="dual-power phase-coded pulse sensing experiments",
    )
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subs = p.add_subparsers(dest="experiment", required=True)

    s = subs.add_parser("rdmap", help="simulate one CPI and detect on its RD map")
    _common(s)
    _weight_args(s)
    s.add_argument("--targets", help="JSON/CSV scenario file")
    s.add_argument("--waveform", default="proposal", choices=("proposal", "lfm", "ofdm"))
    s.add_argument("--m-fft", type=int, help="Doppler FFT length (default: pulses per CPI)")
    s.add_argument("--save-binary", action="store_true",
                   help="also write the raw float64 map with a JSON sidecar")

    s = subs.add_parser("pd_vs_range", help="Monte Carlo detection probability sweep")
    _common(s)
    _weight_args(s)
    _range_args(s)
    s.add_argument("--trials", type=int, default=200)
    s.add_argument("--rcs-dbsm", type=float)
    s.add_argument("--velocity", type=float, default=0.0)
    s.add_argument("--waveform", default="proposal", choices=("proposal", "lfm", "ofdm"))
    s.add_argument("--detector", default="hierarchical",
                   choices=("hierarchical", "ca_2d"))

    s = subs.add_parser("min_rcs", help="analytic minimum detectable RCS curves")
    _common(s)
    s.add_argument("--sic-db-list", default="100,110,120",
                   help="comma-separated SIC levels in dB")
    s.add_argument("--mc-bins", default="",
                   help="comma-separated delay bins for Monte Carlo cross-checks")
    s.add_argument("--mc-trials", type=int, default=100)

    s = subs.add_parser("multi_target", help="multi-target tables vs baselines")
    _common(s)
    _weight_args(s, default="matched")
    s.add_argument("--targets", help="JSON/CSV scenario file (default: two-target "
                                     "short-range scenario)")
    s.add_argument("--waveforms", default="proposal,lfm,ofdm")
    s.add_argument("--trials", type=int, default=20)

    s = subs.add_parser("detector_compare",
                        help="hierarchical 1D vs 2D CFAR maximum range")
    _common(s)
    _range_args(s)
    s.add_argument("--trials", type=int, default=200)
    s.add_argument("--rcs-dbsm", type=float, default=-10.0)

    s = subs.add_parser("metric_sweep", help="per-bin analytic metric table")
    _common(s)
    s.add_argument("--rcs-dbsm", type=float)

    s = subs.add_parser("sequence_verify", help="pulse-code identity checks")
    _common(s)

    return p


def _bundle_from_args(args) -> ExperimentBundle:
    mapping = read_mapping(args.config) if args.config else {}
    if args.sic_db is not None:
        mapping["sic_db"] = args.sic_db
    return load_bundle(mapping)


def _grid_from_args(args) -> np.ndarray | None:
    given = [args.range_min, args.range_max, args.range_points]
    if all(v is None for v in given):
        return None
    if any(v is None for v in given):
        raise ValueError("--range-min, --range-max and --range-points go together")
    if args.range_min <= 0 or args.range_max <= args.range_min or args.range_points < 2:
        raise ValueError("invalid range grid")
    return np.linspace(args.range_min, args.range_max, args.range_points)


def _default_multi_targets(bundle: ExperimentBundle) -> list[Target]:
    """Two targets six bins apart, 0 and -20 dBsm, inside the low window."""
    par = bundle.metric_params()
    return [
        Target(range_m=bin_range_m(50, par), rcs_sqm=dbsm_to_sqm(0.0)),
        Target(range_m=bin_range_m(56, par), rcs_sqm=dbsm_to_sqm(-20.0)),
    ]


def run(args) -> dict:
    bundle = _bundle_from_args(args)
    out = args.output_dir or f"runs/{args.experiment}"
    figs = not args.no_figures
    if args.experiment == "rdmap":
        targets = load_targets(args.targets) if args.targets else [
            Target(range_m=300.0, rcs_sqm=dbsm_to_sqm(-10.0)),
            Target(range_m=600.0, velocity_mps=10.0, rcs_sqm=dbsm_to_sqm(-10.0)),
        ]
        result = run_rdmap(
            bundle, targets, waveform=args.waveform, weight_mode=args.weight_mode,
            weight_value=args.weight_value, m_fft=args.m_fft, seed=args.seed,
            out_dir=out, make_figures=figs, save_binary=args.save_binary,
        )
    elif args.experiment == "pd_vs_range":
        result = run_pd_vs_range(
            bundle, ranges_m=_grid_from_args(args), trials=args.trials,
            rcs_dbsm=args.rcs_dbsm, velocity_mps=args.velocity,
            weight_mode=args.weight_mode, weight_value=args.weight_value,
            waveform=args.waveform, detector=args.detector, seed=args.seed,
            out_dir=out, make_figures=figs,
        )
    elif args.experiment == "min_rcs":
        sics = tuple(float(x) for x in args.sic_db_list.split(",") if x.strip())
        mc = tuple(int(x) for x in args.mc_bins.split(",") if x.strip())
        result = run_min_rcs(
            bundle, sic_db_list=sics, mc_bins=mc, mc_trials=args.mc_trials,
            seed=args.seed, out_dir=out, make_figures=figs,
        )
    elif args.experiment == "multi_target":
        targets = load_targets(args.targets) if args.targets else _default_multi_targets(bundle)
        waveforms = tuple(w.strip() for w in args.waveforms.split(",") if w.strip())
        result = run_multi_target(
            bundle, targets, waveforms=waveforms, trials=args.trials,
            weight_mode=args.weight_mode, weight_value=args.weight_value,
            seed=args.seed, out_dir=out, make_figures=figs,
        )
    elif args.experiment == "detector_compare":
        result = run_detector_compare(
            bundle, ranges_m=_grid_from_args(args), trials=args.trials,
            rcs_dbsm=args.rcs_dbsm, seed=args.seed, out_dir=out, make_figures=figs,
        )
    elif args.experiment == "metric_sweep":
        result = run_metric_sweep(
            bundle, rcs_dbsm=args.rcs_dbsm, seed=args.seed, out_dir=out,
            make_figures=figs,
        )
    elif args.experiment == "sequence_verify":
        result = run_sequence_verify(bundle, seed=args.seed, out_dir=out,
                                     make_figures=figs)
    else:  # pragma: no cover - argparse enforces the choices
        raise ValueError(f"unknown experiment {args.experiment!r}")
    return result.to_dict()


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        payload = run(args)
    except (ValueError, OSError, KeyError, json.JSONDecodeError) as exc:
        json.dump({"error": type(exc).__name__, "message": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return 2
    except Exception as exc:  # noqa: BLE001 - last-resort reporting
        json.dump({"error": type(exc).__name__, "message": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return 1
    json.dump(payload, sys.stdout, indent=2)
    sys.stdout.write("\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
