"""Command-line front end.

Subcommands: analyze | simulate | optimize | sample-channel.  Data goes to
CSV files named by --out (stdout carries no data); every output file is
accompanied by a ``<out>.manifest.json`` recording the subcommand, config
digest, seed, output paths, wall clock, and tool version, so any figure
can be reproduced from the repository alone.

Exit codes: 0 success, 2 validation error, 4 infeasible optimization,
3 numerical failure.  Powers cross the CLI boundary in dBm and are
converted to watts immediately.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import sys
import time

from . import __version__, analysis, channel, geometry
from .config import (ConfigError, SystemParams, dbm_to_watts, load_config)
from .experiments import (InfeasibleError, SweepSpec, choose_window_length,
                          sweep_detector_size, sweep_hover_std)
from .link_sim import MODES, SIM_CSV_COLUMNS, run_monte_carlo, tally_row

try:
    import tomllib
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3
EXIT_INFEASIBLE = 4

SAMPLE_CSV_COLUMNS = ("theta_x", "theta_y", "h_atm", "h_poi", "h", "capture")


def _fmt(value) -> str:
    """Shortest round-trip text for a cell; deterministic across runs."""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(path: str, columns, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row[c]) for c in columns])


def _write_manifest(out_path: str, subcommand: str, config_digest: str,
                    seed, outputs, started: float) -> None:
    manifest = {
        "subcommand": subcommand,
        "config_sha256": config_digest,
        "seed": seed,
        "outputs": list(outputs),
        "wall_clock_s": round(time.time() - started, 3),
        "version": __version__,
    }
    with open(out_path + ".manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _load_params(args) -> tuple[SystemParams, str]:
    if args.config:
        with open(args.config, "rb") as fh:
            digest = hashlib.sha256(fh.read()).hexdigest()
        return load_config(args.config), digest
    params = SystemParams()
    digest = hashlib.sha256(repr(params).encode()).hexdigest()
    return params, digest


def _parse_pt_range(text: str) -> list[float]:
    """Inclusive dBm triple 'start:stop:step'."""
    parts = text.split(":")
    if len(parts) != 3:
        raise ConfigError(f"--pt-range must be start:stop:step, got {text!r}")
    start, stop, step = (float(p) for p in parts)
    if step <= 0 or stop < start:
        raise ConfigError(f"--pt-range needs step > 0 and stop >= start, "
                          f"got {text!r}")
    n = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [start + i * step for i in range(n)]


def cmd_analyze(args) -> int:
    params, digest = _load_params(args)
    started = time.time()
    grid = _parse_pt_range(args.pt_range)
    kinds = [k.strip() for k in args.kinds.split(",") if k.strip()]
    for kind in kinds:
        if kind not in analysis.KINDS:
            print(f"error: unknown curve kind {kind!r}; choose from "
                  f"{analysis.KINDS}", file=sys.stderr)
            return EXIT_VALIDATION
    points = analysis.sweep_curve(params, grid, kinds)
    rows = [analysis.curve_row(pt) for pt in points]
    _write_csv(args.out, analysis.ANALYSIS_CSV_COLUMNS, rows)
    _write_manifest(args.out, "analyze", digest, args.seed, [args.out],
                    started)
    failed = [r for r in rows if math.isnan(r["value"])]
    if failed:
        print(f"error: {len(failed)} curve point(s) failed numerically",
              file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_simulate(args) -> int:
    params, digest = _load_params(args)
    started = time.time()
    if args.mode not in MODES:
        print(f"error: --mode must be one of {MODES}", file=sys.stderr)
        return EXIT_VALIDATION
    if args.windows < 0:
        print("error: --windows must be >= 0", file=sys.stderr)
        return EXIT_VALIDATION
    rows = []
    if args.windows > 0:
        tally = run_monte_carlo(params, args.windows, args.mode,
                                seed=args.seed, workers=args.workers)
        rows.append(tally_row(params, args.mode, tally, args.seed))
    _write_csv(args.out, SIM_CSV_COLUMNS, rows)
    _write_manifest(args.out, "simulate", digest, args.seed, [args.out],
                    started)
    return EXIT_OK


def _load_sweep_file(path: str) -> dict:
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def cmd_optimize(args) -> int:
    params, digest = _load_params(args)
    started = time.time()
    raw = _load_sweep_file(args.sweep)
    variable = raw.get("variable")
    try:
        if variable == "window_len":
            report = choose_window_length(
                target_ber=float(raw["target_ber"]),
                delay_cap=int(raw["delay_cap"]),
                params=params.with_overrides(**raw.get("fixed", {})))
        elif variable == "detector_side":
            spec = SweepSpec(variable=variable,
                             grid=tuple(raw["grid"]),
                             objective=raw.get("objective", "ter_blind"),
                             fixed=raw.get("fixed", {}))
            report = sweep_detector_size(spec, params)
        elif variable == "hover_std":
            spec = SweepSpec(variable=variable,
                             grid=tuple(tuple(p) for p in raw["grid"]),
                             objective=raw.get("objective", "ter_blind"),
                             fixed=raw.get("fixed", {}))
            curves = sweep_hover_std(spec, params)
            lines = []
            for (sx, sy), curve in curves:
                lines.append(f"sigma_x={sx:g} sigma_y={sy:g}:")
                lines += [f"  {p:.6g} dBm -> {v:.6g}" for p, v in curve]
            with open(args.out, "w") as fh:
                fh.write("\n".join(lines) + "\n")
            _write_manifest(args.out, "optimize", digest, args.seed,
                            [args.out], started)
            return EXIT_OK
        else:
            print(f"error: sweep file must set variable to one of "
                  f"window_len/detector_side/hover_std, got {variable!r}",
                  file=sys.stderr)
            return EXIT_VALIDATION
    except InfeasibleError as exc:
        with open(args.out, "w") as fh:
            fh.write(f"infeasible: {exc}\n")
        _write_manifest(args.out, "optimize", digest, args.seed, [args.out],
                        started)
        print(f"error: infeasible optimization: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (KeyError, ValueError, ConfigError) as exc:
        print(f"error: invalid sweep spec: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    with open(args.out, "w") as fh:
        fh.write(report.to_text() + "\n")
    _write_manifest(args.out, "optimize", digest, args.seed, [args.out],
                    started)
    return EXIT_OK


def cmd_sample_channel(args) -> int:
    import numpy as np
    params, digest = _load_params(args)
    started = time.time()
    if args.n < 0:
        print("error: --n must be >= 0", file=sys.stderr)
        return EXIT_VALIDATION
    rng = np.random.Generator(
        np.random.Philox(key=np.array([args.seed, 0], dtype=np.uint64)))
    turb = channel.derive_turbulence(params)
    geom = geometry.DetectorGeometry.from_sides(
        params.detector_side_a, params.detector_side_b, params.focal_length)
    rows = []
    if args.n > 0:
        batch = channel.sample_channel_batch(rng, args.n, params, turb, geom)
        for i in range(args.n):
            rows.append({
                "theta_x": float(batch["theta_x"][i]),
                "theta_y": float(batch["theta_y"][i]),
                "h_atm": float(batch["h_atm"][i]),
                "h_poi": float(batch["h_poi"][i]),
                "h": float(batch["h"][i]),
                "capture": int(batch["capture"][i]),
            })
    _write_csv(args.out, SAMPLE_CSV_COLUMNS, rows)
    _write_manifest(args.out, "sample-channel", digest, args.seed,
                    [args.out], started)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="quadtrack",
        description="Quad-detector optical beam tracking: closed-form "
                    "analysis, Monte-Carlo simulation, design sweeps, "
                    "channel sampling.")
    parser.add_argument("--config", help="TOML parameter file")
    parser.add_argument("--seed", type=int, default=0,
                        help="master RNG seed (default 0)")
    parser.add_argument("--workers", type=int, default=1,
                        help="parallel shard workers (result-invariant)")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("analyze", help="closed-form curves over a P_t grid")
    p.add_argument("--pt-range", required=True,
                   help="inclusive dBm triple start:stop:step")
    p.add_argument("--kinds", default="ter_known,ter_blind,ber_known,ber_blind",
                   help="comma list from "
                        "ter_known,ter_blind,ber_known,ber_blind,floor")
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("simulate", help="Monte-Carlo tracking/BER estimate")
    p.add_argument("--windows", type=int, required=True)
    p.add_argument("--mode", default="known_csi",
                   help="known_csi or blind")
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("optimize", help="run a sweep spec (TOML)")
    p.add_argument("--sweep", required=True, help="sweep spec TOML file")
    p.add_argument("--out", required=True, help="output report path")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("sample-channel", help="raw channel draws to CSV")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=cmd_sample_channel)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (ArithmeticError, channel.IntegrationError) as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
