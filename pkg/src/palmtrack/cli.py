"""Batch front-end: simulate scenarios, run trackers, sweep Monte Carlo cells.

Subcommands
-----------
``simulate``  write deterministic truth and scan CSVs for a seed
``track``     run one filter+extractor pass over scans, log extractions
``mc``        Monte Carlo sweep with aggregated MOSPA/cardinality curves
``report``    print the summary table of a previous ``mc`` output directory

Configs are flat ``key = value`` text files (see ``config_template``); every
key has a default matching the benchmark setup, and command-line flags
override file values.  All outputs except the timing sidecar are
byte-deterministic in (config, seed).
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import scenario
from .exceptions import InvalidConfig, PalmTrackError
from .metrics import aggregate
from .runner import RunConfig, derive_seed, run_monte_carlo, track_scans

_TUPLE_FIELDS = {"pd_sweep", "clutter_sweep"}


def config_template() -> str:
    """Documented config file with every key at its default."""
    lines = ["# palmtrack run configuration (key = value; '#' starts a comment)"]
    for f in dataclasses.fields(RunConfig):
        default = f.default
        if isinstance(default, tuple):
            default = ",".join(str(v) for v in default)
        lines.append(f"{f.name} = {default}")
    return "\n".join(lines) + "\n"


def parse_config_text(text: str) -> RunConfig:
    fields = {f.name: f for f in dataclasses.fields(RunConfig)}
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidConfig(f"line {lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in fields:
            raise InvalidConfig(f"line {lineno}: unknown key {key!r}")
        values[key] = _coerce(key, value, fields[key].type)
    return RunConfig(**values)


def _coerce(key: str, value: str, type_name: str):
    if key in _TUPLE_FIELDS:
        if not value:
            return ()
        return tuple(float(v) for v in value.split(","))
    if type_name == "int":
        try:
            return int(value)
        except ValueError as exc:
            raise InvalidConfig(f"{key} must be an integer, got {value!r}") from exc
    if type_name == "float":
        try:
            return float(value)
        except ValueError as exc:
            raise InvalidConfig(f"{key} must be a number, got {value!r}") from exc
    return value


def load_config(path: str | None, overrides: dict) -> RunConfig:
    if path is not None:
        cfg = parse_config_text(Path(path).read_text())
    else:
        cfg = RunConfig()
    clean = {k: v for k, v in overrides.items() if v is not None}
    if clean:
        cfg = dataclasses.replace(cfg, **clean)
    cfg.validate()
    return cfg


# fields that steer where/how work happens but not what comes out
_NON_RESULT_FIELDS = {"out_dir", "workers"}


def config_as_text(cfg: RunConfig, result_fields_only: bool = False) -> str:
    lines = []
    for f in dataclasses.fields(RunConfig):
        if result_fields_only and f.name in _NON_RESULT_FIELDS:
            continue
        value = getattr(cfg, f.name)
        if isinstance(value, tuple):
            value = ",".join(str(v) for v in value)
        lines.append(f"{f.name} = {value}")
    return "\n".join(lines) + "\n"


def config_hash(cfg: RunConfig) -> str:
    """Hash over the result-determining configuration fields."""
    return hashlib.sha256(config_as_text(cfg, result_fields_only=True)
                          .encode()).hexdigest()[:12]


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(float(v)) if isinstance(v, float) else v
                             for v in row])


def _write_json(path: Path, payload) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_sidecar(out_dir: Path, elapsed: float) -> None:
    # wall-clock metadata lives outside the deterministic outputs
    with open(out_dir / "run_meta.txt", "w") as fh:
        fh.write(f"written_at = {time.strftime('%Y-%m-%dT%H:%M:%S')}\n")
        fh.write(f"elapsed_seconds = {elapsed:.3f}\n")


def cmd_simulate(cfg: RunConfig, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    t0 = time.time()
    scen = cfg.scenario_config()
    truth = scenario.generate_truth(scen)
    rng = np.random.default_rng(derive_seed(cfg.seed, "scans"))
    scans = scenario.generate_measurements(truth, cfg.measurement_model(), rng,
                                           scen.init_scans, scen.dt)
    scenario.write_truth_csv(out_dir / "truth.csv", truth)
    scenario.write_scans_csv(out_dir / "scans.csv", scans)
    (out_dir / "config.txt").write_text(config_as_text(cfg))
    _write_sidecar(out_dir, time.time() - t0)
    print(f"wrote truth.csv and scans.csv for {scen.n_scans} scans to {out_dir}")


def cmd_track(cfg: RunConfig, out_dir: Path, scans_path: str | None) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    t0 = time.time()
    scen = cfg.scenario_config()
    truth = scenario.generate_truth(scen)
    if scans_path is not None:
        scans = scenario.read_scans_csv(scans_path, scen.dt)
    else:
        rng = np.random.default_rng(derive_seed(cfg.seed, "scans"))
        scans = scenario.generate_measurements(truth, cfg.measurement_model(),
                                               rng, scen.init_scans, scen.dt)
    records, logs = track_scans(cfg, truth, scans, cfg.seed, collect_logs=True)
    for name, rec in records.items():
        rows = zip(rec.scan_indices, rec.truth_count, rec.est_count,
                   rec.ospa_total, rec.ospa_loc, rec.ospa_card)
        _write_csv(out_dir / f"record_{cfg.filter_name}_{name}.csv",
                   ["scan", "truth_count", "est_count", "ospa", "ospa_loc",
                    "ospa_card"],
                   ([int(a), int(b), int(c), float(d), float(e), float(f)]
                    for a, b, c, d, e, f in rows))
    _write_json(out_dir / "extraction_log.json",
                {"config_hash": config_hash(cfg), "seed": cfg.seed, "scans": logs})
    (out_dir / "config.txt").write_text(config_as_text(cfg))
    _write_sidecar(out_dir, time.time() - t0)
    for name, rec in records.items():
        print(f"{cfg.filter_name}/{name}: scenario-average OSPA "
              f"{rec.scenario_average():.2f} m over scans "
              f"{rec.scan_indices[0]}..{rec.scan_indices[-1]}")


def cmd_mc(cfg: RunConfig, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    t0 = time.time()
    pd_values = cfg.pd_sweep or (cfg.detect_prob,)
    clutter_values = cfg.clutter_sweep or (cfg.clutter_mean,)
    summary_cells = []
    long_rows = []
    for pd in pd_values:
        for clutter in clutter_values:
            cell_cfg = dataclasses.replace(cfg, detect_prob=pd,
                                           clutter_mean=clutter,
                                           pd_sweep=(), clutter_sweep=())
            cell_seed = (cfg.seed if len(pd_values) == len(clutter_values) == 1
                         else derive_seed(cfg.seed, "cell", pd, clutter))
            cell_cfg = dataclasses.replace(cell_cfg, seed=cell_seed)
            records = run_monte_carlo(cell_cfg)
            cell = {"detect_prob": pd, "clutter_mean": clutter,
                    "runs": cfg.runs, "cell_seed": cell_seed,
                    "run_seeds": [derive_seed(cell_seed, i)
                                  for i in range(cfg.runs)],
                    "extractors": {}}
            for name, recs in records.items():
                summary = aggregate(recs)
                tag = f"pd{pd}_cl{clutter:g}_{cfg.filter_name}_{name}"
                _write_csv(out_dir / f"curves_{tag}.csv",
                           ["scan", "mospa", "mospa_stderr", "mean_tracks"],
                           zip(summary.scan_indices.tolist(),
                               summary.mospa, summary.mospa_stderr,
                               summary.mean_tracks))
                cell["extractors"][name] = {
                    "scenario_average_mospa": summary.scenario_average,
                    "scenario_average_stderr": summary.scenario_average_stderr,
                    "mean_tracks": float(summary.mean_tracks.mean()),
                }
                for i, scan in enumerate(summary.scan_indices.tolist()):
                    long_rows.append([pd, clutter, cfg.filter_name, name, scan,
                                      float(summary.mospa[i]),
                                      float(summary.mospa_stderr[i]),
                                      float(summary.mean_tracks[i])])
            summary_cells.append(cell)
    _write_csv(out_dir / "sweep_long.csv",
               ["detect_prob", "clutter_mean", "filter", "extractor", "scan",
                "mospa", "mospa_stderr", "mean_tracks"], long_rows)
    _write_json(out_dir / "summary.json", {
        "config_hash": config_hash(cfg),
        "config": {f.name: getattr(cfg, f.name) if not isinstance(getattr(cfg, f.name), tuple)
                   else list(getattr(cfg, f.name))
                   for f in dataclasses.fields(RunConfig)
                   if f.name not in _NON_RESULT_FIELDS},
        "master_seed": cfg.seed,
        "cells": summary_cells,
    })
    (out_dir / "config.txt").write_text(config_as_text(cfg))
    _write_sidecar(out_dir, time.time() - t0)
    print(f"wrote {len(summary_cells)} cell(s) x {cfg.runs} runs to {out_dir}")
    _print_summary_table(summary_cells)


def cmd_report(out_dir: Path) -> None:
    summary_path = out_dir / "summary.json"
    if not summary_path.exists():
        raise InvalidConfig(f"no summary.json under {out_dir}")
    payload = json.loads(summary_path.read_text())
    print(f"config hash {payload['config_hash']}, master seed "
          f"{payload['master_seed']}")
    _print_summary_table(payload["cells"])


def _print_summary_table(cells) -> None:
    header = f"{'P_D':>5} {'clutter':>8} {'extractor':>10} {'MOSPA':>8} {'stderr':>7} {'tracks':>7}"
    print(header)
    for cell in cells:
        for name, stats in sorted(cell["extractors"].items()):
            print(f"{cell['detect_prob']:>5} {cell['clutter_mean']:>8} "
                  f"{name:>10} {stats['scenario_average_mospa']:>8.2f} "
                  f"{stats['scenario_average_stderr']:>7.2f} "
                  f"{stats['mean_tracks']:>7.3f}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="palmtrack",
        description="PHD multi-target tracking benchmark with Palm-corrected "
                    "track extraction")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="key = value config file")
        p.add_argument("--seed", type=int, help="master seed")
        p.add_argument("--out", help="output directory")
        p.add_argument("--filter", dest="filter_name", choices=["gm", "smc"])
        p.add_argument("--extractor", choices=["baseline", "palm", "both"])
        p.add_argument("--runs", type=int, help="Monte Carlo run count")
        p.add_argument("--workers", type=int, help="parallel workers")

    p_sim = sub.add_parser("simulate", help="write truth and scan CSVs")
    add_common(p_sim)
    p_track = sub.add_parser("track", help="run one tracking pass")
    add_common(p_track)
    p_track.add_argument("--scans", help="replay scans from a CSV instead of "
                                         "generating them")
    p_mc = sub.add_parser("mc", help="Monte Carlo sweep")
    add_common(p_mc)
    p_report = sub.add_parser("report", help="print a previous mc summary")
    p_report.add_argument("--out", required=True, help="mc output directory")
    p_template = sub.add_parser("config-template",
                                help="print a fully documented config file")
    del p_template
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "config-template":
            print(config_template(), end="")
            return 0
        if args.command == "report":
            cmd_report(Path(args.out))
            return 0
        overrides = {k: getattr(args, k, None)
                     for k in ("seed", "filter_name", "extractor", "runs",
                               "workers")}
        if getattr(args, "out", None):
            overrides["out_dir"] = args.out
        cfg = load_config(args.config, overrides)
        out_dir = Path(cfg.out_dir)
        if args.command == "simulate":
            cmd_simulate(cfg, out_dir)
        elif args.command == "track":
            cmd_track(cfg, out_dir, getattr(args, "scans", None))
        elif args.command == "mc":
            cmd_mc(cfg, out_dir)
        return 0
    except InvalidConfig as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (PalmTrackError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
