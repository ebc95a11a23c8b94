"""Command line front end.

Subcommands:
    run       evaluate techniques over the receiver grid, emit CSV + summary
    spectrum  aggregate path loss versus frequency for one link
    windows   transmission windows extracted from that spectrum
    allocate  distance-ordered sub-window assignment for the scenario links
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from typing import Optional

import numpy as np

from . import experiment
from .allocation import LinkDemand, allocate_center_out, equal_power_split, partition
from .channel import (
    SpectralWindow,
    default_absorption_table,
    free_space_spectrum,
    load_absorption_table,
    path_loss_spectrum,
    spectral_windows,
)
from .geometry import build_e_hallway, dump_scene, load_scene
from .raytracer import dump_paths, trace_los, trace_reflections


def _load_inputs(args):
    if getattr(args, "scene", None):
        scene, endpoints = load_scene(args.scene)
        if endpoints is None:
            raise ValueError(f"{args.scene}: scene document has no endpoints block")
    else:
        scene, endpoints = build_e_hallway()
    if getattr(args, "absorption", None):
        table = load_absorption_table(args.absorption)
    else:
        table = default_absorption_table()
    return scene, endpoints, table


def _parse_frequencies(text: str) -> tuple[float, ...]:
    try:
        vals = tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError as exc:
        raise ValueError(f"bad frequency list {text!r}: {exc}") from exc
    if not vals:
        raise ValueError("empty frequency list")
    return vals


def _parse_grid(text: str) -> np.ndarray:
    parts = text.split(":")
    if len(parts) != 3:
        raise ValueError(f"grid must be LO:HI:N, got {text!r}")
    lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
    if not (lo < hi and n >= 2):
        raise ValueError("grid needs LO < HI and N >= 2")
    return np.linspace(lo, hi, n)


def _write_bytes(data: bytes, out: Optional[str]) -> None:
    if out:
        with open(out, "wb") as fh:
            fh.write(data)
    else:
        sys.stdout.write(data.decode("utf-8"))


def _cmd_run(args) -> int:
    # scenario file gives the base; explicit flags override its entries
    base = (
        experiment.scenario_from_file(args.config)
        if args.config
        else experiment.RunConfig.default()
    )
    over = {}
    if args.scene:
        scene, endpoints = load_scene(args.scene)
        if endpoints is None:
            raise ValueError(f"{args.scene}: scene document has no endpoints block")
        over["scene"], over["endpoints"] = scene, endpoints
    if args.absorption:
        over["table"] = load_absorption_table(args.absorption)
    if args.frequencies is not None:
        over["frequencies_hz"] = _parse_frequencies(args.frequencies)
    if args.techniques is not None:
        try:
            over["techniques"] = tuple(
                experiment.TECHNIQUES[t.strip().upper()]
                for t in args.techniques.split(",")
                if t.strip()
            )
        except KeyError as exc:
            raise ValueError(
                f"unknown technique {exc}; choose from {sorted(experiment.TECHNIQUES)}"
            ) from None
        if not over["techniques"]:
            raise ValueError("empty technique list")
    if args.threshold_db is not None:
        over["snr_threshold_db"] = args.threshold_db
    if args.adaptive_bandwidth:
        over["adaptive_allocation_bandwidth"] = True
    cfg = replace(base, **over) if over else base
    if args.scene_out:
        dump_scene(cfg.scene, args.scene_out, cfg.endpoints)
        sys.stdout.write(f"wrote {args.scene_out}\n")
    result = experiment.run(cfg)
    _write_bytes(experiment.emit(result, "csv"), args.out)
    sys.stdout.write(experiment.emit(result, "summary").decode("utf-8"))
    if args.allocation_out:
        for (tag, f), _rows in sorted(result.allocations.items()):
            path = f"{args.allocation_out}_{tag}_{f / 1e9:.0f}GHz.csv"
            with open(path, "wb") as fh:
                fh.write(experiment.emit_allocation(result, tag, f))
            sys.stdout.write(f"wrote {path}\n")
    if args.paths_out:
        with open(args.paths_out, "w", encoding="utf-8") as fh:
            for r in cfg.endpoints.rx:
                paths = []
                los = trace_los(cfg.scene, cfg.endpoints.tx, r.position)
                if los is not None:
                    paths.append(los)
                paths.extend(
                    trace_reflections(
                        cfg.scene, cfg.endpoints.tx, r.position, cfg.reflection_order
                    )
                )
                dump_paths(paths, fh)
    return 0


def _spectrum_rows(args):
    scene, endpoints, table = _load_inputs(args)
    grid = _parse_grid(args.grid) if args.grid else np.linspace(
        max(0.05e12, table.f_min), min(1.05e12, table.f_max), 2001
    )
    if args.distance is not None:
        return free_space_spectrum(args.distance, grid, table)
    rx = next((r for r in endpoints.rx if r.rx_id == args.rx_id), None)
    if rx is None:
        raise ValueError(f"no receiver with id {args.rx_id}")
    return path_loss_spectrum(scene, endpoints.tx, rx.position, grid, table)


def _cmd_spectrum(args) -> int:
    rows = _spectrum_rows(args)
    lines = ["frequency_hz,loss_db"]
    lines += [f"{f:.0f},{l:.6f}" for f, l in rows]
    _write_bytes(("\n".join(lines) + "\n").encode(), args.out)
    return 0


def _cmd_windows(args) -> int:
    rows = _spectrum_rows(args)
    windows = spectral_windows(rows, args.threshold_db)
    lines = ["f_lo_hz,f_hi_hz,center_hz,bandwidth_hz"]
    lines += [
        f"{w.f_lo_hz:.0f},{w.f_hi_hz:.0f},{w.center_hz:.0f},{w.bandwidth_hz:.0f}"
        for w in windows
    ]
    _write_bytes(("\n".join(lines) + "\n").encode(), args.out)
    return 0


def _cmd_allocate(args) -> int:
    scene, endpoints, table = _load_inputs(args)
    lo, hi = (float(x) for x in args.window.split(":"))
    window = SpectralWindow(lo, hi)
    n_sub = args.n_sub if args.n_sub else len(endpoints.rx)
    demands = [LinkDemand(r.rx_id, r.nominal_distance_m) for r in endpoints.rx]
    assigned = equal_power_split(
        args.power_dbm, allocate_center_out(partition(window, n_sub), demands)
    )
    lines = ["link_id,distance_m,sub_f_lo_hz,sub_f_hi_hz,power_dbm"]
    for a in sorted(assigned, key=lambda a: a.demand.link_id):
        lines.append(
            f"{a.demand.link_id},{a.demand.distance_m:.3f},"
            f"{a.sub.f_lo_hz:.3f},{a.sub.f_hi_hz:.3f},{a.power_dbm:.6f}"
        )
    _write_bytes(("\n".join(lines) + "\n").encode(), args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="thzreach", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--scene", help="scene JSON document (default: built-in E hallway)")
        p.add_argument("--absorption", help="two-column absorption CSV (default: synthetic table)")
        p.add_argument("--out", help="output file (default: stdout)")

    p_run = sub.add_parser("run", help="full technique/frequency/receiver sweep")
    common(p_run)
    p_run.add_argument("--config",
                       help="scenario document (JSON) with scene/radio/tiles/allocation blocks")
    p_run.add_argument("--frequencies", default=None,
                       help="comma-separated carrier frequencies in Hz (default 60e9,300e9,1000e9)")
    p_run.add_argument("--techniques", default=None,
                       help="comma-separated subset of BASELINE,UMMIMO,REFLECTARRAY,HYPERSURFACE,JOINT")
    p_run.add_argument("--threshold-db", type=float, default=None,
                       help="SNR threshold for reach reporting (dB, default 10)")
    p_run.add_argument("--allocation-out", help="prefix for per-frequency allocation CSVs")
    p_run.add_argument("--paths-out", help="write traced paths as JSON lines")
    p_run.add_argument("--scene-out", help="write the scene document actually used")
    p_run.add_argument("--adaptive-bandwidth", action="store_true",
                       help="rate allocated links over their usable bandwidth only")

    p_spec = sub.add_parser("spectrum", help="path loss versus frequency for one link")
    common(p_spec)
    p_spec.add_argument("--rx-id", type=int, default=1, help="receiver id from the scenario")
    p_spec.add_argument("--distance", type=float,
                        help="free-space link of this length instead of a scenario receiver")
    p_spec.add_argument("--grid", help="frequency grid LO:HI:N in Hz")

    p_win = sub.add_parser("windows", help="transmission windows of that spectrum")
    common(p_win)
    p_win.add_argument("--rx-id", type=int, default=1, help="receiver id from the scenario")
    p_win.add_argument("--distance", type=float,
                       help="free-space link of this length instead of a scenario receiver")
    p_win.add_argument("--grid", help="frequency grid LO:HI:N in Hz")
    p_win.add_argument("--threshold-db", type=float, default=3.0,
                       help="window acceptance threshold above the local floor (dB)")

    p_alloc = sub.add_parser("allocate", help="sub-window assignment for the scenario links")
    common(p_alloc)
    p_alloc.add_argument("--window", required=True, help="parent window LO:HI in Hz")
    p_alloc.add_argument("--n-sub", type=int, default=0,
                         help="sub-window count (default: one per link)")
    p_alloc.add_argument("--power-dbm", type=float, default=10.0,
                         help="total transmit power to split across links (dBm)")

    return ap


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "spectrum":
            return _cmd_spectrum(args)
        if args.command == "windows":
            return _cmd_windows(args)
        if args.command == "allocate":
            return _cmd_allocate(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
