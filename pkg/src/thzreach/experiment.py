"""End-to-end coverage runs over the evaluation grid.

A run sweeps technique x frequency x receiver, reusing the traced path set
(geometry is frequency independent) and the tile aiming solution (shared by
both tile kinds). Techniques layer onto a common channel: arrays add their
gain on both ends, tiles add redirected paths, and the joint technique also
allocates sub-windows across links by distance. Everything is deterministic;
two runs of the same configuration emit identical bytes.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence, Union

from .allocation import (
    LinkDemand,
    allocate_center_out,
    equal_power_split,
    partition,
    usable_bandwidth_hz,
)
from .channel import (
    AbsorptionTable,
    OutageError,
    SpectralWindow,
    aggregate_gain_db,
    default_absorption_table,
    load_absorption_table,
    path_gain,
)
from .devices import ArrayConfig, ArrayMode, LinkResult, RadioConfig, capacity_bps, snr_db
from .geometry import EndpointSet, Scene, build_e_hallway, load_scene
from .raytracer import PropagationPath, trace_los, trace_reflections
from .tiles import TileKind, TileSet, assisted_gains, configure, uniform_tile_grid


@dataclass(frozen=True)
class Technique:
    """A named combination of range-extension features."""

    tag: str
    use_arrays: bool = False
    tile_kind: Optional[TileKind] = None
    use_allocation: bool = False


BASELINE = Technique("BASELINE")
UMMIMO = Technique("UMMIMO", use_arrays=True)
REFLECTARRAY = Technique("REFLECTARRAY", tile_kind=TileKind.REFLECTARRAY)
HYPERSURFACE = Technique("HYPERSURFACE", tile_kind=TileKind.HYPERSURFACE)
JOINT = Technique(
    "JOINT", use_arrays=True, tile_kind=TileKind.HYPERSURFACE, use_allocation=True
)
TECHNIQUES = {t.tag: t for t in (BASELINE, UMMIMO, REFLECTARRAY, HYPERSURFACE, JOINT)}
DEFAULT_TECHNIQUES = (BASELINE, UMMIMO, REFLECTARRAY, HYPERSURFACE, JOINT)
DEFAULT_FREQUENCIES = (0.06e12, 0.3e12, 1.0e12)


@dataclass(frozen=True)
class RunConfig:
    scene: Scene
    endpoints: EndpointSet
    table: AbsorptionTable
    frequencies_hz: tuple[float, ...] = DEFAULT_FREQUENCIES
    techniques: tuple[Technique, ...] = DEFAULT_TECHNIQUES
    snr_threshold_db: float = 10.0
    tx_power_dbm: float = 10.0
    noise_psd_dbm_hz: float = -160.0
    array_gain_dbi: float = 30.0
    array_layout: tuple[int, int, int, int] = (4, 4, 8, 8)
    sm_streams: int = 4
    tile_host_surface_ids: tuple[int, ...] = (1,)
    tile_pitch_m: float = 0.5
    tile_efficiency_db: float = 3.0
    reflectarray_cutoff_hz: float = 120e9
    reflectarray_rolloff_db_per_octave: float = 6.0
    reflection_order: int = 2
    adaptive_allocation_bandwidth: bool = False

    @classmethod
    def default(cls, **overrides) -> "RunConfig":
        scene, endpoints = build_e_hallway()
        cfg = cls(scene=scene, endpoints=endpoints, table=default_absorption_table())
        return replace(cfg, **overrides) if overrides else cfg


def _scenario_block(doc: dict, name: str, allowed: dict, out: dict) -> None:
    block = doc.get(name)
    if block is None:
        return
    if not isinstance(block, dict):
        raise ValueError(f"scenario block {name!r} must be an object")
    unknown = set(block) - set(allowed)
    if unknown:
        raise ValueError(f"scenario block {name!r}: unknown keys {sorted(unknown)}")
    for key, (target, conv) in allowed.items():
        if key in block:
            out[target] = conv(block[key])


def scenario_from_file(path: Union[str, Path]) -> RunConfig:
    """Build a RunConfig from a scenario document.

    The document is a JSON object with optional blocks:
      scene        path to a scene document, or "builtin"
      absorption   path to a two-column absorption CSV, or "synthetic"
      frequencies_hz, techniques, reflection_order   top-level lists/scalars
      radio        tx_power_dbm, noise_psd_dbm_hz, snr_threshold_db,
                   array_gain_dbi, array_layout, sm_streams
      tiles        host_surface_ids, pitch_m, efficiency_db,
                   reflectarray_cutoff_hz, reflectarray_rolloff_db_per_octave
      allocation   adaptive_bandwidth

    Relative file references resolve against the document's directory.
    Unknown keys raise ValueError so typos cannot silently revert a
    setting to its default.
    """
    p = Path(path)
    with open(p, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict):
        raise ValueError(f"{p}: scenario document must be a JSON object")
    top = {
        "scene", "absorption", "frequencies_hz", "techniques",
        "reflection_order", "radio", "tiles", "allocation",
    }
    unknown = set(doc) - top
    if unknown:
        raise ValueError(f"{p}: unknown scenario keys {sorted(unknown)}")

    overrides: dict = {}
    scene_src = doc.get("scene")
    if scene_src and scene_src != "builtin":
        scene, endpoints = load_scene(p.parent / scene_src)
        if endpoints is None:
            raise ValueError(f"{scene_src}: scene document has no endpoints block")
        overrides["scene"] = scene
        overrides["endpoints"] = endpoints
    absorb_src = doc.get("absorption")
    if absorb_src and absorb_src != "synthetic":
        overrides["table"] = load_absorption_table(p.parent / absorb_src)
    if "frequencies_hz" in doc:
        overrides["frequencies_hz"] = tuple(float(f) for f in doc["frequencies_hz"])
    if "techniques" in doc:
        try:
            overrides["techniques"] = tuple(
                TECHNIQUES[str(t).upper()] for t in doc["techniques"]
            )
        except KeyError as exc:
            raise ValueError(
                f"{p}: unknown technique {exc}; choose from {sorted(TECHNIQUES)}"
            ) from None
    if "reflection_order" in doc:
        overrides["reflection_order"] = int(doc["reflection_order"])

    _scenario_block(doc, "radio", {
        "tx_power_dbm": ("tx_power_dbm", float),
        "noise_psd_dbm_hz": ("noise_psd_dbm_hz", float),
        "snr_threshold_db": ("snr_threshold_db", float),
        "array_gain_dbi": ("array_gain_dbi", float),
        "array_layout": ("array_layout", lambda v: tuple(int(x) for x in v)),
        "sm_streams": ("sm_streams", int),
    }, overrides)
    _scenario_block(doc, "tiles", {
        "host_surface_ids": ("tile_host_surface_ids", lambda v: tuple(int(x) for x in v)),
        "pitch_m": ("tile_pitch_m", float),
        "efficiency_db": ("tile_efficiency_db", float),
        "reflectarray_cutoff_hz": ("reflectarray_cutoff_hz", float),
        "reflectarray_rolloff_db_per_octave": ("reflectarray_rolloff_db_per_octave", float),
    }, overrides)
    _scenario_block(doc, "allocation", {
        "adaptive_bandwidth": ("adaptive_allocation_bandwidth", bool),
    }, overrides)
    return RunConfig.default(**overrides)


@dataclass(frozen=True)
class AllocationRow:
    link_id: int
    distance_m: float
    sub_f_lo_hz: float
    sub_f_hi_hz: float
    power_dbm: float
    achievable_rate_bps: float


@dataclass(frozen=True)
class RunResult:
    config: RunConfig
    rows: tuple[LinkResult, ...]
    allocations: dict[tuple[str, float], tuple[AllocationRow, ...]]

    def select(
        self, technique: Optional[str] = None, frequency_hz: Optional[float] = None
    ) -> list[LinkResult]:
        out = []
        for r in self.rows:
            if technique is not None and r.technique != technique:
                continue
            if frequency_hz is not None and r.frequency_hz != frequency_hz:
                continue
            out.append(r)
        return out


def _arrays_for(config: RunConfig, technique: Technique) -> tuple[ArrayConfig, ArrayConfig]:
    if not technique.use_arrays:
        return ArrayConfig(), ArrayConfig()
    m, n, p, q = config.array_layout
    arr = ArrayConfig(
        m,
        n,
        p,
        q,
        mode=ArrayMode.BF,
        sm_streams=config.sm_streams,
        explicit_gain_dbi=config.array_gain_dbi,
    )
    return arr, arr


def run(config: RunConfig) -> RunResult:
    """Evaluate every technique at every frequency for every receiver."""
    scene = config.scene
    eps = config.endpoints
    if not config.techniques:
        return RunResult(config, (), {})

    traced: dict[int, list[PropagationPath]] = {}
    for r in eps.rx:
        paths: list[PropagationPath] = []
        los = trace_los(scene, eps.tx, r.position)
        if los is not None:
            paths.append(los)
        if config.reflection_order > 0:
            paths.extend(
                trace_reflections(scene, eps.tx, r.position, config.reflection_order)
            )
        traced[r.rx_id] = paths

    kinds_needed = {t.tile_kind for t in config.techniques if t.tile_kind is not None}
    tilesets: dict[TileKind, TileSet] = {}
    tile_cfgs: dict[int, tuple] = {}
    if kinds_needed:
        grid = uniform_tile_grid(scene, config.tile_host_surface_ids, config.tile_pitch_m)
        for kind in kinds_needed:
            tilesets[kind] = TileSet(
                kind,
                grid,
                config.tile_efficiency_db,
                config.reflectarray_cutoff_hz,
                config.reflectarray_rolloff_db_per_octave,
            )
        any_set = next(iter(tilesets.values()))
        for r in eps.rx:
            # Aiming and visibility depend on geometry only: shared by kinds.
            tile_cfgs[r.rx_id] = configure(any_set, scene, eps.tx, r.position)

    # (rx_id, frequency, tile kind) -> (aggregate gain, path count)
    agg_cache: dict[tuple[int, float, Optional[TileKind]], tuple[Optional[float], int]] = {}

    def aggregate_for(rx, f: float, kind: Optional[TileKind]) -> tuple[Optional[float], int]:
        key = (rx.rx_id, f, kind)
        if key not in agg_cache:
            gains = [path_gain(p, f, scene, config.table) for p in traced[rx.rx_id]]
            if kind is not None:
                gains.extend(
                    assisted_gains(
                        tile_cfgs[rx.rx_id], tilesets[kind], eps.tx, rx.position, f, config.table
                    )
                )
            if gains:
                agg_cache[key] = (aggregate_gain_db(gains), len(gains))
            else:
                agg_cache[key] = (None, 0)
        return agg_cache[key]

    rows: list[LinkResult] = []
    allocations: dict[tuple[str, float], tuple[AllocationRow, ...]] = {}
    for tech in config.techniques:
        tx_arr, rx_arr = _arrays_for(config, tech)
        for f in config.frequencies_hz:
            radio = RadioConfig(
                f,
                tx_power_dbm=config.tx_power_dbm,
                noise_psd_dbm_hz=config.noise_psd_dbm_hz,
                tx_array=tx_arr,
                rx_array=rx_arr,
            )
            for r in eps.rx:
                agg, n_paths = aggregate_for(r, f, tech.tile_kind)
                if agg is None:
                    rows.append(
                        LinkResult(
                            r.rx_id, f, tech.tag, r.nominal_distance_m, r.los,
                            0, None, None, None, True,
                        )
                    )
                    continue
                s = snr_db(radio, agg)
                c = capacity_bps(radio, s)
                rows.append(
                    LinkResult(
                        r.rx_id, f, tech.tag, r.nominal_distance_m, r.los,
                        n_paths, agg, s, c, False,
                    )
                )
            if tech.use_allocation:
                allocations[(tech.tag, f)] = _allocate_links(config, radio, tech, f, aggregate_for)
    return RunResult(config, tuple(rows), allocations)


def _allocate_links(config, radio, tech, f, aggregate_for) -> tuple[AllocationRow, ...]:
    """Share the run band across all links, farthest at the window center."""
    eps = config.endpoints
    window = SpectralWindow(f - radio.bandwidth_hz / 2.0, f + radio.bandwidth_hz / 2.0)
    subs = partition(window, len(eps.rx))
    demands = [LinkDemand(r.rx_id, r.nominal_distance_m) for r in eps.rx]
    assigned = equal_power_split(
        config.tx_power_dbm, allocate_center_out(subs, demands)
    )
    by_id = {r.rx_id: r for r in eps.rx}
    end_gain = config.array_gain_dbi if tech.use_arrays else 0.0
    rows = []
    for a in assigned:
        r = by_id[a.demand.link_id]
        agg, _ = aggregate_for(r, f, tech.tile_kind)
        band = a.sub.bandwidth_hz
        if config.adaptive_allocation_bandwidth:
            band = usable_bandwidth_hz(a.sub, r.nominal_distance_m, config.table)
        if agg is None or band <= 0.0:
            rate = 0.0
        else:
            noise = config.noise_psd_dbm_hz + 10.0 * math.log10(band)
            s = a.power_dbm + 2.0 * end_gain + agg - noise
            rate = band * math.log2(1.0 + 10.0 ** (s / 10.0))
        rows.append(
            AllocationRow(
                a.demand.link_id,
                a.demand.distance_m,
                a.sub.f_lo_hz,
                a.sub.f_hi_hz,
                a.power_dbm,
                rate,
            )
        )
    rows.sort(key=lambda x: x.link_id)
    return tuple(rows)


@dataclass(frozen=True)
class ThresholdDistance:
    """Reach figure: distance at which SNR crosses the threshold."""

    meters: float
    qualifier: str  # "interpolated", "at_least", "below"

    def __str__(self) -> str:
        if self.qualifier == "at_least":
            return f">= {self.meters:g} m"
        if self.qualifier == "below":
            return f"< {self.meters:g} m"
        return f"{self.meters:.2f} m"


def distance_to_threshold(
    result: RunResult,
    technique: str,
    frequency_hz: float,
    population: str,
    threshold_db: Optional[float] = None,
) -> ThresholdDistance:
    """Largest distance at which the population's SNR meets the threshold.

    population is "LOS" or "NLOS". Crossings interpolate linearly in dB
    between the straddling receivers; when the next receiver out is in
    outage the crossing is pinned at the last served one.
    """
    if population not in ("LOS", "NLOS"):
        raise ValueError("population must be 'LOS' or 'NLOS'")
    thr = result.config.snr_threshold_db if threshold_db is None else threshold_db
    want_los = population == "LOS"
    rows = [
        r
        for r in result.select(technique, frequency_hz)
        if r.los == want_los
    ]
    if not rows:
        raise ValueError(f"no rows for {technique} at {frequency_hz} Hz ({population})")
    rows.sort(key=lambda r: r.nominal_distance_m)
    snrs = [(-math.inf if r.snr_db is None else r.snr_db) for r in rows]
    dists = [r.nominal_distance_m for r in rows]
    meets = [s >= thr for s in snrs]
    if not any(meets):
        return ThresholdDistance(dists[0], "below")
    i = max(j for j, m in enumerate(meets) if m)
    if i == len(rows) - 1:
        return ThresholdDistance(dists[-1], "at_least")
    s0, s1 = snrs[i], snrs[i + 1]
    if s1 == -math.inf:
        return ThresholdDistance(dists[i], "interpolated")
    t = (s0 - thr) / (s0 - s1)
    return ThresholdDistance(dists[i] + t * (dists[i + 1] - dists[i]), "interpolated")


@dataclass(frozen=True)
class GainStats:
    """Average SNR delta over a baseline, plus outage bookkeeping."""

    mean_delta_db: Optional[float]
    compared: int
    rescued: int


def gain_statistics(
    result: RunResult, technique: str, frequency_hz: float
) -> GainStats:
    """Mean SNR gain of a technique over BASELINE at one frequency.

    Averages over receivers served by both; receivers the baseline loses
    entirely but the technique serves count as rescued instead of entering
    the mean.
    """
    base = {r.rx_id: r for r in result.select("BASELINE", frequency_hz)}
    tech = {r.rx_id: r for r in result.select(technique, frequency_hz)}
    if not base:
        raise ValueError("gain statistics need BASELINE rows in the result")
    if not tech:
        raise ValueError(f"no rows for technique {technique!r}")
    deltas = []
    rescued = 0
    for rx_id, b in base.items():
        t = tech.get(rx_id)
        if t is None:
            continue
        if b.in_outage and not t.in_outage:
            rescued += 1
        elif not b.in_outage and not t.in_outage:
            deltas.append(t.snr_db - b.snr_db)
    mean = sum(deltas) / len(deltas) if deltas else None
    return GainStats(mean, len(deltas), rescued)


# --- emission ----------------------------------------------------------------

CSV_COLUMNS = (
    "technique",
    "frequency_hz",
    "rx_id",
    "nominal_distance_m",
    "los_flag",
    "n_paths",
    "aggregate_gain_db",
    "snr_db",
    "capacity_bps",
    "outage",
)


def _fmt(x: Optional[float], places: int = 6) -> str:
    return "" if x is None else f"{x:.{places}f}"


def emit(result: RunResult, format: str = "csv") -> bytes:
    """Render a run: 'csv' for the row grid, 'summary' for the reach table."""
    if format == "csv":
        return _emit_csv(result)
    if format == "summary":
        return _emit_summary(result)
    raise ValueError(f"unknown emit format {format!r}")


def _emit_csv(result: RunResult) -> bytes:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in result.rows:
        w.writerow(
            [
                r.technique,
                f"{r.frequency_hz:.0f}",
                r.rx_id,
                f"{r.nominal_distance_m:.3f}",
                int(r.los),
                r.n_paths,
                _fmt(r.aggregate_gain_db),
                _fmt(r.snr_db),
                _fmt(r.capacity_bps, 3),
                int(r.in_outage),
            ]
        )
    return buf.getvalue().encode("utf-8")


def _emit_summary(result: RunResult) -> bytes:
    lines = []
    thr = result.config.snr_threshold_db
    lines.append(f"reach at snr >= {thr:g} dB, gain vs BASELINE")
    header = f"{'technique':<14}{'freq_ghz':>10}{'los_reach':>14}{'nlos_reach':>14}{'mean_gain_db':>14}{'rescued':>9}"
    lines.append(header)
    # gain columns compare against BASELINE and go blank without it
    have_baseline = any(t.tag == "BASELINE" for t in result.config.techniques)
    for tech in result.config.techniques:
        for f in result.config.frequencies_hz:
            los = distance_to_threshold(result, tech.tag, f, "LOS")
            nlos = distance_to_threshold(result, tech.tag, f, "NLOS")
            mean, rescued = "-", "-"
            if have_baseline:
                stats = gain_statistics(result, tech.tag, f)
                if stats.mean_delta_db is not None:
                    mean = f"{stats.mean_delta_db:.2f}"
                rescued = str(stats.rescued)
            lines.append(
                f"{tech.tag:<14}{f / 1e9:>10.1f}{str(los):>14}{str(nlos):>14}"
                f"{mean:>14}{rescued:>9}"
            )
    for (tag, f), rows in sorted(result.allocations.items()):
        total = sum(r.achievable_rate_bps for r in rows)
        lines.append(
            f"allocation {tag} @ {f / 1e9:.1f} GHz: {len(rows)} links, "
            f"sum rate {total / 1e9:.3f} Gbps"
        )
    return ("\n".join(lines) + "\n").encode("utf-8")


def emit_allocation(result: RunResult, technique: str, frequency_hz: float) -> bytes:
    """CSV allocation report for one technique/frequency of the run."""
    key = (technique, frequency_hz)
    if key not in result.allocations:
        raise ValueError(f"no allocation computed for {technique} at {frequency_hz} Hz")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(
        ("link_id", "distance_m", "sub_f_lo_hz", "sub_f_hi_hz", "power_dbm", "achievable_rate_bps")
    )
    for row in result.allocations[key]:
        w.writerow(
            [
                row.link_id,
                f"{row.distance_m:.3f}",
                f"{row.sub_f_lo_hz:.3f}",
                f"{row.sub_f_hi_hz:.3f}",
                f"{row.power_dbm:.6f}",
                f"{row.achievable_rate_bps:.3f}",
            ]
        )
    return buf.getvalue().encode("utf-8")
