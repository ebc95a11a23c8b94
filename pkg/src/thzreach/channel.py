"""Per-path gains, molecular absorption, and spectral window extraction.

Loss model per path: free-space spreading over the unfolded path length,
exponential molecular absorption over the same length, and a per-bounce
reflectance penalty. Multipath aggregates as an incoherent power sum.

Frequencies are Hz, distances metres, gains and losses dB (gains negative
when lossy). Absorption coefficients k(f) are 1/m; the dB conversion factor
is 10*log10(e) per metre of k.
"""

from __future__ import annotations

import io
import math
from bisect import bisect_left
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .geometry import Scene, Vec3
from .raytracer import PathKind, PropagationPath, trace_los, trace_reflections

SPEED_OF_LIGHT = 299_792_458.0
DB_PER_NEPER = 10.0 * math.log10(math.e)


class OutageError(RuntimeError):
    """Raised when a link has no propagation path at all."""


class AbsorptionTable:
    """Sampled molecular absorption coefficient k(f), linearly interpolated.

    Frequencies must be strictly increasing and coefficients non-negative.
    Queries outside the sampled range raise: extrapolating absorption lines
    silently would fabricate physics.
    """

    def __init__(self, frequencies_hz: Sequence[float], k_per_m: Sequence[float]):
        f = np.asarray(frequencies_hz, dtype=np.float64)
        k = np.asarray(k_per_m, dtype=np.float64)
        if f.ndim != 1 or f.shape != k.shape or f.size < 2:
            raise ValueError("absorption table needs matching 1-d arrays, length >= 2")
        if not np.all(np.diff(f) > 0.0):
            raise ValueError("absorption table frequencies must be strictly increasing")
        if np.any(k < 0.0):
            raise ValueError("absorption coefficients must be non-negative")
        self.frequencies_hz = f
        self.k_per_m = k
        f.setflags(write=False)
        k.setflags(write=False)

    @property
    def f_min(self) -> float:
        return float(self.frequencies_hz[0])

    @property
    def f_max(self) -> float:
        return float(self.frequencies_hz[-1])

    def k_at(self, frequency_hz: float) -> float:
        f = float(frequency_hz)
        if f < self.f_min or f > self.f_max:
            raise ValueError(
                f"frequency {f:.6g} Hz outside absorption table range "
                f"[{self.f_min:.6g}, {self.f_max:.6g}] Hz"
            )
        return float(np.interp(f, self.frequencies_hz, self.k_per_m))


def load_absorption_table(source) -> AbsorptionTable:
    """Read a two-column table (frequency_hz, k_per_m) from a path or stream.

    Blank lines and '#' comments are skipped. Scientific notation accepted.
    Malformed rows report their line number; ordering is validated, never
    silently repaired.
    """
    if hasattr(source, "read"):
        return _parse_table(source, getattr(source, "name", "<stream>"))
    with open(source, "r", encoding="utf-8") as fh:
        return _parse_table(fh, str(source))


def _parse_table(fh, name: str) -> AbsorptionTable:
    freqs: list[float] = []
    ks: list[float] = []
    for lineno, raw in enumerate(fh, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.replace(",", " ").split()
        if len(parts) != 2:
            raise ValueError(f"{name}: line {lineno}: expected two columns, got {len(parts)}")
        try:
            f = float(parts[0])
            k = float(parts[1])
        except ValueError as exc:
            raise ValueError(f"{name}: line {lineno}: {exc}") from exc
        freqs.append(f)
        ks.append(k)
    if len(freqs) < 2:
        raise ValueError(f"{name}: table needs at least two rows")
    try:
        return AbsorptionTable(freqs, ks)
    except ValueError as exc:
        raise ValueError(f"{name}: {exc}") from exc


# Synthetic default: flat floors with Lorentzian lines near 0.557, 0.752 and
# 0.988 THz. Illustrative stand-in, not measured gas data; feed a real table
# through load_absorption_table for quantitative absorption work.
_DEFAULT_LINES = (
    (0.557e12, 20.0, 1.5e9),
    (0.752e12, 35.0, 2.0e9),
    (0.988e12, 50.0, 0.5e9),
)
_DEFAULT_FLOORS = ((0.0, 1.0e-4), (0.2e12, 8.0e-4), (0.7e12, 4.0e-3))
_DEFAULT_RANGE = (0.01e12, 1.2e12)


def default_absorption_table() -> AbsorptionTable:
    """Built-in synthetic absorption table covering 0.01..1.2 THz."""
    lo, hi = _DEFAULT_RANGE
    grid = set(np.arange(lo, hi + 1e9, 2e9))
    for f0, _, gamma in _DEFAULT_LINES:
        grid.update(np.arange(f0 - 40 * gamma, f0 + 40 * gamma, gamma))
        grid.update(np.arange(f0 - 8 * gamma, f0 + 8 * gamma, 0.25 * gamma))
    freqs = np.array(sorted(g for g in grid if lo <= g <= hi))
    floors_f = [f for f, _ in _DEFAULT_FLOORS]
    floors_k = [k for _, k in _DEFAULT_FLOORS]
    k = np.empty_like(freqs)
    for i, f in enumerate(freqs):
        kf = floors_k[bisect_left(floors_f, f + 1.0) - 1]
        for f0, amp, gamma in _DEFAULT_LINES:
            kf += amp * gamma * gamma / ((f - f0) * (f - f0) + gamma * gamma)
        k[i] = kf
    return AbsorptionTable(freqs, k)


def spreading_loss_db(frequency_hz: float, distance_m: float) -> float:
    """Free-space spreading loss 20*log10(4*pi*d*f/c), positive dB."""
    if frequency_hz <= 0.0:
        raise ValueError("frequency must be positive")
    if distance_m <= 0.0:
        raise ValueError("distance must be positive")
    return 20.0 * math.log10(4.0 * math.pi * distance_m * frequency_hz / SPEED_OF_LIGHT)


def absorption_loss_db(
    frequency_hz: float, distance_m: float, table: AbsorptionTable
) -> float:
    """Molecular absorption loss over distance_m, in dB."""
    if distance_m < 0.0:
        raise ValueError("distance must be non-negative")
    return DB_PER_NEPER * table.k_at(frequency_hz) * distance_m


@dataclass(frozen=True)
class PathGain:
    """Loss breakdown of one path at one frequency; total_gain_db <= 0 terms."""

    path: PropagationPath
    frequency_hz: float
    spreading_loss_db: float
    absorption_loss_db: float
    reflection_loss_db: float

    @property
    def total_gain_db(self) -> float:
        return -(self.spreading_loss_db + self.absorption_loss_db + self.reflection_loss_db)


def path_gain(
    path: PropagationPath,
    frequency_hz: float,
    scene: Scene,
    table: AbsorptionTable,
) -> PathGain:
    """Evaluate one traced path: spreading + absorption + bounce reflectance.

    Applies to LOS and specular bounce paths; engineered-surface paths carry
    their own redirection loss and are built in the tiles module.
    """
    if path.kind == PathKind.SURFACE_ASSISTED:
        raise ValueError("engineered-surface paths are evaluated by tiles.assisted_gains")
    spread = spreading_loss_db(frequency_hz, path.length)
    absorb = absorption_loss_db(frequency_hz, path.length, table)
    refl = 0.0
    for sid in path.bounce_surfaces:
        r = scene.material_for(sid).reflectance
        if r == 0.0:
            refl = math.inf
        else:
            refl += -10.0 * math.log10(r)
    return PathGain(path, float(frequency_hz), spread, absorb, refl)


def aggregate_gain_db(gains: Iterable[PathGain]) -> float:
    """Incoherent power sum of per-path gains, in dB."""
    gl = list(gains)
    if not gl:
        raise OutageError("no propagation path: link is in outage")
    total = 0.0
    for g in gl:
        total += 10.0 ** (g.total_gain_db / 10.0)
    if total == 0.0:
        return -math.inf
    return 10.0 * math.log10(total)


def path_loss_spectrum(
    scene: Scene,
    tx: Vec3,
    rx: Vec3,
    frequencies_hz: Sequence[float],
    table: AbsorptionTable,
    max_order: int = 2,
) -> list[tuple[float, float]]:
    """Aggregate path loss (positive dB) per frequency for one tx-rx pair.

    The path set is frequency independent; when no path exists the link is
    in outage and the result is empty.
    """
    paths: list[PropagationPath] = []
    los = trace_los(scene, tx, rx)
    if los is not None:
        paths.append(los)
    if max_order > 0:
        paths.extend(trace_reflections(scene, tx, rx, max_order))
    if not paths:
        return []
    out = []
    for f in frequencies_hz:
        gains = [path_gain(p, f, scene, table) for p in paths]
        out.append((float(f), -aggregate_gain_db(gains)))
    return out


@dataclass(frozen=True)
class SpectralWindow:
    """Contiguous band where loss stays within a threshold of its local floor."""

    f_lo_hz: float
    f_hi_hz: float

    def __post_init__(self) -> None:
        if not self.f_lo_hz < self.f_hi_hz:
            raise ValueError("spectral window needs f_lo < f_hi")

    @property
    def center_hz(self) -> float:
        return (self.f_lo_hz + self.f_hi_hz) / 2.0

    @property
    def bandwidth_hz(self) -> float:
        return self.f_hi_hz - self.f_lo_hz


def _peak_prominences(loss: np.ndarray) -> list[tuple[int, float]]:
    """Local maxima with their prominence (height above the key saddle)."""
    n = loss.size
    peaks = []
    for i in range(1, n - 1):
        if loss[i] > loss[i - 1] and loss[i] >= loss[i + 1]:
            left_min = loss[i]
            j = i - 1
            while j >= 0 and loss[j] <= loss[i]:
                left_min = min(left_min, loss[j])
                j -= 1
            right_min = loss[i]
            j = i + 1
            while j < n and loss[j] <= loss[i]:
                right_min = min(right_min, loss[j])
                j += 1
            peaks.append((i, float(loss[i] - max(left_min, right_min))))
    return peaks


def spectral_windows(
    spectrum: Sequence[tuple[float, float]],
    threshold_db: float = 3.0,
) -> list[SpectralWindow]:
    """Extract transmission windows from a sampled loss spectrum.

    Absorption peaks whose prominence reaches threshold_db split the grid
    into bands; within each band the window is the contiguous run around the
    band minimum where loss stays within threshold_db of it. Windows never
    overlap and come out sorted by frequency.
    """
    if threshold_db <= 0.0:
        raise ValueError("threshold_db must be positive")
    if len(spectrum) < 2:
        return []
    freqs = np.array([f for f, _ in spectrum], dtype=np.float64)
    loss = np.array([l for _, l in spectrum], dtype=np.float64)
    if not np.all(np.diff(freqs) > 0.0):
        raise ValueError("spectrum frequencies must be strictly increasing")
    barriers = [i for i, prom in _peak_prominences(loss) if prom >= threshold_db]
    edges = [-1, *barriers, len(loss)]
    windows: list[SpectralWindow] = []
    for lo, hi in zip(edges, edges[1:]):
        band = slice(lo + 1, hi)
        if band.stop - band.start < 2:
            continue
        sub = loss[band]
        jmin = int(np.argmin(sub))
        limit = float(sub[jmin]) + threshold_db
        a = jmin
        while a - 1 >= 0 and sub[a - 1] <= limit:
            a -= 1
        b = jmin
        while b + 1 < sub.size and sub[b + 1] <= limit:
            b += 1
        if b > a:
            windows.append(
                SpectralWindow(float(freqs[band.start + a]), float(freqs[band.start + b]))
            )
    return windows


def total_window_bandwidth_hz(windows: Iterable[SpectralWindow]) -> float:
    return sum(w.bandwidth_hz for w in windows)


def free_space_spectrum(
    distance_m: float,
    frequencies_hz: Sequence[float],
    table: AbsorptionTable,
) -> list[tuple[float, float]]:
    """Loss spectrum of an unobstructed direct path of the given length."""
    return [
        (float(f), spreading_loss_db(f, distance_m) + absorption_loss_db(f, distance_m, table))
        for f in frequencies_hz
    ]
