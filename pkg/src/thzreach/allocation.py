"""Distance-ordered sub-window allocation with equal power split.

A transmission window is cut into equal sub-windows indexed outward from
the window center. Loss rises toward window edges, so the farthest link
gets the center sub-window, the next farthest the sub-window one step out,
and so on. Power splits equally across assigned links; linear power is
conserved exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

from .channel import (
    AbsorptionTable,
    SpectralWindow,
    free_space_spectrum,
    spectral_windows,
)


@dataclass(frozen=True)
class SubWindow:
    """Equal-width slice of a parent window, indexed from the center out.

    Index 0 exists only for odd sub-window counts; even counts pair off as
    -1, +1 adjacent to the midpoint, then -2, +2, and so on outward.
    """

    parent: SpectralWindow
    index_from_center: int
    f_lo_hz: float
    f_hi_hz: float

    def __post_init__(self) -> None:
        if not self.f_lo_hz < self.f_hi_hz:
            raise ValueError("sub-window needs f_lo < f_hi")

    @property
    def bandwidth_hz(self) -> float:
        return self.f_hi_hz - self.f_lo_hz

    @property
    def center_hz(self) -> float:
        return (self.f_lo_hz + self.f_hi_hz) / 2.0


@dataclass(frozen=True)
class LinkDemand:
    link_id: int
    distance_m: float

    def __post_init__(self) -> None:
        if self.distance_m <= 0.0:
            raise ValueError("link distance must be positive")


def partition(window: SpectralWindow, n_sub: int) -> tuple[SubWindow, ...]:
    """Cut a window into n_sub equal sub-windows, center-indexed.

    The slices tile the parent exactly: adjacent edges are shared and the
    widths sum to the parent bandwidth.
    """
    if n_sub < 1:
        raise ValueError("n_sub must be >= 1")
    width = window.bandwidth_hz / n_sub
    subs = []
    for j in range(n_sub):
        offset = j - (n_sub - 1) / 2.0
        index = int(math.copysign(math.ceil(abs(offset)), offset)) if offset else 0
        f_lo = window.f_lo_hz + j * width
        f_hi = window.f_hi_hz if j == n_sub - 1 else window.f_lo_hz + (j + 1) * width
        subs.append(SubWindow(window, index, f_lo, f_hi))
    return tuple(subs)


@dataclass(frozen=True)
class Assignment:
    demand: LinkDemand
    sub: SubWindow
    power_dbm: Optional[float] = None


def allocate_center_out(
    subs: Sequence[SubWindow], demands: Sequence[LinkDemand]
) -> tuple[Assignment, ...]:
    """Assign sub-windows to links, farthest link nearest the center.

    Links sort by distance descending (ties by link id ascending); slots
    sort by |index| ascending with |index| ties going to the lower
    frequency. Raises when there are more links than sub-windows, naming
    the links left out.
    """
    ids = [d.link_id for d in demands]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate link ids in demand set")
    order = sorted(demands, key=lambda d: (-d.distance_m, d.link_id))
    slots = sorted(subs, key=lambda s: (abs(s.index_from_center), s.f_lo_hz))
    if len(order) > len(slots):
        left_out = [d.link_id for d in order[len(slots):]]
        raise ValueError(
            f"{len(order)} links for {len(slots)} sub-windows; unassigned links {left_out}"
        )
    return tuple(Assignment(d, s) for d, s in zip(order, slots))


def equal_power_split(
    total_power_dbm: float, assignments: Sequence[Assignment]
) -> tuple[Assignment, ...]:
    """Split total transmit power equally over the assigned links."""
    n = len(assignments)
    if n == 0:
        return ()
    per_link = total_power_dbm - 10.0 * math.log10(n)
    return tuple(Assignment(a.demand, a.sub, per_link) for a in assignments)


def usable_bandwidth_hz(
    sub: SubWindow,
    distance_m: float,
    table: AbsorptionTable,
    threshold_db: float = 3.0,
    n_grid: int = 64,
) -> float:
    """Bandwidth of the sub-window still usable at the link's distance.

    Re-runs window extraction on the free-space loss spectrum across the
    sub-window: absorption grows with distance, so edges of a wide window
    may fall out of the threshold for far links.
    """
    step = (sub.f_hi_hz - sub.f_lo_hz) / (n_grid - 1)
    grid = [sub.f_lo_hz + i * step for i in range(n_grid)]
    spectrum = free_space_spectrum(distance_m, grid, table)
    windows = spectral_windows(spectrum, threshold_db)
    return sum(w.bandwidth_hz for w in windows)
