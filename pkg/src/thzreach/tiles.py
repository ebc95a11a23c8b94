"""Engineered reflecting tiles: passive reflectarrays and tunable panels.

Walls carry a grid of tiles. A tile activates when it sees both link ends
unobstructed; its virtual normal is the bisector of the two sight lines, so
the redirected leg obeys the reflection law about that normal by
construction. The redirected path spreads over the unfolded distance
d(tx, tile) + d(tile, rx) and pays a fixed redirection efficiency.

Reflectarrays share the same geometry but their phase profile is fixed at
manufacture for one design frequency; above a mechanical steering cutoff
their response rolls off by a constant number of dB per octave. Tunable
panels re-phase electronically and take no roll-off.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .channel import AbsorptionTable, PathGain, absorption_loss_db, spreading_loss_db
from .geometry import GEOM_EPS, Scene, Vec3, _vec, normalize, points_occluded_from
from .raytracer import PathKind, PropagationPath


class TileKind(str, Enum):
    REFLECTARRAY = "REFLECTARRAY"
    HYPERSURFACE = "HYPERSURFACE"


@dataclass(frozen=True)
class Tile:
    center: Vec3
    size_m: float
    host_surface_id: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "center", _vec(self.center))
        self.center.setflags(write=False)


@dataclass(frozen=True)
class TileSet:
    """A family of tiles of one kind with shared loss parameters."""

    kind: TileKind
    tiles: tuple[Tile, ...]
    efficiency_db: float = 3.0
    cutoff_frequency_hz: float = 120e9
    rolloff_db_per_octave: float = 6.0

    def __post_init__(self) -> None:
        if self.efficiency_db < 0.0:
            raise ValueError("efficiency_db is a loss and must be >= 0")
        if self.cutoff_frequency_hz <= 0.0:
            raise ValueError("cutoff frequency must be positive")
        if self.rolloff_db_per_octave < 0.0:
            raise ValueError("rolloff must be >= 0 dB per octave")


def uniform_tile_grid(
    scene: Scene,
    host_surface_ids: Sequence[int],
    pitch_m: float = 0.5,
) -> tuple[Tile, ...]:
    """Tile the given walls with a square grid of the given pitch.

    Tile centers sit at cell midpoints on the host rectangle; partial cells
    at the far edges are dropped so every tile has the full pitch footprint.
    """
    if pitch_m <= 0.0:
        raise ValueError("pitch must be positive")
    tiles: list[Tile] = []
    for sid in host_surface_ids:
        s = scene.surface(sid)
        lu = float(np.linalg.norm(s.edge_u))
        lv = float(np.linalg.norm(s.edge_v))
        nu = int(lu / pitch_m + GEOM_EPS)
        nv = int(lv / pitch_m + GEOM_EPS)
        if nu < 1 or nv < 1:
            raise ValueError(f"surface {sid} smaller than one {pitch_m} m tile")
        du = s.edge_u / lu
        dv = s.edge_v / lv
        for i in range(nu):
            for j in range(nv):
                c = s.corner + (i + 0.5) * pitch_m * du + (j + 0.5) * pitch_m * dv
                tiles.append(Tile(c, pitch_m, sid))
    return tuple(tiles)


def validate_tileset(tileset: TileSet, scene: Scene) -> None:
    """Check every tile center sits on its host surface (1e-6 m)."""
    for t in tileset.tiles:
        s = scene.surface(t.host_surface_id)
        if not s.contains_point(t.center, tol=1e-6):
            raise ValueError(
                f"tile at {t.center.tolist()} not on host surface {t.host_surface_id}"
            )


@dataclass(frozen=True)
class TileConfiguration:
    tile_index: int
    normal: Vec3
    active: bool

    def __post_init__(self) -> None:
        object.__setattr__(self, "normal", _vec(self.normal))
        self.normal.setflags(write=False)


def solve_tile_normal(tx: Vec3, tile_center: Vec3, rx: Vec3) -> Vec3:
    """Unit normal that reflects the tx sight line onto the rx sight line.

    The bisector of the two directions away from the tile. When tx and rx
    lie on the same ray the normal is that ray (retroreflection); when the
    tile sits exactly between them the bisector degenerates and any
    perpendicular works, chosen deterministically.
    """
    u = normalize(_vec(tx) - _vec(tile_center))
    v = normalize(_vec(rx) - _vec(tile_center))
    s = u + v
    n = float(np.linalg.norm(s))
    if n > 1e-12:
        return s / n
    # Opposite directions: pick a stable perpendicular to u.
    axis = np.array([0.0, 0.0, 1.0])
    if abs(float(np.dot(u, axis))) > 1.0 - 1e-9:
        axis = np.array([1.0, 0.0, 0.0])
    return normalize(np.cross(u, axis))


def configure(
    tileset: TileSet, scene: Scene, tx: Vec3, rx: Vec3
) -> tuple[TileConfiguration, ...]:
    """Aim every tile that sees both ends; leave the rest inactive.

    Visibility uses the scene occlusion test; a tile center grazing its own
    host wall does not count as blocked. Inactive tiles keep the host
    surface normal and contribute nothing.
    """
    tx = _vec(tx)
    rx = _vec(rx)
    if not tileset.tiles:
        return ()
    centers = np.stack([t.center for t in tileset.tiles])
    blocked_tx = points_occluded_from(tx, centers, scene)
    blocked_rx = points_occluded_from(rx, centers, scene)
    out = []
    for i, t in enumerate(tileset.tiles):
        if blocked_tx[i] or blocked_rx[i]:
            host_normal = scene.surface(t.host_surface_id).normal
            out.append(TileConfiguration(i, host_normal, False))
        else:
            out.append(TileConfiguration(i, solve_tile_normal(tx, t.center, rx), True))
    return tuple(out)


def redirection_loss_db(tileset: TileSet, frequency_hz: float) -> float:
    """Per-tile redirection loss at the given frequency."""
    loss = tileset.efficiency_db
    if (
        tileset.kind == TileKind.REFLECTARRAY
        and frequency_hz > tileset.cutoff_frequency_hz
    ):
        octaves = math.log2(frequency_hz / tileset.cutoff_frequency_hz)
        loss += tileset.rolloff_db_per_octave * octaves
    return loss


def assisted_gains(
    configuration: Sequence[TileConfiguration],
    tileset: TileSet,
    tx: Vec3,
    rx: Vec3,
    frequency_hz: float,
    table: AbsorptionTable,
) -> list[PathGain]:
    """One redirected path per active tile, with its loss breakdown.

    Spreading and absorption run over the unfolded length d1 + d2; the
    redirection loss rides in the reflection slot of the breakdown so the
    totals compose exactly like traced bounce paths.
    """
    tx = _vec(tx)
    rx = _vec(rx)
    redirection = redirection_loss_db(tileset, frequency_hz)
    out: list[PathGain] = []
    for cfg in configuration:
        if not cfg.active:
            continue
        tile = tileset.tiles[cfg.tile_index]
        d1 = float(np.linalg.norm(tile.center - tx))
        d2 = float(np.linalg.norm(rx - tile.center))
        total = d1 + d2
        path = PropagationPath.build(
            PathKind.SURFACE_ASSISTED,
            (tx, tile.center, rx),
            (tile.host_surface_id,),
        )
        out.append(
            PathGain(
                path,
                float(frequency_hz),
                spreading_loss_db(frequency_hz, total),
                absorption_loss_db(frequency_hz, total, table),
                redirection,
            )
        )
    return out
