"""Specular ray tracing by the image method, up to two bounces.

Each candidate bounce sequence mirrors the transmitter through the surface
chain, then back-traces the bounce points from the receiver. A candidate
survives when every bounce lands inside its rectangle and every leg of the
polyline is unobstructed. Results are deterministic: sorted by bounce count,
then path length, then the surface id tuple.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from typing import IO, Optional, Sequence

import numpy as np

from .geometry import (
    GEOM_EPS,
    Scene,
    Surface,
    Vec3,
    _vec,
    is_occluded,
    mirror_point,
    normalize,
)

ANGLE_EPS = 1e-6  # radians, specular-law acceptance
REL_LENGTH_EPS = 1e-9


class PathKind(str, Enum):
    LOS = "LOS"
    REFLECT1 = "REFLECT1"
    REFLECT2 = "REFLECT2"
    SURFACE_ASSISTED = "SURFACE_ASSISTED"


_BOUNCES_FOR_KIND = {
    PathKind.LOS: 0,
    PathKind.REFLECT1: 1,
    PathKind.REFLECT2: 2,
    PathKind.SURFACE_ASSISTED: 1,
}


@dataclass(frozen=True)
class PropagationPath:
    """Polyline from tx to rx with the surfaces touched along the way."""

    kind: PathKind
    vertices: tuple[Vec3, ...]
    bounce_surfaces: tuple[int, ...]
    length: float

    @classmethod
    def build(
        cls,
        kind: PathKind,
        vertices: Sequence[Vec3],
        bounce_surfaces: Sequence[int] = (),
    ) -> "PropagationPath":
        verts = tuple(_vec(v) for v in vertices)
        length = 0.0
        for p, q in zip(verts, verts[1:]):
            length += float(np.linalg.norm(q - p))
        return cls(kind, verts, tuple(int(i) for i in bounce_surfaces), length)

    @property
    def order(self) -> int:
        return len(self.bounce_surfaces) if self.kind != PathKind.LOS else 0


def trace_los(scene: Scene, tx: Vec3, rx: Vec3) -> Optional[PropagationPath]:
    """Direct path, or None when a surface blocks the sightline."""
    tx = _vec(tx)
    rx = _vec(rx)
    if is_occluded(tx, rx, scene):
        return None
    return PropagationPath.build(PathKind.LOS, (tx, rx))


def _back_trace(
    scene: Scene,
    tx: Vec3,
    rx: Vec3,
    chain: tuple[Surface, ...],
    images: Sequence[Vec3],
) -> Optional[PropagationPath]:
    """Solve bounce points for a surface chain from its image stack."""
    bounces: list[Vec3] = []
    target = rx
    for k in range(len(chain) - 1, -1, -1):
        s = chain[k]
        img = images[k]
        da = float(np.dot(img - s.corner, s.normal))
        db = float(np.dot(target - s.corner, s.normal))
        if not da * db < 0.0:
            return None
        t = da / (da - db)
        h = img + t * (target - img)
        seg = float(np.linalg.norm(target - img))
        if t * seg <= GEOM_EPS or (1.0 - t) * seg <= GEOM_EPS:
            return None
        if not s.contains_point(h, tol=GEOM_EPS):
            return None
        bounces.append(h)
        target = h
    bounces.reverse()
    vertices = [tx, *bounces, rx]
    for p, q in zip(vertices, vertices[1:]):
        if float(np.linalg.norm(q - p)) <= GEOM_EPS:
            return None
        if is_occluded(p, q, scene):
            return None
    kind = PathKind.REFLECT1 if len(chain) == 1 else PathKind.REFLECT2
    return PropagationPath.build(kind, vertices, tuple(s.id for s in chain))


def trace_reflections(
    scene: Scene, tx: Vec3, rx: Vec3, max_order: int
) -> list[PropagationPath]:
    """All specular paths with 1..max_order bounces, max_order in {1, 2}."""
    if max_order not in (1, 2):
        raise ValueError(f"max_order must be 1 or 2, got {max_order}")
    tx = _vec(tx)
    rx = _vec(rx)
    paths: list[PropagationPath] = []
    first_images = {}
    for s in scene.surfaces:
        img = mirror_point(tx, s)
        first_images[s.id] = img
        p = _back_trace(scene, tx, rx, (s,), (img,))
        if p is not None:
            paths.append(p)
    if max_order == 2:
        for s1 in scene.surfaces:
            i1 = first_images[s1.id]
            for s2 in scene.surfaces:
                if s2.id == s1.id:
                    continue
                i2 = mirror_point(i1, s2)
                p = _back_trace(scene, tx, rx, (s1, s2), (i1, i2))
                if p is not None:
                    paths.append(p)
    paths.sort(key=lambda p: (p.order, p.length, p.bounce_surfaces))
    return paths


def validate_path(path: PropagationPath, scene: Scene) -> bool:
    """Re-check a path against the scene: structure, geometry, obstruction.

    Engineered-surface paths skip the specular-law check (their redirection
    angle is set by the tile, not by the host wall's orientation).
    """
    expected_bounces = _BOUNCES_FOR_KIND[path.kind]
    if len(path.bounce_surfaces) != expected_bounces:
        return False
    if len(path.vertices) != expected_bounces + 2:
        return False
    length = 0.0
    for p, q in zip(path.vertices, path.vertices[1:]):
        d = float(np.linalg.norm(q - p))
        if d <= GEOM_EPS:
            return False
        length += d
    if abs(length - path.length) > REL_LENGTH_EPS * max(1.0, path.length):
        return False
    for p, q in zip(path.vertices, path.vertices[1:]):
        if is_occluded(p, q, scene):
            return False
    for i, sid in enumerate(path.bounce_surfaces):
        try:
            s = scene.surface(sid)
        except KeyError:
            return False
        b = path.vertices[i + 1]
        if not s.contains_point(b, tol=GEOM_EPS):
            return False
        if path.kind == PathKind.SURFACE_ASSISTED:
            continue
        d_in = normalize(b - path.vertices[i])
        d_out = normalize(path.vertices[i + 2] - b)
        n = s.normal
        reflected = d_in - 2.0 * float(np.dot(d_in, n)) * n
        cosang = float(np.clip(np.dot(reflected, d_out), -1.0, 1.0))
        if float(np.arccos(cosang)) > ANGLE_EPS:
            return False
    return True


def path_record(path: PropagationPath) -> dict:
    return {
        "kind": path.kind.value,
        "order": path.order,
        "length_m": path.length,
        "vertices": [[float(c) for c in v] for v in path.vertices],
        "surface_ids": list(path.bounce_surfaces),
    }


def dump_paths(paths: Sequence[PropagationPath], stream: IO[str]) -> None:
    """Write one JSON record per line, in the paths' given order."""
    for p in paths:
        stream.write(json.dumps(path_record(p), sort_keys=True))
        stream.write("\n")
