"""Scene geometry: finite rectangular surfaces, occlusion, and the E-hallway.

Every reflecting surface is a bounded rectangle given by a corner and two
orthogonal edge vectors. Geometric predicates resolve at GEOM_EPS metres;
segment endpoints may graze a surface within GRAZE_EPS metres without the
surface counting as an obstruction (a bounce point lies exactly on its wall).

Example:
    >>> scene, endpoints = build_e_hallway()
    >>> len(endpoints.rx)
    15
    >>> sum(1 for r in endpoints.rx if r.los)
    9
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np
from numpy.typing import NDArray

from . import kernels

Vec3 = NDArray[np.float64]

GEOM_EPS = 1e-9
GRAZE_EPS = 1e-6


def _vec(p: Sequence[float]) -> Vec3:
    v = np.asarray(p, dtype=np.float64)
    if v.shape != (3,):
        raise ValueError(f"expected a 3-vector, got shape {v.shape}")
    return v


def normalize(v: Vec3) -> Vec3:
    n = float(np.linalg.norm(v))
    if n == 0.0:
        raise ValueError("cannot normalize a zero vector")
    return v / n


@dataclass(frozen=True)
class Material:
    """Reflecting material with a scalar power reflectance in [0, 1]."""

    id: int
    name: str
    reflectance: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.reflectance <= 1.0:
            raise ValueError(
                f"material {self.name!r}: reflectance {self.reflectance} outside [0, 1]"
            )


@dataclass(frozen=True)
class Surface:
    """Bounded rectangle: corner plus two orthogonal edge vectors.

    The unit normal is derived from edge_u x edge_v; callers may pass an
    explicit normal, which is then checked against the edges.
    """

    id: int
    corner: Vec3
    edge_u: Vec3
    edge_v: Vec3
    material_id: int
    normal: Vec3 = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        object.__setattr__(self, "corner", _vec(self.corner))
        object.__setattr__(self, "edge_u", _vec(self.edge_u))
        object.__setattr__(self, "edge_v", _vec(self.edge_v))
        lu = float(np.linalg.norm(self.edge_u))
        lv = float(np.linalg.norm(self.edge_v))
        if lu <= GEOM_EPS or lv <= GEOM_EPS:
            raise ValueError(f"surface {self.id}: degenerate edge vector")
        if abs(float(np.dot(self.edge_u, self.edge_v))) > GEOM_EPS * lu * lv:
            raise ValueError(f"surface {self.id}: edge vectors are not orthogonal")
        derived = normalize(np.cross(self.edge_u, self.edge_v))
        if self.normal is None:
            object.__setattr__(self, "normal", derived)
        else:
            object.__setattr__(self, "normal", _vec(self.normal))
            if abs(float(np.linalg.norm(self.normal)) - 1.0) > GEOM_EPS:
                raise ValueError(f"surface {self.id}: normal is not unit length")
            if abs(abs(float(np.dot(self.normal, derived))) - 1.0) > GEOM_EPS:
                raise ValueError(f"surface {self.id}: normal not perpendicular to edges")
        for arr in (self.corner, self.edge_u, self.edge_v, self.normal):
            arr.setflags(write=False)

    @property
    def area(self) -> float:
        return float(np.linalg.norm(self.edge_u) * np.linalg.norm(self.edge_v))

    def point_at(self, u: float, v: float) -> Vec3:
        return self.corner + u * self.edge_u + v * self.edge_v

    def contains_point(self, p: Vec3, tol: float = GEOM_EPS) -> bool:
        """True when p lies on the rectangle (plane and extents) within tol metres."""
        w = p - self.corner
        if abs(float(np.dot(w, self.normal))) > tol:
            return False
        lu2 = float(np.dot(self.edge_u, self.edge_u))
        lv2 = float(np.dot(self.edge_v, self.edge_v))
        u = float(np.dot(w, self.edge_u)) / lu2
        v = float(np.dot(w, self.edge_v)) / lv2
        tu = tol / np.sqrt(lu2)
        tv = tol / np.sqrt(lv2)
        return -tu <= u <= 1.0 + tu and -tv <= v <= 1.0 + tv


@dataclass(frozen=True)
class ScenePack:
    """Scene surfaces flattened to contiguous arrays for the kernels."""

    corner: NDArray[np.float64]
    edge_u: NDArray[np.float64]
    edge_v: NDArray[np.float64]
    normal: NDArray[np.float64]
    len2_u: NDArray[np.float64]
    len2_v: NDArray[np.float64]
    inv_len_u: NDArray[np.float64]
    inv_len_v: NDArray[np.float64]
    ids: NDArray[np.int64]


class Scene:
    """Immutable collection of surfaces and materials plus the room height."""

    def __init__(
        self,
        surfaces: Iterable[Surface],
        materials: Iterable[Material],
        height: float,
    ) -> None:
        self.surfaces: tuple[Surface, ...] = tuple(surfaces)
        self.materials: tuple[Material, ...] = tuple(materials)
        self.height = float(height)
        if self.height <= 0.0:
            raise ValueError("scene height must be positive")
        self._mat_by_id = {m.id: m for m in self.materials}
        if len(self._mat_by_id) != len(self.materials):
            raise ValueError("duplicate material ids")
        self._surf_by_id = {s.id: s for s in self.surfaces}
        if len(self._surf_by_id) != len(self.surfaces):
            raise ValueError("duplicate surface ids")
        for s in self.surfaces:
            if s.material_id not in self._mat_by_id:
                raise ValueError(
                    f"surface {s.id} references unknown material {s.material_id}"
                )
        self._pack = self._build_pack()

    def _build_pack(self) -> ScenePack:
        n = len(self.surfaces)
        corner = np.zeros((n, 3))
        eu = np.zeros((n, 3))
        ev = np.zeros((n, 3))
        nrm = np.zeros((n, 3))
        for i, s in enumerate(self.surfaces):
            corner[i] = s.corner
            eu[i] = s.edge_u
            ev[i] = s.edge_v
            nrm[i] = s.normal
        lu2 = (eu * eu).sum(axis=1)
        lv2 = (ev * ev).sum(axis=1)
        with np.errstate(divide="ignore"):
            ilu = np.where(lu2 > 0, 1.0 / np.sqrt(lu2), 0.0)
            ilv = np.where(lv2 > 0, 1.0 / np.sqrt(lv2), 0.0)
        ids = np.array([s.id for s in self.surfaces], dtype=np.int64)
        return ScenePack(
            np.ascontiguousarray(corner),
            np.ascontiguousarray(eu),
            np.ascontiguousarray(ev),
            np.ascontiguousarray(nrm),
            np.ascontiguousarray(lu2),
            np.ascontiguousarray(lv2),
            np.ascontiguousarray(ilu),
            np.ascontiguousarray(ilv),
            ids,
        )

    @property
    def pack(self) -> ScenePack:
        return self._pack

    def surface(self, surface_id: int) -> Surface:
        return self._surf_by_id[surface_id]

    def material_for(self, surface_id: int) -> Material:
        return self._mat_by_id[self._surf_by_id[surface_id].material_id]


@dataclass(frozen=True)
class RxPoint:
    rx_id: int
    position: Vec3
    los: bool
    nominal_distance_m: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "position", _vec(self.position))
        self.position.setflags(write=False)


@dataclass(frozen=True)
class EndpointSet:
    tx: Vec3
    rx: tuple[RxPoint, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "tx", _vec(self.tx))
        self.tx.setflags(write=False)


def mirror_point(p: Vec3, surface: Surface) -> Vec3:
    """Mirror image of p across the surface's infinite plane."""
    d = float(np.dot(p - surface.corner, surface.normal))
    return p - 2.0 * d * surface.normal


def segment_hits_surface(a: Vec3, b: Vec3, surface: Surface) -> Optional[Vec3]:
    """Crossing point of the open segment (a, b) with the bounded rectangle.

    Returns None for no crossing, a parallel segment, or a crossing outside
    the rectangle extents (extents widened by GEOM_EPS metres).
    """
    a = _vec(a)
    b = _vec(b)
    if float(np.linalg.norm(b - a)) <= GEOM_EPS:
        raise ValueError("segment endpoints coincide")
    da = float(np.dot(a - surface.corner, surface.normal))
    db = float(np.dot(b - surface.corner, surface.normal))
    if not da * db < 0.0:
        return None
    t = da / (da - db)
    h = a + t * (b - a)
    w = h - surface.corner
    lu2 = float(np.dot(surface.edge_u, surface.edge_u))
    lv2 = float(np.dot(surface.edge_v, surface.edge_v))
    u = float(np.dot(w, surface.edge_u)) / lu2
    v = float(np.dot(w, surface.edge_v)) / lv2
    tu = GEOM_EPS / np.sqrt(lu2)
    tv = GEOM_EPS / np.sqrt(lv2)
    if -tu <= u <= 1.0 + tu and -tv <= v <= 1.0 + tv:
        return h
    return None


def is_occluded(
    a: Vec3,
    b: Vec3,
    scene: Scene,
    ignore: frozenset[int] | set[int] = frozenset(),
) -> bool:
    """True when any surface not in ignore blocks the open segment (a, b).

    Endpoint grazing within GRAZE_EPS metres does not block: bounce points
    sit exactly on their surfaces and must not self-occlude.
    """
    pack = scene.pack
    skip = np.zeros(len(scene.surfaces), dtype=np.uint8)
    if ignore:
        for i, sid in enumerate(pack.ids):
            if int(sid) in ignore:
                skip[i] = 1
    return kernels.segment_occluded(
        pack.corner,
        pack.edge_u,
        pack.edge_v,
        pack.normal,
        pack.len2_u,
        pack.len2_v,
        pack.inv_len_u,
        pack.inv_len_v,
        np.ascontiguousarray(_vec(a)),
        np.ascontiguousarray(_vec(b)),
        GRAZE_EPS,
        GEOM_EPS,
        skip,
    )


def points_occluded_from(p: Vec3, targets: NDArray[np.float64], scene: Scene) -> NDArray[np.uint8]:
    """Vector form of is_occluded for many segments sharing endpoint p."""
    pack = scene.pack
    t = np.ascontiguousarray(np.asarray(targets, dtype=np.float64).reshape(-1, 3))
    return kernels.segments_occluded_from(
        pack.corner,
        pack.edge_u,
        pack.edge_v,
        pack.normal,
        pack.len2_u,
        pack.len2_v,
        pack.inv_len_u,
        pack.inv_len_v,
        np.ascontiguousarray(_vec(p)),
        t,
        GRAZE_EPS,
        GEOM_EPS,
    )


# --- E-hallway builder -------------------------------------------------------

WALL = Material(1, "concrete-wall", 0.75)
FLOOR = Material(2, "floor", 0.5)
CEILING = Material(3, "ceiling", 0.8)

SPINE_LENGTH = 100.0
TX_POSITION = (5.0, 5.0, 2.95)
RX_HEIGHT = 1.5
LOS_DISTANCES = tuple(float(d) for d in range(10, 100, 10))
# route distance -> (arm x, depth below the spine centreline)
NLOS_LAYOUT = {
    40.0: (35.0, 10.0),
    50.0: (35.0, 20.0),
    60.0: (35.0, 30.0),
    80.0: (75.0, 10.0),
    90.0: (75.0, 20.0),
    100.0: (75.0, 30.0),
}


def build_e_hallway(
    corridor_width: float = 3.0,
    arm_length: float = 30.0,
) -> tuple[Scene, EndpointSet]:
    """Build the E-shaped hallway and its measurement endpoints.

    One straight spine corridor runs along +x with the transmitter near its
    west end, mounted 5 cm below the ceiling. Three perpendicular arms leave
    the south side; the two arms at x = 35 and x = 75 host the shadowed
    receivers at route distances 40..100 m (route = along the spine, then
    down the arm). Nine line-of-sight receivers stand on the spine
    centreline every 10 m. Surface id 1 is the unbroken north wall, the
    natural host for engineered reflecting tiles.
    """
    w = float(corridor_width)
    if w <= 0.0:
        raise ValueError("corridor_width must be positive")
    max_depth = max(depth for _, depth in NLOS_LAYOUT.values())
    if arm_length <= max_depth - w / 2.0 + 0.5:
        raise ValueError(
            f"arm_length {arm_length} too short for receivers {max_depth} m down an arm"
        )
    height = 3.0
    y_mid = 5.0
    y_lo = y_mid - w / 2.0
    y_hi = y_mid + w / 2.0
    arm_xs = sorted({x for x, _ in NLOS_LAYOUT.values()})
    # Third arm near the west end completes the E; it hosts no receivers.
    west_arm = 0.5 + w / 2.0
    arm_xs = [west_arm] + arm_xs
    y_arm_end = y_lo - arm_length

    surfaces: list[Surface] = []
    sid = 1

    def add(corner, eu, ev, mat):
        nonlocal sid
        surfaces.append(Surface(sid, corner, eu, ev, mat.id))
        sid += 1

    # North wall first: a single unbroken run, documented as surface id 1.
    add((0.0, y_hi, 0.0), (SPINE_LENGTH, 0.0, 0.0), (0.0, 0.0, height), WALL)
    # South wall segments between the arm openings.
    cuts = [0.0]
    for xa in arm_xs:
        cuts.extend([xa - w / 2.0, xa + w / 2.0])
    cuts.append(SPINE_LENGTH)
    for x0, x1 in zip(cuts[0::2], cuts[1::2]):
        if x1 - x0 > GEOM_EPS:
            add((x0, y_lo, 0.0), (x1 - x0, 0.0, 0.0), (0.0, 0.0, height), WALL)
    # Spine end walls.
    add((0.0, y_lo, 0.0), (0.0, w, 0.0), (0.0, 0.0, height), WALL)
    add((SPINE_LENGTH, y_lo, 0.0), (0.0, w, 0.0), (0.0, 0.0, height), WALL)
    # Arm walls: two sides and the dead end.
    for xa in arm_xs:
        add((xa - w / 2.0, y_arm_end, 0.0), (0.0, arm_length, 0.0), (0.0, 0.0, height), WALL)
        add((xa + w / 2.0, y_arm_end, 0.0), (0.0, arm_length, 0.0), (0.0, 0.0, height), WALL)
        add((xa - w / 2.0, y_arm_end, 0.0), (w, 0.0, 0.0), (0.0, 0.0, height), WALL)
    # Floor and ceiling, one rectangle per corridor box.
    add((0.0, y_lo, 0.0), (SPINE_LENGTH, 0.0, 0.0), (0.0, w, 0.0), FLOOR)
    for xa in arm_xs:
        add((xa - w / 2.0, y_arm_end, 0.0), (w, 0.0, 0.0), (0.0, arm_length, 0.0), FLOOR)
    add((0.0, y_lo, height), (SPINE_LENGTH, 0.0, 0.0), (0.0, w, 0.0), CEILING)
    for xa in arm_xs:
        add((xa - w / 2.0, y_arm_end, height), (w, 0.0, 0.0), (0.0, arm_length, 0.0), CEILING)

    scene = Scene(surfaces, (WALL, FLOOR, CEILING), height)

    tx = _vec(TX_POSITION)
    rx_points: list[RxPoint] = []
    rid = 1
    for d in LOS_DISTANCES:
        rx_points.append(RxPoint(rid, (tx[0] + d, y_mid, RX_HEIGHT), True, d))
        rid += 1
    for route, (xa, depth) in sorted(NLOS_LAYOUT.items()):
        rx_points.append(RxPoint(rid, (xa, y_mid - depth, RX_HEIGHT), False, route))
        rid += 1
    endpoints = EndpointSet(tx, tuple(rx_points))

    _validate_layout(scene, endpoints, w, arm_length, arm_xs, y_lo, y_hi, y_arm_end)
    return scene, endpoints


def _validate_layout(scene, endpoints, w, arm_length, arm_xs, y_lo, y_hi, y_arm_end):
    def inside(p) -> bool:
        if not 0.0 < p[2] < scene.height:
            return False
        if 0.0 < p[0] < SPINE_LENGTH and y_lo < p[1] < y_hi:
            return True
        for xa in arm_xs:
            if xa - w / 2.0 < p[0] < xa + w / 2.0 and y_arm_end < p[1] <= y_lo:
                return True
        return False

    if not inside(endpoints.tx):
        raise ValueError("transmitter outside the hallway volume")
    for r in endpoints.rx:
        if not inside(r.position):
            raise ValueError(f"receiver {r.rx_id} outside the hallway volume")
        blocked = is_occluded(endpoints.tx, r.position, scene)
        if blocked == r.los:
            raise ValueError(
                f"receiver {r.rx_id}: line-of-sight flag inconsistent with geometry"
            )
    n_los = sum(1 for r in endpoints.rx if r.los)
    if n_los != 9 or len(endpoints.rx) - n_los != 6:
        raise ValueError("expected 9 line-of-sight and 6 shadowed receivers")


# --- serialization -----------------------------------------------------------


def scene_to_dict(scene: Scene, endpoints: Optional[EndpointSet] = None) -> dict:
    doc = {
        "height": scene.height,
        "materials": [
            {"id": m.id, "name": m.name, "reflectance": m.reflectance}
            for m in scene.materials
        ],
        "surfaces": [
            {
                "id": s.id,
                "corner": list(map(float, s.corner)),
                "edge_u": list(map(float, s.edge_u)),
                "edge_v": list(map(float, s.edge_v)),
                "material_id": s.material_id,
            }
            for s in scene.surfaces
        ],
    }
    if endpoints is not None:
        doc["endpoints"] = {
            "tx": list(map(float, endpoints.tx)),
            "rx": [
                {
                    "id": r.rx_id,
                    "position": list(map(float, r.position)),
                    "los": r.los,
                    "nominal_distance_m": r.nominal_distance_m,
                }
                for r in endpoints.rx
            ],
        }
    return doc


def scene_from_dict(doc: dict) -> tuple[Scene, Optional[EndpointSet]]:
    try:
        materials = [
            Material(int(m["id"]), str(m["name"]), float(m["reflectance"]))
            for m in doc["materials"]
        ]
        surfaces = [
            Surface(
                int(s["id"]),
                s["corner"],
                s["edge_u"],
                s["edge_v"],
                int(s["material_id"]),
            )
            for s in doc["surfaces"]
        ]
        scene = Scene(surfaces, materials, float(doc["height"]))
    except KeyError as exc:
        raise ValueError(f"scene document missing field {exc}") from exc
    endpoints = None
    if "endpoints" in doc:
        ep = doc["endpoints"]
        rx = tuple(
            RxPoint(
                int(r["id"]),
                r["position"],
                bool(r["los"]),
                float(r["nominal_distance_m"]),
            )
            for r in ep["rx"]
        )
        endpoints = EndpointSet(_vec(ep["tx"]), rx)
    return scene, endpoints


def dump_scene(scene: Scene, path, endpoints: Optional[EndpointSet] = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(scene_to_dict(scene, endpoints), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_scene(path) -> tuple[Scene, Optional[EndpointSet]]:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: invalid scene document: {exc}") from exc
    return scene_from_dict(doc)
