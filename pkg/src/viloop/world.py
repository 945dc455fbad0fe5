"""Virtual environment: obstacle volumes, spawn areas, NPCs, twin collision.

Collision primitives are oriented boxes and triangle meshes; box-box overlap
uses the 15-axis separating-axis test, box-triangle the 13-axis variant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import IntEnum

import numpy as np

from .frames import RigidTransform

ARRIVE_RADIUS = 0.05  # m, waypoint arrival threshold
PLACEMENT_ATTEMPTS = 100


class SceneError(ValueError):
    pass


class NoRobotSpawnArea(SceneError):
    pass


class PlacementFailure(SceneError):
    pass


class SemanticClass(IntEnum):
    BACKGROUND = 0
    WALL = 1
    PROP = 2
    PEDESTRIAN = 3
    GOAL = 4
    GROUND = 5


@dataclass
class OrientedBox:
    center: np.ndarray
    half_extents: np.ndarray
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=np.float64).reshape(3)
        self.half_extents = np.asarray(self.half_extents, dtype=np.float64).reshape(3)
        self.rotation = np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)
        if not (self.half_extents > 0).all():
            raise SceneError("box half-extents must be strictly positive")

    @property
    def radius(self) -> float:
        """Bounding-sphere radius."""
        return float(np.linalg.norm(self.half_extents))

    def transformed(self, pose: RigidTransform) -> "OrientedBox":
        return OrientedBox(
            pose.rotation @ self.center + pose.translation,
            self.half_extents,
            pose.rotation @ self.rotation,
        )

    def corners(self) -> np.ndarray:
        """(8, 3) world-space corners."""
        signs = np.array(
            [[sx, sy, sz] for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)],
            dtype=np.float64,
        )
        return self.center + (signs * self.half_extents) @ self.rotation.T


@dataclass
class TriangleMesh:
    vertices: np.ndarray
    faces: np.ndarray

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        self.faces = np.asarray(self.faces, dtype=np.int64).reshape(-1, 3)
        if len(self.faces) == 0:
            raise SceneError("mesh needs at least one triangle")
        if self.faces.min() < 0 or self.faces.max() >= len(self.vertices):
            raise SceneError("mesh face index out of range")

    @property
    def center(self) -> np.ndarray:
        return (self.vertices.min(axis=0) + self.vertices.max(axis=0)) / 2.0

    @property
    def radius(self) -> float:
        return float(np.linalg.norm(self.vertices - self.center, axis=1).max())

    def triangles(self) -> np.ndarray:
        """(F, 3, 3) vertex coordinates per face."""
        return self.vertices[self.faces]


@dataclass
class ObstacleVolume:
    id: str
    shape: OrientedBox | TriangleMesh
    semantic_class: SemanticClass = SemanticClass.PROP
    dynamic: bool = False

    @property
    def center(self) -> np.ndarray:
        return self.shape.center

    @property
    def radius(self) -> float:
        return self.shape.radius


@dataclass
class SpawnArea:
    id: str
    kind: str  # "robot" | "object" | "npc"
    rect_min: np.ndarray
    rect_max: np.ndarray
    yaw_range_deg: tuple[float, float] = (-180.0, 180.0)

    def __post_init__(self):
        self.rect_min = np.asarray(self.rect_min, dtype=np.float64).reshape(2)
        self.rect_max = np.asarray(self.rect_max, dtype=np.float64).reshape(2)
        if not (self.rect_max > self.rect_min).all():
            raise SceneError(f"spawn area {self.id!r} has no area")
        lo, hi = self.yaw_range_deg
        if lo < -180.0 or hi > 180.0 or hi < lo:
            raise SceneError(f"spawn area {self.id!r} yaw range invalid")

    def sample_xy(self, rng: np.random.Generator) -> np.ndarray:
        return rng.uniform(self.rect_min, self.rect_max)

    def sample_yaw(self, rng: np.random.Generator) -> float:
        lo, hi = self.yaw_range_deg
        return math.radians(float(rng.uniform(lo, hi)) if hi > lo else lo)

    def contains(self, xy) -> bool:
        xy = np.asarray(xy)[:2]
        return bool((xy >= self.rect_min - 1e-12).all() and (xy <= self.rect_max + 1e-12).all())


@dataclass
class NpcState:
    volume_id: str
    waypoint: np.ndarray
    speed: float
    region_min: np.ndarray
    region_max: np.ndarray

    def __post_init__(self):
        self.waypoint = np.asarray(self.waypoint, dtype=np.float64).reshape(2)
        self.region_min = np.asarray(self.region_min, dtype=np.float64).reshape(2)
        self.region_max = np.asarray(self.region_max, dtype=np.float64).reshape(2)
        if self.speed < 0:
            raise SceneError("NPC speed must be >= 0")


@dataclass
class AssetSpec:
    """Asset-library entry: an oriented box blueprint with a semantic class."""

    name: str
    semantic_class: SemanticClass
    half_extents: np.ndarray

    def __post_init__(self):
        self.half_extents = np.asarray(self.half_extents, dtype=np.float64).reshape(3)
        if not (self.half_extents > 0).all():
            raise SceneError(f"asset {self.name!r} half-extents must be positive")


@dataclass
class Scene:
    obstacles: list[ObstacleVolume] = field(default_factory=list)
    npcs: list[NpcState] = field(default_factory=list)
    spawn_areas: list[SpawnArea] = field(default_factory=list)
    twin_volume: OrientedBox = field(
        default_factory=lambda: OrientedBox([0.0, 0.0, 0.2], [0.5, 0.5, 0.2])
    )
    asset_library: list[AssetSpec] = field(default_factory=list)
    object_count: int = 0
    npc_count: int = 0
    npc_speed: float = 0.0
    rng_seed: int = 0
    rng: np.random.Generator = field(default_factory=lambda: np.random.default_rng(0))

    def __post_init__(self):
        ids = [o.id for o in self.obstacles]
        if len(ids) != len(set(ids)):
            raise SceneError("obstacle ids must be unique")

    def obstacle_by_id(self, oid: str) -> ObstacleVolume:
        for o in self.obstacles:
            if o.id == oid:
                return o
        raise KeyError(oid)

    def areas(self, kind: str) -> list[SpawnArea]:
        return [a for a in self.spawn_areas if a.kind == kind]


@dataclass
class CollisionReport:
    collided: bool
    other_id: str | None = None


# ---------------------------------------------------------------------------
# Separating-axis tests.

_SAT_EPS = 1e-12


def obb_overlap(a: OrientedBox, b: OrientedBox) -> bool:
    """15-axis SAT test; touching counts as overlap."""
    ra = a.half_extents
    rb = b.half_extents
    # Rotation of b expressed in a's frame, and center offset in a's frame.
    c = a.rotation.T @ b.rotation
    absc = np.abs(c) + _SAT_EPS
    t = a.rotation.T @ (b.center - a.center)

    # a's axes
    for i in range(3):
        if abs(t[i]) > ra[i] + rb @ absc[i]:
            return False
    # b's axes
    for j in range(3):
        if abs(t @ c[:, j]) > ra @ absc[:, j] + rb[j]:
            return False
    # cross products a_i x b_j
    for i in range(3):
        i1, i2 = (i + 1) % 3, (i + 2) % 3
        for j in range(3):
            j1, j2 = (j + 1) % 3, (j + 2) % 3
            lhs = abs(t[i2] * c[i1, j] - t[i1] * c[i2, j])
            rhs = (
                ra[i1] * absc[i2, j]
                + ra[i2] * absc[i1, j]
                + rb[j1] * absc[i, j2]
                + rb[j2] * absc[i, j1]
            )
            if lhs > rhs:
                return False
    return True


def obb_separation(a: OrientedBox, b: OrientedBox) -> float:
    """Best separating-axis gap over the 15 candidate axes.

    Positive means provably disjoint by at least that Euclidean distance
    lower bound; <= 0 means no separating axis among the candidates
    (i.e. overlap, by the OBB SAT theorem).
    """
    axes = [a.rotation[:, i] for i in range(3)] + [b.rotation[:, j] for j in range(3)]
    for i in range(3):
        for j in range(3):
            v = np.cross(a.rotation[:, i], b.rotation[:, j])
            n = np.linalg.norm(v)
            if n > 1e-9:
                axes.append(v / n)
    d = b.center - a.center
    best = -math.inf
    for ax in axes:
        ra = float(np.abs(ax @ a.rotation) @ a.half_extents)
        rb = float(np.abs(ax @ b.rotation) @ b.half_extents)
        gap = abs(float(ax @ d)) - ra - rb
        best = max(best, gap)
    return best


def obb_triangle_overlap(box: OrientedBox, tri: np.ndarray) -> bool:
    """13-axis SAT for an oriented box vs one triangle (3, 3)."""
    # Work in the box frame: box becomes an AABB with extents h at origin.
    h = box.half_extents
    v = (np.asarray(tri, dtype=np.float64) - box.center) @ box.rotation

    e = np.array([v[1] - v[0], v[2] - v[1], v[0] - v[2]])

    # 9 cross-product axes e_k x axis_i
    for k in range(3):
        ex, ey, ez = e[k]
        for axis in range(3):
            if axis == 0:
                ax = np.array([0.0, -ez, ey])
                r = h[1] * abs(ez) + h[2] * abs(ey)
            elif axis == 1:
                ax = np.array([ez, 0.0, -ex])
                r = h[0] * abs(ez) + h[2] * abs(ex)
            else:
                ax = np.array([-ey, ex, 0.0])
                r = h[0] * abs(ey) + h[1] * abs(ex)
            p = v @ ax
            if min(p) > r + _SAT_EPS or max(p) < -r - _SAT_EPS:
                return False

    # box face normals
    for i in range(3):
        if v[:, i].min() > h[i] + _SAT_EPS or v[:, i].max() < -h[i] - _SAT_EPS:
            return False

    # triangle normal
    n = np.cross(e[0], e[1])
    r = float(h @ np.abs(n))
    d = float(n @ v[0])
    if abs(d) > r + _SAT_EPS:
        return False
    return True


def _twin_box_at(scene: Scene, twin_pose: RigidTransform) -> OrientedBox:
    return scene.twin_volume.transformed(twin_pose)


def check_collision(scene: Scene, twin_pose: RigidTransform) -> CollisionReport:
    """Overlap of the twin volume against all obstacles, first hit in id order."""
    twin = _twin_box_at(scene, twin_pose)
    for obs in sorted(scene.obstacles, key=lambda o: o.id):
        # bounding-sphere prefilter
        if np.linalg.norm(obs.center - twin.center) > obs.radius + twin.radius:
            continue
        if isinstance(obs.shape, OrientedBox):
            if obb_overlap(twin, obs.shape):
                return CollisionReport(True, obs.id)
        else:
            for tri in obs.shape.triangles():
                if obb_triangle_overlap(twin, tri):
                    return CollisionReport(True, obs.id)
    return CollisionReport(False, None)


def twin_clearance(scene: Scene, twin_pose: RigidTransform) -> float:
    """Conservative lower bound on the twin's distance to the nearest box
    obstacle (0 when overlapping).  Mesh obstacles fall back to their
    bounding sphere."""
    twin = _twin_box_at(scene, twin_pose)
    best = math.inf
    for obs in scene.obstacles:
        if isinstance(obs.shape, OrientedBox):
            gap = obb_separation(twin, obs.shape)
        else:
            gap = float(np.linalg.norm(obs.center - twin.center)) - obs.radius - twin.radius
        best = min(best, max(0.0, gap))
    return best


# ---------------------------------------------------------------------------
# Reset / spawners.

def _overlaps_any(scene: Scene, box: OrientedBox, obstacles: list[ObstacleVolume]) -> bool:
    for obs in obstacles:
        if np.linalg.norm(obs.center - box.center) > obs.radius + box.radius:
            continue
        if isinstance(obs.shape, OrientedBox):
            if obb_overlap(box, obs.shape):
                return True
        else:
            for tri in obs.shape.triangles():
                if obb_triangle_overlap(box, tri):
                    return True
    return False


def _rot_z(yaw: float) -> np.ndarray:
    c, s = math.cos(yaw), math.sin(yaw)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def _place_asset(
    scene: Scene,
    rng: np.random.Generator,
    asset: AssetSpec,
    area: SpawnArea,
    obstacles: list[ObstacleVolume],
) -> OrientedBox:
    for _ in range(PLACEMENT_ATTEMPTS):
        xy = area.sample_xy(rng)
        yaw = area.sample_yaw(rng)
        box = OrientedBox(
            np.array([xy[0], xy[1], asset.half_extents[2]]),
            asset.half_extents,
            _rot_z(yaw),
        )
        if not _overlaps_any(scene, box, obstacles):
            return box
    raise PlacementFailure(
        f"could not place {asset.name!r} in area {area.id!r} "
        f"after {PLACEMENT_ATTEMPTS} attempts"
    )


def reset_scene(scene: Scene, seed: int) -> tuple[Scene, RigidTransform]:
    """Re-roll all dynamic content and sample the digital spawn pose.

    Pure function of (scene configuration, seed): the returned scene carries
    a freshly seeded RNG so subsequent NPC stepping is reproducible too.
    """
    robot_areas = scene.areas("robot")
    if not robot_areas:
        raise NoRobotSpawnArea("scene has no robot spawn area")

    rng = np.random.default_rng(seed)
    statics = [o for o in scene.obstacles if not o.dynamic]
    obstacles = list(statics)
    npcs: list[NpcState] = []

    object_assets = [a for a in scene.asset_library if a.semantic_class != SemanticClass.PEDESTRIAN]
    npc_assets = [a for a in scene.asset_library if a.semantic_class == SemanticClass.PEDESTRIAN]

    object_areas = scene.areas("object")
    if scene.object_count and object_areas and object_assets:
        for k in range(scene.object_count):
            asset = object_assets[int(rng.integers(len(object_assets)))]
            area = object_areas[int(rng.integers(len(object_areas)))]
            box = _place_asset(scene, rng, asset, area, obstacles)
            obstacles.append(
                ObstacleVolume(f"obj_{k}", box, asset.semantic_class, dynamic=True)
            )

    npc_areas = scene.areas("npc")
    if scene.npc_count and npc_areas and npc_assets:
        for k in range(scene.npc_count):
            asset = npc_assets[int(rng.integers(len(npc_assets)))]
            area = npc_areas[int(rng.integers(len(npc_areas)))]
            box = _place_asset(scene, rng, asset, area, obstacles)
            oid = f"npc_{k}"
            obstacles.append(ObstacleVolume(oid, box, asset.semantic_class, dynamic=True))
            npcs.append(
                NpcState(
                    volume_id=oid,
                    waypoint=rng.uniform(area.rect_min, area.rect_max),
                    speed=scene.npc_speed,
                    region_min=area.rect_min,
                    region_max=area.rect_max,
                )
            )

    new_scene = replace(
        scene,
        obstacles=obstacles,
        npcs=npcs,
        rng_seed=seed,
        rng=rng,
    )

    # Robot spawn last so its rejection sampling sees the full scene.
    area = robot_areas[int(rng.integers(len(robot_areas)))]
    for _ in range(PLACEMENT_ATTEMPTS):
        xy = area.sample_xy(rng)
        yaw = area.sample_yaw(rng)
        pose = RigidTransform(_rot_z(yaw), np.array([xy[0], xy[1], 0.0]))
        if not check_collision(new_scene, pose).collided:
            return new_scene, pose
    raise PlacementFailure(
        f"could not place robot in area {area.id!r} after {PLACEMENT_ATTEMPTS} attempts"
    )


def step_npcs(scene: Scene, dt: float) -> Scene:
    """Advance every NPC toward its waypoint; resample on arrival.

    Positions are clamped to the NPC's allowed region.  Mutates and returns
    the scene.
    """
    if dt <= 0:
        raise SceneError("dt must be > 0")
    for npc in scene.npcs:
        vol = scene.obstacle_by_id(npc.volume_id)
        pos = vol.shape.center[:2].copy()
        step = npc.speed * dt
        delta = npc.waypoint - pos
        dist = float(np.linalg.norm(delta))
        if step >= dist:
            pos = npc.waypoint.copy()
        elif dist > 0:
            pos = pos + delta * (step / dist)
        if float(np.linalg.norm(npc.waypoint - pos)) < ARRIVE_RADIUS:
            npc.waypoint = scene.rng.uniform(npc.region_min, npc.region_max)
        pos = np.clip(pos, npc.region_min, npc.region_max)
        vol.shape.center = np.array([pos[0], pos[1], vol.shape.center[2]])
    return scene
