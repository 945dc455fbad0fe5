"""Scenario files: JSON schema, ASCII OBJ meshes, validation report.

A scenario bundles the static world (obstacle boxes/meshes), spawn areas,
asset library, spawner counts, sensor configs, world bounds, and an
optional goal region.  See README for the schema and bundled examples.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .frames import RigidTransform, matrix_from_euler
from .sensors import CameraConfig, LidarConfig, SensorConfigError
from .world import (
    AssetSpec,
    ObstacleVolume,
    OrientedBox,
    Scene,
    SceneError,
    SemanticClass,
    SpawnArea,
    TriangleMesh,
)

_CLASSES = {
    "wall": SemanticClass.WALL,
    "prop": SemanticClass.PROP,
    "pedestrian": SemanticClass.PEDESTRIAN,
    "goal": SemanticClass.GOAL,
    "ground": SemanticClass.GROUND,
}

# Structural contact between these class pairs is expected, not an overlap
# violation (walls meet walls, goal panels sit on walls, ground touches all).
_CONTACT_OK = {SemanticClass.WALL, SemanticClass.GOAL, SemanticClass.GROUND}


class ScenarioError(ValueError):
    pass


@dataclass
class Rect:
    min: np.ndarray
    max: np.ndarray

    def __post_init__(self):
        self.min = np.asarray(self.min, dtype=np.float64).reshape(2)
        self.max = np.asarray(self.max, dtype=np.float64).reshape(2)

    def contains(self, xy) -> bool:
        xy = np.asarray(xy, dtype=np.float64)[:2]
        return bool((xy >= self.min - 1e-9).all() and (xy <= self.max + 1e-9).all())


@dataclass
class ScenarioBundle:
    name: str
    scene: Scene
    lidar_cfg: LidarConfig
    camera_cfg: CameraConfig
    world_bounds: Rect | None = None
    goal_region: Rect | None = None
    raw: dict = field(default_factory=dict)


def load_obj(path) -> TriangleMesh:
    """Minimal ASCII OBJ reader: vertices and triangular faces only."""
    vertices = []
    faces = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            if parts[0] == "v":
                if len(parts) < 4:
                    raise ScenarioError(f"{path}:{lineno}: vertex needs 3 coordinates")
                vertices.append([float(v) for v in parts[1:4]])
            elif parts[0] == "f":
                idx = [int(p.split("/")[0]) for p in parts[1:]]
                if len(idx) != 3:
                    raise ScenarioError(f"{path}:{lineno}: only triangular faces supported")
                faces.append([i - 1 if i > 0 else len(vertices) + i for i in idx])
    try:
        return TriangleMesh(np.asarray(vertices), np.asarray(faces))
    except SceneError as exc:
        raise ScenarioError(f"{path}: {exc}") from exc


def _mount_from(cfg: dict) -> RigidTransform:
    xyz = cfg.get("xyz", [0.0, 0.0, 0.3])
    rpy = [math.radians(a) for a in cfg.get("rpy_deg", [0.0, 0.0, 0.0])]
    return RigidTransform(matrix_from_euler(*rpy), np.asarray(xyz, dtype=np.float64))


def _box_from(spec: dict) -> OrientedBox:
    yaw = math.radians(float(spec.get("yaw_deg", 0.0)))
    c, s = math.cos(yaw), math.sin(yaw)
    rot = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    return OrientedBox(spec["center"], spec["half_extents"], rot)


def _obstacle_from(spec: dict, base_dir: Path) -> ObstacleVolume:
    cls = _CLASSES.get(str(spec.get("class", "prop")).lower())
    if cls is None:
        raise ScenarioError(f"obstacle {spec.get('id')!r}: unknown class {spec.get('class')!r}")
    if "box" in spec:
        shape = _box_from(spec["box"])
    elif "mesh" in spec:
        mesh = spec["mesh"]
        if "obj" in mesh:
            shape = load_obj(base_dir / mesh["obj"])
        else:
            shape = TriangleMesh(np.asarray(mesh["vertices"]), np.asarray(mesh["faces"]))
    else:
        raise ScenarioError(f"obstacle {spec.get('id')!r}: needs a box or mesh shape")
    return ObstacleVolume(str(spec["id"]), shape, cls, dynamic=bool(spec.get("dynamic", False)))


def load_scenario(path) -> ScenarioBundle:
    """Parse and construct a scenario; raises ScenarioError on any defect."""
    path = Path(path)
    if not path.exists():
        raise ScenarioError(f"scenario file not found: {path}")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: invalid JSON: {exc}") from exc

    try:
        obstacles = [_obstacle_from(o, path.parent) for o in raw.get("obstacles", [])]
        areas = [
            SpawnArea(
                id=str(a["id"]),
                kind=str(a["kind"]).lower(),
                rect_min=a["min"],
                rect_max=a["max"],
                yaw_range_deg=tuple(a.get("yaw_range_deg", (-180.0, 180.0))),
            )
            for a in raw.get("spawn_areas", [])
        ]
        assets = []
        for a in raw.get("assets", []):
            cls = _CLASSES.get(str(a.get("class", "prop")).lower())
            if cls is None:
                raise ScenarioError(f"asset {a.get('name')!r}: unknown class")
            assets.append(AssetSpec(str(a["name"]), cls, a["half_extents"]))

        twin = raw.get("twin_box", {})
        twin_volume = OrientedBox(
            twin.get("center", [0.0, 0.0, 0.2]),
            twin.get("half_extents", [0.5, 0.5, 0.2]),
        )
        scene = Scene(
            obstacles=obstacles,
            spawn_areas=areas,
            twin_volume=twin_volume,
            asset_library=assets,
            object_count=int(raw.get("objects", {}).get("count", 0)),
            npc_count=int(raw.get("npcs", {}).get("count", 0)),
            npc_speed=float(raw.get("npcs", {}).get("speed", 0.0)),
        )

        lidar_raw = dict(raw.get("lidar", {}))
        lidar_cfg = LidarConfig(
            h_fov=float(lidar_raw.get("h_fov", 360.0)),
            v_fov=float(lidar_raw.get("v_fov", 30.0)),
            h_res=float(lidar_raw.get("h_res", 1.0)),
            v_res=float(lidar_raw.get("v_res", 1.0)),
            max_range=float(lidar_raw.get("max_range", 30.0)),
            mount=_mount_from(lidar_raw.get("mount", {})),
        )
        cam_raw = dict(raw.get("camera", {}))
        camera_cfg = CameraConfig(
            width=int(cam_raw.get("width", 640)),
            height=int(cam_raw.get("height", 480)),
            h_fov=float(cam_raw.get("h_fov", 90.0)),
            max_range=float(cam_raw.get("max_range", 50.0)),
            mount=_mount_from(cam_raw.get("mount", {})),
        )
    except (KeyError, TypeError, ValueError, SceneError, SensorConfigError) as exc:
        if isinstance(exc, ScenarioError):
            raise
        raise ScenarioError(f"{path}: {exc}") from exc

    def rect_of(key):
        r = raw.get(key)
        return Rect(r["min"], r["max"]) if r else None

    return ScenarioBundle(
        name=str(raw.get("name", path.stem)),
        scene=scene,
        lidar_cfg=lidar_cfg,
        camera_cfg=camera_cfg,
        world_bounds=rect_of("world_bounds"),
        goal_region=rect_of("goal_region"),
        raw=raw,
    )


# ---------------------------------------------------------------------------
# Validation.

@dataclass
class ValidationEntry:
    level: str  # "error" | "warning"
    code: str
    message: str


@dataclass
class ValidationReport:
    path: str
    entries: list[ValidationEntry] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not any(e.level == "error" for e in self.entries)

    def add(self, level, code, message):
        self.entries.append(ValidationEntry(level, code, message))

    def to_dict(self) -> dict:
        return {
            "path": self.path,
            "ok": self.ok,
            "entries": [vars(e) for e in self.entries],
        }


def validate_scenario(path) -> ValidationReport:
    """Schema plus geometric sanity checks; never raises on bad content."""
    report = ValidationReport(str(path))
    try:
        raw = json.loads(Path(path).read_text())
        ids = [str(o.get("id")) for o in raw.get("obstacles", [])]
        for d in sorted({i for i in ids if ids.count(i) > 1}):
            report.add("error", "duplicate-id", f"duplicate obstacle id {d!r}")
    except (OSError, json.JSONDecodeError, AttributeError, TypeError) as exc:
        report.add("error", "load", str(exc))
        return report
    if not report.ok:
        return report

    try:
        bundle = load_scenario(path)
    except ScenarioError as exc:
        report.add("error", "load", str(exc))
        return report

    scene = bundle.scene

    if not scene.areas("robot"):
        report.add("error", "no-robot-area", "scenario has no robot spawn area")

    if bundle.world_bounds is not None:
        wb = bundle.world_bounds
        for area in scene.spawn_areas:
            if not (wb.contains(area.rect_min) and wb.contains(area.rect_max)):
                report.add(
                    "error", "area-outside-bounds",
                    f"spawn area {area.id!r} extends outside world bounds",
                )
        if bundle.goal_region is not None:
            gr = bundle.goal_region
            if not (wb.contains(gr.min) and wb.contains(gr.max)):
                report.add("error", "goal-outside-bounds",
                           "goal region extends outside world bounds")

    from .world import obb_overlap  # local import to avoid cycle at module load

    statics = [o for o in scene.obstacles if not o.dynamic]
    for i in range(len(statics)):
        for j in range(i + 1, len(statics)):
            a, b = statics[i], statics[j]
            if a.semantic_class in _CONTACT_OK and b.semantic_class in _CONTACT_OK:
                continue
            if not (isinstance(a.shape, OrientedBox) and isinstance(b.shape, OrientedBox)):
                continue
            if obb_overlap(a.shape, b.shape):
                report.add("error", "initial-overlap",
                           f"static obstacles {a.id!r} and {b.id!r} overlap")

    if scene.object_count > 0 and not scene.areas("object"):
        report.add("warning", "objects-without-area",
                   "object count set but no object spawn areas")
    if scene.npc_count > 0 and not scene.areas("npc"):
        report.add("warning", "npcs-without-area",
                   "npc count set but no npc spawn areas")
    return report


def bundled_scenario_path(name: str) -> Path:
    """Path of one of the scenarios shipped with the package."""
    p = Path(__file__).parent / "scenarios" / f"{name}.json"
    if not p.exists():
        raise ScenarioError(f"no bundled scenario named {name!r}")
    return p
