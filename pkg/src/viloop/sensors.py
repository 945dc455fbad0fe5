"""Synthetic sensors by ray casting: 3D LiDAR, depth + semantic camera.

Ray casting runs on an immutable scene snapshot through the kernel backend
(compiled when available).  Primitive iteration order for equal-distance
ties is: box obstacles in scene order, then mesh triangles in scene order.
"""

from __future__ import annotations

import base64
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import _kernels
from .frames import RigidTransform, compose
from .world import OrientedBox, Scene, SemanticClass


class SensorConfigError(ValueError):
    pass


class MissingRay(ValueError):
    """Scan grid does not contain the requested azimuth/elevation."""


def _default_mount() -> RigidTransform:
    return RigidTransform(np.eye(3), np.array([0.0, 0.0, 0.3]))


def _integer_count(fov: float, res: float, name: str) -> int:
    n = fov / res
    if abs(n - round(n)) > 1e-9:
        raise SensorConfigError(f"{name}: resolution {res} does not divide fov {fov}")
    return int(round(n))


@dataclass(frozen=True)
class LidarConfig:
    h_fov: float = 360.0
    v_fov: float = 30.0
    h_res: float = 1.0
    v_res: float = 1.0
    max_range: float = 30.0
    mount: RigidTransform = field(default_factory=_default_mount)

    def __post_init__(self):
        if self.h_fov <= 0 or self.v_fov <= 0 or self.max_range <= 0:
            raise SensorConfigError("fovs and max_range must be positive")
        _integer_count(self.h_fov, self.h_res, "azimuth")
        _integer_count(self.v_fov, self.v_res, "elevation")

    @property
    def n_azimuth(self) -> int:
        # grid excludes h_fov itself (360 columns for 360 deg at 1 deg)
        return _integer_count(self.h_fov, self.h_res, "azimuth")

    @property
    def n_elevation(self) -> int:
        # grid includes both endpoints (31 rows for 30 deg at 1 deg)
        return _integer_count(self.v_fov, self.v_res, "elevation") + 1

    @property
    def miss_value(self) -> float:
        return self.max_range + 1.0


@dataclass
class LidarScan:
    config: LidarConfig
    ranges: np.ndarray  # (n_elevation, n_azimuth), row-major [elevation][azimuth]

    def azimuth_index(self, azimuth_deg: float) -> int:
        cfg = self.config
        col = azimuth_deg / cfg.h_res
        if abs(col - round(col)) > 1e-9:
            raise MissingRay(f"azimuth {azimuth_deg} not on the {cfg.h_res} deg grid")
        idx = int(round(col)) % max(cfg.n_azimuth, 1)
        if not 0 <= idx < cfg.n_azimuth or (azimuth_deg % 360.0) >= cfg.h_fov:
            raise MissingRay(f"azimuth {azimuth_deg} outside scan fov")
        return idx

    def elevation_index(self, elevation_deg: float) -> int:
        cfg = self.config
        row = (elevation_deg + cfg.v_fov / 2.0) / cfg.v_res
        if abs(row - round(row)) > 1e-9 or not 0 <= round(row) < cfg.n_elevation:
            raise MissingRay(f"elevation {elevation_deg} not on the scan grid")
        return int(round(row))

    def range_at(self, elevation_deg: float, azimuth_deg: float) -> float:
        return float(self.ranges[self.elevation_index(elevation_deg),
                                 self.azimuth_index(azimuth_deg)])

    def to_payload(self) -> dict:
        """Wire form: config header + flattened row-major f32 ranges."""
        cfg = self.config
        flat = self.ranges.astype(np.float32).reshape(-1)
        return {
            "h_fov": cfg.h_fov,
            "v_fov": cfg.v_fov,
            "h_res": cfg.h_res,
            "v_res": cfg.v_res,
            "max_range": cfg.max_range,
            "rows": cfg.n_elevation,
            "cols": cfg.n_azimuth,
            "ranges": [float(v) for v in flat],
        }


@dataclass(frozen=True)
class CameraConfig:
    width: int = 640
    height: int = 480
    h_fov: float = 90.0
    max_range: float = 50.0
    mount: RigidTransform = field(default_factory=_default_mount)

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise SensorConfigError("image dimensions must be positive")
        if not 0.0 < self.h_fov < 180.0:
            raise SensorConfigError("h_fov must be in (0, 180)")

    @property
    def focal_px(self) -> float:
        return (self.width / 2.0) / math.tan(math.radians(self.h_fov) / 2.0)

    @property
    def v_fov(self) -> float:
        """Derived from the aspect ratio (square pixels)."""
        return math.degrees(2.0 * math.atan((self.height / 2.0) / self.focal_px))


@dataclass
class SemanticDepthImage:
    depth: np.ndarray     # (H, W) meters, 0.0 at misses
    semantic: np.ndarray  # (H, W) uint8 class ids, 0 = background

    @property
    def valid(self) -> np.ndarray:
        return self.semantic != int(SemanticClass.BACKGROUND)

    def to_payloads(self) -> tuple[dict, dict]:
        """(depth, semantic) wire payloads; binary planes are base64."""
        h, w = self.depth.shape
        depth = {
            "width": w,
            "height": h,
            "encoding": "f32le",
            "data": base64.b64encode(
                np.ascontiguousarray(self.depth, dtype="<f4").tobytes()
            ).decode("ascii"),
        }
        semantic = {
            "width": w,
            "height": h,
            "encoding": "u8",
            "data": base64.b64encode(
                np.ascontiguousarray(self.semantic, dtype=np.uint8).tobytes()
            ).decode("ascii"),
        }
        return depth, semantic


# ---------------------------------------------------------------------------
# Scene flattening and ray grids.

def scene_primitives(scene: Scene):
    """Flatten obstacles into kernel arrays; volume index = obstacle index."""
    centers, axes, halves, bvol = [], [], [], []
    tris, tvol = [], []
    for idx, obs in enumerate(scene.obstacles):
        if isinstance(obs.shape, OrientedBox):
            centers.append(obs.shape.center)
            axes.append(obs.shape.rotation)
            halves.append(obs.shape.half_extents)
            bvol.append(idx)
        else:
            for tri in obs.shape.triangles():
                tris.append(tri)
                tvol.append(idx)
    return (
        np.asarray(centers, dtype=np.float64).reshape(-1, 3),
        np.asarray(axes, dtype=np.float64).reshape(-1, 3, 3),
        np.asarray(halves, dtype=np.float64).reshape(-1, 3),
        np.asarray(bvol, dtype=np.int32),
        np.asarray(tris, dtype=np.float64).reshape(-1, 3, 3),
        np.asarray(tvol, dtype=np.int32),
    )


@lru_cache(maxsize=8)
def _lidar_directions(h_fov, v_fov, h_res, v_res) -> np.ndarray:
    """(n_el * n_az, 3) unit directions in the sensor frame, row-major."""
    n_az = int(round(h_fov / h_res))
    n_el = int(round(v_fov / v_res)) + 1
    az = np.radians(np.arange(n_az) * h_res)
    el = np.radians(-v_fov / 2.0 + np.arange(n_el) * v_res)
    cos_el = np.cos(el)[:, None]
    dirs = np.empty((n_el, n_az, 3))
    dirs[:, :, 0] = cos_el * np.cos(az)[None, :]
    dirs[:, :, 1] = cos_el * np.sin(az)[None, :]
    dirs[:, :, 2] = np.sin(el)[:, None] * np.ones((1, n_az))
    return dirs.reshape(-1, 3)


@lru_cache(maxsize=8)
def _camera_directions(width, height, h_fov) -> np.ndarray:
    """(H * W, 3) unit directions, x forward, pixel (W/2, H/2) on-axis."""
    f = (width / 2.0) / math.tan(math.radians(h_fov) / 2.0)
    u = (np.arange(width) - width / 2.0) / f
    v = (np.arange(height) - height / 2.0) / f
    dirs = np.empty((height, width, 3))
    dirs[:, :, 0] = 1.0
    dirs[:, :, 1] = -u[None, :]
    dirs[:, :, 2] = -v[:, None]
    dirs /= np.linalg.norm(dirs, axis=2, keepdims=True)
    return dirs.reshape(-1, 3)


def _sensor_rays(local_dirs: np.ndarray, sensor_pose: RigidTransform):
    """Shared origin + sensor-frame dirs + rotation; the kernel rotates
    per ray, so the cached direction grid is never copied."""
    origin = sensor_pose.translation.reshape(1, 3)
    return origin, local_dirs, sensor_pose.rotation


@lru_cache(maxsize=8)
def _camera_cos_half_angle(width, height, h_fov) -> float:
    """cos of the widest angle between the optical axis and any pixel ray."""
    return float(_camera_directions(width, height, h_fov)[:, 0].min())


def _cull_outside_cone(prims, origin, axis, cos_half, max_range):
    """Drop primitives no ray inside the view cone can reach.

    Conservative sphere-vs-cone test with an angular margin, so kernel
    results are unchanged; only provably unreachable primitives go."""
    bc, br, bh, bv, tv, tvol = prims
    half_angle = math.acos(min(max(cos_half, -1.0), 1.0)) + 1e-6
    o = np.asarray(origin, dtype=np.float64).reshape(3)
    a = np.asarray(axis, dtype=np.float64).reshape(3)

    def keep_mask(centers, radii):
        u = centers - o
        d = np.linalg.norm(u, axis=1)
        near = d <= radii + 1e-9
        far = d - radii > max_range
        with np.errstate(invalid="ignore"):
            cosb = np.where(near, 1.0, (u @ a) / np.where(d == 0, 1.0, d))
        beta = np.arccos(np.clip(cosb, -1.0, 1.0))
        phi = np.arcsin(np.clip(radii / np.where(d == 0, 1.0, d), 0.0, 1.0))
        return (near | (beta - phi <= half_angle)) & ~far

    if len(bc):
        radii = np.linalg.norm(bh, axis=1)
        m = keep_mask(bc, radii)
        bc, br, bh, bv = bc[m], br[m], bh[m], bv[m]
    if len(tv):
        centers = tv.mean(axis=1)
        radii = np.linalg.norm(tv - centers[:, None, :], axis=2).max(axis=1)
        m = keep_mask(centers, radii)
        tv, tvol = tv[m], tvol[m]
    return bc, br, bh, bv, tv, tvol


# ---------------------------------------------------------------------------
# Operations.

def cast_lidar(scene: Scene, twin_pose: RigidTransform, cfg: LidarConfig) -> LidarScan:
    """Nearest-hit ranges over the azimuth x elevation grid; deterministic."""
    sensor_pose = compose(twin_pose, cfg.mount)
    local = _lidar_directions(cfg.h_fov, cfg.v_fov, cfg.h_res, cfg.v_res)
    origin, dirs, rot = _sensor_rays(local, sensor_pose)
    prims = scene_primitives(scene)
    t, _ = _kernels.raycast(origin, dirs, *prims, cfg.max_range, rot=rot)
    ranges = np.where(np.isfinite(t), t, cfg.miss_value)
    return LidarScan(cfg, ranges.reshape(cfg.n_elevation, cfg.n_azimuth))


def downsample_three(scan: LidarScan) -> tuple[float, float, float]:
    """(d_f, d_r, d_l): horizon-level ranges at azimuths 0, -30, +30 deg.

    Positive azimuth is left (right-handed, z-up).  Misses map to max_range.
    """
    mr = scan.config.max_range
    d_f = min(scan.range_at(0.0, 0.0), mr)
    d_l = min(scan.range_at(0.0, 30.0), mr)
    d_r = min(scan.range_at(0.0, -30.0), mr)
    return d_f, d_r, d_l


def render_semantic_depth(
    scene: Scene, twin_pose: RigidTransform, cfg: CameraConfig
) -> SemanticDepthImage:
    """Pinhole depth + semantic-id image (range along the pixel ray)."""
    sensor_pose = compose(twin_pose, cfg.mount)
    local = _camera_directions(cfg.width, cfg.height, cfg.h_fov)
    origin, dirs, rot = _sensor_rays(local, sensor_pose)
    prims = scene_primitives(scene)
    prims = _cull_outside_cone(
        prims, origin, rot[:, 0],
        _camera_cos_half_angle(cfg.width, cfg.height, cfg.h_fov), cfg.max_range,
    )
    t, vol = _kernels.raycast(origin, dirs, *prims, cfg.max_range, rot=rot)
    miss = vol < 0
    t[miss] = 0.0
    # classes[-1] is the background entry, reached by the miss index -1
    classes = np.zeros(len(scene.obstacles) + 1, dtype=np.uint8)
    for idx, obs in enumerate(scene.obstacles):
        classes[idx] = int(obs.semantic_class)
    semantic = classes[vol]
    return SemanticDepthImage(t.reshape(cfg.height, cfg.width),
                              semantic.reshape(cfg.height, cfg.width))


def pedestrian_visible(img: SemanticDepthImage, min_pixels: int = 50) -> bool:
    """True when at least min_pixels pixels carry the pedestrian class."""
    return int((img.semantic == int(SemanticClass.PEDESTRIAN)).sum()) >= min_pixels


def horizon_scan(scene: Scene, pose: RigidTransform, max_range: float = 30.0,
                 n_azimuth: int = 360, mount: RigidTransform | None = None):
    """Single-elevation 360 deg scan; (azimuths_deg, ranges with misses at
    max_range).  Used as the physical-robot scan stream in internal mode."""
    sensor_pose = compose(pose, mount if mount is not None else _default_mount())
    az = np.radians(np.arange(n_azimuth) * (360.0 / n_azimuth))
    local = np.stack([np.cos(az), np.sin(az), np.zeros_like(az)], axis=1)
    origin, dirs, rot = _sensor_rays(local, sensor_pose)
    prims = scene_primitives(scene)
    t, _ = _kernels.raycast(origin, dirs, *prims, max_range, rot=rot)
    ranges = np.where(np.isfinite(t), t, max_range)
    return np.degrees(az), ranges
