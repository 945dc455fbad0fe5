"""Deterministic simulation loop: pose callbacks, reset/pause/resume,
collision latching, sensor generation, timing capture.

Events are strictly serialized in arrival order; one tick completes before
the next event is consumed.  A clock callable is injected so scripted runs
produce byte-identical exports.
"""

from __future__ import annotations

import csv
import logging
import math
import threading
import time
from collections import deque
from dataclasses import dataclass, field
from enum import Enum

from .frames import (
    PoseSample,
    RigidTransform,
    apply_offset,
    initial_offset,
    resume_offset,
    xyzquat_from_rt,
)
from .sensors import (
    CameraConfig,
    LidarConfig,
    LidarScan,
    SemanticDepthImage,
    cast_lidar,
    render_semantic_depth,
)
from .world import CollisionReport, Scene, check_collision, reset_scene, step_npcs

log = logging.getLogger("viloop.orchestrator")

NPC_DT_CAP = 0.1  # s, bounds NPC teleporting after stream stalls


class SimPhase(Enum):
    UNINITIALIZED = "uninitialized"
    RUNNING = "running"
    PAUSED = "paused"
    COLLIDED = "collided"


class EmptyTimingLog(RuntimeError):
    pass


@dataclass
class TickTiming:
    tick: int
    receive_ns: int
    publish_ns: int
    render_ns: int


@dataclass
class Dropped:
    reason: str  # "stale" | "phase"


@dataclass
class TickOutputs:
    digital_pose: RigidTransform
    collision: CollisionReport
    scan: LidarScan | None
    image: SemanticDepthImage | None


@dataclass
class SessionState:
    phase: SimPhase = SimPhase.UNINITIALIZED
    offset: RigidTransform | None = None
    digital_pose: RigidTransform | None = None
    last_physical: PoseSample | None = None
    tick_count: int = 0
    dropped_pose_count: int = 0
    timing_log: list[TickTiming] = field(default_factory=list)
    trajectory: list[tuple] = field(default_factory=list)
    last_stamp: float | None = None
    timestep_watermark: int | None = None


class StepClock:
    """Deterministic monotonic clock: advances a fixed quantum per call."""

    def __init__(self, start_ns: int = 0, step_ns: int = 1_000_000):
        self._now = start_ns
        self._step = step_ns

    def __call__(self) -> int:
        self._now += self._step
        return self._now


class Orchestrator:
    """Owns the scene and session state; drives one tick per accepted pose."""

    def __init__(self, scene: Scene, lidar_cfg: LidarConfig = LidarConfig(),
                 camera_cfg: CameraConfig = CameraConfig(), clock=time.monotonic_ns,
                 publish=None):
        self.scene = scene
        self.lidar_cfg = lidar_cfg
        self.camera_cfg = camera_cfg
        self.clock = clock
        self.publish = publish  # callable(topic: str, payload: dict) or None
        self.session = SessionState()

    # -- callbacks ---------------------------------------------------------

    def on_pose(self, sample: PoseSample):
        """Process one pose message; returns TickOutputs or Dropped."""
        st = self.session
        receive = self.clock()
        if st.timestep_watermark is not None and sample.timestep <= st.timestep_watermark:
            st.dropped_pose_count += 1
            return Dropped("stale")
        st.timestep_watermark = sample.timestep
        # The robot's latest pose is tracked in every phase so reset/resume
        # re-anchor where the robot actually is; the twin only moves while
        # Running.
        st.last_physical = sample
        if st.phase is not SimPhase.RUNNING:
            st.dropped_pose_count += 1
            return Dropped("phase")

        if st.last_stamp is not None:
            dt = min(max(sample.stamp - st.last_stamp, 0.0), NPC_DT_CAP)
            if dt > 0.0 and self.scene.npcs:
                step_npcs(self.scene, dt)
        st.last_stamp = sample.stamp

        render_start = self.clock()
        digital = apply_offset(st.offset, sample.transform)
        st.digital_pose = digital
        collision = check_collision(self.scene, digital)
        scan = image = None
        if collision.collided:
            st.phase = SimPhase.COLLIDED
        else:
            scan = cast_lidar(self.scene, digital, self.lidar_cfg)
            image = render_semantic_depth(self.scene, digital, self.camera_cfg)
        render_ns = self.clock() - render_start

        outputs = TickOutputs(digital, collision, scan, image)
        self._emit(outputs, sample)
        publish = self.clock()

        st.tick_count += 1
        st.timing_log.append(TickTiming(st.tick_count, receive, publish, render_ns))
        st.trajectory.append(
            (st.tick_count, st.phase.value)
            + xyzquat_from_rt(sample.transform)
            + xyzquat_from_rt(digital)
        )
        return outputs

    def on_reset(self, seed: int) -> RigidTransform:
        """Re-roll the scene and re-anchor; legal from every phase."""
        st = self.session
        self.scene, spawn = reset_scene(self.scene, seed)
        anchor = st.last_physical.transform if st.last_physical else RigidTransform.identity()
        st.offset = initial_offset(spawn, anchor)
        st.digital_pose = spawn
        st.phase = SimPhase.RUNNING
        st.last_stamp = None
        return spawn

    def on_pause(self) -> bool:
        st = self.session
        if st.phase is not SimPhase.RUNNING:
            log.warning("illegal transition: pause while %s", st.phase.value)
            return False
        st.phase = SimPhase.PAUSED
        return True

    def on_resume(self) -> bool:
        st = self.session
        if st.phase is not SimPhase.PAUSED:
            log.warning("illegal transition: resume while %s", st.phase.value)
            return False
        anchor = st.last_physical.transform if st.last_physical else RigidTransform.identity()
        st.offset = resume_offset(st.digital_pose, anchor)
        st.phase = SimPhase.RUNNING
        st.last_stamp = None
        return True

    # -- outputs -----------------------------------------------------------

    def _emit(self, outputs: TickOutputs, sample: PoseSample) -> None:
        """Publish tick outputs in the fixed order clients rely on:
        pose echo, collision, lidar, camera depth, camera semantic.
        A collided tick emits the collision report alone."""
        if self.publish is None:
            return
        if outputs.collision.collided:
            self.publish("/simprive/collision", {
                "data": True,
                "other_id": outputs.collision.other_id,
            })
            return
        x, y, z, qx, qy, qz, qw = xyzquat_from_rt(outputs.digital_pose)
        self.publish("/simprive/pose_digital", {
            "position": {"x": x, "y": y, "z": z},
            "orientation": {"x": qx, "y": qy, "z": qz, "w": qw},
            "timestep": sample.timestep,
            "stamp": sample.stamp,
        })
        self.publish("/simprive/collision", {
            "data": False,
            "other_id": None,
        })
        if outputs.scan is not None:
            self.publish("/simprive/lidar", outputs.scan.to_payload())
        if outputs.image is not None:
            depth, semantic = outputs.image.to_payloads()
            self.publish("/simprive/camera_depth", depth)
            self.publish("/simprive/camera_semantic", semantic)

    # -- timing ------------------------------------------------------------

    def timing_summary(self) -> dict:
        """Statistics over render durations and full receive->publish spans."""
        logbook = self.session.timing_log
        if not logbook:
            raise EmptyTimingLog("no ticks recorded")
        render = [t.render_ns for t in logbook]
        span = [t.publish_ns - t.receive_ns for t in logbook]

        def stats(xs):
            n = len(xs)
            mean = sum(xs) / n
            var = sum((x - mean) ** 2 for x in xs) / n
            return {
                "mean_ms": mean / 1e6,
                "std_ms": math.sqrt(var) / 1e6,
                "max_ms": max(xs) / 1e6,
                "samples": n,
            }

        def frac_le(xs, threshold_ms):
            limit = threshold_ms * 1e6
            return sum(1 for x in xs if x <= limit) / len(xs)

        return {
            "render": stats(render),
            "span": stats(span),
            "frac_render_le": lambda ms: frac_le(render, ms),
            "frac_span_le": lambda ms: frac_le(span, ms),
        }

    def export_timing_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["tick", "receive_ns", "publish_ns", "render_ns"])
            for t in self.session.timing_log:
                w.writerow([t.tick, t.receive_ns, t.publish_ns, t.render_ns])

    def export_trajectory_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["tick", "phase",
                        "px", "py", "pz", "pqx", "pqy", "pqz", "pqw",
                        "dx", "dy", "dz", "dqx", "dqy", "dqz", "dqw"])
            for row in self.session.trajectory:
                w.writerow([row[0], row[1]] + [repr(v) for v in row[2:]])


class EventQueue:
    """Bounded event queue feeding the simulation thread.

    Overflow drops the oldest queued pose first (counted); control events
    are never dropped.
    """

    def __init__(self, capacity: int = 64):
        self.capacity = capacity
        self._items: deque = deque()
        self._cv = threading.Condition()
        self.dropped_overflow = 0

    def put(self, kind: str, payload=None) -> None:
        with self._cv:
            if len(self._items) >= self.capacity:
                for i, (k, _) in enumerate(self._items):
                    if k == "pose":
                        del self._items[i]
                        self.dropped_overflow += 1
                        break
                else:
                    if kind == "pose":
                        self.dropped_overflow += 1
                        return
            self._items.append((kind, payload))
            self._cv.notify()

    def get(self, timeout: float | None = None):
        with self._cv:
            if not self._items:
                self._cv.wait(timeout)
            if not self._items:
                return None
            return self._items.popleft()

    def __len__(self):
        with self._cv:
            return len(self._items)
