"""Internal simulated robot: unicycle model driven by velocity commands.

Integration is exact-arc, so constant commands trace perfect circles with no
dt dependence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .frames import PoseSample, RigidTransform, rot_z, wrap_angle

MAX_DT = 0.1
STRAIGHT_W = 1e-9  # |w| below this integrates as a straight line


class RejectedCommand(ValueError):
    pass


class InvalidDt(ValueError):
    pass


@dataclass(frozen=True)
class SaturationLimits:
    v_max: float = 1.0
    w_max: float = 0.5

    def __post_init__(self):
        if self.v_max <= 0 or self.w_max <= 0:
            raise ValueError("saturation limits must be positive")


@dataclass(frozen=True)
class UnicycleState:
    x: float = 0.0
    y: float = 0.0
    theta: float = 0.0
    v_cmd: float = 0.0
    w_cmd: float = 0.0


def apply_command(
    state: UnicycleState, v: float, w: float, limits: SaturationLimits = SaturationLimits()
) -> UnicycleState:
    """Clamp and store a velocity command."""
    if not (math.isfinite(v) and math.isfinite(w)):
        raise RejectedCommand(f"non-finite command ({v}, {w})")
    return replace(
        state,
        v_cmd=min(max(v, -limits.v_max), limits.v_max),
        w_cmd=min(max(w, -limits.w_max), limits.w_max),
    )


def integrate(state: UnicycleState, dt: float) -> UnicycleState:
    """Exact-arc unicycle update over dt seconds (0 < dt <= 0.1)."""
    if not (0.0 < dt <= MAX_DT) or not math.isfinite(dt):
        raise InvalidDt(f"dt must be in (0, {MAX_DT}], got {dt}")
    v, w, th = state.v_cmd, state.w_cmd, state.theta
    if abs(w) < STRAIGHT_W:
        x = state.x + v * math.cos(th) * dt
        y = state.y + v * math.sin(th) * dt
    else:
        x = state.x + (v / w) * (math.sin(th + w * dt) - math.sin(th))
        y = state.y - (v / w) * (math.cos(th + w * dt) - math.cos(th))
    return replace(state, x=x, y=y, theta=wrap_angle(th + w * dt))


def pose_of(state: UnicycleState) -> RigidTransform:
    """Planar pose as a rigid transform (z = 0, yaw = theta)."""
    return RigidTransform(rot_z(state.theta), np.array([state.x, state.y, 0.0]))


class InternalRobot:
    """Stateful wrapper emitting a strictly-increasing pose stream.

    Publishing cadence is owned by the caller (timer task or scripted
    stepper); this class only owns the kinematic state and counters.
    """

    def __init__(self, limits: SaturationLimits = SaturationLimits(),
                 start: UnicycleState = UnicycleState()):
        self.limits = limits
        self.state = start
        self._timestep = 0
        self._clock = 0.0

    def command(self, v: float, w: float) -> None:
        self.state = apply_command(self.state, v, w, self.limits)

    def step(self, dt: float) -> None:
        self.state = integrate(self.state, dt)
        self._clock += dt

    def emit_pose(self) -> PoseSample:
        self._timestep += 1
        return PoseSample(pose_of(self.state), self._timestep, self._clock)
