"""Physical-world protection heuristics: LiDAR safety stop, turn-until-clear
recovery with pause/resume choreography, pedestrian slowdown.

All checks work on a polar slice (azimuth degrees, ranges in meters); use
polar_from_scan to take the horizon ring of a 3D scan.  Clearance is
evaluated inside a forward sector: a full-360 stop check would deadlock the
recovery turn, so the sector is part of the policy and configurable.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .sensors import LidarScan

PEDESTRIAN_V_CAP = 0.5  # m/s


class EmptyScan(ValueError):
    pass


class SafetyVerdict(enum.Enum):
    CLEAR = "clear"
    MUST_STOP = "must_stop"


@dataclass(frozen=True)
class SafetyConfig:
    stop_threshold: float = 1.5
    clear_threshold: float = 2.5
    recovery_w: float = 0.5
    scan_sector: float = 60.0  # half-width, degrees, for the stop check
    clear_sector: float | None = None  # recovery clearance sector; None = scan_sector

    def __post_init__(self):
        if not (self.clear_threshold > self.stop_threshold > 0):
            raise ValueError("need clear_threshold > stop_threshold > 0")

    @property
    def clearance_sector(self) -> float:
        # In tight rooms a wide clearance sector can never exceed the clear
        # threshold (side rays cap at room_halfwidth / sin(sector)), which
        # would spin the recovery forever; a narrower window restores the
        # "free corridor ahead" meaning.
        return self.scan_sector if self.clear_sector is None else self.clear_sector


def polar_from_scan(scan: LidarScan, elevation_deg: float = 0.0):
    """(azimuths_deg, ranges) for one elevation ring of a 3D scan."""
    row = scan.elevation_index(elevation_deg)
    cfg = scan.config
    az = np.arange(cfg.n_azimuth) * cfg.h_res
    return az, np.minimum(scan.ranges[row], cfg.max_range)


def _wrap_deg(az):
    """Wrap degrees to (-180, 180]."""
    a = np.mod(np.asarray(az, dtype=np.float64) + 180.0, 360.0) - 180.0
    return np.where(a == -180.0, 180.0, a)


def forward_clearance(azimuths_deg, ranges, sector_deg: float) -> float:
    """Minimum range within +/- sector_deg of straight ahead."""
    az = _wrap_deg(azimuths_deg)
    ranges = np.asarray(ranges, dtype=np.float64)
    mask = np.abs(az) <= sector_deg
    if ranges.size == 0 or not mask.any():
        raise EmptyScan("no rays inside the forward sector")
    return float(ranges[mask].min())


def safety_check(azimuths_deg, ranges, cfg: SafetyConfig) -> SafetyVerdict:
    """MustStop when anything inside the forward sector is closer than the
    stop threshold."""
    if forward_clearance(azimuths_deg, ranges, cfg.scan_sector) < cfg.stop_threshold:
        return SafetyVerdict.MUST_STOP
    return SafetyVerdict.CLEAR


@dataclass
class RecoveryAction:
    command: tuple[float, float]
    done: bool
    emits: tuple[str, ...] = ()  # ("pause",) and/or ("resume",), in order


class RecoveryController:
    """Post-stop behavior: pause, rotate in place until the forward sector
    clears, then replay the pre-stop command and resume.

    Emits exactly one pause and one resume per stop episode; the instance
    resets itself when the episode completes.
    """

    def __init__(self, cfg: SafetyConfig = SafetyConfig()):
        self.cfg = cfg
        self._active = False
        self._turn_sign = 1.0

    @property
    def active(self) -> bool:
        return self._active

    def step(self, azimuths_deg, ranges, pre_stop_cmd: tuple[float, float]) -> RecoveryAction:
        emits = []
        if not self._active:
            self._active = True
            self._turn_sign = self._pick_side(azimuths_deg, ranges)
            emits.append("pause")
        clearance = forward_clearance(azimuths_deg, ranges, self.cfg.clearance_sector)
        if clearance > self.cfg.clear_threshold:
            self._active = False
            emits.append("resume")
            return RecoveryAction(tuple(pre_stop_cmd), True, tuple(emits))
        return RecoveryAction((0.0, self._turn_sign * self.cfg.recovery_w), False, tuple(emits))

    def _pick_side(self, azimuths_deg, ranges) -> float:
        """Turn toward the side with the larger mean clearance."""
        az = _wrap_deg(azimuths_deg)
        ranges = np.asarray(ranges, dtype=np.float64)
        left = ranges[az > 0.0]
        right = ranges[az < 0.0]
        lmean = float(left.mean()) if left.size else 0.0
        rmean = float(right.mean()) if right.size else 0.0
        return 1.0 if lmean >= rmean else -1.0


def slowdown_filter(cmd: tuple[float, float], pedestrian: bool) -> tuple[float, float]:
    """Cap linear velocity while a pedestrian is in view; angular unchanged."""
    v, w = cmd
    if pedestrian:
        v = min(v, PEDESTRIAN_V_CAP)
    return (v, w)
