"""Vehicle-in-the-loop simulation framework.

A physical (or internally simulated) robot streams its pose over a TCP
pub/sub bridge; the framework moves a digital twin through a virtual world,
checks collisions, renders synthetic LiDAR / depth / semantic images back to
the robot, and supports pause/resume re-anchoring so the robot can reposition
without moving its twin.
"""

from ._kernels import ACTIVE_BACKEND
from .frames import (
    EnginePose,
    PoseSample,
    RigidTransform,
    apply_offset,
    compose,
    from_engine,
    initial_offset,
    inverse,
    resume_offset,
    to_engine,
)
from .orchestrator import Orchestrator, SimPhase
from .world import CollisionReport, Scene, check_collision, reset_scene, step_npcs

__version__ = "0.1.0"

__all__ = [
    "ACTIVE_BACKEND",
    "CollisionReport",
    "EnginePose",
    "Orchestrator",
    "PoseSample",
    "RigidTransform",
    "Scene",
    "SimPhase",
    "apply_offset",
    "check_collision",
    "compose",
    "from_engine",
    "initial_offset",
    "inverse",
    "reset_scene",
    "resume_offset",
    "step_npcs",
    "to_engine",
]
