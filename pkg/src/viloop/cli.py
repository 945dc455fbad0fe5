"""Executable entry point: scenario loading, run modes, logging, exports.

Modes:
  bridge    serve the TCP bridge for an external robot client
  internal  built-in unicycle robot (live over TCP, or deterministic replay
            with --cmd-script)
  rlenv     2D corridor environment episodes (optionally served over TCP)

`viloop --validate PATH` checks a scenario file and prints a JSON report.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import signal
import sys
import threading
import time
from pathlib import Path

import numpy as np

from .bridge import BridgeServer, standard_topics
from .frames import PoseSample, rt_from_xyzquat, xyzquat_from_rt
from .kinematics import InternalRobot, SaturationLimits, UnicycleState
from .orchestrator import EventQueue, Orchestrator, StepClock
from .rlenv import CorridorEnv, CorridorParams, EnvBridge, heuristic_policy, run_episode
from .scenario import bundled_scenario_path, load_scenario, validate_scenario
from .sensors import CameraConfig, horizon_scan

log = logging.getLogger("viloop")


class ConfigError(ValueError):
    pass


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="viloop",
        description="Vehicle-in-the-loop simulation: digital twin, synthetic "
                    "sensors, TCP pub/sub bridge.",
    )
    p.add_argument("--mode", choices=["bridge", "internal", "rlenv"],
                   help="run mode (required unless --validate is used)")
    p.add_argument("--scenario", help="scenario file path or bundled name "
                                      "(corridor, empty_room, hospital)")
    p.add_argument("--port", type=int, default=None,
                   help="TCP listen port (default 9870; 0 picks a free port)")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--seed", type=int, default=None,
                   help="master seed (default: OS entropy, echoed to the log)")
    p.add_argument("--export-dir", default=None,
                   help="directory for timing/trajectory/transcript CSVs")
    p.add_argument("--ticks", type=int, default=None,
                   help="stop after N accepted pose ticks")
    p.add_argument("--episodes", type=int, default=3, help="rlenv episode count")
    p.add_argument("--rate", type=float, default=20.0,
                   help="internal robot pose rate in Hz (0 = unthrottled)")
    p.add_argument("--cmd-script", default=None,
                   help="internal mode: CSV of 't,v,w' commands; implies a "
                        "deterministic in-process replay")
    p.add_argument("--robot-start", default="0,0,0", metavar="X,Y,DEG",
                   help="internal mode: initial pose of the unicycle robot")
    p.add_argument("--physical-scenario", default=None,
                   help="internal mode: scenario acting as the physical room; "
                        "publishes a 2D scan of it on /scan")
    p.add_argument("--camera", default=None, metavar="WxH",
                   help="override scenario camera resolution, e.g. 160x120")
    p.add_argument("--validate", metavar="PATH", default=None,
                   help="validate a scenario file and exit")
    p.add_argument("--log-level", default=os.environ.get("VILOOP_LOG", "INFO"))
    return p


def _resolve_scenario(arg: str | None, default: str = "corridor"):
    name = arg or default
    path = Path(name)
    if not path.exists():
        path = bundled_scenario_path(name)
    return load_scenario(path)


def _apply_camera_override(bundle, spec: str | None):
    if not spec:
        return bundle
    try:
        w, h = (int(v) for v in spec.lower().split("x"))
    except ValueError as exc:
        raise ConfigError(f"--camera expects WxH, got {spec!r}") from exc
    bundle.camera_cfg = CameraConfig(
        width=w, height=h, h_fov=bundle.camera_cfg.h_fov,
        max_range=bundle.camera_cfg.max_range, mount=bundle.camera_cfg.mount,
    )
    return bundle


def _pose_from_msg(msg: dict, env_seq: int, env_stamp: float) -> PoseSample:
    pos = msg["position"]
    ori = msg["orientation"]
    rt = rt_from_xyzquat(pos["x"], pos["y"], pos["z"],
                         ori["x"], ori["y"], ori["z"], ori["w"])
    return PoseSample(rt, int(msg.get("timestep", env_seq)),
                      float(msg.get("stamp", env_stamp)))


def _parse_start(spec: str) -> UnicycleState:
    try:
        x, y, deg = (float(v) for v in spec.split(","))
    except ValueError as exc:
        raise ConfigError(f"--robot-start expects 'x,y,deg', got {spec!r}") from exc
    return UnicycleState(x=x, y=y, theta=math.radians(deg))


def _load_cmd_script(path) -> list[tuple[float, float, float]]:
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#") or line.lower().startswith("t,"):
                continue
            parts = line.replace(",", " ").split()
            if len(parts) != 3:
                raise ConfigError(f"{path}:{lineno}: expected 't,v,w'")
            rows.append((float(parts[0]), float(parts[1]), float(parts[2])))
    rows.sort(key=lambda r: r[0])
    return rows


# ---------------------------------------------------------------------------
# Modes.

def run_rlenv(args, export_dir: Path | None) -> int:
    seed = args.seed if args.seed is not None else int.from_bytes(os.urandom(4), "big")
    log.info("rlenv mode: %d episodes, master seed %d", args.episodes, seed)
    env = CorridorEnv(CorridorParams())
    outcomes = []
    for ep in range(args.episodes):
        transcript = run_episode(env, heuristic_policy, seed + ep)
        outcomes.append(transcript.outcome)
        log.info("episode %d (seed %d): %s, reward %.1f, %d steps",
                 ep, seed + ep, transcript.outcome, transcript.total_reward,
                 len(transcript.rows))
        if export_dir is not None:
            transcript.to_csv(export_dir / f"transcript_ep{ep}.csv")
    print(json.dumps({"outcomes": outcomes, "seed": seed}))
    return 0


def run_rlenv_bridge(args) -> int:
    """Serve the 2D environment over TCP so external agents can drive it."""
    seed = args.seed if args.seed is not None else int.from_bytes(os.urandom(4), "big")
    server = BridgeServer(args.host, args.port if args.port else 0)
    queue = EventQueue(capacity=256)
    endpoint = server.attach_local(lambda m: queue.put("msg", m), name="rlenv")
    env = CorridorEnv(CorridorParams())
    env_bridge = EnvBridge(env, endpoint, base_seed=seed)
    port = server.start()
    log.info("rlenv bridge: seed %d, listening on %s:%d", seed, args.host, port)
    print(json.dumps({"listening": port, "seed": seed}), flush=True)

    period = 1.0 / args.rate if args.rate and args.rate > 0 else 0.0
    episodes_done = 0
    next_step = time.monotonic()
    try:
        while episodes_done < args.episodes:
            item = queue.get(timeout=0.02)
            while item is not None:
                env_bridge.on_message(item[1])
                item = queue.get(timeout=0)
            if env.corridor is None or env.done:
                continue  # waiting for a reset from a client
            now = time.monotonic()
            if period and now < next_step:
                continue
            next_step = max(next_step + period, now)
            if not env_bridge.step():
                episodes_done += 1
                log.info("episode %d finished after %d steps", episodes_done, env.steps)
    except KeyboardInterrupt:
        log.info("interrupted")
    finally:
        server.stop()
    return 0


def run_internal_replay(args, export_dir: Path | None) -> int:
    """Deterministic in-process replay of a scripted command stream."""
    seed = args.seed if args.seed is not None else 0
    bundle = _apply_camera_override(_resolve_scenario(args.scenario), args.camera)
    rate = args.rate if args.rate and args.rate > 0 else 20.0
    dt = 1.0 / rate
    if dt > 0.1:
        raise ConfigError("--rate must be at least 10 Hz for the unicycle integrator")
    script = _load_cmd_script(args.cmd_script) if args.cmd_script else []
    ticks = args.ticks if args.ticks is not None else (
        int(script[-1][0] / dt) + int(rate) if script else int(rate) * 10)

    orch = Orchestrator(bundle.scene, bundle.lidar_cfg, bundle.camera_cfg,
                        clock=StepClock())
    orch.on_reset(seed)
    robot = InternalRobot(SaturationLimits(), start=_parse_start(args.robot_start))
    log.info("internal replay: seed %d, %d ticks at %.1f Hz", seed, ticks, rate)

    t = 0.0
    next_cmd = 0
    for _ in range(ticks):
        while next_cmd < len(script) and script[next_cmd][0] <= t + 1e-9:
            robot.command(script[next_cmd][1], script[next_cmd][2])
            next_cmd += 1
        robot.step(dt)
        t += dt
        orch.on_pose(robot.emit_pose())

    if export_dir is not None:
        orch.export_timing_csv(export_dir / "timing.csv")
        orch.export_trajectory_csv(export_dir / "trajectory.csv")
    summary = orch.timing_summary()
    print(json.dumps({
        "ticks": orch.session.tick_count,
        "phase": orch.session.phase.value,
        "render_mean_ms": summary["render"]["mean_ms"],
        "seed": seed,
    }))
    return 0


class _BridgeRuntime:
    """Shared wiring for the live TCP modes: orchestrator thread + endpoints."""

    def __init__(self, args, with_robot: bool):
        self.args = args
        self.seed = args.seed if args.seed is not None else int.from_bytes(os.urandom(4), "big")
        self.bundle = _apply_camera_override(_resolve_scenario(args.scenario), args.camera)
        self.server = BridgeServer(args.host, args.port if args.port is not None else 9870)
        self.queue = EventQueue()
        self.stop_event = threading.Event()
        self.reset_count = 0
        self.with_robot = with_robot
        self.physical = (_resolve_scenario(args.physical_scenario, "empty_room")
                         if with_robot and args.physical_scenario else None)

        self.sim_endpoint = self.server.attach_local(self._on_sim_message, name="orchestrator")
        self.orch = Orchestrator(self.bundle.scene, self.bundle.lidar_cfg,
                                 self.bundle.camera_cfg,
                                 publish=self.sim_endpoint.publish)
        for topic in ("/odom", "/simprive/reset", "/simprive/pause", "/simprive/resume"):
            self.sim_endpoint.subscribe(topic)
        for topic in standard_topics():
            if topic.startswith("/simprive/") and topic not in (
                    "/simprive/reset", "/simprive/pause", "/simprive/resume"):
                self.sim_endpoint.advertise(topic)

        self.robot = (InternalRobot(SaturationLimits(),
                                    start=_parse_start(args.robot_start))
                      if with_robot else None)
        self.robot_endpoint = None
        if with_robot:
            self.robot_endpoint = self.server.attach_local(self._on_robot_message,
                                                           name="internal-robot")
            self.robot_endpoint.subscribe("/cmd_vel")
            self.robot_endpoint.advertise("/odom")
            if self.physical is not None:
                self.robot_endpoint.advertise("/scan")

    # message -> event-queue adapters -------------------------------------

    def _on_sim_message(self, env):
        if env.op != "publish":
            return
        if env.topic == "/odom":
            try:
                self.queue.put("pose", _pose_from_msg(env.msg, env.seq, env.stamp))
            except (KeyError, TypeError):
                log.warning("malformed /odom message dropped")
        elif env.topic == "/simprive/reset":
            if isinstance(env.msg, dict) and env.msg.get("data"):
                seed = env.msg.get("seed")
                self.queue.put("reset", int(seed) if seed is not None else None)
        elif env.topic == "/simprive/pause":
            if isinstance(env.msg, dict) and env.msg.get("data"):
                self.queue.put("pause")
        elif env.topic == "/simprive/resume":
            if isinstance(env.msg, dict) and env.msg.get("data"):
                self.queue.put("resume")

    def _on_robot_message(self, env):
        if env.op == "publish" and env.topic == "/cmd_vel" and self.robot is not None:
            try:
                v = float(env.msg["linear"]["x"])
                w = float(env.msg["angular"]["z"])
            except (KeyError, TypeError):
                log.warning("malformed /cmd_vel message dropped")
                return
            self.robot.command(v, w)

    # threads ---------------------------------------------------------------

    def sim_loop(self):
        while not self.stop_event.is_set():
            item = self.queue.get(timeout=0.2)
            if item is None:
                continue
            kind, payload = item
            if kind == "pose":
                self.orch.on_pose(payload)
                if self.args.ticks and self.orch.session.tick_count >= self.args.ticks:
                    self.stop_event.set()
            elif kind == "reset":
                seed = payload if payload is not None else self.seed + self.reset_count
                self.reset_count += 1
                self.orch.on_reset(seed)
                log.info("reset with seed %d", seed)
            elif kind == "pause":
                self.orch.on_pause()
            elif kind == "resume":
                self.orch.on_resume()

    def robot_loop(self):
        rate = self.args.rate
        dt = 1.0 / rate if rate and rate > 0 else 1.0 / 20.0
        period = dt if rate and rate > 0 else 0.0
        while not self.stop_event.is_set():
            start = time.monotonic()
            if not period:
                # unthrottled: pace on the simulation queue so sim time runs
                # as fast as the orchestrator can tick, without pose drops
                while len(self.queue) > 2 and not self.stop_event.is_set():
                    self.stop_event.wait(0.001)
            self.robot.step(dt)
            sample = self.robot.emit_pose()
            x, y, z, qx, qy, qz, qw = xyzquat_from_rt(sample.transform)
            self.robot_endpoint.publish("/odom", {
                "position": {"x": x, "y": y, "z": z},
                "orientation": {"x": qx, "y": qy, "z": qz, "w": qw},
                "timestep": sample.timestep,
                "stamp": sample.stamp,
            }, stamp=sample.stamp)
            if self.physical is not None:
                az, ranges = horizon_scan(self.physical.scene, sample.transform,
                                          self.bundle.lidar_cfg.max_range)
                self.robot_endpoint.publish("/scan", {
                    "angles_deg": [float(a) for a in az],
                    "ranges": [float(r) for r in np.asarray(ranges, dtype=np.float32)],
                    "max_range": self.bundle.lidar_cfg.max_range,
                }, stamp=sample.stamp)
            if period:
                lag = period - (time.monotonic() - start)
                if lag > 0:
                    self.stop_event.wait(lag)

    def run(self, export_dir: Path | None) -> int:
        port = self.server.start()
        log.info("mode %s: seed %d, listening on %s:%d",
                 "internal" if self.with_robot else "bridge",
                 self.seed, self.args.host, port)
        print(json.dumps({"listening": port, "seed": self.seed}), flush=True)
        sim_thread = threading.Thread(target=self.sim_loop, daemon=True)
        sim_thread.start()
        robot_thread = None
        if self.with_robot:
            robot_thread = threading.Thread(target=self.robot_loop, daemon=True)
            robot_thread.start()
        try:
            while not self.stop_event.is_set():
                time.sleep(0.1)
        except KeyboardInterrupt:
            log.info("interrupted")
        finally:
            self.stop_event.set()
            sim_thread.join(timeout=2.0)
            if robot_thread is not None:
                robot_thread.join(timeout=2.0)
            self.server.stop()
            if export_dir is not None and self.orch.session.tick_count:
                self.orch.export_timing_csv(export_dir / "timing.csv")
                self.orch.export_trajectory_csv(export_dir / "trajectory.csv")
        return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, str(args.log_level).upper(), logging.INFO),
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )

    if args.validate:
        report = validate_scenario(args.validate)
        print(json.dumps(report.to_dict(), indent=2))
        return 0 if report.ok else 1

    if not args.mode:
        print("error: --mode is required (or use --validate PATH)", file=sys.stderr)
        return 2

    export_dir = None
    if args.export_dir:
        export_dir = Path(args.export_dir)
        export_dir.mkdir(parents=True, exist_ok=True)

    try:
        if args.mode == "rlenv" and args.port is not None:
            return run_rlenv_bridge(args)
        if args.mode == "rlenv":
            return run_rlenv(args, export_dir)
        if args.mode == "internal" and args.cmd_script is not None:
            return run_internal_replay(args, export_dir)
        if args.mode == "internal" and args.port is None and args.cmd_script is None:
            return run_internal_replay(args, export_dir)
        runtime = _BridgeRuntime(args, with_robot=(args.mode == "internal"))
        return runtime.run(export_dir)
    except (ConfigError, OSError, ValueError) as exc:
        log.error("%s", exc)
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    signal.signal(signal.SIGINT, signal.default_int_handler)
    sys.exit(main())
