/**
 * Reference robot client: the on-board control architecture run against the
 * simulator's internal-kinematics mode.
 *
 * Loop per physical scan: the policy reads the synthetic 3-ray LiDAR
 * downsample, the pedestrian flag (from the synthetic semantic camera) caps
 * speed, and the physical-scan safety check can interrupt everything with a
 * stop + pause, a turn-until-clear recovery, then the pre-stop command and a
 * resume.
 */

import { Client } from "./client.js";
import {
  Command,
  DEFAULT_SAFETY,
  RecoveryController,
  SafetyConfig,
  mustStop,
  slowdownFilter,
} from "./safety.js";
import {
  CollisionMsg,
  ImageMsg,
  LidarMsg,
  PoseMsg,
  ScanMsg,
  downsampleThree,
  pedestrianPixels,
} from "./topics.js";

export interface Rect {
  min: [number, number];
  max: [number, number];
}

export interface AgentConfig {
  seed: number;
  goalRegion: Rect;
  safety?: SafetyConfig;
  cruiseSpeed?: number; // m/s while clear
  blockedDistance?: number; // m, slow-and-turn below this frontal range
  pedestrianMinPixels?: number;
  maxWallMs?: number; // give up after this much wall time
}

export interface TimedPose {
  t: number; // envelope stamp, seconds
  x: number;
  y: number;
  z: number;
  qx: number;
  qy: number;
  qz: number;
  qw: number;
}

export interface PauseCycle {
  pausedAt: number; // digital pose index of the last pre-pause sample
  resumedAt: number; // digital pose index of the first post-resume sample
}

export interface AgentResult {
  reachedGoal: boolean;
  pauses: number;
  resumes: number;
  collisions: number;
  digital: TimedPose[];
  physical: TimedPose[];
  cycles: PauseCycle[];
}

function toTimedPose(msg: PoseMsg, stamp: number): TimedPose {
  return {
    t: msg.stamp ?? stamp,
    x: msg.position.x,
    y: msg.position.y,
    z: msg.position.z,
    qx: msg.orientation.x,
    qy: msg.orientation.y,
    qz: msg.orientation.z,
    qw: msg.orientation.w,
  };
}

/** Steer toward the more open side; slow and turn hard when blocked. */
export function heuristicPolicy(
  dF: number,
  dR: number,
  dL: number,
  cruise: number,
  blocked: number,
): Command {
  const f = Math.min(dF, 10);
  const r = Math.min(dR, 10);
  const l = Math.min(dL, 10);
  if (f < blocked) {
    return [0.25, l >= r ? 0.5 : -0.5];
  }
  const aW = Math.max(-1, Math.min(1, 0.5 * (l - r)));
  return [cruise, 0.5 * aW];
}

export function referenceAgent(
  client: Client,
  cfg: AgentConfig,
): Promise<AgentResult> {
  const safety = cfg.safety ?? DEFAULT_SAFETY;
  const cruise = cfg.cruiseSpeed ?? 1.0;
  const blocked = cfg.blockedDistance ?? 2.0;
  const minPixels = cfg.pedestrianMinPixels ?? 5;
  const recovery = new RecoveryController(safety);

  const result: AgentResult = {
    reachedGoal: false,
    pauses: 0,
    resumes: 0,
    collisions: 0,
    digital: [],
    physical: [],
    cycles: [],
  };

  let rays: [number, number, number] | null = null;
  let pedestrian = false;
  let lastCmd: Command = [0, 0];
  let preStopCmd: Command = [0, 0];
  let paused = false;
  let pausedAtIndex = 0;
  let finished = false;

  return new Promise((resolve) => {
    const timer = setTimeout(() => finish(false), cfg.maxWallMs ?? 120_000);

    function finish(goal: boolean): void {
      if (finished) {
        return;
      }
      finished = true;
      clearTimeout(timer);
      try {
        client.publish("/cmd_vel", { linear: { x: 0 }, angular: { z: 0 } });
      } catch {
        // connection already gone; the result still stands
      }
      result.reachedGoal = goal;
      resolve(result);
    }

    function sendCmd(cmd: Command): void {
      lastCmd = cmd;
      client.publish("/cmd_vel", {
        linear: { x: cmd[0] },
        angular: { z: cmd[1] },
      });
    }

    for (const topic of ["/cmd_vel", "/simprive/reset", "/simprive/pause", "/simprive/resume"]) {
      client.advertise(topic);
    }

    client.subscribe("/simprive/lidar", (env) => {
      rays = downsampleThree(env.msg as unknown as LidarMsg);
    });

    client.subscribe("/simprive/camera_semantic", (env) => {
      pedestrian = pedestrianPixels(env.msg as unknown as ImageMsg) >= minPixels;
    });

    client.subscribe("/simprive/collision", (env) => {
      const msg = env.msg as unknown as CollisionMsg;
      if (msg.data) {
        result.collisions += 1;
        finish(false);
      }
    });

    client.subscribe("/simprive/pose_digital", (env) => {
      const pose = toTimedPose(env.msg as unknown as PoseMsg, env.stamp);
      result.digital.push(pose);
      const [gx0, gy0] = cfg.goalRegion.min;
      const [gx1, gy1] = cfg.goalRegion.max;
      if (pose.x >= gx0 && pose.x <= gx1 && pose.y >= gy0 && pose.y <= gy1) {
        finish(true);
      }
    });

    client.subscribe("/odom", (env) => {
      result.physical.push(toTimedPose(env.msg as unknown as PoseMsg, env.stamp));
    });

    // The physical scan cadence drives the control loop, mirroring a LiDAR
    // interrupt on the real robot.
    client.subscribe("/scan", (env) => {
      if (finished) {
        return;
      }
      const scan = env.msg as unknown as ScanMsg;
      if (!paused && mustStop(scan.angles_deg, scan.ranges, safety)) {
        preStopCmd = lastCmd;
        paused = true;
        pausedAtIndex = result.digital.length - 1;
      }
      if (paused) {
        const act = recovery.step(scan.angles_deg, scan.ranges, preStopCmd);
        for (const event of act.emits) {
          if (event === "pause") {
            result.pauses += 1;
            client.publish("/simprive/pause", { data: true });
          } else {
            result.resumes += 1;
            client.publish("/simprive/resume", { data: true });
          }
        }
        sendCmd(act.command);
        if (act.done) {
          paused = false;
          result.cycles.push({
            pausedAt: pausedAtIndex,
            resumedAt: result.digital.length,
          });
        }
        return;
      }
      if (rays === null) {
        return; // no synthetic observation yet
      }
      const [dF, dR, dL] = rays;
      const cmd = slowdownFilter(
        heuristicPolicy(dF, dR, dL, cruise, blocked),
        pedestrian,
      );
      sendCmd(cmd);
    });

    client.onDisconnect = () => finish(false);
    client.publish("/simprive/reset", { data: true, seed: cfg.seed });
  });
}
