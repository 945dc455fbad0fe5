/**
 * Safety policies mirrored from the simulator package: minimum-distance stop
 * inside a forward sector, turn-until-clear recovery with pause/resume
 * choreography, pedestrian slowdown.
 */

export const PEDESTRIAN_V_CAP = 0.5; // m/s

export interface SafetyConfig {
  stopThreshold: number; // m, default 1.5
  clearThreshold: number; // m, default 2.5
  recoveryW: number; // rad/s, default 0.5
  scanSector: number; // degrees half-width for the stop check, default 60
  /**
   * Recovery clearance sector half-width; defaults to scanSector.  In tight
   * rooms a wide clearance window can never exceed the clear threshold, so
   * the recovery would spin forever; a narrow window restores the "free
   * corridor ahead" meaning.
   */
  clearSector?: number;
}

export const DEFAULT_SAFETY: SafetyConfig = {
  stopThreshold: 1.5,
  clearThreshold: 2.5,
  recoveryW: 0.5,
  scanSector: 60,
};

export type Command = [v: number, w: number];

function wrapDeg(a: number): number {
  let w = ((a + 180) % 360 + 360) % 360 - 180;
  if (w === -180) {
    w = 180;
  }
  return w;
}

export function forwardClearance(
  anglesDeg: ArrayLike<number>,
  ranges: ArrayLike<number>,
  sectorDeg: number,
): number {
  let min = Infinity;
  for (let i = 0; i < anglesDeg.length; i++) {
    if (Math.abs(wrapDeg(anglesDeg[i])) <= sectorDeg) {
      min = Math.min(min, ranges[i]);
    }
  }
  if (!Number.isFinite(min)) {
    throw new Error("no rays inside the forward sector");
  }
  return min;
}

export function mustStop(
  anglesDeg: ArrayLike<number>,
  ranges: ArrayLike<number>,
  cfg: SafetyConfig = DEFAULT_SAFETY,
): boolean {
  return forwardClearance(anglesDeg, ranges, cfg.scanSector) < cfg.stopThreshold;
}

export interface RecoveryAction {
  command: Command;
  done: boolean;
  emits: ("pause" | "resume")[];
}

/**
 * Post-stop behavior: pause, rotate toward the more open side until the
 * forward sector clears, then replay the pre-stop command and resume.
 * Emits exactly one pause and one resume per stop episode.
 */
export class RecoveryController {
  #cfg: SafetyConfig;
  #active = false;
  #turnSign = 1;

  constructor(cfg: SafetyConfig = DEFAULT_SAFETY) {
    this.#cfg = cfg;
  }

  get active(): boolean {
    return this.#active;
  }

  step(
    anglesDeg: ArrayLike<number>,
    ranges: ArrayLike<number>,
    preStopCmd: Command,
  ): RecoveryAction {
    const emits: ("pause" | "resume")[] = [];
    if (!this.#active) {
      this.#active = true;
      this.#turnSign = this.#pickSide(anglesDeg, ranges);
      emits.push("pause");
    }
    const clearance = forwardClearance(
      anglesDeg,
      ranges,
      this.#cfg.clearSector ?? this.#cfg.scanSector,
    );
    if (clearance > this.#cfg.clearThreshold) {
      this.#active = false;
      emits.push("resume");
      return { command: [...preStopCmd] as Command, done: true, emits };
    }
    return {
      command: [0, this.#turnSign * this.#cfg.recoveryW],
      done: false,
      emits,
    };
  }

  #pickSide(anglesDeg: ArrayLike<number>, ranges: ArrayLike<number>): number {
    let leftSum = 0;
    let leftN = 0;
    let rightSum = 0;
    let rightN = 0;
    for (let i = 0; i < anglesDeg.length; i++) {
      const a = wrapDeg(anglesDeg[i]);
      if (a > 0) {
        leftSum += ranges[i];
        leftN += 1;
      } else if (a < 0) {
        rightSum += ranges[i];
        rightN += 1;
      }
    }
    const left = leftN ? leftSum / leftN : 0;
    const right = rightN ? rightSum / rightN : 0;
    return left >= right ? 1 : -1;
  }
}

/** Cap linear velocity while a pedestrian is in view; angular unchanged. */
export function slowdownFilter(cmd: Command, pedestrian: boolean): Command {
  const [v, w] = cmd;
  return [pedestrian ? Math.min(v, PEDESTRIAN_V_CAP) : v, w];
}
