/** Fixed topic catalog of the bridge, mirroring the simulator side. */

export const STANDARD_TOPICS: Record<string, string> = {
  // robot -> sim
  "/odom": "pose",
  "/simprive/reset": "bool",
  "/simprive/pause": "bool",
  "/simprive/resume": "bool",
  "/cmd_vel": "twist",
  // sim -> robot
  "/simprive/pose_digital": "pose",
  "/simprive/collision": "collision",
  "/simprive/lidar": "lidar",
  "/simprive/camera_depth": "image_f32",
  "/simprive/camera_semantic": "image_u8",
};

export interface PoseMsg {
  position: { x: number; y: number; z: number };
  orientation: { x: number; y: number; z: number; w: number };
  timestep?: number;
  stamp?: number;
}

export interface TwistMsg {
  linear: { x: number };
  angular: { z: number };
}

export interface CollisionMsg {
  data: boolean;
  other_id: string | null;
}

export interface LidarMsg {
  h_fov: number;
  v_fov: number;
  h_res: number;
  v_res: number;
  max_range: number;
  rows: number;
  cols: number;
  ranges: number[]; // row-major [elevation][azimuth]
}

export interface ImageMsg {
  width: number;
  height: number;
  encoding: "f32le" | "u8";
  data: string; // base64
}

export interface ScanMsg {
  angles_deg: number[];
  ranges: number[];
  max_range: number;
}

export const SEMANTIC_PEDESTRIAN = 3;

/** (d_f, d_r, d_l): horizon ranges at bearings 0, -30, +30 degrees. */
export function downsampleThree(scan: LidarMsg): [number, number, number] {
  const row = Math.round(scan.v_fov / (2 * scan.v_res));
  const col = (bearing: number) => {
    const c = Math.round(bearing / scan.h_res);
    return ((c % scan.cols) + scan.cols) % scan.cols;
  };
  const at = (bearing: number) => {
    const r = scan.ranges[row * scan.cols + col(bearing)];
    return Math.min(r, scan.max_range);
  };
  return [at(0), at(-30), at(30)];
}

/** Count of pedestrian-class pixels in a semantic image payload. */
export function pedestrianPixels(img: ImageMsg): number {
  const bytes = Buffer.from(img.data, "base64");
  let count = 0;
  for (const b of bytes) {
    if (b === SEMANTIC_PEDESTRIAN) {
      count += 1;
    }
  }
  return count;
}
