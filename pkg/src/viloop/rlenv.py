"""2D corridor-navigation training environment.

Episodes run in randomized corridor mazes built from a unicycle rollout
centerline with fixed-width wall offsets and square side obstacles.  The
robot footprint is a 1 m oriented square; the observation is a 3-ray 2D
LiDAR (front, -30 deg, +30 deg) capped at 10 m.

Reward per step: -1, +0.1*d_f, -0.1*|d_r - d_l|, +10 per new 5 m of
monotone forward progress along the centerline, +100 on goal, -100 on
collision.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .kinematics import UnicycleState, integrate

FOOTPRINT_SIDE = 1.0
LIDAR_MAX_RANGE = 10.0
LIDAR_ANGLES_DEG = (0.0, 30.0, -30.0)
MILESTONE_M = 5.0
WALL_EMBED = 0.01  # obstacles sink this far into their wall so edges cross it

STEP_PENALTY = -1.0
FRONTAL_GAIN = 0.1
BALANCE_GAIN = 0.1
MILESTONE_BONUS = 10.0
GOAL_REWARD = 100.0
COLLISION_REWARD = -100.0


class DegenerateParams(ValueError):
    pass


class StepAfterDone(RuntimeError):
    pass


@dataclass(frozen=True)
class CorridorParams:
    width: float = 3.0
    length: float = 30.0
    obstacle_count: int = 4
    obstacle_size_range: tuple[float, float] = (0.4, 1.0)
    turn_scale: float = 1.0  # 0 = straight corridor
    ds: float = 0.1          # centerline sampling step

    def __post_init__(self):
        if self.width <= FOOTPRINT_SIDE:
            raise DegenerateParams("corridor width must exceed the 1 m footprint")
        if self.length <= 0 or self.ds <= 0:
            raise DegenerateParams("length and ds must be positive")
        if self.obstacle_count > 0:
            lo, hi = self.obstacle_size_range
            if not (0 < lo <= hi):
                raise DegenerateParams("bad obstacle size range")
            if lo > self.max_obstacle_side:
                raise DegenerateParams(
                    "minimum obstacle size leaves a gap below the footprint diagonal"
                )
        if not 0.0 <= self.turn_scale <= 1.0:
            raise DegenerateParams("turn_scale must be in [0, 1]")

    @property
    def max_obstacle_side(self) -> float:
        # keep the passable gap at least the footprint diagonal
        return self.width - math.sqrt(2.0) - 0.05


@dataclass
class Corridor:
    centerline: np.ndarray    # (M, 2)
    headings: np.ndarray      # (M,)
    left_wall: np.ndarray     # (M, 2)
    right_wall: np.ndarray    # (M, 2)
    width: float
    obstacles: list[np.ndarray]  # each (4, 2) square corners, CCW
    goal_arclength: float
    cum_arclength: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.cum_arclength is None:
            seg = np.linalg.norm(np.diff(self.centerline, axis=0), axis=1)
            self.cum_arclength = np.concatenate([[0.0], np.cumsum(seg)])
        self._segments = None

    @property
    def total_arclength(self) -> float:
        return float(self.cum_arclength[-1])

    def wall_segments(self) -> np.ndarray:
        """(S, 2, 2) wall polyline segments including the two end caps."""
        segs = []
        for poly in (self.left_wall, self.right_wall):
            segs.append(np.stack([poly[:-1], poly[1:]], axis=1))
        caps = np.array(
            [
                [self.left_wall[0], self.right_wall[0]],
                [self.left_wall[-1], self.right_wall[-1]],
            ]
        )
        segs.append(caps)
        return np.concatenate(segs, axis=0)

    def obstacle_segments(self) -> np.ndarray:
        if not self.obstacles:
            return np.zeros((0, 2, 2))
        segs = []
        for quad in self.obstacles:
            nxt = np.roll(quad, -1, axis=0)
            segs.append(np.stack([quad, nxt], axis=1))
        return np.concatenate(segs, axis=0)

    def all_segments(self) -> np.ndarray:
        if self._segments is None:
            self._segments = np.concatenate(
                [self.wall_segments(), self.obstacle_segments()], axis=0
            )
        return self._segments


def generate_corridor(seed: int, params: CorridorParams = CorridorParams()) -> Corridor:
    """Randomized corridor maze; deterministic function of (seed, params)."""
    rng = np.random.default_rng(seed)
    n = int(round(params.length / params.ds))
    pts = np.empty((n + 1, 2))
    heads = np.empty(n + 1)
    # Unit-speed unicycle rollout; curvature bounded so the inner wall offset
    # cannot self-pinch (turn radius >= width).
    w_max = params.turn_scale * (1.0 / params.width)
    state = UnicycleState()
    pts[0] = (0.0, 0.0)
    heads[0] = 0.0
    seg_left = 0.0
    w = 0.0
    for i in range(1, n + 1):
        if seg_left <= 0.0:
            seg_left = float(rng.uniform(2.0, 5.0))
            w = float(rng.uniform(-w_max, w_max)) if w_max > 0 else 0.0
        state = integrate(replace(state, v_cmd=1.0, w_cmd=w), params.ds)
        seg_left -= params.ds
        pts[i] = (state.x, state.y)
        heads[i] = state.theta

    normals = np.stack([-np.sin(heads), np.cos(heads)], axis=1)
    left = pts + normals * (params.width / 2.0)
    right = pts - normals * (params.width / 2.0)

    corridor = Corridor(
        centerline=pts,
        headings=heads,
        left_wall=left,
        right_wall=right,
        width=params.width,
        obstacles=[],
        goal_arclength=0.0,
    )
    corridor.goal_arclength = max(corridor.total_arclength - 2.0, 1.0)

    obstacles: list[np.ndarray] = []
    if params.obstacle_count > 0:
        s = 4.0
        stations = []
        while s < corridor.total_arclength - 4.0 and len(stations) < params.obstacle_count:
            stations.append(s)
            s += float(rng.uniform(3.0, 6.0))
        for s in stations:
            side = 1 if rng.uniform() < 0.5 else -1
            size = float(
                rng.uniform(params.obstacle_size_range[0],
                            min(params.obstacle_size_range[1], params.max_obstacle_side))
            )
            i = min(int(round(s / params.ds)), n)
            wall_pt = left[i] if side == 1 else right[i]
            tang = np.array([math.cos(heads[i]), math.sin(heads[i])])
            inward = (right[i] - left[i]) if side == 1 else (left[i] - right[i])
            inward = inward / np.linalg.norm(inward)
            quad = np.array(
                [
                    wall_pt - tang * (size / 2.0) - inward * WALL_EMBED,
                    wall_pt + tang * (size / 2.0) - inward * WALL_EMBED,
                    wall_pt + tang * (size / 2.0) + inward * (size - WALL_EMBED),
                    wall_pt - tang * (size / 2.0) + inward * (size - WALL_EMBED),
                ]
            )
            obstacles.append(quad)
    corridor.obstacles = obstacles
    corridor._segments = None
    return corridor


# ---------------------------------------------------------------------------
# 2D geometry.

def _cross(ax, ay, bx, by):
    return ax * by - ay * bx


def segments_intersect(a0, a1, b0, b1) -> bool:
    """Closed segment-segment intersection, collinear overlap included."""
    r = (a1[0] - a0[0], a1[1] - a0[1])
    s = (b1[0] - b0[0], b1[1] - b0[1])
    qp = (b0[0] - a0[0], b0[1] - a0[1])
    denom = _cross(r[0], r[1], s[0], s[1])
    qpxr = _cross(qp[0], qp[1], r[0], r[1])
    if denom == 0.0:
        if qpxr != 0.0:
            return False
        # collinear: compare scalar projections onto r
        rr = r[0] * r[0] + r[1] * r[1]
        if rr == 0.0:
            return qp[0] == 0.0 and qp[1] == 0.0
        t0 = (qp[0] * r[0] + qp[1] * r[1]) / rr
        t1 = t0 + (s[0] * r[0] + s[1] * r[1]) / rr
        return max(min(t0, t1), 0.0) <= min(max(t0, t1), 1.0)
    t = _cross(qp[0], qp[1], s[0], s[1]) / denom
    u = qpxr / denom
    return 0.0 <= t <= 1.0 and 0.0 <= u <= 1.0


def _point_in_quad(pt, quad) -> bool:
    """Point in a convex CCW quad (boundary inclusive)."""
    for k in range(4):
        a = quad[k]
        b = quad[(k + 1) % 4]
        if _cross(b[0] - a[0], b[1] - a[1], pt[0] - a[0], pt[1] - a[1]) < 0.0:
            return False
    return True


def footprint_corners(pose) -> np.ndarray:
    """(4, 2) CCW corners of the 1 m footprint square at (x, y, theta)."""
    x, y, th = pose
    c, s = math.cos(th), math.sin(th)
    h = FOOTPRINT_SIDE / 2.0
    local = np.array([[-h, -h], [h, -h], [h, h], [-h, h]])
    rot = np.array([[c, -s], [s, c]])
    return local @ rot.T + np.array([x, y])


def footprint_collision(corridor: Corridor, pose) -> bool:
    """Footprint edge against every wall/obstacle edge, plus containment
    either way (a square fully inside an obstacle still collides)."""
    quad = footprint_corners(pose)
    segs = corridor.all_segments()
    for k in range(4):
        a0 = quad[k]
        a1 = quad[(k + 1) % 4]
        near = _segments_near(segs, a0, a1)
        for b0, b1 in near:
            if segments_intersect(a0, a1, b0, b1):
                return True
    for obs in corridor.obstacles:
        if _point_in_quad((pose[0], pose[1]), obs):
            return True
        if _point_in_quad(obs[0], quad):
            return True
    return False


def _segments_near(segs: np.ndarray, a0, a1):
    """Cheap AABB prefilter of candidate segments for one footprint edge."""
    lo = np.minimum(a0, a1) - 1e-9
    hi = np.maximum(a0, a1) + 1e-9
    smin = segs.min(axis=1)
    smax = segs.max(axis=1)
    mask = (smin[:, 0] <= hi[0]) & (smax[:, 0] >= lo[0]) & \
           (smin[:, 1] <= hi[1]) & (smax[:, 1] >= lo[1])
    return segs[mask]


def ray_distance(segs: np.ndarray, origin, direction, max_range: float) -> float:
    """Nearest positive ray-segment intersection distance, capped at max_range."""
    if len(segs) == 0:
        return max_range
    p = np.asarray(origin, dtype=np.float64)
    d = np.asarray(direction, dtype=np.float64)
    a = segs[:, 0]
    s = segs[:, 1] - segs[:, 0]
    ap = a - p
    denom = d[0] * s[:, 1] - d[1] * s[:, 0]
    ok = denom != 0.0
    safe = np.where(ok, denom, 1.0)
    t = (ap[:, 0] * s[:, 1] - ap[:, 1] * s[:, 0]) / safe
    u = (ap[:, 0] * d[1] - ap[:, 1] * d[0]) / safe
    hit = ok & (t > 0.0) & (u >= 0.0) & (u <= 1.0)
    if not hit.any():
        return max_range
    return float(min(t[hit].min(), max_range))


def lidar2d(corridor: Corridor, pose, angles_deg=LIDAR_ANGLES_DEG,
            max_range: float = LIDAR_MAX_RANGE) -> tuple[float, ...]:
    """Ray ranges at the given bearings relative to heading; default order
    is (d_f, d_l_at_+30... ) per LIDAR_ANGLES_DEG = (0, +30, -30), returned
    as (d_f, d_r, d_l)."""
    x, y, th = pose
    segs = corridor.all_segments()
    out = {}
    for ang in angles_deg:
        a = th + math.radians(ang)
        out[ang] = ray_distance(segs, (x, y), (math.cos(a), math.sin(a)), max_range)
    return out[0.0], out[-30.0], out[30.0]


def project_arclength(corridor: Corridor, xy) -> float:
    """Arclength of the closest centerline point to xy."""
    p = np.asarray(xy, dtype=np.float64)
    a = corridor.centerline[:-1]
    b = corridor.centerline[1:]
    ab = b - a
    ap = p - a
    denom = (ab * ab).sum(axis=1)
    denom = np.where(denom == 0.0, 1.0, denom)
    t = np.clip((ap * ab).sum(axis=1) / denom, 0.0, 1.0)
    closest = a + ab * t[:, None]
    d2 = ((closest - p) ** 2).sum(axis=1)
    i = int(np.argmin(d2))
    seg_len = math.sqrt(float(denom[i]))
    return float(corridor.cum_arclength[i] + t[i] * seg_len)


# ---------------------------------------------------------------------------
# Environment.

@dataclass
class RewardLedger:
    step_penalty: float = 0.0
    frontal_bonus: float = 0.0
    balance_penalty: float = 0.0
    progress_bonus: float = 0.0
    terminal: float = 0.0

    @property
    def total(self) -> float:
        return (self.step_penalty + self.frontal_bonus + self.balance_penalty
                + self.progress_bonus + self.terminal)


class CorridorEnv:
    """Episode runner around generate_corridor + the unicycle model.

    Actions are (a_v, a_w) in [-1, 1]; v = v_max * (a_v + 1) / 2 (forward
    only by default), w = w_scale * a_w.
    """

    START_ARCLENGTH = 1.0

    def __init__(self, params: CorridorParams = CorridorParams(), v_max: float = 1.0,
                 w_scale: float = 0.5, dt: float = 0.1, step_cap: int = 2000,
                 allow_reverse: bool = False):
        self.params = params
        self.v_max = v_max
        self.w_scale = w_scale
        self.dt = dt
        self.step_cap = step_cap
        self.allow_reverse = allow_reverse
        self.corridor: Corridor | None = None
        self.state: UnicycleState | None = None
        self.done = True
        self.steps = 0
        self._highwater = 0.0
        self._start_arc = 0.0
        self._milestones = 0

    def reset(self, seed: int):
        self.corridor = generate_corridor(seed, self.params)
        i0 = min(int(round(self.START_ARCLENGTH / self.params.ds)),
                 len(self.corridor.centerline) - 1)
        x, y = self.corridor.centerline[i0]
        self.state = UnicycleState(x=float(x), y=float(y),
                                   theta=float(self.corridor.headings[i0]))
        self.done = False
        self.steps = 0
        self._start_arc = project_arclength(self.corridor, (x, y))
        self._highwater = self._start_arc
        self._milestones = 0
        return self.observe()

    def observe(self) -> tuple[float, float, float]:
        pose = (self.state.x, self.state.y, self.state.theta)
        return lidar2d(self.corridor, pose)

    def map_action(self, action) -> tuple[float, float]:
        a_v = min(max(float(action[0]), -1.0), 1.0)
        a_w = min(max(float(action[1]), -1.0), 1.0)
        if self.allow_reverse:
            v = self.v_max * a_v
        else:
            v = self.v_max * (a_v + 1.0) / 2.0
        return v, self.w_scale * a_w

    def step(self, action, dt: float | None = None):
        if self.done:
            raise StepAfterDone("reset the environment before stepping")
        dt = self.dt if dt is None else dt
        v, w = self.map_action(action)
        self.state = integrate(replace(self.state, v_cmd=v, w_cmd=w), dt)
        self.steps += 1
        pose = (self.state.x, self.state.y, self.state.theta)

        collided = footprint_collision(self.corridor, pose)
        d_f, d_r, d_l = lidar2d(self.corridor, pose)

        arc = project_arclength(self.corridor, (pose[0], pose[1]))
        self._highwater = max(self._highwater, arc)
        total_milestones = int((self._highwater - self._start_arc) // MILESTONE_M)
        new_milestones = total_milestones - self._milestones
        self._milestones = total_milestones

        ledger = RewardLedger(
            step_penalty=STEP_PENALTY,
            frontal_bonus=FRONTAL_GAIN * d_f,
            balance_penalty=-BALANCE_GAIN * abs(d_r - d_l),
            progress_bonus=MILESTONE_BONUS * new_milestones,
        )
        outcome = None
        if collided:
            ledger.terminal = COLLISION_REWARD
            self.done = True
            outcome = "collision"
        elif self._highwater >= self.corridor.goal_arclength:
            ledger.terminal = GOAL_REWARD
            self.done = True
            outcome = "goal"
        elif self.steps >= self.step_cap:
            self.done = True
            outcome = "timeout"

        info = {"pose": pose, "arclength": arc, "highwater": self._highwater,
                "outcome": outcome, "command": (v, w)}
        return (d_f, d_r, d_l), ledger, self.done, info


def heuristic_policy(obs) -> tuple[float, float]:
    """Steer toward the more open side; slow and turn hard when blocked."""
    d_f, d_r, d_l = obs
    if d_f < 2.0:
        a_v = -0.5
        a_w = 1.0 if d_l >= d_r else -1.0
    else:
        a_v = 1.0
        a_w = min(max(0.5 * (d_l - d_r), -1.0), 1.0)
    return (a_v, a_w)


@dataclass
class EpisodeTranscript:
    seed: int
    rows: list[dict]
    outcome: str
    total_reward: float

    def to_csv(self, path) -> None:
        fields = ["step", "x", "y", "theta", "a_v", "a_w", "v", "w",
                  "d_f", "d_r", "d_l", "r_step", "r_frontal", "r_balance",
                  "r_progress", "r_terminal", "r_total", "cum_reward", "done"]
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=fields)
            writer.writeheader()
            writer.writerows(self.rows)


class EnvBridge:
    """Serve a CorridorEnv over the pub/sub bridge.

    External agents drive it with velocity commands on /cmd_vel (mapped back
    to the unit action square) and read observations, the reward breakdown,
    and episode status from /rlenv/obs.  /simprive/reset starts the next
    episode.
    """

    OBS_TOPIC = "/rlenv/obs"

    def __init__(self, env: CorridorEnv, endpoint, base_seed: int = 0):
        self.env = env
        self.endpoint = endpoint
        self.base_seed = base_seed
        self.episode = 0
        self._cmd = (0.0, 0.0)
        self._obs = None
        endpoint.subscribe("/cmd_vel")
        endpoint.subscribe("/simprive/reset")
        endpoint.advertise(self.OBS_TOPIC)

    def on_message(self, env_msg) -> None:
        if env_msg.op != "publish":
            return
        if env_msg.topic == "/cmd_vel":
            try:
                v = float(env_msg.msg["linear"]["x"])
                w = float(env_msg.msg["angular"]["z"])
            except (KeyError, TypeError):
                return
            self._cmd = (v, w)
        elif env_msg.topic == "/simprive/reset":
            if isinstance(env_msg.msg, dict) and env_msg.msg.get("data"):
                seed = env_msg.msg.get("seed")
                self.reset(int(seed) if seed is not None else None)

    def reset(self, seed: int | None = None) -> None:
        if seed is None:
            seed = self.base_seed + self.episode
        self.episode += 1
        self._cmd = (0.0, 0.0)
        self._obs = self.env.reset(seed)
        self._publish(self._obs, None, False, {"outcome": None}, seed)

    def action_from_command(self, v: float, w: float) -> tuple[float, float]:
        """Inverse of the action mapping, clipped to the unit square."""
        if self.env.allow_reverse:
            a_v = v / self.env.v_max
        else:
            a_v = 2.0 * v / self.env.v_max - 1.0
        a_w = w / self.env.w_scale
        return (min(max(a_v, -1.0), 1.0), min(max(a_w, -1.0), 1.0))

    def step(self) -> bool:
        """Advance one env step from the latest command; False when done or
        not yet reset."""
        if self.env.done or self.env.corridor is None:
            return False
        obs, ledger, done, info = self.env.step(self.action_from_command(*self._cmd))
        self._obs = obs
        self._publish(obs, ledger, done, info, None)
        return not done

    def _publish(self, obs, ledger: RewardLedger | None, done, info, seed) -> None:
        msg = {
            "d_f": obs[0], "d_r": obs[1], "d_l": obs[2],
            "step": self.env.steps,
            "episode": self.episode,
            "done": bool(done),
            "outcome": info.get("outcome"),
        }
        if seed is not None:
            msg["seed"] = seed
        if ledger is not None:
            msg["reward"] = ledger.total
            msg["reward_components"] = {
                "step": ledger.step_penalty,
                "frontal": ledger.frontal_bonus,
                "balance": ledger.balance_penalty,
                "progress": ledger.progress_bonus,
                "terminal": ledger.terminal,
            }
        self.endpoint.publish(self.OBS_TOPIC, msg)


def run_episode(env: CorridorEnv, policy, seed: int) -> EpisodeTranscript:
    """Roll one episode; deterministic for a deterministic policy."""
    obs = env.reset(seed)
    rows = []
    cum = 0.0
    outcome = "timeout"
    done = False
    while not done:
        action = policy(obs)
        obs, ledger, done, info = env.step(action)
        cum += ledger.total
        v, w = info["command"]
        pose = info["pose"]
        rows.append({
            "step": env.steps, "x": repr(pose[0]), "y": repr(pose[1]),
            "theta": repr(pose[2]),
            "a_v": repr(float(action[0])), "a_w": repr(float(action[1])),
            "v": repr(v), "w": repr(w),
            "d_f": repr(obs[0]), "d_r": repr(obs[1]), "d_l": repr(obs[2]),
            "r_step": repr(ledger.step_penalty),
            "r_frontal": repr(ledger.frontal_bonus),
            "r_balance": repr(ledger.balance_penalty),
            "r_progress": repr(ledger.progress_bonus),
            "r_terminal": repr(ledger.terminal),
            "r_total": repr(ledger.total),
            "cum_reward": repr(cum),
            "done": int(done),
        })
        if info["outcome"]:
            outcome = info["outcome"]
    return EpisodeTranscript(seed=seed, rows=rows, outcome=outcome, total_reward=cum)
