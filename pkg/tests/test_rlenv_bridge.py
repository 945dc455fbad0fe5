import threading
import time

import pytest

from viloop.bridge import BridgeClient, BridgeServer
from viloop.orchestrator import EventQueue
from viloop.rlenv import CorridorEnv, CorridorParams, EnvBridge


@pytest.fixture
def served_env():
    server = BridgeServer(port=0, ping_interval=1.0, liveness_timeout=30.0)
    queue = EventQueue(capacity=256)
    endpoint = server.attach_local(lambda m: queue.put("msg", m), name="rlenv")
    env = CorridorEnv(CorridorParams(width=3.0, length=10.0, obstacle_count=0,
                                     turn_scale=0.0))
    bridge = EnvBridge(env, endpoint, base_seed=5)
    port = server.start()

    stop = threading.Event()

    def loop():
        while not stop.is_set():
            item = queue.get(timeout=0.01)
            while item is not None:
                bridge.on_message(item[1])
                item = queue.get(timeout=0)
            if env.corridor is not None and not env.done:
                bridge.step()

    thread = threading.Thread(target=loop, daemon=True)
    thread.start()
    yield port, env
    stop.set()
    thread.join(timeout=2)
    server.stop()


def wait_until(predicate, timeout=10.0):
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        if predicate():
            return True
        time.sleep(0.01)
    return False


def test_external_agent_drives_env_to_goal(served_env):
    port, env = served_env
    got = []
    client = BridgeClient(port=port).connect()
    client.subscribe("/rlenv/obs", lambda e: got.append(e.msg))
    time.sleep(0.05)
    client.publish("/simprive/reset", {"data": True, "seed": 9})
    assert wait_until(lambda: got), "no observation after reset"
    assert got[0]["seed"] == 9
    assert got[0]["step"] == 0
    assert set(got[0]) >= {"d_f", "d_r", "d_l", "done", "episode"}

    # drive straight at full speed down the obstacle-free corridor
    client.publish("/cmd_vel", {"linear": {"x": 1.0}, "angular": {"z": 0.0}})
    assert wait_until(lambda: got and got[-1]["done"], timeout=30.0)
    last = got[-1]
    assert last["outcome"] == "goal"
    assert last["reward_components"]["terminal"] == 100.0
    steps = [m["step"] for m in got[1:]]
    assert steps == sorted(steps)
    rewarded = [m for m in got if "reward" in m]
    assert all(
        abs(m["reward"] - sum(m["reward_components"].values())) < 1e-12
        for m in rewarded
    )
    client.close()


def test_action_command_round_trip():
    env = CorridorEnv(CorridorParams(obstacle_count=0, turn_scale=0.0))

    class _Sink:
        def subscribe(self, t):
            pass

        def advertise(self, t):
            pass

        def publish(self, t, m):
            pass

    bridge = EnvBridge(env, _Sink())
    for cmd in [(0.0, 0.0), (1.0, 0.5), (0.25, -0.5), (2.0, 3.0)]:
        action = bridge.action_from_command(*cmd)
        v, w = env.map_action(action)
        assert v == pytest.approx(min(max(cmd[0], 0.0), 1.0))
        assert w == pytest.approx(min(max(cmd[1], -0.5), 0.5))
