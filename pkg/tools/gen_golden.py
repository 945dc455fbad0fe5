#!/usr/bin/env python3
"""Regenerate the golden protocol frames shared with the client SDK.

Writes golden/primary_frames.bin (concatenated wire frames) and
golden/primary_frames.json (their decoded values).  The SDK produces the
same envelope list with its own encoder; both sides must decode each
other's bytes identically.
"""

import json
from pathlib import Path

from viloop.bridge import Envelope, frame_encode

# Note: values avoid integral-valued floats (0.0, 10.0, ...) on purpose -
# Python renders them "0.0" while JavaScript renders "0", which would break
# byte-level equality of the two canonical encoders.  Integers are fine.
GOLDEN = [
    Envelope("advertise", "/simprive/pose_digital", 0, 0, None),
    Envelope("subscribe", "/odom", 0, 0.125, None),
    Envelope("publish", "/simprive/reset", 1, 1.5, {"data": True, "seed": 7}),
    Envelope("publish", "/odom", 42, 2.05, {
        "position": {"x": 0.1, "y": -2.25, "z": 0},
        "orientation": {"x": 0, "y": 0, "z": 0.7071067811865476,
                        "w": 0.7071067811865476},
        "timestep": 42,
        "stamp": 2.05,
    }),
    Envelope("publish", "/simprive/collision", 3, 2.1, {"data": False, "other_id": None}),
    Envelope("publish", "/simprive/lidar", 4, 2.15, {
        "h_fov": 360, "v_fov": 30, "h_res": 120, "v_res": 30,
        "max_range": 10.25, "rows": 2, "cols": 3,
        "ranges": [1.5, 11.25, 3.25, 10.25, 2.5, 0.5],
    }),
    Envelope("publish", "/cmd_vel", 5, 3.125, {
        "linear": {"x": 0.5}, "angular": {"z": -0.25},
    }),
    Envelope("status", "/status", 6, 4.5, {"event": "ping"}),
    Envelope("publish", "/notes/λ", 7, 5.5, {"text": "héllo ✓", "n": 35184372088832}),
    Envelope("publish", "/simprive/pause", 8, 6.125, {"data": True}),
    Envelope("publish", "/simprive/resume", 9, 6.25, {"data": True}),
]


def main():
    out = Path(__file__).resolve().parent.parent / "golden"
    out.mkdir(exist_ok=True)
    blob = b"".join(frame_encode(e) for e in GOLDEN)
    (out / "primary_frames.bin").write_bytes(blob)
    decoded = [
        {"op": e.op, "topic": e.topic, "seq": e.seq, "stamp": e.stamp, "msg": e.msg}
        for e in GOLDEN
    ]
    (out / "primary_frames.json").write_text(
        json.dumps(decoded, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
    print(f"wrote {len(GOLDEN)} frames ({len(blob)} bytes) to {out}")


if __name__ == "__main__":
    main()
