"""Cross-implementation protocol fixtures: the committed golden frames must
decode to their recorded values and re-encode byte-identically.  When the
client SDK has produced its own frame file, it must match ours byte for
byte (same envelope list, canonical encoders on both sides)."""

import json
import struct
from pathlib import Path

import pytest

from viloop.bridge import Envelope, frame_decode, frame_encode

GOLDEN_DIR = Path(__file__).resolve().parent.parent / "golden"


def split_frames(blob: bytes):
    frames = []
    while blob:
        (n,) = struct.unpack(">I", blob[:4])
        frames.append(blob[: 4 + n])
        blob = blob[4 + n:]
    return frames


def load_expected(name: str):
    return json.loads((GOLDEN_DIR / name).read_text(encoding="utf-8"))


def test_primary_golden_decodes_to_expected_values():
    blob = (GOLDEN_DIR / "primary_frames.bin").read_bytes()
    expected = load_expected("primary_frames.json")
    frames = split_frames(blob)
    assert len(frames) == len(expected)
    for frame, exp in zip(frames, expected):
        env = frame_decode(frame)
        assert env == Envelope(exp["op"], exp["topic"], exp["seq"],
                               exp["stamp"], exp["msg"])


def test_primary_golden_reencodes_byte_identical():
    blob = (GOLDEN_DIR / "primary_frames.bin").read_bytes()
    expected = load_expected("primary_frames.json")
    rebuilt = b"".join(
        frame_encode(Envelope(e["op"], e["topic"], e["seq"], e["stamp"], e["msg"]))
        for e in expected
    )
    assert rebuilt == blob


def test_sdk_golden_frames_cross_decode():
    sdk_bin = GOLDEN_DIR / "sdk_frames.bin"
    if not sdk_bin.exists():
        pytest.skip("SDK golden frames not generated yet")
    blob = sdk_bin.read_bytes()
    expected = load_expected("primary_frames.json")
    frames = split_frames(blob)
    assert len(frames) == len(expected)
    for frame, exp in zip(frames, expected):
        env = frame_decode(frame)
        assert env == Envelope(exp["op"], exp["topic"], exp["seq"],
                               exp["stamp"], exp["msg"])
    # both encoders are canonical: identical bytes end to end
    assert blob == (GOLDEN_DIR / "primary_frames.bin").read_bytes()
