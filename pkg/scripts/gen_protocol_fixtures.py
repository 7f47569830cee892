#!/usr/bin/env python3
"""Generate the golden wire-protocol fixtures shared with the web cockpit.

Writes fixtures/protocol/*.bin plus manifest.json (decoded field values,
for tests on the other side of the wire).  The checked-in copies are
compared byte for byte by the test suite, so regenerate only when the
wire format itself changes.

Fixture poses use quaternions that are exact in float32 and exactly unit
in float64, so encode/decode round trips are byte-identical on both ends.
"""

import argparse
import hashlib
import io
import json
import os
import sys

import numpy as np
from PIL import Image

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from teleopsim.geometry import Pose
from teleopsim.protocol import (
    encode_cloud_update,
    encode_frame,
    encode_head_pose,
    encode_metrics,
    encode_proprio,
)

CLOUD_POSITIONS = [
    [0.5, 0.25, 2.0],
    [-1.0, 0.0, 3.5],
    [0.125, -0.375, 1.75],
    [2.5, 1.5, 0.5],
]
CLOUD_COLORS = [[255, 0, 0], [0, 255, 0], [0, 0, 255], [128, 128, 128]]

METRICS_RECORD = {
    "display_time": 0.5,
    "pose_age": 0.0,
    "scene_age": 0.125,
    "coverage": 0.75,
    "mode": "decoupled",
}

PROPRIO_STAMP = 0.5
PROPRIO_VALUES = [i * 0.125 for i in range(23)]


def frame_png() -> bytes:
    rgb = np.array(
        [
            [[255, 0, 0], [0, 255, 0], [0, 0, 255], [255, 255, 255]],
            [[0, 0, 0], [64, 64, 64], [128, 128, 128], [192, 192, 192]],
        ],
        dtype=np.uint8,
    )
    buf = io.BytesIO()
    Image.fromarray(rgb).save(buf, "PNG")
    return buf.getvalue()


def build_fixtures() -> tuple[dict, dict]:
    pose = Pose((0.25, -0.5, 1.5), (0.5, 0.5, 0.5, 0.5))
    png = frame_png()
    blobs = {
        "head_pose.bin": encode_head_pose(2.5, pose),
        "cloud_update.bin": encode_cloud_update(
            1.25, np.array(CLOUD_POSITIONS), np.array(CLOUD_COLORS, dtype=np.uint8)
        ),
        "frame.bin": encode_frame(0.5, 0.25, 4, 2, png),
        "metrics.bin": encode_metrics(METRICS_RECORD),
        "proprio.bin": encode_proprio(PROPRIO_STAMP, np.array(PROPRIO_VALUES)),
    }
    manifest = {
        "head_pose": {
            "type": "HeadPoseMsg",
            "stamp": 2.5,
            "position": [0.25, -0.5, 1.5],
            "orientation": [0.5, 0.5, 0.5, 0.5],
        },
        "cloud_update": {
            "type": "CloudUpdateMsg",
            "scene_time": 1.25,
            "count": len(CLOUD_POSITIONS),
            "positions": CLOUD_POSITIONS,
            "colors": CLOUD_COLORS,
        },
        "frame": {
            "type": "FrameMsg",
            "pose_time": 0.5,
            "scene_time": 0.25,
            "width": 4,
            "height": 2,
            "png_length": len(png),
            "png_sha256": hashlib.sha256(png).hexdigest(),
        },
        "metrics": {"type": "MetricsMsg", "record": METRICS_RECORD},
        "proprio": {"type": "ProprioMsg", "stamp": PROPRIO_STAMP, "values": PROPRIO_VALUES},
    }
    return blobs, manifest


def main(argv=None) -> int:
    default_out = os.path.join(os.path.dirname(__file__), "..", "fixtures", "protocol")
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default=default_out, help="output directory")
    args = ap.parse_args(argv)

    os.makedirs(args.out, exist_ok=True)
    blobs, manifest = build_fixtures()
    for name, data in blobs.items():
        with open(os.path.join(args.out, name), "wb") as f:
            f.write(data)
    with open(os.path.join(args.out, "manifest.json"), "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")
    print(f"wrote {len(blobs) + 1} files to {os.path.abspath(args.out)}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
