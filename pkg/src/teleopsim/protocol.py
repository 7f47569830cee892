"""Binary wire protocol between the simulator server and the web cockpit.

Frame layout (all little-endian):

    u8  msg_type
    u32 payload_length
    payload_length bytes of payload

Message types and payloads:

    0x01 HEAD_POSE    f64 stamp, 7 x f32 pose [px py pz qw qx qy qz]
    0x02 CLOUD_UPDATE f64 scene_time, u32 count, count x (3 f32, 3 u8, 1 pad)
    0x03 FRAME        f64 pose_time, f64 scene_time, u16 width, u16 height, PNG bytes
    0x04 METRICS      UTF-8 JSON object (one metrics record)
    0x05 PROPRIO      f64 stamp, 23 x f32

The pose serialization order [px, py, pz, qw, qx, qy, qz] is the same one
used everywhere else in the package.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

from .cloud import POINT_DTYPE, pack_points, unpack_points
from .geometry import Pose

MSG_HEAD_POSE = 0x01
MSG_CLOUD_UPDATE = 0x02
MSG_FRAME = 0x03
MSG_METRICS = 0x04
MSG_PROPRIO = 0x05

_HEADER = struct.Struct("<BI")  # u8 msg_type, u32 payload_length
_HEAD_POSE = struct.Struct("<d7f")  # f64 stamp, 7 f32
_CLOUD_HEAD = struct.Struct("<dI")  # f64 scene_time, u32 count
_FRAME_HEAD = struct.Struct("<ddHH")  # f64 pose_time, f64 scene_time, u16 w, u16 h
_PROPRIO = struct.Struct("<d23f")  # f64 stamp, 23 f32

PROPRIO_DIM = 23


class ProtocolError(ValueError):
    pass


@dataclass(frozen=True)
class HeadPoseMsg:
    stamp: float
    pose: Pose


@dataclass(frozen=True)
class CloudUpdateMsg:
    scene_time: float
    positions: np.ndarray  # (N, 3) float
    colors: np.ndarray  # (N, 3) uint8


@dataclass(frozen=True)
class FrameMsg:
    pose_time: float
    scene_time: float
    width: int
    height: int
    png: bytes


@dataclass(frozen=True)
class MetricsMsg:
    record: dict


@dataclass(frozen=True)
class ProprioMsg:
    stamp: float
    values: np.ndarray  # (23,) float


def _frame(msg_type: int, payload: bytes) -> bytes:
    return _HEADER.pack(msg_type, len(payload)) + payload


def encode_head_pose(stamp: float, pose: Pose) -> bytes:
    return _frame(MSG_HEAD_POSE, _HEAD_POSE.pack(stamp, *pose.to_array().astype(np.float32)))


def encode_cloud_update(scene_time: float, positions: np.ndarray, colors: np.ndarray) -> bytes:
    payload = _CLOUD_HEAD.pack(scene_time, len(positions)) + pack_points(
        np.asarray(positions), np.asarray(colors)
    )
    return _frame(MSG_CLOUD_UPDATE, payload)


def encode_frame(pose_time: float, scene_time: float, width: int, height: int, png: bytes) -> bytes:
    return _frame(MSG_FRAME, _FRAME_HEAD.pack(pose_time, scene_time, width, height) + png)


def encode_metrics(record: dict) -> bytes:
    return _frame(MSG_METRICS, json.dumps(record, sort_keys=True).encode("utf-8"))


def encode_proprio(stamp: float, values: np.ndarray) -> bytes:
    values = np.asarray(values, dtype=np.float64).reshape(PROPRIO_DIM)
    return _frame(MSG_PROPRIO, _PROPRIO.pack(stamp, *values.astype(np.float32)))


def decode_message(buf: bytes):
    """Decode one framed message; raises ProtocolError on malformed input."""
    if len(buf) < _HEADER.size:
        raise ProtocolError(f"short frame: {len(buf)} bytes")
    msg_type, length = _HEADER.unpack_from(buf, 0)
    payload = buf[_HEADER.size:]
    if len(payload) != length:
        raise ProtocolError(f"length mismatch: header says {length}, have {len(payload)}")

    if msg_type == MSG_HEAD_POSE:
        if length != _HEAD_POSE.size:
            raise ProtocolError(f"HEAD_POSE payload must be {_HEAD_POSE.size} bytes, got {length}")
        vals = _HEAD_POSE.unpack(payload)
        return HeadPoseMsg(stamp=vals[0], pose=Pose.from_array(np.array(vals[1:], dtype=np.float64)))

    if msg_type == MSG_CLOUD_UPDATE:
        if length < _CLOUD_HEAD.size:
            raise ProtocolError("CLOUD_UPDATE payload truncated")
        scene_time, count = _CLOUD_HEAD.unpack_from(payload, 0)
        body = payload[_CLOUD_HEAD.size:]
        if len(body) != count * POINT_DTYPE.itemsize:
            raise ProtocolError(
                f"CLOUD_UPDATE expects {count * POINT_DTYPE.itemsize} point bytes, got {len(body)}"
            )
        pos, col = unpack_points(body, count)
        return CloudUpdateMsg(scene_time=scene_time, positions=pos, colors=col)

    if msg_type == MSG_FRAME:
        if length < _FRAME_HEAD.size:
            raise ProtocolError("FRAME payload truncated")
        pose_time, scene_time, width, height = _FRAME_HEAD.unpack_from(payload, 0)
        return FrameMsg(
            pose_time=pose_time,
            scene_time=scene_time,
            width=width,
            height=height,
            png=payload[_FRAME_HEAD.size:],
        )

    if msg_type == MSG_METRICS:
        try:
            record = json.loads(payload.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise ProtocolError(f"METRICS payload is not valid JSON: {e}") from e
        return MetricsMsg(record=record)

    if msg_type == MSG_PROPRIO:
        if length != _PROPRIO.size:
            raise ProtocolError(f"PROPRIO payload must be {_PROPRIO.size} bytes, got {length}")
        vals = _PROPRIO.unpack(payload)
        return ProprioMsg(stamp=vals[0], values=np.array(vals[1:], dtype=np.float64))

    raise ProtocolError(f"unknown message type 0x{msg_type:02X}")
