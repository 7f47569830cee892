/**
 * Binary wire protocol (little-endian), the only contract shared with the
 * simulator server:
 *
 *   u8  msg_type
 *   u32 payload_length
 *   payload
 *
 *   0x01 HEAD_POSE    f64 stamp, 7 x f32 pose [px py pz qw qx qy qz]
 *   0x02 CLOUD_UPDATE f64 scene_time, u32 count, count x (3 f32, 3 u8, pad)
 *   0x03 FRAME        f64 pose_time, f64 scene_time, u16 w, u16 h, PNG bytes
 *   0x04 METRICS      UTF-8 JSON object
 *   0x05 PROPRIO      f64 stamp, 23 x f32
 *
 * Decoded messages that carry server-originated payloads (cloud points,
 * PNG, metrics JSON) keep the raw bytes, so re-encoding any decoded
 * message reproduces the input byte for byte regardless of JSON
 * formatting or float printing choices on the other side.
 */

export const MSG_HEAD_POSE = 0x01;
export const MSG_CLOUD_UPDATE = 0x02;
export const MSG_FRAME = 0x03;
export const MSG_METRICS = 0x04;
export const MSG_PROPRIO = 0x05;

export const HEADER_BYTES = 5;
export const POINT_STRIDE = 16; // 3 f32 position, 3 u8 color, 1 pad
export const PROPRIO_DIM = 23;

export class ProtocolError extends Error {}

export interface HeadPoseMsg {
  kind: "head_pose";
  stamp: number;
  /** 7 floats, [px, py, pz, qw, qx, qy, qz] */
  pose: Float32Array;
}

export interface CloudUpdateMsg {
  kind: "cloud_update";
  sceneTime: number;
  count: number;
  /** count * 16 bytes, interleaved; upload directly as a GL buffer */
  points: Uint8Array;
}

export interface FrameMsg {
  kind: "frame";
  poseTime: number;
  sceneTime: number;
  width: number;
  height: number;
  png: Uint8Array;
}

export interface MetricsMsg {
  kind: "metrics";
  record: Record<string, unknown>;
  raw: Uint8Array;
}

export interface ProprioMsg {
  kind: "proprio";
  stamp: number;
  values: Float32Array;
}

export type Message = HeadPoseMsg | CloudUpdateMsg | FrameMsg | MetricsMsg | ProprioMsg;

function asBytes(data: ArrayBuffer | Uint8Array): Uint8Array {
  return data instanceof Uint8Array ? data : new Uint8Array(data);
}

function view(b: Uint8Array): DataView {
  return new DataView(b.buffer, b.byteOffset, b.byteLength);
}

function frame(msgType: number, payload: Uint8Array): Uint8Array {
  const out = new Uint8Array(HEADER_BYTES + payload.length);
  const dv = view(out);
  dv.setUint8(0, msgType);
  dv.setUint32(1, payload.length, true);
  out.set(payload, HEADER_BYTES);
  return out;
}

export function decodeMessage(data: ArrayBuffer | Uint8Array): Message {
  const b = asBytes(data);
  if (b.length < HEADER_BYTES) {
    throw new ProtocolError(`short frame: ${b.length} bytes`);
  }
  const dv = view(b);
  const msgType = dv.getUint8(0);
  const length = dv.getUint32(1, true);
  const payload = b.subarray(HEADER_BYTES);
  if (payload.length !== length) {
    throw new ProtocolError(`length mismatch: header says ${length}, have ${payload.length}`);
  }
  const pv = view(payload);

  switch (msgType) {
    case MSG_HEAD_POSE: {
      if (length !== 8 + 7 * 4) {
        throw new ProtocolError(`HEAD_POSE payload must be 36 bytes, got ${length}`);
      }
      const pose = new Float32Array(7);
      for (let i = 0; i < 7; i++) pose[i] = pv.getFloat32(8 + 4 * i, true);
      return { kind: "head_pose", stamp: pv.getFloat64(0, true), pose };
    }
    case MSG_CLOUD_UPDATE: {
      if (length < 12) throw new ProtocolError("CLOUD_UPDATE payload truncated");
      const sceneTime = pv.getFloat64(0, true);
      const count = pv.getUint32(8, true);
      const points = payload.subarray(12);
      if (points.length !== count * POINT_STRIDE) {
        throw new ProtocolError(
          `CLOUD_UPDATE expects ${count * POINT_STRIDE} point bytes, got ${points.length}`,
        );
      }
      return { kind: "cloud_update", sceneTime, count, points };
    }
    case MSG_FRAME: {
      if (length < 20) throw new ProtocolError("FRAME payload truncated");
      return {
        kind: "frame",
        poseTime: pv.getFloat64(0, true),
        sceneTime: pv.getFloat64(8, true),
        width: pv.getUint16(16, true),
        height: pv.getUint16(18, true),
        png: payload.subarray(20),
      };
    }
    case MSG_METRICS: {
      let record: Record<string, unknown>;
      try {
        record = JSON.parse(new TextDecoder("utf-8", { fatal: true }).decode(payload));
      } catch (e) {
        throw new ProtocolError(`METRICS payload is not valid JSON: ${e}`);
      }
      return { kind: "metrics", record, raw: payload };
    }
    case MSG_PROPRIO: {
      if (length !== 8 + PROPRIO_DIM * 4) {
        throw new ProtocolError(`PROPRIO payload must be 100 bytes, got ${length}`);
      }
      const values = new Float32Array(PROPRIO_DIM);
      for (let i = 0; i < PROPRIO_DIM; i++) values[i] = pv.getFloat32(8 + 4 * i, true);
      return { kind: "proprio", stamp: pv.getFloat64(0, true), values };
    }
    default:
      throw new ProtocolError(
        `unknown message type 0x${msgType.toString(16).toUpperCase().padStart(2, "0")}`,
      );
  }
}

export function encodeHeadPose(stamp: number, pose: ArrayLike<number>): Uint8Array {
  if (pose.length !== 7) throw new ProtocolError(`pose must have 7 floats, got ${pose.length}`);
  const payload = new Uint8Array(8 + 7 * 4);
  const dv = view(payload);
  dv.setFloat64(0, stamp, true);
  for (let i = 0; i < 7; i++) dv.setFloat32(8 + 4 * i, pose[i], true);
  return frame(MSG_HEAD_POSE, payload);
}

export function encodeCloudUpdate(sceneTime: number, count: number, points: Uint8Array): Uint8Array {
  if (points.length !== count * POINT_STRIDE) {
    throw new ProtocolError(`need ${count * POINT_STRIDE} point bytes, got ${points.length}`);
  }
  const payload = new Uint8Array(12 + points.length);
  const dv = view(payload);
  dv.setFloat64(0, sceneTime, true);
  dv.setUint32(8, count, true);
  payload.set(points, 12);
  return frame(MSG_CLOUD_UPDATE, payload);
}

export function encodeFrame(
  poseTime: number,
  sceneTime: number,
  width: number,
  height: number,
  png: Uint8Array,
): Uint8Array {
  const payload = new Uint8Array(20 + png.length);
  const dv = view(payload);
  dv.setFloat64(0, poseTime, true);
  dv.setFloat64(8, sceneTime, true);
  dv.setUint16(16, width, true);
  dv.setUint16(18, height, true);
  payload.set(png, 20);
  return frame(MSG_FRAME, payload);
}

export function encodeMetricsRaw(raw: Uint8Array): Uint8Array {
  return frame(MSG_METRICS, raw);
}

export function encodeProprio(stamp: number, values: ArrayLike<number>): Uint8Array {
  if (values.length !== PROPRIO_DIM) {
    throw new ProtocolError(`proprio must have ${PROPRIO_DIM} floats, got ${values.length}`);
  }
  const payload = new Uint8Array(8 + PROPRIO_DIM * 4);
  const dv = view(payload);
  dv.setFloat64(0, stamp, true);
  for (let i = 0; i < PROPRIO_DIM; i++) dv.setFloat32(8 + 4 * i, values[i], true);
  return frame(MSG_PROPRIO, payload);
}

/** Re-encode any decoded message; byte-exact with respect to decodeMessage. */
export function encodeMessage(msg: Message): Uint8Array {
  switch (msg.kind) {
    case "head_pose":
      return encodeHeadPose(msg.stamp, msg.pose);
    case "cloud_update":
      return encodeCloudUpdate(msg.sceneTime, msg.count, msg.points);
    case "frame":
      return encodeFrame(msg.poseTime, msg.sceneTime, msg.width, msg.height, msg.png);
    case "metrics":
      return encodeMetricsRaw(msg.raw);
    case "proprio":
      return encodeProprio(msg.stamp, msg.values);
  }
}

/** Position of point i as [x, y, z], reading the interleaved record. */
export function cloudPosition(msg: CloudUpdateMsg, i: number): [number, number, number] {
  const dv = view(msg.points);
  const off = i * POINT_STRIDE;
  return [dv.getFloat32(off, true), dv.getFloat32(off + 4, true), dv.getFloat32(off + 8, true)];
}

/** Color of point i as [r, g, b] in 0..255. */
export function cloudColor(msg: CloudUpdateMsg, i: number): [number, number, number] {
  const off = i * POINT_STRIDE + 12;
  return [msg.points[off], msg.points[off + 1], msg.points[off + 2]];
}
