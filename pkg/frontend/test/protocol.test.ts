import { createHash } from "node:crypto";
import { readFileSync } from "node:fs";
import { describe, expect, it } from "vitest";

import {
  cloudColor,
  cloudPosition,
  decodeMessage,
  encodeCloudUpdate,
  encodeHeadPose,
  encodeMessage,
  encodeProprio,
  HEADER_BYTES,
  ProtocolError,
  type CloudUpdateMsg,
  type FrameMsg,
  type HeadPoseMsg,
  type MetricsMsg,
  type ProprioMsg,
} from "../src/protocol.js";

const FIXTURE_DIR = new URL("../../fixtures/protocol/", import.meta.url);

function fixture(name: string): Uint8Array {
  return new Uint8Array(readFileSync(new URL(name, FIXTURE_DIR)));
}

const manifest = JSON.parse(readFileSync(new URL("manifest.json", FIXTURE_DIR), "utf-8"));

function hex(b: Uint8Array): string {
  return Buffer.from(b).toString("hex");
}

function rawFrame(msgType: number, payload: Uint8Array): Uint8Array {
  const out = new Uint8Array(HEADER_BYTES + payload.length);
  const dv = new DataView(out.buffer);
  dv.setUint8(0, msgType);
  dv.setUint32(1, payload.length, true);
  out.set(payload, HEADER_BYTES);
  return out;
}

const FIXTURE_KINDS: Record<string, string> = {
  head_pose: "HeadPoseMsg",
  cloud_update: "CloudUpdateMsg",
  frame: "FrameMsg",
  metrics: "MetricsMsg",
  proprio: "ProprioMsg",
};

describe("shared fixtures", () => {
  it.each(Object.keys(FIXTURE_KINDS))("%s decodes and re-encodes byte-exact", (name) => {
    const bytes = fixture(`${name}.bin`);
    const msg = decodeMessage(bytes);
    expect(manifest[name].type).toBe(FIXTURE_KINDS[name]);
    expect(hex(encodeMessage(msg))).toBe(hex(bytes));
  });

  it("head_pose carries the manifest values", () => {
    const msg = decodeMessage(fixture("head_pose.bin")) as HeadPoseMsg;
    expect(msg.kind).toBe("head_pose");
    expect(msg.stamp).toBe(manifest.head_pose.stamp);
    // dyadic fixture values are exact in f32
    expect(Array.from(msg.pose)).toEqual([
      ...manifest.head_pose.position,
      ...manifest.head_pose.orientation,
    ]);
  });

  it("cloud_update carries the manifest points", () => {
    const msg = decodeMessage(fixture("cloud_update.bin")) as CloudUpdateMsg;
    expect(msg.sceneTime).toBe(manifest.cloud_update.scene_time);
    expect(msg.count).toBe(manifest.cloud_update.count);
    expect(msg.points.length).toBe(msg.count * 16);
    for (let i = 0; i < msg.count; i++) {
      expect(cloudPosition(msg, i)).toEqual(manifest.cloud_update.positions[i]);
      expect(cloudColor(msg, i)).toEqual(manifest.cloud_update.colors[i]);
    }
  });

  it("frame carries the manifest PNG", () => {
    const msg = decodeMessage(fixture("frame.bin")) as FrameMsg;
    expect(msg.poseTime).toBe(manifest.frame.pose_time);
    expect(msg.sceneTime).toBe(manifest.frame.scene_time);
    expect(msg.width).toBe(manifest.frame.width);
    expect(msg.height).toBe(manifest.frame.height);
    expect(msg.png.length).toBe(manifest.frame.png_length);
    expect(createHash("sha256").update(msg.png).digest("hex")).toBe(manifest.frame.png_sha256);
    expect(hex(msg.png.subarray(0, 4))).toBe("89504e47"); // PNG signature
  });

  it("metrics parses to the manifest record", () => {
    const msg = decodeMessage(fixture("metrics.bin")) as MetricsMsg;
    expect(msg.record).toEqual(manifest.metrics.record);
  });

  it("proprio carries 23 exact values", () => {
    const msg = decodeMessage(fixture("proprio.bin")) as ProprioMsg;
    expect(msg.stamp).toBe(manifest.proprio.stamp);
    expect(msg.values.length).toBe(23);
    expect(Array.from(msg.values)).toEqual(manifest.proprio.values);
  });
});

describe("golden byte layouts", () => {
  it("HEAD_POSE encodes to the documented layout", () => {
    const bytes = encodeHeadPose(1.5, new Float32Array([1, 2, 3, 1, 0, 0, 0]));
    expect(hex(bytes)).toBe(
      "0124000000" + // type 0x01, payload length 36
        "000000000000f83f" + // f64 stamp 1.5
        "0000803f" + // px = 1.0
        "00000040" + // py = 2.0
        "00004040" + // pz = 3.0
        "0000803f" + // qw = 1.0
        "000000000000000000000000", // qx qy qz = 0
    );
  });

  it("CLOUD_UPDATE encodes to the documented layout", () => {
    const point = new Uint8Array(16);
    const dv = new DataView(point.buffer);
    dv.setFloat32(0, 1.5, true);
    dv.setFloat32(4, -2.0, true);
    dv.setFloat32(8, 0.5, true);
    point[12] = 1;
    point[13] = 2;
    point[14] = 3;
    const bytes = encodeCloudUpdate(0.25, 1, point);
    expect(hex(bytes)).toBe(
      "021c000000" + // type 0x02, payload length 28
        "000000000000d03f" + // f64 scene_time 0.25
        "01000000" + // count 1
        "0000c03f" + // x = 1.5
        "000000c0" + // y = -2.0
        "0000003f" + // z = 0.5
        "01020300", // rgb (1, 2, 3) + pad
    );
  });
});

describe("decode robustness", () => {
  it("accepts ArrayBuffer, Uint8Array, and offset views", () => {
    const bytes = fixture("proprio.bin");
    const fromBuffer = decodeMessage(bytes.slice().buffer) as ProprioMsg;
    expect(fromBuffer.stamp).toBe(0.5);
    const padded = new Uint8Array(bytes.length + 7);
    padded.set(bytes, 3);
    const fromView = decodeMessage(padded.subarray(3, 3 + bytes.length)) as ProprioMsg;
    expect(Array.from(fromView.values)).toEqual(Array.from(fromBuffer.values));
  });

  it("flags frames shorter than the header", () => {
    const short = new Uint8Array([1, 2, 3]);
    expect(() => decodeMessage(short)).toThrowError(ProtocolError);
    expect(() => decodeMessage(short)).toThrowError("short frame: 3 bytes");
  });

  it("flags an empty METRICS payload as not JSON", () => {
    // structurally a valid frame, but "" does not parse
    expect(() => decodeMessage(rawFrame(0x04, new Uint8Array(0)))).toThrowError("not valid JSON");
  });

  it("flags header and payload length disagreement", () => {
    const bad = rawFrame(0x04, new Uint8Array(10)).subarray(0, HEADER_BYTES + 2);
    expect(() => decodeMessage(bad)).toThrowError("length mismatch: header says 10, have 2");
  });

  it("flags a wrong HEAD_POSE payload size", () => {
    expect(() => decodeMessage(rawFrame(0x01, new Uint8Array(35)))).toThrowError(
      "HEAD_POSE payload must be 36 bytes, got 35",
    );
  });

  it("flags a truncated CLOUD_UPDATE header", () => {
    expect(() => decodeMessage(rawFrame(0x02, new Uint8Array(8)))).toThrowError(
      "CLOUD_UPDATE payload truncated",
    );
  });

  it("flags a point byte count that contradicts the declared count", () => {
    const payload = new Uint8Array(12 + 16);
    new DataView(payload.buffer).setUint32(8, 2, true);
    expect(() => decodeMessage(rawFrame(0x02, payload))).toThrowError(
      "CLOUD_UPDATE expects 32 point bytes, got 16",
    );
  });

  it("flags a truncated FRAME", () => {
    expect(() => decodeMessage(rawFrame(0x03, new Uint8Array(19)))).toThrowError(
      "FRAME payload truncated",
    );
  });

  it("flags METRICS that is not JSON and not UTF-8", () => {
    const notJson = rawFrame(0x04, new TextEncoder().encode("{nope"));
    expect(() => decodeMessage(notJson)).toThrowError("not valid JSON");
    const notUtf8 = rawFrame(0x04, new Uint8Array([0xff, 0xfe, 0x01]));
    expect(() => decodeMessage(notUtf8)).toThrowError("not valid JSON");
  });

  it("flags a wrong PROPRIO payload size", () => {
    expect(() => decodeMessage(rawFrame(0x05, new Uint8Array(99)))).toThrowError(
      "PROPRIO payload must be 100 bytes, got 99",
    );
  });

  it("flags unknown message types", () => {
    expect(() => decodeMessage(rawFrame(0x7f, new Uint8Array(0)))).toThrowError(
      "unknown message type 0x7F",
    );
  });
});

describe("encode validation", () => {
  it("rejects malformed arguments", () => {
    expect(() => encodeHeadPose(0, new Float32Array(6))).toThrowError(ProtocolError);
    expect(() => encodeProprio(0, new Float32Array(22))).toThrowError(ProtocolError);
    expect(() => encodeCloudUpdate(0, 2, new Uint8Array(16))).toThrowError(ProtocolError);
  });

  it("round-trips an arbitrary head pose through decode", () => {
    const pose = new Float32Array([0.1, -0.2, 0.3, 0.8, 0.1, -0.5, 0.2]);
    const msg = decodeMessage(encodeHeadPose(12.25, pose)) as HeadPoseMsg;
    expect(msg.stamp).toBe(12.25);
    expect(Array.from(msg.pose)).toEqual(Array.from(pose));
  });
});
