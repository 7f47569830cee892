import { describe, expect, it } from "vitest";

import {
  cameraAxes,
  DEFAULT_CAMERA,
  eyePosition,
  headPose,
  orbit,
  quatRotate,
  translate,
  viewProjection,
  zoom,
  type OrbitCamera,
} from "../src/camera.js";

function cam(over: Partial<OrbitCamera>): OrbitCamera {
  return { ...DEFAULT_CAMERA, ...over };
}

function expectVecClose(a: readonly number[], b: readonly number[], digits = 5): void {
  expect(a.length).toBe(b.length);
  for (let i = 0; i < a.length; i++) expect(a[i]).toBeCloseTo(b[i], digits);
}

describe("orbit geometry", () => {
  it("places the eye on the sphere around the target", () => {
    const c = cam({ target: [0, 0, 0], radius: 2, azimuth: Math.PI, elevation: 0 });
    expectVecClose(eyePosition(c), [-2, 0, 0], 12);
    const up = cam({ target: [1, 2, 3], radius: 1, azimuth: 0, elevation: Math.PI / 4 });
    const eye = eyePosition(up);
    const r = Math.hypot(eye[0] - 1, eye[1] - 2, eye[2] - 3);
    expect(r).toBeCloseTo(1, 12);
  });

  it("clamps elevation and radius", () => {
    let c = DEFAULT_CAMERA;
    for (let i = 0; i < 100; i++) c = orbit(c, 0.3, 0.3);
    expect(c.elevation).toBeLessThanOrEqual(1.45);
    for (let i = 0; i < 100; i++) c = zoom(c, 0.5);
    expect(c.radius).toBeGreaterThan(0);
    expect(c.radius).toBeCloseTo(0.15, 9);
  });

  it("keeps the camera axes an orthonormal right-handed triad", () => {
    for (const az of [0, 0.7, Math.PI, -2.1]) {
      for (const el of [-0.8, 0, 0.5, 1.2]) {
        const { x, y, z } = cameraAxes(cam({ azimuth: az, elevation: el }));
        for (const v of [x, y, z]) expect(Math.hypot(...v)).toBeCloseTo(1, 10);
        expect(x[0] * y[0] + x[1] * y[1] + x[2] * y[2]).toBeCloseTo(0, 10);
        const cx = [y[1] * z[2] - y[2] * z[1], y[2] * z[0] - y[0] * z[2], y[0] * z[1] - y[1] * z[0]];
        expectVecClose(cx, x, 10); // y cross z = x for a right-handed frame
      }
    }
  });
});

describe("head pose output", () => {
  it("is 7 floats with a unit, w-positive quaternion", () => {
    for (const az of [0.1, 1.3, -2.8]) {
      const p = headPose(cam({ azimuth: az, elevation: 0.4 }));
      expect(p.length).toBe(7);
      const [w, x, y, z] = [p[3], p[4], p[5], p[6]];
      expect(Math.hypot(w, x, y, z)).toBeCloseTo(1, 6);
      expect(w).toBeGreaterThanOrEqual(0);
    }
  });

  it("encodes the same rotation the axes describe", () => {
    for (const az of [0, 0.9, Math.PI, -1.7]) {
      const c = cam({ azimuth: az, elevation: 0.35 });
      const { x, y, z, eye } = cameraAxes(c);
      const p = headPose(c);
      expectVecClose([p[0], p[1], p[2]], eye, 5);
      const q = [p[3], p[4], p[5], p[6]];
      expectVecClose(quatRotate(q, [1, 0, 0]), x, 5);
      expectVecClose(quatRotate(q, [0, 1, 0]), y, 5);
      expectVecClose(quatRotate(q, [0, 0, 1]), z, 5);
    }
  });

  it("looks along +x with y down for the known side-on view", () => {
    const c = cam({ target: [0, 0, 0], radius: 2, azimuth: Math.PI, elevation: 0 });
    const { x, y, z } = cameraAxes(c);
    expectVecClose(z, [1, 0, 0], 12);
    expectVecClose(x, [0, -1, 0], 12);
    expectVecClose(y, [0, 0, -1], 12);
  });
});

describe("WASD translation", () => {
  it("moves along the horizontal view directions", () => {
    const c = cam({ target: [0, 0, 0], azimuth: Math.PI, elevation: 0.5 });
    // looking toward +x: forward is +x, camera-right is -y, up is world z
    expectVecClose(translate(c, 0.2, 0, 0).target, [0.2, 0, 0], 10);
    expectVecClose(translate(c, 0, 0.2, 0).target, [0, -0.2, 0], 10);
    expectVecClose(translate(c, 0, 0, 0.2).target, [0, 0, 0.2], 10);
  });

  it("matches the camera x axis at any azimuth", () => {
    for (const az of [0.3, 1.9, -0.6]) {
      const c = cam({ target: [0, 0, 0], azimuth: az, elevation: 0 });
      const { x } = cameraAxes(c);
      const moved = translate(c, 0, 1, 0).target;
      expectVecClose(moved, x, 10); // unit right-step lands on the camera x axis
    }
  });

  it("keeps the eye rigidly attached to the target", () => {
    const c = cam({ azimuth: 0.8, elevation: 0.3 });
    const moved = translate(c, 0.5, -0.25, 0.1);
    const d0 = eyePosition(c).map((v, i) => v - c.target[i]);
    const d1 = eyePosition(moved).map((v, i) => v - moved.target[i]);
    expectVecClose(d1, d0, 12);
  });
});

describe("projection", () => {
  function applyClip(m: Float32Array, p: [number, number, number]): [number, number, number] {
    const clip = [0, 0, 0, 0];
    for (let i = 0; i < 4; i++) {
      clip[i] = m[0 + i] * p[0] + m[4 + i] * p[1] + m[8 + i] * p[2] + m[12 + i];
    }
    return [clip[0] / clip[3], clip[1] / clip[3], clip[3]];
  }

  it("puts the target at the center of the screen", () => {
    const c = cam({ target: [0.4, -0.2, 0.15], radius: 1.2, azimuth: 2.0, elevation: 0.6 });
    const m = viewProjection(c, 1.0, 16 / 9, 0.05, 50);
    const [nx, ny, w] = applyClip(m, [0.4, -0.2, 0.15]);
    expect(nx).toBeCloseTo(0, 5);
    expect(ny).toBeCloseTo(0, 5);
    expect(w).toBeCloseTo(1.2, 5); // clip w is the forward distance
  });

  it("maps camera-right to +x and camera-down to -y on screen", () => {
    const c = cam({ target: [0, 0, 0], radius: 2, azimuth: Math.PI, elevation: 0 });
    const m = viewProjection(c, 1.0, 1.0, 0.05, 50);
    const { x, y } = cameraAxes(c);
    const right = applyClip(m, [x[0] * 0.1, x[1] * 0.1, x[2] * 0.1]);
    expect(right[0]).toBeGreaterThan(0);
    expect(Math.abs(right[1])).toBeLessThan(1e-6);
    const down = applyClip(m, [y[0] * 0.1, y[1] * 0.1, y[2] * 0.1]);
    expect(down[1]).toBeLessThan(0);
  });

  it("orders depth front to back", () => {
    const c = cam({ target: [0, 0, 0], radius: 2, azimuth: Math.PI, elevation: 0 });
    const m = viewProjection(c, 1.0, 1.0, 0.05, 50);
    const near = applyClip(m, [-1, 0, 0]); // 1 m from the eye
    const far = applyClip(m, [3, 0, 0]); // 5 m from the eye
    expect(near[2]).toBeLessThan(far[2]);
  });
});
