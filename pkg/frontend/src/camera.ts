/**
 * Orbit camera for the cockpit.
 *
 * World frame is z-up.  The camera follows the pinhole convention used on
 * the wire: +x right, +y down, +z forward, so a pose produced here can be
 * sent as a HEAD_POSE and lands in the same frame the server simulates.
 */

export interface OrbitCamera {
  readonly target: readonly [number, number, number];
  readonly radius: number;
  readonly azimuth: number; // radians around world z
  readonly elevation: number; // radians above the horizon
}

export const DEFAULT_CAMERA: OrbitCamera = Object.freeze({
  target: [0.5, 0.0, 0.1] as const,
  radius: 1.1,
  azimuth: Math.PI,
  elevation: 0.5,
});

const MIN_RADIUS = 0.15;
const MAX_ELEVATION = 1.45; // keep clear of the pole so look-at stays stable

export function orbit(cam: OrbitCamera, dAzimuth: number, dElevation: number): OrbitCamera {
  const elevation = Math.max(-MAX_ELEVATION, Math.min(MAX_ELEVATION, cam.elevation + dElevation));
  return Object.freeze({ ...cam, azimuth: cam.azimuth + dAzimuth, elevation });
}

export function zoom(cam: OrbitCamera, factor: number): OrbitCamera {
  return Object.freeze({ ...cam, radius: Math.max(MIN_RADIUS, cam.radius * factor) });
}

export function eyePosition(cam: OrbitCamera): [number, number, number] {
  const ce = Math.cos(cam.elevation);
  return [
    cam.target[0] + cam.radius * ce * Math.cos(cam.azimuth),
    cam.target[1] + cam.radius * ce * Math.sin(cam.azimuth),
    cam.target[2] + cam.radius * Math.sin(cam.elevation),
  ];
}

/**
 * Translate the orbit target in view-aligned directions (WASD plus R/F).
 * forward/right move in the horizontal plane; up is world z.
 */
export function translate(
  cam: OrbitCamera,
  forward: number,
  right: number,
  up: number,
): OrbitCamera {
  const fx = -Math.cos(cam.azimuth); // horizontal look direction (eye toward target)
  const fy = -Math.sin(cam.azimuth);
  const rx = fy; // look direction rotated 90 degrees clockwise from above = camera +x
  const ry = -fx;
  return Object.freeze({
    ...cam,
    target: [
      cam.target[0] + forward * fx + right * rx,
      cam.target[1] + forward * fy + right * ry,
      cam.target[2] + up,
    ] as const,
  });
}

type Vec3 = [number, number, number];

function sub(a: readonly number[], b: readonly number[]): Vec3 {
  return [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
}

function cross(a: Vec3, b: Vec3): Vec3 {
  return [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]];
}

function normalize(v: Vec3): Vec3 {
  const n = Math.hypot(v[0], v[1], v[2]);
  return [v[0] / n, v[1] / n, v[2] / n];
}

/**
 * Camera axes in world coordinates: z toward the target, x = z x worldUp,
 * y completes the right-handed (x right, y down) triad.
 */
export function cameraAxes(cam: OrbitCamera): { x: Vec3; y: Vec3; z: Vec3; eye: Vec3 } {
  const eye = eyePosition(cam);
  const z = normalize(sub(cam.target, eye));
  const x = normalize(cross(z, [0, 0, 1]));
  const y = cross(z, x);
  return { x, y, z, eye };
}

/** Rotation matrix (columns x,y,z) to quaternion with w >= 0. */
function matrixToQuat(x: Vec3, y: Vec3, z: Vec3): [number, number, number, number] {
  const m00 = x[0], m01 = y[0], m02 = z[0];
  const m10 = x[1], m11 = y[1], m12 = z[1];
  const m20 = x[2], m21 = y[2], m22 = z[2];
  const tr = m00 + m11 + m22;
  let w: number, qx: number, qy: number, qz: number;
  if (tr > 0) {
    const s = Math.sqrt(tr + 1) * 2;
    w = s / 4;
    qx = (m21 - m12) / s;
    qy = (m02 - m20) / s;
    qz = (m10 - m01) / s;
  } else if (m00 >= m11 && m00 >= m22) {
    const s = Math.sqrt(1 + m00 - m11 - m22) * 2;
    w = (m21 - m12) / s;
    qx = s / 4;
    qy = (m01 + m10) / s;
    qz = (m02 + m20) / s;
  } else if (m11 >= m22) {
    const s = Math.sqrt(1 + m11 - m00 - m22) * 2;
    w = (m02 - m20) / s;
    qx = (m01 + m10) / s;
    qy = s / 4;
    qz = (m12 + m21) / s;
  } else {
    const s = Math.sqrt(1 + m22 - m00 - m11) * 2;
    w = (m10 - m01) / s;
    qx = (m02 + m20) / s;
    qy = (m12 + m21) / s;
    qz = s / 4;
  }
  const n = Math.hypot(w, qx, qy, qz);
  const sign = w < 0 ? -1 : 1;
  return [(sign * w) / n, (sign * qx) / n, (sign * qy) / n, (sign * qz) / n];
}

/** Head pose on the wire layout: [px, py, pz, qw, qx, qy, qz]. */
export function headPose(cam: OrbitCamera): Float32Array {
  const { x, y, z, eye } = cameraAxes(cam);
  const q = matrixToQuat(x, y, z);
  return new Float32Array([eye[0], eye[1], eye[2], q[0], q[1], q[2], q[3]]);
}

/** Rotate a point by a wire-order quaternion [w, x, y, z]. Test hook. */
export function quatRotate(q: readonly number[], v: readonly number[]): Vec3 {
  const [w, x, y, z] = q;
  // p' = p + 2 w (u x p) + 2 (u x (u x p)) with u = (x, y, z)
  const ux = y * v[2] - z * v[1];
  const uy = z * v[0] - x * v[2];
  const uz = x * v[1] - y * v[0];
  const vx = y * uz - z * uy;
  const vy = z * ux - x * uz;
  const vz = x * uy - y * ux;
  return [v[0] + 2 * (w * ux + vx), v[1] + 2 * (w * uy + vy), v[2] + 2 * (w * uz + vz)];
}

/**
 * World-to-clip matrix, column-major for uniformMatrix4fv.
 * Camera +z is forward and +y is down, so the projection flips y for GL
 * and keeps +z depth.
 */
export function viewProjection(
  cam: OrbitCamera,
  fovY: number,
  aspect: number,
  near: number,
  far: number,
): Float32Array {
  const { x, y, z, eye } = cameraAxes(cam);
  // view: world -> camera, rows are the axes
  const tx = -(x[0] * eye[0] + x[1] * eye[1] + x[2] * eye[2]);
  const ty = -(y[0] * eye[0] + y[1] * eye[1] + y[2] * eye[2]);
  const tz = -(z[0] * eye[0] + z[1] * eye[1] + z[2] * eye[2]);
  const f = 1 / Math.tan(fovY / 2);
  const a = (far + near) / (far - near);
  const b = (-2 * far * near) / (far - near);
  // clip = P * V, written out; columns of the result in column-major order
  const px = f / aspect;
  const out = new Float32Array(16);
  for (let c = 0; c < 3; c++) {
    out[4 * c + 0] = px * x[c];
    out[4 * c + 1] = -f * y[c];
    out[4 * c + 2] = a * z[c];
    out[4 * c + 3] = z[c];
  }
  out[12] = px * tx;
  out[13] = -f * ty;
  out[14] = a * tz + b;
  out[15] = tz;
  return out;
}
