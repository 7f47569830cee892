/**
 * Cockpit entry point.  One network consumer (CockpitSession), one render
 * loop.  The loop always draws from the freshest local camera pose; the
 * network only swaps immutable state snapshots underneath it.
 */

import { DEFAULT_CAMERA, headPose, orbit, translate, viewProjection, zoom } from "./camera.js";
import { FpsCounter, HudElements, renderHud } from "./hud.js";
import { CockpitSession } from "./net.js";
import { CloudRenderer, FrameBlitter } from "./renderer.js";
import { hudSample } from "./state.js";

function must<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (el === null) throw new Error(`missing #${id}`);
  return el as T;
}

function serverUrl(): string {
  const q = new URLSearchParams(window.location.search).get("server");
  if (q !== null && q !== "") return q;
  const host = window.location.hostname || "localhost";
  return `ws://${host}:8765/ws`;
}

const glCanvas = must<HTMLCanvasElement>("cloud");
const frameCanvas = must<HTMLCanvasElement>("frame");
const hudEls: HudElements = {
  mode: must("hud-mode"),
  poseAge: must("hud-pose-age"),
  sceneAge: must("hud-scene-age"),
  points: must("hud-points"),
  fps: must("hud-fps"),
  banner: must("banner"),
  awaiting: must("awaiting"),
};

const gl = glCanvas.getContext("webgl2");
if (gl === null) throw new Error("WebGL2 is required for the point cloud view");
const ctx2d = frameCanvas.getContext("2d");
if (ctx2d === null) throw new Error("2d canvas context unavailable");

const cloudRenderer = new CloudRenderer(gl);
const blitter = new FrameBlitter(ctx2d);
const fpsCounter = new FpsCounter();
const session = new CockpitSession(serverUrl());

let camera = DEFAULT_CAMERA;
const held = new Set<string>();
let dragging = false;
let uploadedSceneTime = -1;
let blittedPoseTime = -1;

glCanvas.addEventListener("mousedown", () => {
  dragging = true;
});
window.addEventListener("mouseup", () => {
  dragging = false;
});
window.addEventListener("mousemove", (ev) => {
  if (!dragging) return;
  camera = orbit(camera, -ev.movementX * 0.005, ev.movementY * 0.005);
});
glCanvas.addEventListener("wheel", (ev) => {
  ev.preventDefault();
  camera = zoom(camera, ev.deltaY > 0 ? 1.1 : 1 / 1.1);
});
window.addEventListener("keydown", (ev) => {
  if (ev.key === "Tab") {
    ev.preventDefault();
    session.toggleMode();
    return;
  }
  held.add(ev.key.toLowerCase());
});
window.addEventListener("keyup", (ev) => {
  held.delete(ev.key.toLowerCase());
});
must("mode-toggle").addEventListener("click", () => session.toggleMode());

function resize(): void {
  const dpr = window.devicePixelRatio || 1;
  for (const c of [glCanvas, frameCanvas]) {
    const w = Math.round(c.clientWidth * dpr);
    const h = Math.round(c.clientHeight * dpr);
    if (c.width !== w || c.height !== h) {
      c.width = w;
      c.height = h;
    }
  }
}
window.addEventListener("resize", resize);

function stepCamera(dtSec: number): void {
  const move = 0.8 * dtSec; // m/s at the table scale
  const f = (held.has("w") ? 1 : 0) - (held.has("s") ? 1 : 0);
  const r = (held.has("d") ? 1 : 0) - (held.has("a") ? 1 : 0);
  const u = (held.has("r") ? 1 : 0) - (held.has("f") ? 1 : 0);
  if (f !== 0 || r !== 0 || u !== 0) {
    camera = translate(camera, f * move, r * move, u * move);
  }
}

let lastTick = performance.now();

function frameLoop(nowMs: number): void {
  const dt = Math.min((nowMs - lastTick) / 1e3, 0.1);
  lastTick = nowMs;
  resize();
  stepCamera(dt);

  const state = session.state;
  const direct = state.mode === "direct";
  glCanvas.style.display = direct ? "none" : "block";
  frameCanvas.style.display = direct ? "block" : "none";

  if (direct) {
    const fr = state.frame;
    if (fr !== null && fr.poseTime !== blittedPoseTime) {
      blittedPoseTime = fr.poseTime;
      blitter.show(fr.png, fr.width, fr.height);
    }
  } else {
    const cloud = state.cloud;
    if (cloud !== null && cloud.sceneTime !== uploadedSceneTime) {
      uploadedSceneTime = cloud.sceneTime;
      cloudRenderer.upload(cloud.points, cloud.count);
    }
    const aspect = glCanvas.width / Math.max(glCanvas.height, 1);
    cloudRenderer.draw(viewProjection(camera, 1.0, aspect, 0.05, 50.0));
    session.noteRenderedPose(nowMs / 1e3);
  }

  session.sendHeadPose(nowMs / 1e3, headPose(camera));

  fpsCounter.tick(nowMs);
  renderHud(hudEls, hudSample(state, nowMs / 1e3), fpsCounter.fps(nowMs), session.banner);
  requestAnimationFrame(frameLoop);
}

session.connect();
requestAnimationFrame(frameLoop);
