/**
 * Cockpit state: one immutable snapshot per applied message.
 *
 * Server stamps live on the simulation clock, the HUD runs on the client
 * clock.  The offset between them is estimated as the minimum observed
 * (clientNow - serverStamp) over stamps that are current at send time
 * (PROPRIO stamps and METRICS display_time); the minimum is the sample
 * least inflated by network delay.
 */

import type { CloudUpdateMsg, FrameMsg, Message, ProprioMsg } from "./protocol.js";

export type ConnectionStatus = "connecting" | "connected" | "disconnected";
export type ViewMode = "decoupled" | "direct";

export interface CockpitState {
  readonly status: ConnectionStatus;
  readonly mode: ViewMode;
  readonly cloud: CloudUpdateMsg | null;
  readonly frame: FrameMsg | null;
  readonly metrics: Record<string, unknown> | null;
  readonly proprio: ProprioMsg | null;
  /** clientNow - serverNow estimate in seconds; null until a stamp arrives */
  readonly clockOffset: number | null;
  /** client-clock stamp of the head pose the on-screen view was rendered from */
  readonly renderedPoseStamp: number | null;
}

export const initialState: CockpitState = Object.freeze({
  status: "connecting",
  mode: "decoupled",
  cloud: null,
  frame: null,
  metrics: null,
  proprio: null,
  clockOffset: null,
  renderedPoseStamp: null,
});

function withOffset(state: CockpitState, nowSec: number, serverStamp: number): number {
  const sample = nowSec - serverStamp;
  return state.clockOffset === null ? sample : Math.min(state.clockOffset, sample);
}

/** Fold one decoded server message into the state. */
export function applyMessage(state: CockpitState, msg: Message, nowSec: number): CockpitState {
  switch (msg.kind) {
    case "cloud_update":
      return Object.freeze({ ...state, cloud: msg });
    case "frame":
      return Object.freeze({ ...state, frame: msg });
    case "metrics": {
      const dt = msg.record["display_time"];
      const next: CockpitState = { ...state, metrics: msg.record };
      return Object.freeze(
        typeof dt === "number" ? { ...next, clockOffset: withOffset(state, nowSec, dt) } : next,
      );
    }
    case "proprio":
      return Object.freeze({
        ...state,
        proprio: msg,
        clockOffset: withOffset(state, nowSec, msg.stamp),
      });
    case "head_pose":
      return state; // server never sends these; tolerate and ignore
  }
}

export function setStatus(state: CockpitState, status: ConnectionStatus): CockpitState {
  return Object.freeze({ ...state, status });
}

export function toggleMode(state: CockpitState): CockpitState {
  return Object.freeze({ ...state, mode: state.mode === "decoupled" ? "direct" : "decoupled" });
}

/** Record that the view on screen was just rendered from the local pose. */
export function setRenderedPose(state: CockpitState, clientStampSec: number): CockpitState {
  return Object.freeze({ ...state, renderedPoseStamp: clientStampSec });
}

export interface HudSample {
  poseAgeMs: number | null;
  sceneAgeMs: number | null;
  points: number;
  awaitingScene: boolean;
  mode: ViewMode;
}

/**
 * The latency numbers the operator sees.
 *
 * Decoupled: the displayed view answers the local pose it was rendered
 * from, so pose age is a pure client-clock difference (about one display
 * frame).  Direct: the displayed frame answers the head pose the robot
 * had settled on at capture, so pose age is serverNow - frame.poseTime,
 * which includes transport and neck settling.
 */
export function hudSample(state: CockpitState, nowSec: number): HudSample {
  const serverNow = state.clockOffset === null ? null : nowSec - state.clockOffset;
  let poseAgeMs: number | null = null;
  let sceneAgeMs: number | null = null;
  if (state.mode === "decoupled") {
    if (state.renderedPoseStamp !== null) {
      poseAgeMs = (nowSec - state.renderedPoseStamp) * 1e3;
    }
    if (state.cloud !== null && serverNow !== null) {
      sceneAgeMs = (serverNow - state.cloud.sceneTime) * 1e3;
    }
  } else if (state.frame !== null && serverNow !== null) {
    poseAgeMs = (serverNow - state.frame.poseTime) * 1e3;
    sceneAgeMs = (serverNow - state.frame.sceneTime) * 1e3;
  }
  return {
    poseAgeMs,
    sceneAgeMs,
    points: state.cloud?.count ?? 0,
    awaitingScene: state.mode === "decoupled" && (state.cloud === null || state.cloud.count === 0),
    mode: state.mode,
  };
}
