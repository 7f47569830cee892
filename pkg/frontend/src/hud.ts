/** HUD readout: pose age, scene age, point count, FPS, connection banner. */

import type { HudSample } from "./state.js";

/** Rolling FPS over roughly the last second of frame stamps. */
export class FpsCounter {
  private readonly stamps: number[] = [];

  tick(nowMs: number): void {
    this.stamps.push(nowMs);
    while (this.stamps.length > 0 && nowMs - this.stamps[0] > 1000) {
      this.stamps.shift();
    }
  }

  fps(nowMs: number): number {
    while (this.stamps.length > 0 && nowMs - this.stamps[0] > 1000) {
      this.stamps.shift();
    }
    if (this.stamps.length < 2) return 0;
    const span = (nowMs - this.stamps[0]) / 1e3;
    return span > 0 ? (this.stamps.length - 1) / span : 0;
  }
}

function ms(v: number | null): string {
  return v === null ? "--" : `${v.toFixed(1)} ms`;
}

export interface HudLines {
  mode: string;
  poseAge: string;
  sceneAge: string;
  points: string;
  fps: string;
}

export function formatHud(sample: HudSample, fps: number): HudLines {
  return {
    mode: sample.mode.toUpperCase(),
    poseAge: `pose age ${ms(sample.poseAgeMs)}`,
    sceneAge: `scene age ${ms(sample.sceneAgeMs)}`,
    points: `${sample.points.toLocaleString("en-US")} pts`,
    fps: `${fps.toFixed(0)} fps`,
  };
}

export interface HudElements {
  mode: HTMLElement;
  poseAge: HTMLElement;
  sceneAge: HTMLElement;
  points: HTMLElement;
  fps: HTMLElement;
  banner: HTMLElement;
  awaiting: HTMLElement;
}

export function renderHud(
  el: HudElements,
  sample: HudSample,
  fps: number,
  banner: string | null,
): void {
  const lines = formatHud(sample, fps);
  el.mode.textContent = lines.mode;
  el.poseAge.textContent = lines.poseAge;
  el.sceneAge.textContent = lines.sceneAge;
  el.points.textContent = lines.points;
  el.fps.textContent = lines.fps;
  el.banner.textContent = banner ?? "";
  el.banner.style.display = banner === null ? "none" : "block";
  el.awaiting.style.display = sample.awaitingScene ? "flex" : "none";
}
