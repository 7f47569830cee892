import { describe, expect, it } from "vitest";

import { formatHud, FpsCounter, renderHud, type HudElements } from "../src/hud.js";
import type { HudSample } from "../src/state.js";

describe("fps counter", () => {
  it("reads zero with fewer than two frames", () => {
    const c = new FpsCounter();
    expect(c.fps(0)).toBe(0);
    c.tick(0);
    expect(c.fps(0)).toBe(0);
  });

  it("tracks a steady 60 Hz loop", () => {
    const c = new FpsCounter();
    for (let i = 0; i <= 60; i++) c.tick(i * (1000 / 60));
    expect(c.fps(1000)).toBeCloseTo(60, 0);
  });

  it("forgets frames older than a second", () => {
    const c = new FpsCounter();
    c.tick(0);
    c.tick(10);
    c.tick(5000);
    expect(c.fps(5000)).toBe(0); // only one stamp left in the window
  });
});

function sample(over: Partial<HudSample>): HudSample {
  return {
    poseAgeMs: null,
    sceneAgeMs: null,
    points: 0,
    awaitingScene: true,
    mode: "decoupled",
    ...over,
  };
}

describe("hud formatting", () => {
  it("renders dashes for unknown ages", () => {
    const lines = formatHud(sample({}), 0);
    expect(lines.poseAge).toBe("pose age --");
    expect(lines.sceneAge).toBe("scene age --");
    expect(lines.mode).toBe("DECOUPLED");
  });

  it("renders ages, point count, and fps", () => {
    const lines = formatHud(
      sample({ poseAgeMs: 16.64, sceneAgeMs: 166.6, points: 100_000, mode: "direct" }),
      59.6,
    );
    expect(lines.poseAge).toBe("pose age 16.6 ms");
    expect(lines.sceneAge).toBe("scene age 166.6 ms");
    expect(lines.points).toBe("100,000 pts");
    expect(lines.fps).toBe("60 fps");
    expect(lines.mode).toBe("DIRECT");
  });
});

function fakeEl(): HTMLElement {
  return { textContent: "", style: { display: "" } } as unknown as HTMLElement;
}

describe("hud dom updates", () => {
  it("shows and hides the banner and the awaiting overlay", () => {
    const els: HudElements = {
      mode: fakeEl(),
      poseAge: fakeEl(),
      sceneAge: fakeEl(),
      points: fakeEl(),
      fps: fakeEl(),
      banner: fakeEl(),
      awaiting: fakeEl(),
    };
    renderHud(els, sample({ awaitingScene: true }), 0, "reconnecting");
    expect(els.banner.textContent).toBe("reconnecting");
    expect(els.banner.style.display).toBe("block");
    expect(els.awaiting.style.display).toBe("flex");

    renderHud(els, sample({ awaitingScene: false, poseAgeMs: 5 }), 30, null);
    expect(els.banner.style.display).toBe("none");
    expect(els.awaiting.style.display).toBe("none");
    expect(els.poseAge.textContent).toBe("pose age 5.0 ms");
    expect(els.fps.textContent).toBe("30 fps");
  });
});
