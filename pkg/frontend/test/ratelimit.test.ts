import { describe, expect, it } from "vitest";

import { BACKOFF_CAP_MS, backoffDelayMs } from "../src/backoff.js";
import { MAX_SENDS_PER_SECOND, RateLimiter } from "../src/ratelimit.js";

describe("send limiter", () => {
  it("admits exactly the budget within one second", () => {
    const rl = new RateLimiter();
    let admitted = 0;
    for (let i = 0; i < 200; i++) {
      if (rl.allow(i)) admitted++; // 200 attempts inside 200 ms
    }
    expect(admitted).toBe(MAX_SENDS_PER_SECOND);
  });

  it("frees budget as the window slides", () => {
    const rl = new RateLimiter(2);
    expect(rl.allow(0)).toBe(true);
    expect(rl.allow(100)).toBe(true);
    expect(rl.allow(200)).toBe(false);
    expect(rl.allow(999)).toBe(false); // first send still inside the window
    expect(rl.allow(1000)).toBe(true); // send at 0 ms has aged out
    expect(rl.allow(1050)).toBe(false); // 100 ms send still counts
    expect(rl.allow(1100)).toBe(true);
  });

  it("never exceeds the cap over any one-second span", () => {
    const rl = new RateLimiter();
    const sent: number[] = [];
    for (let t = 0; t < 3000; t += 3) {
      if (rl.allow(t)) sent.push(t); // a 333 Hz render loop trying to send every frame
    }
    for (let start = 0; start <= 2000; start += 50) {
      const inWindow = sent.filter((t) => t >= start && t < start + 1000).length;
      expect(inWindow).toBeLessThanOrEqual(MAX_SENDS_PER_SECOND);
    }
    expect(sent.length).toBeGreaterThan(300); // ~120/s for 3 s, so the budget is used
  });

  it("rejects a nonpositive budget", () => {
    expect(() => new RateLimiter(0)).toThrowError("positive");
  });
});

describe("reconnect backoff", () => {
  it("doubles from half a second and caps at ten", () => {
    expect([0, 1, 2, 3, 4, 5, 6].map(backoffDelayMs)).toEqual([
      500, 1000, 2000, 4000, 8000, 10000, 10000,
    ]);
  });

  it("stays at the cap for absurd attempt counts", () => {
    expect(backoffDelayMs(40)).toBe(BACKOFF_CAP_MS);
    expect(backoffDelayMs(1000)).toBe(BACKOFF_CAP_MS);
  });

  it("rejects negative attempts", () => {
    expect(() => backoffDelayMs(-1)).toThrowError(">= 0");
  });
});
