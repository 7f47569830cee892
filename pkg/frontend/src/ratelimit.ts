/** Sliding-window send limiter. The server tolerates at most ~120 msg/s. */

export const MAX_SENDS_PER_SECOND = 120;

export class RateLimiter {
  private readonly windowMs = 1000;
  private readonly stamps: number[] = [];

  constructor(private readonly maxPerSecond: number = MAX_SENDS_PER_SECOND) {
    if (maxPerSecond <= 0) throw new Error("maxPerSecond must be positive");
  }

  /** True if a send at nowMs stays under the budget; records it if so. */
  allow(nowMs: number): boolean {
    while (this.stamps.length > 0 && nowMs - this.stamps[0] >= this.windowMs) {
      this.stamps.shift();
    }
    if (this.stamps.length >= this.maxPerSecond) return false;
    this.stamps.push(nowMs);
    return true;
  }
}
