/** Reconnect schedule: 0.5 s doubling to a 10 s ceiling. Deterministic on purpose. */

export const BACKOFF_BASE_MS = 500;
export const BACKOFF_CAP_MS = 10_000;

/** Delay before reconnect attempt `attempt` (0-based). */
export function backoffDelayMs(attempt: number): number {
  if (attempt < 0) throw new Error("attempt must be >= 0");
  const exp = Math.min(attempt, 31); // avoid overflow games
  return Math.min(BACKOFF_BASE_MS * 2 ** exp, BACKOFF_CAP_MS);
}
