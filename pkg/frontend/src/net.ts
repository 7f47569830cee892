/**
 * The single network consumer.  Owns the WebSocket, folds every decoded
 * message into the state snapshot, and polices outbound head poses with
 * the send limiter.  Socket construction and the clock are injectable so
 * tests can drive a session without a server or real time.
 */

import { backoffDelayMs } from "./backoff.js";
import { decodeMessage, encodeHeadPose, ProtocolError } from "./protocol.js";
import { RateLimiter } from "./ratelimit.js";
import {
  applyMessage,
  CockpitState,
  initialState,
  setRenderedPose,
  setStatus,
  toggleMode,
} from "./state.js";

export interface SocketLike {
  binaryType: string;
  onopen: ((ev?: unknown) => void) | null;
  onclose: ((ev?: { code?: number; reason?: string }) => void) | null;
  onmessage: ((ev: { data: ArrayBuffer }) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
  send(data: ArrayBuffer): void;
  close(code?: number, reason?: string): void;
}

export type SocketFactory = (url: string) => SocketLike;

export interface SessionOptions {
  socketFactory?: SocketFactory;
  /** client clock in milliseconds; defaults to performance.now-ish Date.now */
  nowMs?: () => number;
  schedule?: (fn: () => void, delayMs: number) => unknown;
  cancel?: (handle: unknown) => void;
  maxSendHz?: number;
}

export class CockpitSession {
  state: CockpitState = initialState;
  /** operator-facing connection banner; null when all is well */
  banner: string | null = null;
  onChange: ((s: CockpitSession) => void) | null = null;

  private socket: SocketLike | null = null;
  private attempt = 0;
  private closedByUs = false;
  private retryHandle: unknown = null;
  private readonly limiter: RateLimiter;
  private readonly makeSocket: SocketFactory;
  private readonly nowMs: () => number;
  private readonly schedule: (fn: () => void, delayMs: number) => unknown;
  private readonly cancel: (handle: unknown) => void;

  constructor(
    public readonly url: string,
    opts: SessionOptions = {},
  ) {
    this.makeSocket = opts.socketFactory ?? ((u) => new WebSocket(u) as unknown as SocketLike);
    this.nowMs = opts.nowMs ?? (() => Date.now());
    this.schedule = opts.schedule ?? ((fn, d) => setTimeout(fn, d));
    this.cancel = opts.cancel ?? ((h) => clearTimeout(h as Parameters<typeof clearTimeout>[0]));
    this.limiter = new RateLimiter(opts.maxSendHz);
  }

  connect(): void {
    this.closedByUs = false;
    this.state = setStatus(this.state, "connecting");
    this.banner = this.attempt === 0 ? null : `reconnecting (attempt ${this.attempt + 1})`;
    const ws = this.makeSocket(this.url);
    ws.binaryType = "arraybuffer";
    this.socket = ws;
    ws.onopen = () => {
      this.attempt = 0;
      this.banner = null;
      this.state = setStatus(this.state, "connected");
      this.notify();
    };
    ws.onmessage = (ev) => this.handleData(ev.data);
    ws.onclose = (ev) => this.handleClose(ev?.code, ev?.reason);
    ws.onerror = () => {
      // onclose follows; the banner there carries the retry info
    };
    this.notify();
  }

  close(): void {
    this.closedByUs = true;
    if (this.retryHandle !== null) {
      this.cancel(this.retryHandle);
      this.retryHandle = null;
    }
    this.socket?.close(1000, "bye");
    this.socket = null;
    this.state = setStatus(this.state, "disconnected");
    this.banner = null;
    this.notify();
  }

  /** Send the local head pose unless the limiter says we are too chatty. */
  sendHeadPose(stampSec: number, pose: Float32Array): boolean {
    if (this.socket === null || this.state.status !== "connected") return false;
    if (!this.limiter.allow(this.nowMs())) return false;
    this.socket.send(encodeHeadPose(stampSec, pose).buffer as ArrayBuffer);
    return true;
  }

  toggleMode(): void {
    this.state = toggleMode(this.state);
    this.notify();
  }

  noteRenderedPose(clientStampSec: number): void {
    this.state = setRenderedPose(this.state, clientStampSec);
  }

  private handleData(data: ArrayBuffer): void {
    let decoded;
    try {
      decoded = decodeMessage(data);
    } catch (err) {
      if (err instanceof ProtocolError) {
        this.banner = `bad message from server: ${err.message}`;
        this.notify();
        return;
      }
      throw err;
    }
    this.state = applyMessage(this.state, decoded, this.nowMs() / 1e3);
    this.notify();
  }

  private handleClose(code?: number, reason?: string): void {
    this.socket = null;
    if (this.closedByUs) return;
    this.state = setStatus(this.state, "disconnected");
    const delay = backoffDelayMs(this.attempt);
    const why = code === 1008 ? "server already has a client" : (reason || `code ${code ?? "?"}`);
    this.banner = `disconnected (${why}); retrying in ${(delay / 1e3).toFixed(1)} s`;
    this.attempt += 1;
    this.notify();
    this.retryHandle = this.schedule(() => {
      this.retryHandle = null;
      this.connect();
    }, delay);
  }

  private notify(): void {
    this.onChange?.(this);
  }
}
