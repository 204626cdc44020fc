/**
 * Engine connection: one socket, exponential-backoff reconnect, and a
 * send path that emits exactly one control message per user gesture.
 * The socket is injected behind a minimal interface so the protocol
 * logic is testable without a browser.
 */

import type { ControlMessage, ServerMessage } from './protocol';
import { parseServerMessage } from './protocol';

export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: (() => void) | null;
  onclose: (() => void) | null;
  onmessage: ((event: { data: string }) => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

export interface EngineClientOptions {
  url: string;
  socketFactory: SocketFactory;
  onMessage: (msg: ServerMessage) => void;
  onStatus: (status: 'connecting' | 'open' | 'closed') => void;
  /** Scheduler hook, injectable for tests; defaults to setTimeout. */
  schedule?: (fn: () => void, delayMs: number) => void;
  backoffBaseMs?: number;
  backoffMaxMs?: number;
}

export class EngineClient {
  private socket: SocketLike | null = null;
  private attempts = 0;
  private closed = false;
  private readonly opts: Required<EngineClientOptions>;
  sentCount = 0;

  constructor(options: EngineClientOptions) {
    this.opts = {
      schedule: (fn, ms) => setTimeout(fn, ms),
      backoffBaseMs: 250,
      backoffMaxMs: 8000,
      ...options,
    };
  }

  connect(): void {
    if (this.closed) return;
    this.opts.onStatus('connecting');
    const socket = this.opts.socketFactory(this.opts.url);
    this.socket = socket;
    socket.onopen = () => {
      this.attempts = 0;
      this.opts.onStatus('open');
    };
    socket.onmessage = (event) => {
      const msg = parseServerMessage(event.data);
      if (msg) this.opts.onMessage(msg);
    };
    socket.onclose = () => {
      this.socket = null;
      this.opts.onStatus('closed');
      if (this.closed) return;
      const delay = Math.min(
        this.opts.backoffMaxMs,
        this.opts.backoffBaseMs * 2 ** this.attempts,
      );
      this.attempts += 1;
      this.opts.schedule(() => this.connect(), delay);
    };
  }

  /** Send one control message; drops silently when disconnected (the
   * server state is authoritative, a lost gesture is just not applied). */
  send(message: ControlMessage): void {
    if (!this.socket) return;
    this.socket.send(JSON.stringify(message));
    this.sentCount += 1;
  }

  /** Tap button: forward a timestamp, the server does the tempo math. */
  tap(nowS: number): void {
    this.send({ type: 'tap', time_s: nowS });
  }

  close(): void {
    this.closed = true;
    this.socket?.close();
  }
}
