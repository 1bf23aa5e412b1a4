// Websocket session link with reconnect and the client-side seq counter.
// Outgoing messages are dropped while disconnected (never queued: a stale
// wrench must not fire on reconnect).

import { encodeWrench } from "./protocol";
import { ViewModel } from "./viewmodel";

export interface SessionLinkOptions {
  reconnectDelayMs?: number;
  socketFactory?: (url: string) => WebSocket;
}

export class SessionLink {
  private ws: WebSocket | null = null;
  private seq = 0;
  private closed = false;

  constructor(
    readonly url: string,
    readonly view: ViewModel,
    private onFrame: () => void = () => {},
    private opts: SessionLinkOptions = {}
  ) {}

  connect(): void {
    this.closed = false;
    this.view.setStatus("connecting");
    const factory = this.opts.socketFactory ?? ((u: string) => new WebSocket(u));
    const ws = factory(this.url);
    this.ws = ws;
    ws.onopen = () => {
      this.view.setStatus("connected");
      this.onFrame();
    };
    ws.onmessage = (event: MessageEvent) => {
      this.view.applyText(String(event.data));
      this.onFrame();
    };
    ws.onclose = () => {
      this.view.setStatus("disconnected");
      this.onFrame();
      this.ws = null;
      if (!this.closed && this.opts.reconnectDelayMs !== undefined) {
        setTimeout(() => {
          if (!this.closed) this.connect();
        }, this.opts.reconnectDelayMs);
      }
    };
    ws.onerror = () => {
      // close handler does the bookkeeping
    };
  }

  close(): void {
    this.closed = true;
    this.ws?.close();
  }

  sendWrench(force: number[], torque: number[]): void {
    if (!this.ws || this.ws.readyState !== 1 /* OPEN */) return;
    this.ws.send(encodeWrench(this.seq++, force, torque));
  }
}
