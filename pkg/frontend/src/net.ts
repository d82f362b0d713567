// WebSocket wrapper with exponential-backoff reconnect. Incoming text goes
// through the schema guard before touching the view model.

import { ClientMessage, encodeClientMessage, parseServerMessage, ServerMessage } from "./messages.js";

export interface NetCallbacks {
  onMessage(msg: ServerMessage): void;
  onOpen(): void;
  onClose(): void;
}

export class Connection {
  private ws: WebSocket | null = null;
  private attempts = 0;
  private closed = false;

  constructor(private url: string, private callbacks: NetCallbacks) {
    this.connect();
  }

  private connect() {
    const ws = new WebSocket(this.url);
    this.ws = ws;
    ws.onopen = () => {
      this.attempts = 0;
      this.callbacks.onOpen();
    };
    ws.onmessage = (ev) => {
      const msg = parseServerMessage(String(ev.data));
      if (msg !== null) this.callbacks.onMessage(msg);
    };
    ws.onclose = () => {
      this.callbacks.onClose();
      if (!this.closed) {
        const delay = Math.min(500 * 2 ** this.attempts, 8000);
        this.attempts += 1;
        setTimeout(() => this.connect(), delay);
      }
    };
  }

  send(msg: ClientMessage): boolean {
    if (this.ws !== null && this.ws.readyState === WebSocket.OPEN) {
      this.ws.send(encodeClientMessage(msg));
      return true;
    }
    return false;
  }

  close() {
    this.closed = true;
    this.ws?.close();
  }
}
