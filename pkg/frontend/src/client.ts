// Thin WebSocket wrapper speaking the newline-delimited JSON protocol.
// The socket constructor is injected so tests can substitute a fake.

import {
  ClientMessage,
  ServerMessage,
  encodeClientMessage,
  parseServerMessage,
} from "./protocol.js";

export interface SocketLike {
  send(data: string): void;
  close(): void;
  addEventListener(type: string, handler: (ev: any) => void): void;
  readyState: number;
}

export type SocketFactory = (url: string) => SocketLike;

const OPEN = 1;

export class ServiceClient {
  private socket: SocketLike | null = null;
  onMessage: (msg: ServerMessage) => void = () => {};
  onStateChange: (connected: boolean) => void = () => {};

  constructor(
    private readonly url: string,
    private readonly makeSocket: SocketFactory,
  ) {}

  connect(): void {
    const socket = this.makeSocket(this.url);
    this.socket = socket;
    socket.addEventListener("open", () => this.onStateChange(true));
    socket.addEventListener("close", () => this.onStateChange(false));
    socket.addEventListener("message", (ev: { data: unknown }) => {
      for (const line of String(ev.data).split("\n")) {
        if (!line.trim()) continue;
        const msg = parseServerMessage(line);
        if (msg === null) {
          console.warn("unparseable server line", line);
          continue;
        }
        this.onMessage(msg);
      }
    });
  }

  connected(): boolean {
    return this.socket !== null && this.socket.readyState === OPEN;
  }

  send(msg: ClientMessage): void {
    if (!this.connected()) return;
    this.socket!.send(encodeClientMessage(msg));
  }

  close(): void {
    this.socket?.close();
  }
}
