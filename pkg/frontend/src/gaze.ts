// Mouse-as-gaze sampler: remembers the latest pointer position and emits
// one gaze message per 60 Hz tick while a document is open. On disconnect
// messages are buffered for up to 3 seconds, then dropped.

import type { GazeMessage } from "./protocol.js";

export const SAMPLE_HZ = 60;
export const BUFFER_MS = 3000;

export interface GazeSink {
  connected(): boolean;
  send(msg: GazeMessage): void;
}

export class GazeSampler {
  private pointer: [number, number] | null = null;
  private open = false;
  private startMs: number | null = null;
  private lastTick = -Infinity;
  private buffer: GazeMessage[] = [];
  private sent = 0;
  dropped = 0;

  constructor(private readonly sink: GazeSink) {}

  documentOpened(now: number): void {
    this.open = true;
    this.startMs = now;
    this.sent = 0;
    this.buffer = [];
  }

  documentClosed(): void {
    this.open = false;
  }

  pointerMoved(x: number, y: number): void {
    this.pointer = [x, y];
  }

  /** Messages sent per second since the document opened. */
  sendRate(now: number): number {
    if (this.startMs === null || now <= this.startMs) return 0;
    return (this.sent * 1000) / (now - this.startMs);
  }

  /** Drive from requestAnimationFrame or a timer; throttles to 60 Hz. */
  tick(now: number): void {
    if (!this.open || this.pointer === null || this.startMs === null) return;
    const interval = 1000 / SAMPLE_HZ;
    if (now - this.lastTick < interval) return;
    // advance by the interval, not to `now`: ticking at display rate must
    // still average 60 Hz rather than the next-frame-after-16.7ms rate
    this.lastTick = this.lastTick === -Infinity
      ? now
      : Math.max(this.lastTick + interval, now - interval);
    const [x, y] = this.pointer;
    const msg: GazeMessage = {
      type: "gaze",
      t_ms: Math.round(now - this.startMs),
      x,
      y,
      src: "tracker",
    };
    if (this.sink.connected()) {
      this.flush();
      this.sink.send(msg);
      this.sent += 1;
    } else {
      this.buffer.push(msg);
      this.prune(msg.t_ms);
    }
  }

  private prune(nowTms: number): void {
    const cutoff = nowTms - BUFFER_MS;
    while (this.buffer.length > 0 && this.buffer[0]!.t_ms < cutoff) {
      this.buffer.shift();
      this.dropped += 1;
    }
  }

  private flush(): void {
    for (const m of this.buffer) {
      this.sink.send(m);
      this.sent += 1;
    }
    this.buffer = [];
  }

  bufferedCount(): number {
    return this.buffer.length;
  }
}
