import { beforeEach, describe, expect, it } from "vitest";

import { BUFFER_MS, GazeSampler, SAMPLE_HZ } from "../src/gaze.js";
import type { GazeMessage } from "../src/protocol.js";

class FakeSink {
  up = true;
  sent: GazeMessage[] = [];
  connected(): boolean { return this.up; }
  send(msg: GazeMessage): void { this.sent.push(msg); }
}

let sink: FakeSink;
let sampler: GazeSampler;

beforeEach(() => {
  sink = new FakeSink();
  sampler = new GazeSampler(sink);
});

function drive(fromMs: number, toMs: number, stepMs = 4): void {
  for (let t = fromMs; t <= toMs; t += stepMs) sampler.tick(t);
}

describe("mouse-as-gaze sampling", () => {
  it("emits no messages before a document is open", () => {
    sampler.pointerMoved(10, 10);
    drive(0, 1000);
    expect(sink.sent).toHaveLength(0);
  });

  it("a stationary pointer for 2 s yields about 120 messages", () => {
    sampler.documentOpened(0);
    sampler.pointerMoved(100, 50);
    drive(0, 2000);
    expect(sink.sent.length).toBeGreaterThanOrEqual(110);
    expect(sink.sent.length).toBeLessThanOrEqual(125);
    expect(sampler.sendRate(2000)).toBeGreaterThan(SAMPLE_HZ * 0.9);
  });

  it("timestamps are relative to document open and nondecreasing", () => {
    sampler.documentOpened(5000);
    sampler.pointerMoved(1, 2);
    drive(5000, 6000);
    expect(sink.sent[0]!.t_ms).toBe(0);
    for (let i = 1; i < sink.sent.length; i++) {
      expect(sink.sent[i]!.t_ms).toBeGreaterThan(sink.sent[i - 1]!.t_ms);
    }
  });

  it("buffers while disconnected and flushes in order on reconnect", () => {
    sampler.documentOpened(0);
    sampler.pointerMoved(1, 2);
    sink.up = false;
    drive(0, 500);
    expect(sink.sent).toHaveLength(0);
    expect(sampler.bufferedCount()).toBeGreaterThan(25);

    sink.up = true;
    drive(504, 600);
    const times = sink.sent.map((m) => m.t_ms);
    expect(times).toEqual([...times].sort((a, b) => a - b));
    expect(times[0]).toBe(0);
    expect(sampler.bufferedCount()).toBe(0);
  });

  it("drops messages older than the 3 s buffer horizon", () => {
    sampler.documentOpened(0);
    sampler.pointerMoved(1, 2);
    sink.up = false;
    drive(0, 5000);
    expect(sampler.dropped).toBeGreaterThan(0);
    const oldest = sampler.bufferedCount();
    expect(oldest).toBeLessThanOrEqual((BUFFER_MS / 1000) * SAMPLE_HZ + 1);
  });
});
