// @vitest-environment jsdom
//
// Scripted end-to-end session against a fake service: the "user" hovers a
// planted unknown word, the fake server applies the real service's window
// timing, and the page must show the highlight and sidebar card within
// the 1.5 s budget.

import { beforeEach, describe, expect, it } from "vitest";

import type { SocketLike } from "../src/client.js";
import { Reader } from "../src/reader.js";

const LAYOUT = {
  doc_id: "doc000",
  line_height: 20.6,
  words: [
    { text: "the", box: [80, 80, 110, 100], line: 0 },
    { text: "cromulent", box: [115, 80, 210, 100], line: 0 },
    { text: "word", box: [215, 80, 260, 100], line: 0 },
  ],
  columns: [],
};

class FakeServerSocket implements SocketLike {
  readyState = 1;
  received: any[] = [];
  private handlers = new Map<string, ((ev: any) => void)[]>();
  private gazeInPlanted = 0;
  private emitted = false;

  constructor(private readonly plantedIndex: number) {}

  addEventListener(type: string, handler: (ev: any) => void): void {
    const list = this.handlers.get(type) ?? [];
    list.push(handler);
    this.handlers.set(type, list);
  }

  dispatch(type: string, ev: any): void {
    for (const h of this.handlers.get(type) ?? []) h(ev);
  }

  reply(obj: unknown): void {
    this.dispatch("message", { data: JSON.stringify(obj) });
  }

  send(data: string): void {
    const msg = JSON.parse(data);
    this.received.push(msg);
    if (msg.type === "open_doc") {
      this.reply({ type: "status", ok: true, doc_id: msg.doc_id,
                   words: LAYOUT.words.length });
      return;
    }
    if (msg.type !== "gaze") return;
    const [x0, y0, x1, y1] = LAYOUT.words[this.plantedIndex]!.box;
    if (msg.x >= x0 && msg.x <= x1 && msg.y >= y0 && msg.y <= y1) {
      this.gazeInPlanted += 1;
    }
    // one 60 Hz second of dwell closes a window; the service then needs
    // the trailing context before the event goes out
    if (!this.emitted && this.gazeInPlanted >= 60) {
      this.emitted = true;
      this.reply({ type: "detection", word: "cromulent",
                   word_index: this.plantedIndex, window: 0, p: 0.97,
                   definition: "acceptable, in order." });
    }
  }

  close(): void {
    this.readyState = 3;
    this.dispatch("close", {});
  }
}

function setupDom(): { page: HTMLElement; sidebar: HTMLElement;
                       statusBar: HTMLElement } {
  document.body.innerHTML =
    '<div id="page"></div><aside id="sidebar"></aside><span id="status-bar"></span>';
  return {
    page: document.getElementById("page")!,
    sidebar: document.getElementById("sidebar")!,
    statusBar: document.getElementById("status-bar")!,
  };
}

let socket: FakeServerSocket;
let reader: Reader;
let clock: { t: number };

beforeEach(() => {
  socket = new FakeServerSocket(1);
  clock = { t: 0 };
  reader = new Reader(setupDom(), "ws://test/ws", () => socket,
                      () => clock.t);
  reader.connect();
  socket.dispatch("open", {});
  reader.openDocument(LAYOUT, 800);
});

function hover(wordIndex: number, ms: number): void {
  const w = LAYOUT.words[wordIndex]!;
  const [sx, sy] = reader.view.toScreen(
    (w.box[0] + w.box[2]) / 2, (w.box[1] + w.box[3]) / 2);
  reader.pointerMoved(sx, sy);
  const end = clock.t + ms;
  while (clock.t < end) {
    clock.t += 4;
    reader.tick();
  }
}

describe("scripted reading session", () => {
  it("renders every layout word", () => {
    expect(document.querySelectorAll("#page .word")).toHaveLength(3);
    expect(document.querySelector('[data-word-index="1"]')!.textContent)
      .toBe("cromulent");
  });

  it("hovering the planted unknown word highlights it within 1.5 s", () => {
    const started = clock.t;
    hover(1, 1500);
    const el = document.querySelector('[data-word-index="1"]')!;
    expect(el.classList.contains("highlighted")).toBe(true);
    const cards = document.querySelectorAll("#sidebar .card");
    expect(cards).toHaveLength(1);
    expect(cards[0]!.querySelector("h3")!.textContent).toBe("cromulent");
    expect(reader.state.sidebar[0]!.receivedAt - started)
      .toBeLessThanOrEqual(1500);
  });

  it("hovering a known word produces nothing", () => {
    hover(0, 1500);
    expect(document.querySelectorAll(".highlighted")).toHaveLength(0);
    expect(document.querySelectorAll("#sidebar .card")).toHaveLength(0);
  });

  it("duplicate detection events produce no duplicate cards", () => {
    hover(1, 1500);
    socket.reply({ type: "detection", word: "cromulent", word_index: 1,
                   window: 3, p: 0.97, definition: "acceptable, in order." });
    expect(document.querySelectorAll("#sidebar .card")).toHaveLength(1);
    expect(reader.state.sidebar).toHaveLength(1);
  });

  it("streams gaze in layout coordinates at about 60 Hz", () => {
    hover(1, 1000);
    const gaze = socket.received.filter((m) => m.type === "gaze");
    expect(gaze.length).toBeGreaterThanOrEqual(55);
    expect(gaze.length).toBeLessThanOrEqual(65);
    const w = LAYOUT.words[1]!.box;
    expect(Math.abs(gaze[0].x - (w[0] + w[2]) / 2)).toBeLessThan(1);
    expect(Math.abs(gaze[0].y - (w[1] + w[3]) / 2)).toBeLessThan(1);
  });

  it("malformed layout shows an error banner instead of crashing", () => {
    reader.openDocument({ doc_id: "x" }, 800);
    expect(document.getElementById("status-bar")!.textContent)
      .toContain("error");
  });
});
