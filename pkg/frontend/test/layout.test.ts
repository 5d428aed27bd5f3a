import { describe, expect, it } from "vitest";

import { LayoutError, ViewScale, parseLayout } from "../src/layout.js";

const LAYOUT = {
  doc_id: "doc000",
  line_height: 20.6,
  words: [
    { text: "alpha", box: [80, 80, 120, 100.6], line: 0 },
    { text: "bravo", box: [125, 80, 170, 100.6], line: 0 },
  ],
  columns: [[80, 80, 700, 900]],
};

describe("parseLayout", () => {
  it("round-trips a service layout payload", () => {
    const layout = parseLayout(LAYOUT);
    expect(layout.doc_id).toBe("doc000");
    expect(layout.words).toHaveLength(2);
    expect(layout.words[1]!.box).toEqual([125, 80, 170, 100.6]);
  });

  it("rejects malformed payloads", () => {
    expect(() => parseLayout(null)).toThrow(LayoutError);
    expect(() => parseLayout({ doc_id: "d" })).toThrow(LayoutError);
    expect(() => parseLayout({
      doc_id: "d", line_height: 20, words: [{ text: "x", box: [1, 2] }],
    })).toThrow(LayoutError);
  });
});

describe("ViewScale", () => {
  it("round-trips coordinates within 1 px", () => {
    const view = ViewScale.fit(parseLayout(LAYOUT), 900);
    for (const [x, y] of [[80, 80], [170, 100.6], [123.4, 91.7]] as const) {
      const [sx, sy] = view.toScreen(x, y);
      const [bx, by] = view.toLayout(sx, sy);
      expect(Math.abs(bx - x)).toBeLessThan(1);
      expect(Math.abs(by - y)).toBeLessThan(1);
    }
  });

  it("rejects a degenerate scale", () => {
    expect(() => new ViewScale(0, 0, 0)).toThrow(LayoutError);
  });
});
