// Document layout fetched from the service, plus the screen-scale
// transform between layout pixels and rendered page pixels.

export type Box = [number, number, number, number];

export interface LayoutWord {
  text: string;
  box: Box;
  line: number;
}

export interface DocumentLayout {
  doc_id: string;
  line_height: number;
  words: LayoutWord[];
  columns: Box[];
}

export class LayoutError extends Error {}

export function parseLayout(obj: unknown): DocumentLayout {
  if (typeof obj !== "object" || obj === null) {
    throw new LayoutError("layout is not an object");
  }
  const m = obj as Record<string, unknown>;
  if (typeof m.doc_id !== "string" || typeof m.line_height !== "number") {
    throw new LayoutError("layout missing doc_id or line_height");
  }
  if (!Array.isArray(m.words)) throw new LayoutError("layout missing words");
  const words: LayoutWord[] = m.words.map((w, i) => {
    const ww = w as Record<string, unknown>;
    if (
      typeof ww.text !== "string" ||
      !Array.isArray(ww.box) ||
      ww.box.length !== 4
    ) {
      throw new LayoutError(`malformed word entry at index ${i}`);
    }
    return {
      text: ww.text,
      box: ww.box.map(Number) as Box,
      line: Number(ww.line ?? 0),
    };
  });
  const columns = Array.isArray(m.columns)
    ? m.columns.map((b) => (b as number[]).map(Number) as Box)
    : [];
  return { doc_id: m.doc_id, line_height: m.line_height, words, columns };
}

/**
 * Uniform scale + offset between layout coordinates and page pixels.
 * The inverse is used to turn mouse positions back into the layout frame
 * the service expects; a round trip stays within 1 px.
 */
export class ViewScale {
  constructor(
    readonly scale: number,
    readonly offsetX: number,
    readonly offsetY: number,
  ) {
    if (!(scale > 0)) throw new LayoutError(`bad scale ${scale}`);
  }

  static fit(layout: DocumentLayout, pageWidth: number): ViewScale {
    const right = Math.max(1, ...layout.words.map((w) => w.box[2]));
    return new ViewScale(Math.min(1.5, pageWidth / (right + 40)), 0, 0);
  }

  toScreen(x: number, y: number): [number, number] {
    return [x * this.scale + this.offsetX, y * this.scale + this.offsetY];
  }

  toLayout(x: number, y: number): [number, number] {
    return [(x - this.offsetX) / this.scale, (y - this.offsetY) / this.scale];
  }
}
