// Wire protocol shared with the detection service: newline-delimited JSON
// over a WebSocket. This module is the only place message shapes live.

export interface GazeMessage {
  type: "gaze";
  t_ms: number;
  x: number;
  y: number;
  src: string;
}

export interface OpenDocMessage {
  type: "open_doc";
  doc_id: string;
}

export interface CloseMessage {
  type: "close";
}

export type ClientMessage = GazeMessage | OpenDocMessage | CloseMessage;

export interface DetectionEvent {
  type: "detection";
  word: string;
  word_index: number;
  window: number;
  p: number;
  definition: string;
}

export interface StatusMessage {
  type: "status";
  ok: boolean;
  doc_id: string;
  words: number;
}

export interface ErrorMessage {
  type: "error";
  message: string;
}

export type ServerMessage = DetectionEvent | StatusMessage | ErrorMessage;

export function encodeClientMessage(msg: ClientMessage): string {
  return JSON.stringify(msg);
}

/** Parse one line from the server; returns null for anything malformed. */
export function parseServerMessage(line: string): ServerMessage | null {
  let obj: unknown;
  try {
    obj = JSON.parse(line);
  } catch {
    return null;
  }
  if (typeof obj !== "object" || obj === null) return null;
  const m = obj as Record<string, unknown>;
  switch (m.type) {
    case "detection":
      if (
        typeof m.word === "string" &&
        typeof m.word_index === "number" &&
        typeof m.p === "number" &&
        typeof m.definition === "string"
      ) {
        return m as unknown as DetectionEvent;
      }
      return null;
    case "status":
      if (typeof m.ok === "boolean") return m as unknown as StatusMessage;
      return null;
    case "error":
      if (typeof m.message === "string") return m as unknown as ErrorMessage;
      return null;
    default:
      return null;
  }
}
