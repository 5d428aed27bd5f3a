// Reader UI state as a pure fold over received server messages: replaying
// the same messages always reproduces the same state.

import type { DocumentLayout } from "./layout.js";
import type { ServerMessage } from "./protocol.js";

export interface SidebarEntry {
  word: string;
  wordIndex: number;
  definition: string;
  receivedAt: number;
}

export interface ReaderState {
  layout: DocumentLayout | null;
  connected: boolean;
  docOpen: boolean;
  highlighted: ReadonlySet<number>;
  sidebar: readonly SidebarEntry[];
  lastError: string | null;
  sendRateHz: number;
}

export function initialState(): ReaderState {
  return {
    layout: null,
    connected: false,
    docOpen: false,
    highlighted: new Set(),
    sidebar: [],
    lastError: null,
    sendRateHz: 0,
  };
}

export function withLayout(s: ReaderState, layout: DocumentLayout): ReaderState {
  return { ...s, layout, docOpen: false, highlighted: new Set(), sidebar: [] };
}

export function withConnection(s: ReaderState, connected: boolean): ReaderState {
  return { ...s, connected };
}

export function withSendRate(s: ReaderState, hz: number): ReaderState {
  return { ...s, sendRateHz: hz };
}

/** Fold one server message into the state. Duplicate detections and
 * detections for unknown word indices are ignored. */
export function applyServerMessage(
  s: ReaderState,
  msg: ServerMessage,
  now: number,
): ReaderState {
  switch (msg.type) {
    case "status":
      return msg.ok ? { ...s, docOpen: true, lastError: null } : s;
    case "error":
      return { ...s, lastError: msg.message };
    case "detection": {
      if (s.layout === null || msg.word_index >= s.layout.words.length) {
        console.warn("detection for unknown word_index", msg.word_index);
        return s;
      }
      if (s.highlighted.has(msg.word_index)) return s;
      const highlighted = new Set(s.highlighted);
      highlighted.add(msg.word_index);
      return {
        ...s,
        highlighted,
        sidebar: [
          ...s.sidebar,
          {
            word: msg.word,
            wordIndex: msg.word_index,
            definition: msg.definition,
            receivedAt: now,
          },
        ],
      };
    }
  }
}
