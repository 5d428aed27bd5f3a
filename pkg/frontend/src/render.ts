// DOM rendering: absolutely positioned words mirroring the layout boxes,
// a highlight class driven by state, and the definitions sidebar.

import { DocumentLayout, ViewScale } from "./layout.js";
import type { ReaderState } from "./state.js";

export function renderDocument(
  container: HTMLElement,
  layout: DocumentLayout,
  view: ViewScale,
): void {
  container.textContent = "";
  if (layout.words.length === 0) {
    const empty = document.createElement("p");
    empty.className = "status-message";
    empty.textContent = "This document is empty.";
    container.appendChild(empty);
    return;
  }
  for (let i = 0; i < layout.words.length; i++) {
    const w = layout.words[i]!;
    const el = document.createElement("span");
    el.className = "word";
    el.dataset.wordIndex = String(i);
    el.textContent = w.text;
    const [x0, y0] = view.toScreen(w.box[0], w.box[1]);
    const [x1, y1] = view.toScreen(w.box[2], w.box[3]);
    el.style.left = `${x0}px`;
    el.style.top = `${y0}px`;
    el.style.width = `${x1 - x0}px`;
    el.style.height = `${y1 - y0}px`;
    el.style.fontSize = `${(y1 - y0) * 0.72}px`;
    container.appendChild(el);
  }
}

export function renderState(
  container: HTMLElement,
  sidebar: HTMLElement,
  statusBar: HTMLElement,
  state: ReaderState,
): void {
  const words = container.querySelectorAll<HTMLElement>(".word");
  words.forEach((el) => {
    const idx = Number(el.dataset.wordIndex);
    el.classList.toggle("highlighted", state.highlighted.has(idx));
  });

  // sidebar cards are append-only in arrival order
  const have = sidebar.querySelectorAll(".card").length;
  for (let i = have; i < state.sidebar.length; i++) {
    const entry = state.sidebar[i]!;
    const card = document.createElement("div");
    card.className = "card";
    card.dataset.wordIndex = String(entry.wordIndex);
    const title = document.createElement("h3");
    title.textContent = entry.word;
    const body = document.createElement("p");
    body.textContent = entry.definition;
    card.appendChild(title);
    card.appendChild(body);
    sidebar.appendChild(card);
  }

  statusBar.textContent = state.lastError
    ? `error: ${state.lastError}`
    : `${state.connected ? "connected" : "disconnected"}` +
      ` | gaze ${state.sendRateHz.toFixed(0)} Hz` +
      ` | ${state.sidebar.length} unknown word(s)`;
  statusBar.classList.toggle("error", state.lastError !== null);
}
