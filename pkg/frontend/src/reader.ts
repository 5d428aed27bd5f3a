// The reader controller: wires the service client, the mouse-as-gaze
// sampler and the state fold to the DOM. main.ts boots it against the
// real browser; the scripted test drives it with fakes.

import { ServiceClient, SocketFactory } from "./client.js";
import { GazeSampler } from "./gaze.js";
import { DocumentLayout, ViewScale, parseLayout } from "./layout.js";
import {
  ReaderState,
  applyServerMessage,
  initialState,
  withConnection,
  withLayout,
  withSendRate,
} from "./state.js";
import { renderDocument, renderState } from "./render.js";

export interface ReaderElements {
  page: HTMLElement;
  sidebar: HTMLElement;
  statusBar: HTMLElement;
}

export class Reader {
  state: ReaderState = initialState();
  view: ViewScale = new ViewScale(1, 0, 0);
  readonly client: ServiceClient;
  readonly sampler: GazeSampler;

  constructor(
    private readonly els: ReaderElements,
    wsUrl: string,
    makeSocket: SocketFactory,
    private readonly now: () => number = () => performance.now(),
  ) {
    this.client = new ServiceClient(wsUrl, makeSocket);
    this.sampler = new GazeSampler(this.client);
    this.client.onStateChange = (connected) => {
      this.state = withConnection(this.state, connected);
      this.redraw();
    };
    this.client.onMessage = (msg) => {
      const wasOpen = this.state.docOpen;
      this.state = applyServerMessage(this.state, msg, this.now());
      if (!wasOpen && this.state.docOpen) {
        this.sampler.documentOpened(this.now());
      }
      this.redraw();
    };
  }

  connect(): void {
    this.client.connect();
  }

  openDocument(layoutJson: unknown, pageWidth: number): void {
    let layout: DocumentLayout;
    try {
      layout = parseLayout(layoutJson);
    } catch (err) {
      this.state = { ...this.state, lastError: String(err) };
      this.redraw();
      return;
    }
    this.view = ViewScale.fit(layout, pageWidth);
    this.state = withLayout(this.state, layout);
    this.sampler.documentClosed();
    renderDocument(this.els.page, layout, this.view);
    this.client.send({ type: "open_doc", doc_id: layout.doc_id });
    this.redraw();
  }

  /** Mouse position in page coordinates relative to the document pane. */
  pointerMoved(pageX: number, pageY: number): void {
    const [x, y] = this.view.toLayout(pageX, pageY);
    this.sampler.pointerMoved(x, y);
  }

  /** Call at display rate; the sampler throttles itself to 60 Hz. */
  tick(): void {
    const now = this.now();
    this.sampler.tick(now);
    const rate = this.sampler.sendRate(now);
    if (Math.abs(rate - this.state.sendRateHz) > 0.5) {
      this.state = withSendRate(this.state, rate);
      this.redraw();
    }
  }

  redraw(): void {
    renderState(this.els.page, this.els.sidebar, this.els.statusBar,
                this.state);
  }
}
