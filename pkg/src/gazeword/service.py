"""Real-time detection service: ingests gaze messages per session, closes
1 s windows, runs the pipeline + model, and pushes detection events.

The same engine backs the WebSocket endpoint and offline replay, so online
and offline predictions agree exactly for identical window boundaries.
"""

from __future__ import annotations

import json
import resource
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.responses import JSONResponse

from . import gaze as G
from .datasets import build_samples
from .gaze import GazeSample, Source
from .knowledge import FrequencyTable
from .model import DetectorModel
from .textdoc import DocumentLayout, Vocabulary, read_layout
from .training import load_model, predict

WINDOW_MS = 1000.0


@dataclass
class DetectionEvent:
    word: str
    word_index: int
    window: int
    p: float
    definition: str

    def to_json(self) -> dict:
        return {"type": "detection", "word": self.word,
                "word_index": self.word_index, "window": self.window,
                "p": round(self.p, 4), "definition": self.definition}


class Dictionary:
    """Local definition lookup, a stub for an external definition service."""

    def __init__(self, entries: dict[str, str] | None = None):
        self.entries = {k.lower(): v for k, v in (entries or {}).items()}

    @classmethod
    def load(cls, path) -> "Dictionary":
        with open(path) as f:
            return cls(json.load(f))

    def define(self, word: str) -> str:
        return self.entries.get(word.lower(),
                                f"No definition available for '{word}'.")


class DetectionEngine:
    """Frozen model + vocabulary + threshold; pure per-window inference."""

    def __init__(self, model: DetectorModel, threshold: float,
                 vocab: Vocabulary, freq_table: FrequencyTable,
                 dictionary: Dictionary | None = None):
        self.model = model
        self.threshold = threshold
        self.vocab = vocab
        self.freq_table = freq_table
        self.dictionary = dictionary or Dictionary()

    @classmethod
    def from_files(cls, checkpoint, vocab_path, freq_path,
                   dictionary_path=None) -> "DetectionEngine":
        model, threshold, vocab_hash = load_model(checkpoint)
        vocab = Vocabulary.load(vocab_path)
        if vocab_hash and vocab.content_hash() != vocab_hash:
            raise ValueError("vocabulary does not match the checkpoint")
        freq = FrequencyTable.load(freq_path)
        dictionary = Dictionary.load(dictionary_path) if dictionary_path \
            else Dictionary()
        return cls(model, threshold, vocab, freq, dictionary)

    def detect_window(self, window_samples: list[GazeSample],
                      layout: DocumentLayout,
                      origin_ms: float) -> list[tuple[int, str, float]]:
        """Run the offline pipeline on one window's worth of stream (core
        plus its ±1 s context, segmented from origin_ms) and return
        (word_index, word, p) above threshold for the middle window."""
        samples = build_samples(window_samples, layout, None, "live",
                                self.vocab, self.freq_table,
                                origin_ms=origin_ms)
        samples = [s for s in samples if s.window_index == 1]
        if not samples:
            return []
        probs = predict(self.model, samples)
        return [(s.word_index, s.word_text, float(p))
                for s, p in zip(samples, probs) if p >= self.threshold]


class Session:
    """One client's stream state: ring buffer, window cursor, emitted-word
    dedup set and a per-window latency log."""

    def __init__(self, engine: DetectionEngine, session_id: str = "s0"):
        self.engine = engine
        self.session_id = session_id
        self.layout: DocumentLayout | None = None
        self.buffer: list[GazeSample] = []
        self.t0: float | None = None
        self.next_window = 0
        self.emitted: set[int] = set()
        self.latency_log: list[dict] = []

    def open_doc(self, layout: DocumentLayout) -> dict:
        self.layout = layout
        self.buffer = []
        self.t0 = None
        self.next_window = 0
        self.emitted = set()
        return {"type": "status", "ok": True, "doc_id": layout.doc_id,
                "words": len(layout.words)}

    def ingest(self, sample: GazeSample) -> list[DetectionEvent]:
        """Buffer one gaze sample; returns events for any window that just
        became fully observable (core plus trailing 1 s extension)."""
        if self.layout is None:
            raise RuntimeError("no document open")
        if self.buffer and sample.t_ms < self.buffer[-1].t_ms:
            raise ValueError("timestamps must be nondecreasing")
        self.buffer.append(sample)
        if self.t0 is None:
            self.t0 = sample.t_ms
        events: list[DetectionEvent] = []
        # window w closes at t0 + (w+1)s; it is processable once the
        # trailing extension second has also streamed in
        while sample.t_ms >= self.t0 + (self.next_window + 2) * WINDOW_MS:
            events.extend(self._process(self.next_window))
            self.next_window += 1
        # bound the buffer to what future windows can still reference
        horizon = self.t0 + (self.next_window - 1) * WINDOW_MS
        while self.buffer and self.buffer[0].t_ms < horizon:
            self.buffer.pop(0)
        return events

    def flush(self) -> list[DetectionEvent]:
        """Process any window whose core is complete but whose trailing
        extension was cut short by the end of the stream."""
        if self.t0 is None or not self.buffer:
            return []
        events = []
        last = self.buffer[-1].t_ms
        while last >= self.t0 + (self.next_window + 1) * WINDOW_MS:
            events.extend(self._process(self.next_window))
            self.next_window += 1
        return events

    def _process(self, w: int) -> list[DetectionEvent]:
        start = time.perf_counter()
        lo = self.t0 + (w - 1) * WINDOW_MS
        hi = self.t0 + (w + 2) * WINDOW_MS
        chunk = [s for s in self.buffer if lo <= s.t_ms < hi]
        events = []
        if chunk:
            for word_index, word, p in self.engine.detect_window(
                    chunk, self.layout, origin_ms=lo):
                if word_index in self.emitted:
                    continue
                self.emitted.add(word_index)
                events.append(DetectionEvent(
                    word=word, word_index=word_index, window=w, p=p,
                    definition=self.engine.dictionary.define(word)))
        self.latency_log.append(
            {"window": w,
             "seconds": round(time.perf_counter() - start, 4),
             "events": len(events)})
        return events

    def handle_message(self, msg: dict,
                       layouts: dict[str, DocumentLayout]) -> list[dict]:
        """Dispatch one wire message; malformed input yields an error reply
        and the session survives."""
        try:
            kind = msg.get("type")
            if kind == "open_doc":
                doc_id = msg["doc_id"]
                if doc_id not in layouts:
                    return [{"type": "error",
                             "message": f"unknown doc_id {doc_id!r}"}]
                return [self.open_doc(layouts[doc_id])]
            if kind == "gaze":
                sample = GazeSample(
                    t_ms=float(msg["t_ms"]), x=float(msg["x"]),
                    y=float(msg["y"]),
                    source=Source(msg.get("src", "tracker")))
                return [e.to_json() for e in self.ingest(sample)]
            if kind == "close":
                return [e.to_json() for e in self.flush()]
            return [{"type": "error", "message": f"unknown type {kind!r}"}]
        except Exception as exc:
            return [{"type": "error", "message": str(exc)}]


# --------------------------------------------------------------- replay

def replay(stream: list[GazeSample], layout: DocumentLayout,
           engine: DetectionEngine) -> tuple[list[DetectionEvent], list[dict]]:
    """Feed a recorded stream through a session; returns (events, latency
    log). This exercises the exact online code path."""
    session = Session(engine)
    session.open_doc(layout)
    events: list[DetectionEvent] = []
    for s in stream:
        events.extend(session.ingest(s))
    events.extend(session.flush())
    return events, session.latency_log


# --------------------------------------------------------------- latency

def measure_latency(engine: DetectionEngine, samples,
                    n_trials: int = 50, warmup: int = 5) -> dict:
    """Batch-1 model inference wall-clock stats plus the process memory
    high-water mark."""
    from .datasets import make_batch
    times = []
    pool = samples[:max(1, len(samples))]
    for i in range(warmup + n_trials):
        s = pool[i % len(pool)]
        batch = make_batch([s])
        t0 = time.perf_counter()
        engine.model.forward(batch)
        dt = time.perf_counter() - t0
        if i >= warmup:
            times.append(dt)
    times = np.array(times)
    rss_kb = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss
    return {
        "n_trials": n_trials,
        "mean_ms": float(times.mean() * 1000),
        "p50_ms": float(np.percentile(times, 50) * 1000),
        "p95_ms": float(np.percentile(times, 95) * 1000),
        "max_rss_mb": round(rss_kb / 1024.0, 1),
    }


# ------------------------------------------------------------------- app

def create_app(engine: DetectionEngine, layout_dir,
               frontend_dir=None):
    """FastAPI app exposing the newline-delimited JSON protocol over a
    WebSocket, plus layout retrieval for the reader frontend."""
    layouts: dict[str, DocumentLayout] = {}
    for p in sorted(Path(layout_dir).glob("*.json")):
        layout = read_layout(p)
        layouts[layout.doc_id] = layout

    app = FastAPI(title="gazeword service")
    app.state.layouts = layouts
    app.state.engine = engine
    session_counter = {"n": 0}

    @app.get("/documents")
    def documents():
        return {"doc_ids": sorted(layouts.keys())}

    @app.get("/layout/{doc_id}")
    def layout(doc_id: str):
        from .textdoc import layout_to_json
        if doc_id not in layouts:
            return JSONResponse({"error": f"unknown doc_id {doc_id!r}"},
                                status_code=404)
        return layout_to_json(layouts[doc_id])

    @app.websocket("/ws")
    async def ws(websocket: WebSocket):
        socket = websocket  # local alias; FastAPI binds by parameter name
        await socket.accept()
        session_counter["n"] += 1
        session = Session(engine, session_id=f"s{session_counter['n']}")
        try:
            while True:
                raw = await socket.receive_text()
                for line in raw.splitlines():
                    line = line.strip()
                    if not line:
                        continue
                    try:
                        msg = json.loads(line)
                    except json.JSONDecodeError as exc:
                        replies = [{"type": "error",
                                    "message": f"bad JSON: {exc}"}]
                    else:
                        replies = session.handle_message(msg, layouts)
                    for reply in replies:
                        await socket.send_text(json.dumps(reply))
        except WebSocketDisconnect:
            pass

    if frontend_dir:
        from fastapi.staticfiles import StaticFiles
        app.mount("/", StaticFiles(directory=str(frontend_dir), html=True),
                  name="frontend")
    return app
