"""Synthetic reading corpus: documents, per-user unknown-word labels, and
simulated gaze streams with tracker-grade and webcam-grade noise.

The simulator plants the dwell/regression signal on unknown words; all
end-to-end evaluation runs against this generated ground truth.
"""

from __future__ import annotations

import hashlib
import json
import math
import string
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np

from .gaze import BoundingBox, GazeSample, Source, write_stream
from .knowledge import FrequencyTable, _GAZETTEER
from .textdoc import (DocumentLayout, FUNCTION_WORDS, LayoutWord,
                      write_labels, write_layout)

SCREEN_W, SCREEN_H = 1512.0, 982.0
LINE_HEIGHT = 20.6
MARGIN = 80.0
CHAR_W = 6.2
SPACE_W = 4.5

LEXICON_SIZE = 3000
ZIPF_EXPONENT = 1.1
FUNCTION_WORD_RATE = 0.35
SENTENCE_LEN = 12

_COMMON_FUNCTION = ["the", "of", "and", "to", "in", "a", "is", "that",
                    "for", "it", "as", "was", "with", "be", "by", "on",
                    "not", "he", "this", "are", "or", "his", "from", "at",
                    "which", "but", "have", "an", "had", "they", "you",
                    "were", "their", "one", "all", "we", "can", "her",
                    "has", "there"]


@dataclass
class UserProfile:
    user_id: str
    proficiency: int            # frequency-rank threshold into the lexicon
    label_noise: float = 0.015
    dwell_gain: float = 3.0

    def __post_init__(self):
        if self.proficiency <= 0:
            raise ValueError("proficiency must be positive")
        if not (0.0 <= self.label_noise <= 0.2):
            raise ValueError("label_noise must lie in [0, 0.2]")


@dataclass
class NoiseModel:
    kind: str                   # "tracker" or "webcam"
    jitter_x: float
    jitter_y: float
    offset_x: float             # per-stream constant offset scale
    offset_y: float
    drift_rate: float           # px per minute
    rate_lo: float
    rate_hi: float
    dropout: float

    @classmethod
    def tracker(cls) -> "NoiseModel":
        return cls(kind="tracker", jitter_x=18.0, jitter_y=14.0,
                   offset_x=6.0, offset_y=5.0, drift_rate=2.0,
                   rate_lo=60.0, rate_hi=60.0, dropout=0.02)

    @classmethod
    def webcam(cls) -> "NoiseModel":
        return cls(kind="webcam", jitter_x=108.0, jitter_y=66.0,
                   offset_x=100.0, offset_y=58.0, drift_rate=12.0,
                   rate_lo=24.0, rate_hi=27.0, dropout=0.05)

    @classmethod
    def named(cls, kind: str) -> "NoiseModel":
        if kind == "tracker":
            return cls.tracker()
        if kind == "webcam":
            return cls.webcam()
        raise ValueError(f"unknown noise kind {kind!r}")


def _make_lexicon(rng: np.random.Generator) -> list[str]:
    """Deterministic pseudo-word lexicon; rarer words trend longer."""
    letters = string.ascii_lowercase
    weights = np.array([8, 2, 3, 4, 12, 2, 2, 5, 8, 1, 1, 4, 3, 7, 8,
                        2, 1, 6, 6, 9, 3, 1, 2, 1, 2, 1], dtype=float)
    weights /= weights.sum()
    suffixes = ["", "", "", "tion", "ment", "ous", "ive", "ly", "ness",
                "ize", "al", "ist", "able", "ic", "ance"]
    seen = set(FUNCTION_WORDS) | set(_COMMON_FUNCTION)
    lexicon = []
    while len(lexicon) < LEXICON_SIZE:
        rank = len(lexicon)
        base_len = 3 + int(5 * rank / LEXICON_SIZE) + rng.integers(0, 3)
        word = "".join(rng.choice(list(letters), size=base_len, p=weights))
        if rank > LEXICON_SIZE // 4 and rng.random() < 0.4:
            word += suffixes[rng.integers(0, len(suffixes))]
        if word in seen or len(word) < 2:
            continue
        seen.add(word)
        lexicon.append(word)
    return lexicon


def _zipf_probs() -> np.ndarray:
    ranks = np.arange(1, LEXICON_SIZE + 1, dtype=float)
    p = ranks ** -ZIPF_EXPONENT
    return p / p.sum()


_NAMES = sorted(_GAZETTEER["person"] | _GAZETTEER["place"] | _GAZETTEER["org"])


def gen_corpus(seed: int, n_docs: int, words_per_doc: int = 363
               ) -> tuple[list[DocumentLayout], FrequencyTable, dict[str, int]]:
    """Generate laid-out documents with a Zipf lexicon.

    Returns (layouts, frequency table, word -> true lexicon rank).
    """
    if words_per_doc < 50:
        raise ValueError(f"words_per_doc must be >= 50, got {words_per_doc}")
    rng = np.random.default_rng(seed)
    lexicon = _make_lexicon(rng)
    probs = _zipf_probs()
    ranks = {w: i + 1 for i, w in enumerate(lexicon)}

    layouts = []
    for d in range(n_docs):
        doc_rng = np.random.default_rng(seed * 100003 + d)
        words = []
        pos_in_sentence = 0
        for _ in range(words_per_doc):
            if doc_rng.random() < 0.01:
                text = _NAMES[doc_rng.integers(0, len(_NAMES))].capitalize()
            elif doc_rng.random() < FUNCTION_WORD_RATE:
                text = _COMMON_FUNCTION[doc_rng.integers(0, len(_COMMON_FUNCTION))]
            else:
                r = doc_rng.choice(LEXICON_SIZE, p=probs)
                text = lexicon[r]
            if pos_in_sentence == 0:
                text = text.capitalize()
            words.append(text)
            pos_in_sentence = (pos_in_sentence + 1) % SENTENCE_LEN
        layouts.append(_lay_out(f"doc{d:03d}", words))
    freq = FrequencyTable.from_corpus(layouts)
    return layouts, freq, ranks


def _lay_out(doc_id: str, words: list[str]) -> DocumentLayout:
    """Flow words into a single-spaced two-column page."""
    col_w = (SCREEN_W - 3 * MARGIN) / 2
    col_lines = int((SCREEN_H - 2 * MARGIN) / LINE_HEIGHT)
    cols = [BoundingBox(MARGIN, MARGIN, MARGIN + col_w, SCREEN_H - MARGIN),
            BoundingBox(2 * MARGIN + col_w, MARGIN,
                        2 * MARGIN + 2 * col_w, SCREEN_H - MARGIN)]
    layout_words = []
    col = 0
    line = 0
    x = cols[0].x_min
    for text in words:
        w = len(text) * CHAR_W
        if x + w > cols[col].x_max:
            line += 1
            if line % col_lines == 0 and col + 1 < len(cols):
                col += 1
            x = cols[col].x_min
        y0 = MARGIN + (line % col_lines) * LINE_HEIGHT
        layout_words.append(LayoutWord(
            text=text, box=BoundingBox(x, y0, x + w, y0 + LINE_HEIGHT),
            line_index=line))
        x += w + SPACE_W
    return DocumentLayout(doc_id=doc_id, words=layout_words,
                          line_height=LINE_HEIGHT, column_boxes=cols)


def make_users(seed: int, n_users: int, dwell_gain: float = 3.0,
               label_noise: float = 0.015) -> list[UserProfile]:
    """Proficiency thresholds spread geometrically across the lexicon."""
    lo, hi = 1650, 2950
    users = []
    for i in range(n_users):
        frac = i / max(1, n_users - 1)
        thr = int(lo * (hi / lo) ** frac)
        users.append(UserProfile(user_id=f"user{i:02d}", proficiency=thr,
                                 label_noise=label_noise,
                                 dwell_gain=dwell_gain))
    return users


USER_THRESHOLD_SPREAD = 0.3   # per-(user, word) log-jitter of the threshold


def _user_word_threshold(profile: UserProfile, word: str,
                         seed: int) -> float:
    """Each user's effective rank threshold varies per word, so different
    users' unknown-word sets overlap only partially even at equal
    proficiency (mirrors real inter-user vocabulary dispersion)."""
    u = (_stable_seed(seed, "vocab", profile.user_id, word) % 10**6) / 10**6
    return profile.proficiency * math.exp(USER_THRESHOLD_SPREAD * (2 * u - 1))


def assign_labels(profile: UserProfile, layout: DocumentLayout,
                  ranks: dict[str, int], seed: int) -> dict[int, bool]:
    """Per-word unknown labels: words rarer than the user's (per-word
    jittered) proficiency threshold are unknown with probability
    1 - label_noise, the rest with probability label_noise. Function
    words are always known."""
    rng = np.random.default_rng(
        _stable_seed(seed, profile.user_id, layout.doc_id))
    out = {}
    for w in layout.words:
        if w.is_function_word:
            out[w.word_index] = False
            continue
        word = w.text.lower()
        rank = ranks.get(word, LEXICON_SIZE + 1)
        thr = _user_word_threshold(profile, word, seed)
        p = (1.0 - profile.label_noise) if rank > thr else profile.label_noise
        out[w.word_index] = bool(rng.random() < p)
    return out


def _stable_seed(*parts) -> int:
    h = hashlib.sha256("|".join(str(p) for p in parts).encode()).digest()
    return int.from_bytes(h[:8], "little")


@dataclass
class Fixation:
    word_index: int
    x: float
    y: float
    duration_ms: float


def build_scanpath(layout: DocumentLayout, labels: dict[int, bool],
                   profile: UserProfile, seed: int) -> list[Fixation]:
    """Left-to-right, line-by-line fixation sequence with extended dwell
    and occasional regressions on unknown words."""
    if not layout.words:
        raise ValueError("empty layout")
    rng = np.random.default_rng(
        _stable_seed(seed, "scan", profile.user_id, layout.doc_id))
    path: list[Fixation] = []
    pending_regression: Fixation | None = None
    for w in layout.words:
        if w.is_function_word and rng.random() < 0.25:
            continue  # short function words are often skipped
        base = float(np.clip(rng.normal(360.0, 70.0), 150.0, 700.0))
        dur = base
        cx, cy = w.box.center
        fx = cx + rng.normal(0.0, 6.0)
        fy = cy + rng.normal(0.0, 4.0)
        if labels.get(w.word_index, False):
            dur *= profile.dwell_gain
            if rng.random() < 0.3:
                pending_regression = Fixation(w.word_index, fx, fy,
                                              0.5 * base * profile.dwell_gain)
        path.append(Fixation(w.word_index, fx, fy, dur))
        if pending_regression is not None and \
                pending_regression.word_index != w.word_index:
            path.append(pending_regression)
            pending_regression = None
    return path


SACCADE_MS = 30.0


def emit_stream(path: list[Fixation], noise: NoiseModel,
                seed: int) -> list[GazeSample]:
    """Sample a fixation sequence into a noisy gaze stream."""
    rng = np.random.default_rng(_stable_seed(seed, "emit", noise.kind))
    hz = float(rng.uniform(noise.rate_lo, noise.rate_hi))
    dt = 1000.0 / hz
    # per-stream calibration offset: stable magnitude, random direction
    off_x = rng.choice([-1.0, 1.0]) * noise.offset_x * rng.uniform(0.75, 1.25)
    off_y = rng.choice([-1.0, 1.0]) * noise.offset_y * rng.uniform(0.75, 1.25)
    drift_dir = rng.choice([-1.0, 1.0], size=2)
    source = Source.TRACKER if noise.kind == "tracker" else Source.WEBCAM
    samples: list[GazeSample] = []
    t = 0.0
    next_t = 0.0
    for fix in path:
        t_end = t + fix.duration_ms
        while next_t < t_end:
            if rng.random() >= noise.dropout:
                minutes = next_t / 60000.0
                x = fix.x + off_x + drift_dir[0] * noise.drift_rate * minutes \
                    + rng.normal(0.0, noise.jitter_x)
                y = fix.y + off_y + drift_dir[1] * noise.drift_rate * minutes \
                    + rng.normal(0.0, noise.jitter_y)
                samples.append(GazeSample(t_ms=next_t, x=float(x),
                                          y=float(y), source=source))
            next_t += dt
        t = t_end + SACCADE_MS
        next_t = max(next_t, t)
    return samples


def reference_stream(path: list[Fixation], hz: float = 60.0) -> list[GazeSample]:
    """Noiseless 60 Hz rendering of a scanpath, for error measurement."""
    samples = []
    t = 0.0
    next_t = 0.0
    dt = 1000.0 / hz
    for fix in path:
        t_end = t + fix.duration_ms
        while next_t < t_end:
            samples.append(GazeSample(t_ms=next_t, x=fix.x, y=fix.y))
            next_t += dt
        t = t_end + SACCADE_MS
        next_t = max(next_t, t)
    return samples


def simulate_gaze(layout: DocumentLayout, labels: dict[int, bool],
                  profile: UserProfile, noise: NoiseModel,
                  seed: int) -> list[GazeSample]:
    path = build_scanpath(layout, labels, profile, seed)
    return emit_stream(path, noise,
                       _stable_seed(seed, profile.user_id, layout.doc_id))


# ------------------------------------------------------------------- export

def export_dataset(out_dir, seed: int = 7, n_users: int = 8, n_docs: int = 20,
                   words_per_doc: int = 363, dwell_gain: float = 3.0,
                   label_noise: float = 0.015,
                   noise_kinds: tuple[str, ...] = ("tracker", "webcam")) -> dict:
    """Write layouts, labels, gaze streams and a manifest; reproducible
    from the seed."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "layouts").mkdir(exist_ok=True)
    (out / "streams").mkdir(exist_ok=True)

    layouts, freq, ranks = gen_corpus(seed, n_docs, words_per_doc)
    users = make_users(seed, n_users, dwell_gain, label_noise)

    files: dict[str, str] = {}
    for layout in layouts:
        p = out / "layouts" / f"{layout.doc_id}.json"
        write_layout(p, layout)
        files[str(p.relative_to(out))] = _file_hash(p)
    freq_path = out / "freq_table.json"
    freq.save(freq_path)
    files["freq_table.json"] = _file_hash(freq_path)

    label_rows = []
    n_streams = 0
    for user in users:
        for layout in layouts:
            labels = assign_labels(user, layout, ranks, seed)
            for idx, unknown in labels.items():
                label_rows.append({"user_id": user.user_id,
                                   "doc_id": layout.doc_id,
                                   "word_index": idx, "unknown": unknown})
            path = build_scanpath(layout, labels, user, seed)
            for kind in noise_kinds:
                stream = emit_stream(path, NoiseModel.named(kind),
                                     _stable_seed(seed, user.user_id,
                                                  layout.doc_id))
                p = out / "streams" / \
                    f"{user.user_id}_{layout.doc_id}_{kind}.jsonl"
                write_stream(p, stream)
                files[str(p.relative_to(out))] = _file_hash(p)
                n_streams += 1
    labels_path = out / "labels.jsonl"
    write_labels(labels_path, label_rows)
    files["labels.jsonl"] = _file_hash(labels_path)

    manifest = {
        "seed": seed,
        "config": {"n_users": n_users, "n_docs": n_docs,
                   "words_per_doc": words_per_doc, "dwell_gain": dwell_gain,
                   "label_noise": label_noise,
                   "noise_kinds": list(noise_kinds),
                   "lexicon_size": LEXICON_SIZE,
                   "zipf_exponent": ZIPF_EXPONENT},
        "users": [asdict(u) for u in users],
        "counts": {"docs": n_docs, "users": n_users,
                   "streams": n_streams, "labels": len(label_rows)},
        "files": dict(sorted(files.items())),
    }
    with open(out / "manifest.json", "w") as f:
        json.dump(manifest, f, indent=1, sort_keys=True)
    return manifest


def _file_hash(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()[:16]


def load_export(data_dir) -> dict:
    """Read a generated dataset directory back into memory."""
    from .textdoc import read_labels, read_layout
    from .gaze import read_stream
    data = Path(data_dir)
    with open(data / "manifest.json") as f:
        manifest = json.load(f)
    layouts = {}
    for p in sorted((data / "layouts").glob("*.json")):
        layout = read_layout(p)
        layouts[layout.doc_id] = layout
    labels = read_labels(data / "labels.jsonl")
    freq = FrequencyTable.load(data / "freq_table.json")
    streams = {}
    for p in sorted((data / "streams").glob("*.jsonl")):
        user_id, doc_id, kind = p.stem.rsplit("_", 2)
        streams[(user_id, doc_id, kind)] = read_stream(p)
    return {"manifest": manifest, "layouts": layouts, "labels": labels,
            "freq_table": freq, "streams": streams}
