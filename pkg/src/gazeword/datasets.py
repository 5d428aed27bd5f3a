"""Turns (gaze stream, layout, labels) triples into labeled samples and
materializes train/dev/test splits."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import gaze as G
from .gaze import BoundingBox, GazeSample, Source, WindowStatus
from .knowledge import FrequencyTable, knowledge_features
from .model import WindowBatch
from .textdoc import DocumentLayout, Vocabulary, context_words, tokenize

SCREEN_W, SCREEN_H = 1512.0, 982.0
NGRAM_CONTEXT = 2          # preceding words kept per sample (max n = 3)
START_PAD = "<s>"


class MissingLabelError(KeyError):
    pass


@dataclass
class LabeledSample:
    """One candidate word in one accepted window, with all model features."""

    user_id: str
    doc_id: str
    window_index: int
    word_index: int
    word_text: str
    prev_words: list[str]          # preceding words, most recent last
    label: int
    source: str
    n_g: int
    word_dist: float               # mean gaze to word box center, raw pixels
    word_dur: int                  # samples inside the word box
    gaze_smooth: np.ndarray        # [L, 2] screen-normalized
    gaze_raw: np.ndarray           # [L, 2]
    token_ids: np.ndarray          # [T]
    token_pos: np.ndarray          # [T, 2] normalized box centers
    token_dist: np.ndarray         # [T] d(g, w) / screen diagonal
    token_dur: np.ndarray          # [T] t(g, w) / n_g
    know_tf_bin: np.ndarray
    know_pos: np.ndarray
    know_ner: np.ndarray
    know_log_tf: np.ndarray
    label_mask: np.ndarray         # [T] 1 on the candidate word's tokens

    @property
    def key(self) -> tuple:
        return (self.user_id, self.doc_id, self.window_index, self.word_index)


def _smooth_channel(samples, source: Source) -> list[GazeSample]:
    if source is Source.WEBCAM and len(samples) >= 1:
        return G.moving_average(samples, k=5)
    return list(samples)


def preprocess_stream(stream: list[GazeSample]) -> list[GazeSample]:
    """Webcam streams are moving-average filtered and then spline-resampled
    to 60 Hz; tracker streams pass through unchanged.

    Filtering before segmentation keeps the denoiser's instability check
    meaningful for the webcam source, whose raw jitter spans several line
    heights."""
    if not stream:
        return []
    if stream[0].source is Source.WEBCAM:
        resampled, _ = G.resample(G.moving_average(stream, k=5),
                                  target_hz=60.0)
        return resampled
    return list(stream)


def build_samples(stream: list[GazeSample], layout: DocumentLayout,
                  labels: dict[tuple[str, str, int], bool] | None,
                  user_id: str, vocab: Vocabulary,
                  freq_table: FrequencyTable,
                  screen: tuple[float, float] = (SCREEN_W, SCREEN_H),
                  max_tokens: int = 64,
                  origin_ms: float | None = None) -> list[LabeledSample]:
    """Full preprocessing pipeline: segment, denoise, locate, featurize.

    With labels=None (live inference) every sample is emitted with a
    zero placeholder label.
    """
    stream = preprocess_stream(stream)
    windows = G.segment_windows(stream, origin_ms=origin_ms)
    samples: list[LabeledSample] = []
    sw, sh = screen
    diag = math.hypot(sw, sh)
    source = stream[0].source.value if stream else Source.TRACKER.value
    lower_words = [w.text.lower() for w in layout.words]
    token_cache: dict[int, list] = {}

    for win in windows:
        win = G.reject_or_denoise(win, layout.line_height)
        if win.status is not WindowStatus.ACCEPTED:
            continue
        roi = G.region_of_interest(win)
        ctx = context_words(layout, roi)
        if not ctx:
            continue
        candidates = [w for w in ctx if not w.is_function_word]
        if not candidates:
            continue

        extended = win.extended_samples
        smooth = _smooth_channel(extended, stream[0].source)
        raw_xy = np.array([[s.x / sw, s.y / sh] for s in extended])
        smooth_xy = np.array([[s.x / sw, s.y / sh] for s in smooth])
        n_g = len(extended)
        gx = np.array([s.x for s in extended])
        gy = np.array([s.y for s in extended])
        mean_x, mean_y = gx.mean(), gy.mean()

        # tokenize and featurize the context once per window; the distance
        # and duration features are vectorized here but agree exactly with
        # the scalar ops
        entries = []   # (word, TokenSpan)
        for w in ctx:
            if w.word_index not in token_cache:
                token_cache[w.word_index] = tokenize(w, vocab)
            for span in token_cache[w.word_index]:
                entries.append((w, span))
        boxes = np.array([[sp.box.x_min, sp.box.y_min, sp.box.x_max,
                           sp.box.y_max] for _, sp in entries])
        centers = np.stack([(boxes[:, 0] + boxes[:, 2]) / 2,
                            (boxes[:, 1] + boxes[:, 3]) / 2], axis=1)
        dist_all = np.sqrt((mean_x - centers[:, 0]) ** 2
                           + (mean_y - centers[:, 1]) ** 2)
        inside = ((gx[None, :] >= boxes[:, 0:1]) & (gx[None, :] <= boxes[:, 2:3])
                  & (gy[None, :] >= boxes[:, 1:2]) & (gy[None, :] <= boxes[:, 3:4]))
        dur_all = inside.sum(axis=1)
        know = {}
        for w, _ in entries:
            if w.word_index not in know:
                know[w.word_index] = knowledge_features(w, freq_table)
        ids_all = np.array([sp.token_id for _, sp in entries], dtype=np.int64)
        word_idx_all = np.array([w.word_index for w, _ in entries])
        pos_all = centers / np.array([sw, sh])
        tfb_all = np.array([know[w.word_index].tf_bin for w, _ in entries],
                           dtype=np.int64)
        posi_all = np.array([know[w.word_index].pos_index for w, _ in entries],
                            dtype=np.int64)
        neri_all = np.array([know[w.word_index].ner_index for w, _ in entries],
                            dtype=np.int64)
        ltf_all = np.array([know[w.word_index].log_term_frequency
                            for w, _ in entries])

        for cand in candidates:
            if labels is None:
                label = 0
            else:
                key = (user_id, layout.doc_id, cand.word_index)
                if key not in labels:
                    raise MissingLabelError(
                        f"no label for word {cand.text!r} "
                        f"(doc {layout.doc_id}, index {cand.word_index})")
                label = int(labels[key])
            lo, hi = _clip_context(entries, cand, max_tokens)
            sel = slice(lo, hi)
            cand_mask = (word_idx_all[sel] == cand.word_index).astype(float)

            wd = float(np.sqrt((mean_x - cand.box.center[0]) ** 2
                               + (mean_y - cand.box.center[1]) ** 2))
            wdur = int(np.sum((gx >= cand.box.x_min) & (gx <= cand.box.x_max)
                              & (gy >= cand.box.y_min)
                              & (gy <= cand.box.y_max)))
            i = cand.word_index
            prev = [START_PAD] * max(0, NGRAM_CONTEXT - i) \
                + lower_words[max(0, i - NGRAM_CONTEXT):i]
            samples.append(LabeledSample(
                user_id=user_id, doc_id=layout.doc_id,
                window_index=win.index, word_index=cand.word_index,
                word_text=cand.text.lower(), prev_words=prev, label=label,
                source=source, n_g=n_g, word_dist=wd, word_dur=wdur,
                gaze_smooth=smooth_xy, gaze_raw=raw_xy,
                token_ids=ids_all[sel],
                token_pos=pos_all[sel], token_dist=dist_all[sel] / diag,
                token_dur=dur_all[sel] / n_g,
                know_tf_bin=tfb_all[sel], know_pos=posi_all[sel],
                know_ner=neri_all[sel], know_log_tf=ltf_all[sel],
                label_mask=cand_mask,
            ))
    return samples


def _clip_context(entries, cand, max_tokens: int) -> tuple[int, int]:
    """Slice bounds keeping at most max_tokens entries, always retaining
    the candidate's tokens by centering the context window on them."""
    if len(entries) <= max_tokens:
        return 0, len(entries)
    idx = [i for i, (w, _) in enumerate(entries)
           if w.word_index == cand.word_index]
    center = (idx[0] + idx[-1]) // 2
    lo = max(0, center - max_tokens // 2)
    hi = lo + max_tokens
    if hi > len(entries):
        hi = len(entries)
        lo = hi - max_tokens
    return lo, hi


# ------------------------------------------------------------------ batching

def make_batch(samples: list[LabeledSample]) -> WindowBatch:
    """Pad a list of samples to the batch's max gaze/token lengths."""
    b = len(samples)
    L = max(s.gaze_raw.shape[0] for s in samples)
    Tn = max(s.token_ids.shape[0] for s in samples)
    gaze = np.zeros((b, L, 4))
    gaze_mask = np.zeros((b, L))
    token_ids = np.zeros((b, Tn), dtype=np.int64)
    token_pos = np.zeros((b, Tn, 2))
    token_dist = np.zeros((b, Tn))
    token_dur = np.zeros((b, Tn))
    tf_b = np.zeros((b, Tn), dtype=np.int64)
    pos_i = np.zeros((b, Tn), dtype=np.int64)
    ner_i = np.zeros((b, Tn), dtype=np.int64)
    log_tf = np.zeros((b, Tn))
    token_mask = np.zeros((b, Tn))
    label_mask = np.zeros((b, Tn))
    labels = np.zeros((b, Tn))
    for i, s in enumerate(samples):
        n, t = s.gaze_raw.shape[0], s.token_ids.shape[0]
        gaze[i, :n, :2] = s.gaze_smooth
        gaze[i, :n, 2:] = s.gaze_raw
        gaze_mask[i, :n] = 1.0
        token_ids[i, :t] = s.token_ids
        token_pos[i, :t] = s.token_pos
        token_dist[i, :t] = s.token_dist
        token_dur[i, :t] = s.token_dur
        tf_b[i, :t] = s.know_tf_bin
        pos_i[i, :t] = s.know_pos
        ner_i[i, :t] = s.know_ner
        log_tf[i, :t] = s.know_log_tf
        token_mask[i, :t] = 1.0
        label_mask[i, :t] = s.label_mask
        labels[i, :t] = s.label * s.label_mask
    return WindowBatch(gaze=gaze, gaze_mask=gaze_mask, token_ids=token_ids,
                       token_pos=token_pos, token_dist=token_dist,
                       token_dur=token_dur, know_tf_bin=tf_b, know_pos=pos_i,
                       know_ner=ner_i, know_log_tf=log_tf,
                       token_mask=token_mask, label_mask=label_mask,
                       labels=labels)


# ------------------------------------------------------------------- splits

class SplitMode(str, Enum):
    MIXED = "mixed"
    CROSS_USER = "cross_user"
    CROSS_DOCUMENT = "cross_document"


@dataclass
class SplitSpec:
    mode: SplitMode = SplitMode.MIXED
    seed: int = 0
    dev_ids: list[str] = field(default_factory=list)
    test_ids: list[str] = field(default_factory=list)


def split(samples: list[LabeledSample],
          spec: SplitSpec) -> dict[str, list[LabeledSample]]:
    """Deterministic 8:1:1 mixed split, or held-out-id cross splits."""
    if spec.mode is SplitMode.MIXED:
        order = np.random.default_rng(spec.seed).permutation(len(samples))
        shuffled = [samples[i] for i in order]
        n = len(samples)
        n_dev = n_test = n // 10
        parts = {
            "train": shuffled[:n - n_dev - n_test],
            "dev": shuffled[n - n_dev - n_test:n - n_test],
            "test": shuffled[n - n_test:],
        }
    else:
        attr = "user_id" if spec.mode is SplitMode.CROSS_USER else "doc_id"
        dev_ids, test_ids = set(spec.dev_ids), set(spec.test_ids)
        parts = {"train": [], "dev": [], "test": []}
        for s in samples:
            v = getattr(s, attr)
            if v in test_ids:
                parts["test"].append(s)
            elif v in dev_ids:
                parts["dev"].append(s)
            else:
                parts["train"].append(s)
    for name, part in parts.items():
        if not part:
            raise ValueError(f"split leaves {name!r} empty "
                             f"(mode {spec.mode.value})")
    return parts


def split_manifest(parts: dict[str, list[LabeledSample]],
                   spec: SplitSpec) -> dict:
    return {
        "mode": spec.mode.value,
        "seed": spec.seed,
        "dev_ids": sorted(spec.dev_ids),
        "test_ids": sorted(spec.test_ids),
        "counts": {k: len(v) for k, v in parts.items()},
    }


def class_imbalance(samples: list[LabeledSample]) -> float:
    """Token-level negative:positive ratio over labeled (candidate) tokens."""
    if not samples:
        raise ValueError("no samples")
    pos = neg = 0
    for s in samples:
        n_tok = int(s.label_mask.sum())
        if s.label:
            pos += n_tok
        else:
            neg += n_tok
    if pos == 0:
        import warnings
        warnings.warn("no positive tokens; imbalance ratio is infinite")
        return math.inf
    return neg / pos


# ------------------------------------------------------------------ file IO

def sample_to_json(s: LabeledSample) -> dict:
    rnd = lambda a: np.round(a, 5).tolist()
    return {
        "user_id": s.user_id, "doc_id": s.doc_id,
        "window_index": s.window_index, "word_index": s.word_index,
        "word_text": s.word_text, "prev_words": s.prev_words,
        "label": s.label, "source": s.source, "n_g": s.n_g,
        "word_dist": round(s.word_dist, 4), "word_dur": s.word_dur,
        "gaze_smooth": rnd(s.gaze_smooth), "gaze_raw": rnd(s.gaze_raw),
        "token_ids": s.token_ids.tolist(), "token_pos": rnd(s.token_pos),
        "token_dist": rnd(s.token_dist), "token_dur": rnd(s.token_dur),
        "know_tf_bin": s.know_tf_bin.tolist(),
        "know_pos": s.know_pos.tolist(), "know_ner": s.know_ner.tolist(),
        "know_log_tf": rnd(s.know_log_tf),
        "label_mask": s.label_mask.tolist(),
    }


def sample_from_json(obj: dict) -> LabeledSample:
    return LabeledSample(
        user_id=obj["user_id"], doc_id=obj["doc_id"],
        window_index=int(obj["window_index"]),
        word_index=int(obj["word_index"]), word_text=obj["word_text"],
        prev_words=list(obj["prev_words"]), label=int(obj["label"]),
        source=obj["source"], n_g=int(obj["n_g"]),
        word_dist=float(obj["word_dist"]), word_dur=int(obj["word_dur"]),
        gaze_smooth=np.array(obj["gaze_smooth"]),
        gaze_raw=np.array(obj["gaze_raw"]),
        token_ids=np.array(obj["token_ids"], dtype=np.int64),
        token_pos=np.array(obj["token_pos"]),
        token_dist=np.array(obj["token_dist"]),
        token_dur=np.array(obj["token_dur"]),
        know_tf_bin=np.array(obj["know_tf_bin"], dtype=np.int64),
        know_pos=np.array(obj["know_pos"], dtype=np.int64),
        know_ner=np.array(obj["know_ner"], dtype=np.int64),
        know_log_tf=np.array(obj["know_log_tf"]),
        label_mask=np.array(obj["label_mask"]),
    )


def write_samples(path, samples: list[LabeledSample]) -> None:
    with open(path, "w") as f:
        for s in samples:
            f.write(json.dumps(sample_to_json(s)) + "\n")


def read_samples(path) -> list[LabeledSample]:
    out = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if line:
                out.append(sample_from_json(json.loads(line)))
    return out
