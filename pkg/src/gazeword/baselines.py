"""Comparison methods: distance/fixation heuristics, logistic regression
on hand-built features, and the n-gram memorization baseline."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .datasets import LabeledSample
from .knowledge import NER_TAGS, POS_TAGS
from .tensor import AdamOptimizer, Parameter
from .training import f1_from_counts


def _grid(lo: float, hi: float) -> np.ndarray:
    """The 101-point calibration grid scaled to an observed feature range."""
    return lo + (hi - lo) * np.arange(0, 101) / 100.0


def _best_threshold(values: np.ndarray, labels: np.ndarray,
                    predicate) -> float:
    labels = np.asarray(labels, dtype=bool)
    grid = _grid(float(values.min()), float(values.max()))
    best_t, best_f1 = float(grid[0]), -1.0
    for t in grid:
        pred = predicate(values, t)
        tp = int(np.sum(pred & labels))
        fp = int(np.sum(pred & ~labels))
        fn = int(np.sum(~pred & labels))
        f1 = f1_from_counts(tp, fp, fn)
        if f1 > best_f1 + 1e-15:
            best_f1, best_t = f1, float(t)
    return best_t


@dataclass
class DistanceHeuristic:
    """Unknown iff the word-level gaze distance d(g, word) <= threshold."""

    threshold: float = np.inf

    def calibrate(self, dev: list[LabeledSample]) -> "DistanceHeuristic":
        d = np.array([s.word_dist for s in dev])
        y = np.array([s.label for s in dev])
        self.threshold = _best_threshold(d, y, lambda v, t: v <= t)
        return self

    def predict(self, samples: list[LabeledSample]) -> np.ndarray:
        return np.array([s.word_dist <= self.threshold for s in samples])


@dataclass
class FixationHeuristic:
    """Unknown iff the word-level gaze duration t(g, word) >= threshold."""

    threshold: float = 0.0

    def calibrate(self, dev: list[LabeledSample]) -> "FixationHeuristic":
        d = np.array([s.word_dur for s in dev], dtype=float)
        y = np.array([s.label for s in dev])
        self.threshold = _best_threshold(d, y, lambda v, t: v >= t)
        return self

    def predict(self, samples: list[LabeledSample]) -> np.ndarray:
        return np.array([s.word_dur >= self.threshold for s in samples])


# ------------------------------------------------------------- logistic

def _word_features(s: LabeledSample) -> np.ndarray:
    """[d, t, log tf] plus POS and NER one-hots of the candidate word."""
    cand = np.flatnonzero(s.label_mask)[0]
    pos_onehot = np.zeros(len(POS_TAGS))
    pos_onehot[s.know_pos[cand]] = 1.0
    ner_onehot = np.zeros(len(NER_TAGS))
    ner_onehot[s.know_ner[cand]] = 1.0
    return np.concatenate([[s.word_dist, float(s.word_dur),
                            s.know_log_tf[cand]], pos_onehot, ner_onehot])


class LogisticBaseline:
    """Logistic regression over word-level gaze and knowledge features,
    trained with the shared Adam optimizer."""

    def __init__(self, seed: int = 0):
        self.seed = seed
        self.mean: np.ndarray | None = None
        self.std: np.ndarray | None = None
        self.w: Parameter | None = None
        self.b: Parameter | None = None
        self.threshold = 0.5

    def fit(self, train: list[LabeledSample], dev: list[LabeledSample],
            epochs: int = 300, lr: float = 0.05) -> "LogisticBaseline":
        y = np.array([s.label for s in train], dtype=float)
        if len(np.unique(y)) < 2:
            raise ValueError("degenerate training set: a single class")
        x = np.stack([_word_features(s) for s in train])
        self.mean = x.mean(axis=0)
        self.std = np.where(x.std(axis=0) > 0, x.std(axis=0), 1.0)
        xn = (x - self.mean) / self.std
        n, f = xn.shape
        rng = np.random.default_rng(self.seed)
        self.w = Parameter(rng.normal(0, 0.01, size=(f, 1)), name="w",
                           group="backbone")
        self.b = Parameter(np.zeros(1), name="b", group="backbone")
        opt = AdamOptimizer([self.w, self.b], {"backbone": lr})
        xt = T.Tensor(xn)
        pos_weight = max(1.0, float((y == 0).sum() / max(1, (y == 1).sum())))
        weights = np.where(y == 1, pos_weight, 1.0)
        for _ in range(epochs):
            opt.zero_grad()
            logits = T.add(T.matmul(xt, self.w), self.b)
            p = T.sigmoid(T.reshape(logits, (n,)))
            eps = 1e-12
            clamped = T.Tensor(np.clip(p.data, eps, 1 - eps))
            clamped.requires_grad = p.requires_grad
            clamped._parents = (p,)
            clamped._backward = lambda g: T._accumulate(p, g)
            ll = T.add(T.mul(T.log(clamped), T.Tensor(-y * weights)),
                       T.mul(T.log(T.add(T.mul(clamped, T.Tensor(-1.0)),
                                         T.Tensor(1.0))),
                             T.Tensor(-(1 - y) * weights)))
            loss = T.mul(T.tsum(ll), T.Tensor(1.0 / n))
            T.backward(loss)
            opt.step()

        from .training import search_threshold
        self.threshold = search_threshold(self.predict_proba(dev),
                                          np.array([s.label for s in dev]))
        return self

    def predict_proba(self, samples: list[LabeledSample]) -> np.ndarray:
        x = np.stack([_word_features(s) for s in samples])
        xn = (x - self.mean) / self.std
        z = xn @ self.w.data[:, 0] + self.b.data[0]
        return 1.0 / (1.0 + np.exp(-z))

    def predict(self, samples: list[LabeledSample]) -> np.ndarray:
        return self.predict_proba(samples) >= self.threshold


# ---------------------------------------------------------------- n-gram

START_PAD = "<s>"


@dataclass
class NGramPredictor:
    """Memorization baseline: a word is unknown iff it closes an n-gram
    whose final word was labeled unknown in the training data."""

    n: int
    positives: set[tuple[str, ...]]

    @classmethod
    def fit(cls, train: list[LabeledSample], n: int) -> "NGramPredictor":
        if n not in (1, 2, 3):
            raise ValueError(f"n must be 1, 2 or 3, got {n}")
        positives = {ngram_of(s, n) for s in train if s.label}
        return cls(n=n, positives=positives)

    def predict_one(self, s: LabeledSample) -> bool:
        return ngram_of(s, self.n) in self.positives

    def predict(self, samples: list[LabeledSample]) -> np.ndarray:
        return np.array([self.predict_one(s) for s in samples])


def ngram_of(s: LabeledSample, n: int) -> tuple[str, ...]:
    """The word and its n-1 predecessors, start-padded at the document
    boundary."""
    prev = ([START_PAD] * max(0, (n - 1) - len(s.prev_words))
            + list(s.prev_words))
    ctx = prev[len(prev) - (n - 1):] if n > 1 else []
    return tuple(ctx) + (s.word_text,)
