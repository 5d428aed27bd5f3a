"""Training loop with early stopping, decision-threshold calibration and
word-level evaluation metrics."""

from __future__ import annotations

import copy
import time
from dataclasses import dataclass, field, asdict

import numpy as np

from . import tensor as T
from .datasets import LabeledSample, make_batch
from .model import DetectorModel, focal_loss
from .tensor import AdamOptimizer

THRESHOLD_GRID = np.round(np.arange(0, 101) * 0.01, 2)


@dataclass
class TrainConfig:
    epochs: int = 30
    batch_size: int = 32
    lr_encoder_decoder: float = 1e-3
    lr_backbone: float = 2e-5
    patience: int = 5
    seed: int = 0

    def __post_init__(self):
        if min(self.epochs, self.batch_size) <= 0:
            raise ValueError("epochs and batch_size must be positive")
        if self.patience > self.epochs:
            raise ValueError("patience cannot exceed epochs")


@dataclass
class MetricsReport:
    accuracy: float            # percentages
    precision: float
    recall: float
    f1: float
    threshold: float
    tp: int
    fp: int
    fn: int
    tn: int
    correctly_triggered: float  # rate in [0, 1]; equals recall
    false_alarm: float          # FP / (FP + TN)

    def to_dict(self) -> dict:
        return asdict(self)


def confusion(predicted: np.ndarray, labels: np.ndarray) -> tuple[int, int, int, int]:
    predicted = np.asarray(predicted, dtype=bool)
    labels = np.asarray(labels, dtype=bool)
    tp = int(np.sum(predicted & labels))
    fp = int(np.sum(predicted & ~labels))
    fn = int(np.sum(~predicted & labels))
    tn = int(np.sum(~predicted & ~labels))
    return tp, fp, fn, tn


def f1_from_counts(tp: int, fp: int, fn: int) -> float:
    p = tp / (tp + fp) if tp + fp else 0.0
    r = tp / (tp + fn) if tp + fn else 0.0
    return 2 * p * r / (p + r) if p + r else 0.0


def word_level_metrics(word_probs: np.ndarray, labels: np.ndarray,
                       threshold: float) -> MetricsReport:
    """Standard confusion-matrix metrics over word-level probabilities.

    A word is predicted unknown iff its probability (the max over its
    tokens) is at or above the threshold.
    """
    predicted = np.asarray(word_probs) >= threshold
    tp, fp, fn, tn = confusion(predicted, labels)
    total = tp + fp + fn + tn
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) \
        if precision + recall else 0.0
    return MetricsReport(
        accuracy=100.0 * (tp + tn) / total if total else 0.0,
        precision=100.0 * precision, recall=100.0 * recall, f1=100.0 * f1,
        threshold=float(threshold), tp=tp, fp=fp, fn=fn, tn=tn,
        correctly_triggered=recall,
        false_alarm=fp / (fp + tn) if fp + tn else 0.0)


def word_probs_from_tokens(token_probs: np.ndarray,
                           word_token_mask: np.ndarray) -> np.ndarray:
    """Word probability = max over the word's tokens (any-token rule)."""
    masked = np.where(word_token_mask > 0, token_probs, -np.inf)
    if np.any(word_token_mask.sum(axis=-1) == 0):
        raise ValueError("a word has no mapped tokens")
    return masked.max(axis=-1)


def search_threshold(word_probs: np.ndarray,
                     labels: np.ndarray) -> float:
    """The grid threshold in {0.00 .. 1.00} maximizing word-level F1;
    ties break toward the smallest threshold."""
    probs = np.asarray(word_probs)
    labels = np.asarray(labels, dtype=bool)
    best_theta, best_f1 = 0.0, -1.0
    for theta in THRESHOLD_GRID:
        predicted = probs >= theta
        tp = int(np.sum(predicted & labels))
        fp = int(np.sum(predicted & ~labels))
        fn = int(np.sum(~predicted & labels))
        f1 = f1_from_counts(tp, fp, fn)
        if f1 > best_f1 + 1e-15:
            best_f1, best_theta = f1, float(theta)
    return best_theta


def jaccard(set_a: set, set_b: set) -> float:
    """|A ∩ B| / |A ∪ B|; 1.0 when both sets are empty."""
    if not set_a and not set_b:
        return 1.0
    return len(set_a & set_b) / len(set_a | set_b)


# ---------------------------------------------------------------- training

@dataclass
class TrainResult:
    threshold: float
    best_dev_f1: float
    best_epoch: int
    history: list[dict] = field(default_factory=list)


def predict(model: DetectorModel, samples: list[LabeledSample],
            batch_size: int = 32) -> np.ndarray:
    """Word-level probabilities aligned with `samples`."""
    out = np.empty(len(samples))
    for start in range(0, len(samples), batch_size):
        chunk = samples[start:start + batch_size]
        batch = make_batch(chunk)
        p = model.forward(batch)
        out[start:start + len(chunk)] = \
            word_probs_from_tokens(p.data, batch.label_mask)
    return out


def train(model: DetectorModel, train_set: list[LabeledSample],
          dev_set: list[LabeledSample], config: TrainConfig,
          log=None) -> TrainResult:
    """Mini-batch focal-loss training with dev-F1 model selection.

    After every epoch the dev F1 at the best grid threshold is computed;
    the best parameters and their threshold are kept. Stops early after
    `patience` epochs without improvement (patience 0 runs one epoch).
    """
    cfg = model.config
    opt = AdamOptimizer(model.parameters(),
                        {"encoder_decoder": config.lr_encoder_decoder,
                         "backbone": config.lr_backbone})
    rng = np.random.default_rng(config.seed)
    dev_labels = np.array([s.label for s in dev_set], dtype=bool)

    best = TrainResult(threshold=0.5, best_dev_f1=-1.0, best_epoch=-1)
    best_params = None
    stale = 0
    for epoch in range(config.epochs):
        t0 = time.perf_counter()
        order = rng.permutation(len(train_set))
        losses = []
        for start in range(0, len(order), config.batch_size):
            idx = order[start:start + config.batch_size]
            batch = make_batch([train_set[i] for i in idx])
            opt.zero_grad()
            p = model.forward(batch)
            loss = focal_loss(p, batch.labels, cfg.alpha, cfg.gamma,
                              batch.label_mask)
            if not np.isfinite(loss.item()):
                raise RuntimeError(
                    f"NaN loss at epoch {epoch}, batch {start // config.batch_size}")
            T.backward(loss)
            opt.step()
            losses.append(loss.item())

        dev_probs = predict(model, dev_set, config.batch_size)
        theta = search_threshold(dev_probs, dev_labels)
        dev_f1 = word_level_metrics(dev_probs, dev_labels, theta).f1
        entry = {"epoch": epoch, "loss": float(np.mean(losses)),
                 "dev_f1": dev_f1, "theta": theta,
                 "seconds": round(time.perf_counter() - t0, 2)}
        best.history.append(entry)
        if log:
            log(entry)

        if dev_f1 > best.best_dev_f1:
            best.best_dev_f1 = dev_f1
            best.best_epoch = epoch
            best.threshold = theta
            best_params = {k: p.data.copy() for k, p in model.params.items()}
            stale = 0
        else:
            stale += 1
            if stale > config.patience:
                break
        if config.patience == 0 and epoch == 0:
            break

    if best_params is not None:
        for k, p in model.params.items():
            p.data = best_params[k]
    return best


def user_unknown_sets(samples: list[LabeledSample]) -> dict[str, set[str]]:
    """Per-user sets of unknown words, for Jaccard dispersion analysis."""
    out: dict[str, set[str]] = {}
    for s in samples:
        if s.label:
            out.setdefault(s.user_id, set()).add(s.word_text)
        else:
            out.setdefault(s.user_id, set())
    return out


def save_model(path, model: DetectorModel, threshold: float,
               vocab_hash: str) -> None:
    T.save_checkpoint(path, model.parameters(), {
        "model_config": model.config.to_dict(),
        "vocab_hash": vocab_hash,
        "threshold": threshold,
    })


def load_model(path) -> tuple[DetectorModel, float, str]:
    from .model import ModelConfig
    header, params = T.load_checkpoint(path)
    config = ModelConfig.from_dict(header["model_config"])
    model = DetectorModel(config, params=params)
    return model, float(header["threshold"]), header.get("vocab_hash", "")
