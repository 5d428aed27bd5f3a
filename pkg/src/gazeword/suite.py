"""Evaluation harness: trains and scores the detector, its ablations and
the baselines across mixed / cross-user / cross-document regimes."""

from __future__ import annotations

import json
import traceback
from dataclasses import dataclass, field, replace

import numpy as np

from .baselines import (DistanceHeuristic, FixationHeuristic,
                        LogisticBaseline, NGramPredictor)
from .datasets import (LabeledSample, SplitMode, SplitSpec, build_samples,
                       class_imbalance, split, split_manifest)
from .model import DetectorModel, ModelConfig
from .textdoc import Vocabulary, build_vocabulary
from .training import (MetricsReport, TrainConfig, predict, search_threshold,
                       train, word_level_metrics)

MODEL_METHODS = {
    "full": {},
    "no_text": {"use_text": False},
    "no_gaze": {"use_gaze": False},
    "no_knowledge": {"use_knowledge": False},
    # text weights are randomly initialized in this artifact by default, so
    # this row differs from "full" only when an embedding file is supplied
    "random_init_text": {},
}
BASELINE_METHODS = ("distance", "fixation", "logistic",
                    "ngram1", "ngram2", "ngram3")
EXTERNAL_METHODS = ("svm",)


@dataclass
class SuiteConfig:
    modes: tuple[str, ...] = ("mixed",)
    methods: tuple[str, ...] = ("full",) + BASELINE_METHODS
    model_config: ModelConfig | None = None
    train_config: TrainConfig = field(default_factory=TrainConfig)
    seed: int = 0
    embedding_file: str | None = None


def make_split_spec(samples: list[LabeledSample], mode: str,
                    seed: int) -> SplitSpec:
    """Held-out ids for cross modes: the lexicographically last ids become
    dev and test."""
    mode = SplitMode(mode)
    if mode is SplitMode.MIXED:
        return SplitSpec(mode=mode, seed=seed)
    attr = "user_id" if mode is SplitMode.CROSS_USER else "doc_id"
    ids = sorted({getattr(s, attr) for s in samples})
    if len(ids) < 3:
        raise ValueError(f"{mode.value} split needs >= 3 ids, have {len(ids)}")
    return SplitSpec(mode=mode, seed=seed, dev_ids=[ids[-2]],
                     test_ids=[ids[-1]])


def evaluate_model(parts: dict[str, list[LabeledSample]],
                   model_config: ModelConfig, train_config: TrainConfig,
                   overrides: dict, embedding_file: str | None = None,
                   log=None) -> tuple[MetricsReport, DetectorModel, float]:
    cfg = replace(model_config, **overrides)
    model = DetectorModel(cfg)
    if embedding_file and cfg.use_text:
        model.load_embeddings(embedding_file)
    result = train(model, parts["train"], parts["dev"], train_config, log=log)
    probs = predict(model, parts["test"], train_config.batch_size)
    labels = np.array([s.label for s in parts["test"]])
    report = word_level_metrics(probs, labels, result.threshold)
    return report, model, result.threshold


def evaluate_baseline(parts: dict[str, list[LabeledSample]], method: str,
                      seed: int) -> MetricsReport:
    train_set, dev, test = parts["train"], parts["dev"], parts["test"]
    labels = np.array([s.label for s in test])
    if method == "distance":
        h = DistanceHeuristic().calibrate(dev)
        pred = h.predict(test)
    elif method == "fixation":
        h = FixationHeuristic().calibrate(dev)
        pred = h.predict(test)
    elif method == "logistic":
        m = LogisticBaseline(seed=seed).fit(train_set, dev)
        pred = m.predict(test)
    elif method.startswith("ngram"):
        n = int(method[-1])
        pred = NGramPredictor.fit(train_set, n).predict(test)
    else:
        raise ValueError(f"unknown baseline {method!r}")
    return word_level_metrics(pred.astype(float), labels, threshold=0.5)


def run_suite(samples: list[LabeledSample], config: SuiteConfig,
              log=None) -> dict:
    """One report row per (method, mode); sub-run failures are annotated
    instead of aborting the suite."""
    if config.model_config is None:
        raise ValueError("SuiteConfig.model_config is required")
    rows = []
    failures = []
    imbalance = class_imbalance(samples)
    for mode in config.modes:
        spec = make_split_spec(samples, mode, config.seed)
        parts = split(samples, spec)
        manifest = split_manifest(parts, spec)
        for method in config.methods:
            row = {"method": method, "mode": mode}
            try:
                if method in EXTERNAL_METHODS:
                    row["status"] = "external"
                    rows.append(row)
                    continue
                if method in MODEL_METHODS:
                    report, _, theta = evaluate_model(
                        parts, config.model_config, config.train_config,
                        MODEL_METHODS[method],
                        embedding_file=config.embedding_file, log=log)
                else:
                    report = evaluate_baseline(parts, method, config.seed)
                row.update(report.to_dict())
                row["status"] = "ok"
            except Exception as exc:  # annotate, keep going
                row["status"] = "failed"
                row["error"] = f"{type(exc).__name__}: {exc}"
                failures.append({"method": method, "mode": mode,
                                 "traceback": traceback.format_exc()})
            rows.append(row)
        rows_for_mode = [r for r in rows if r["mode"] == mode]
        if log:
            log({"mode": mode, "split": manifest,
                 "done": len(rows_for_mode)})
    return {"imbalance": round(imbalance, 3), "rows": rows,
            "failures": [{"method": f["method"], "mode": f["mode"]}
                         for f in failures]}


def render_table(report: dict) -> str:
    header = f"{'method':<18}{'mode':<16}{'acc':>7}{'P':>7}{'R':>7}{'F1':>7}  status"
    lines = [header, "-" * len(header)]
    for row in report["rows"]:
        if row.get("status") == "ok":
            lines.append(
                f"{row['method']:<18}{row['mode']:<16}"
                f"{row['accuracy']:>7.1f}{row['precision']:>7.1f}"
                f"{row['recall']:>7.1f}{row['f1']:>7.1f}  ok")
        else:
            lines.append(f"{row['method']:<18}{row['mode']:<16}"
                         f"{'-':>7}{'-':>7}{'-':>7}{'-':>7}  "
                         f"{row.get('status', '?')}")
    lines.append(f"token imbalance (neg:pos): {report['imbalance']}")
    return "\n".join(lines)


# ------------------------------------------------------- dataset assembly

def build_all_samples(export: dict, kind: str, vocab: Vocabulary,
                      max_tokens: int = 64) -> list[LabeledSample]:
    """Run the preprocessing pipeline over every (user, doc) stream of one
    noise kind in an exported dataset."""
    samples: list[LabeledSample] = []
    freq = export["freq_table"]
    for (user_id, doc_id, k), stream in sorted(export["streams"].items()):
        if k != kind:
            continue
        layout = export["layouts"][doc_id]
        samples.extend(build_samples(stream, layout, export["labels"],
                                     user_id, vocab, freq,
                                     max_tokens=max_tokens))
    return samples


def vocabulary_for_export(export: dict, max_size: int = 8192) -> Vocabulary:
    return build_vocabulary(export["layouts"].values(), max_size=max_size)
