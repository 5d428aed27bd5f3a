"""Command-line surface for the whole artifact."""

from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import click
import numpy as np

from .datasets import (SplitMode, class_imbalance, read_samples, split,
                       split_manifest, write_samples)
from .model import DetectorModel, ModelConfig
from .suite import (SuiteConfig, build_all_samples, make_split_spec,
                    render_table, run_suite, vocabulary_for_export)
from .synth import export_dataset, load_export
from .textdoc import Vocabulary, read_layout
from .training import (TrainConfig, predict, search_threshold, train,
                       word_level_metrics, save_model, load_model)

CONFIG_ENV = "GAZEWORD_CONFIG"


def _load_default_map() -> dict | None:
    path = os.environ.get(CONFIG_ENV)
    if not path:
        return None
    with open(path) as f:
        return json.load(f)


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.option("--config", type=click.Path(exists=True),
              help="JSON config file providing per-command option defaults.")
@click.pass_context
def main(ctx, config):
    """Unknown-word detection from gaze streams."""
    default_map = _load_default_map()
    if config:
        with open(config) as f:
            default_map = json.load(f)
    if default_map:
        ctx.default_map = default_map


@main.command()
@click.option("--out", required=True, type=click.Path())
@click.option("--seed", default=7, show_default=True)
@click.option("--users", default=8, show_default=True)
@click.option("--docs", default=20, show_default=True)
@click.option("--words-per-doc", default=363, show_default=True)
@click.option("--dwell-gain", default=3.0, show_default=True)
@click.option("--label-noise", default=0.015, show_default=True)
@click.option("--kinds", default="tracker,webcam", show_default=True)
@click.option("--json", "as_json", is_flag=True)
def synth(out, seed, users, docs, words_per_doc, dwell_gain, label_noise,
          kinds, as_json):
    """Export a synthetic dataset (layouts, labels, gaze streams)."""
    manifest = export_dataset(out, seed=seed, n_users=users, n_docs=docs,
                              words_per_doc=words_per_doc,
                              dwell_gain=dwell_gain, label_noise=label_noise,
                              noise_kinds=tuple(kinds.split(",")))
    import hashlib
    digest = hashlib.sha256(
        json.dumps(manifest, sort_keys=True).encode()).hexdigest()[:16]
    if as_json:
        click.echo(json.dumps({"manifest_hash": digest,
                               "counts": manifest["counts"]}))
    else:
        click.echo(f"exported to {out} (manifest hash {digest})")


@main.command("build-dataset")
@click.option("--data", required=True, type=click.Path(exists=True),
              help="Synthetic export directory.")
@click.option("--kind", default="tracker", show_default=True,
              type=click.Choice(["tracker", "webcam"]))
@click.option("--out", required=True, type=click.Path())
@click.option("--vocab", "vocab_path", required=True, type=click.Path())
@click.option("--max-vocab", default=8192, show_default=True)
@click.option("--max-tokens", default=64, show_default=True)
@click.option("--json", "as_json", is_flag=True)
def build_dataset(data, kind, out, vocab_path, max_vocab, max_tokens, as_json):
    """Build labeled samples from an exported dataset."""
    export = load_export(data)
    vocab = vocabulary_for_export(export, max_size=max_vocab)
    vocab.save(vocab_path)
    samples = build_all_samples(export, kind, vocab, max_tokens=max_tokens)
    write_samples(out, samples)
    sidecar = {
        "count": len(samples),
        "imbalance": round(class_imbalance(samples), 3),
        "vocab_hash": vocab.content_hash(),
        "kind": kind,
        "users": sorted({s.user_id for s in samples}),
        "docs": sorted({s.doc_id for s in samples}),
    }
    with open(str(out) + ".manifest.json", "w") as f:
        json.dump(sidecar, f, indent=1, sort_keys=True)
    if as_json:
        click.echo(json.dumps(sidecar))
    else:
        click.echo(f"{len(samples)} samples -> {out} "
                   f"(imbalance {sidecar['imbalance']})")


def _model_options(fn):
    opts = [
        click.option("--d-model", default=64, show_default=True),
        click.option("--layers", default=2, show_default=True,
                     help="Encoder/decoder/text layer count."),
        click.option("--heads", default=4, show_default=True),
        click.option("--alpha", default=0.9, show_default=True),
        click.option("--gamma", default=2.0, show_default=True),
        click.option("--epochs", default=30, show_default=True),
        click.option("--batch-size", default=32, show_default=True),
        click.option("--lr-encoder-decoder", default=1e-3, show_default=True),
        click.option("--lr-backbone", default=2e-5, show_default=True),
        click.option("--patience", default=5, show_default=True),
        click.option("--seed", default=0, show_default=True),
    ]
    for opt in reversed(opts):
        fn = opt(fn)
    return fn


def _configs(vocab, d_model, layers, heads, alpha, gamma, epochs, batch_size,
             lr_encoder_decoder, lr_backbone, patience, seed):
    mc = ModelConfig(d_model=d_model, n_enc_layers=layers,
                     n_dec_layers=layers, n_text_layers=layers,
                     n_heads=heads, n_r=d_model, alpha=alpha, gamma=gamma,
                     vocab_size=len(vocab), seed=seed)
    tc = TrainConfig(epochs=epochs, batch_size=batch_size,
                     lr_encoder_decoder=lr_encoder_decoder,
                     lr_backbone=lr_backbone, patience=patience, seed=seed)
    return mc, tc


@main.command("train")
@click.option("--dataset", required=True, type=click.Path(exists=True))
@click.option("--vocab", "vocab_path", required=True,
              type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
@click.option("--mode", default="mixed", show_default=True,
              type=click.Choice([m.value for m in SplitMode]))
@click.option("--json", "as_json", is_flag=True)
@_model_options
def train_cmd(dataset, vocab_path, out, mode, as_json, **kw):
    """Train the full detector and checkpoint the best dev-F1 model."""
    vocab = Vocabulary.load(vocab_path)
    samples = read_samples(dataset)
    parts = split(samples, make_split_spec(samples, mode, kw["seed"]))
    mc, tc = _configs(vocab, **kw)
    model = DetectorModel(mc)
    log = None if as_json else \
        (lambda e: click.echo(json.dumps(e), err=True))
    result = train(model, parts["train"], parts["dev"], tc, log=log)
    save_model(out, model, result.threshold, vocab.content_hash())
    payload = {"checkpoint": str(out), "threshold": result.threshold,
               "best_dev_f1": round(result.best_dev_f1, 2),
               "best_epoch": result.best_epoch,
               "history": result.history}
    if as_json:
        click.echo(json.dumps(payload))
    else:
        click.echo(f"saved {out}: dev F1 {result.best_dev_f1:.1f} "
                   f"at theta {result.threshold:.2f}")


@main.command("eval")
@click.option("--dataset", required=True, type=click.Path(exists=True))
@click.option("--vocab", "vocab_path", required=True,
              type=click.Path(exists=True))
@click.option("--mode", "modes", multiple=True, default=["mixed"],
              show_default=True,
              type=click.Choice([m.value for m in SplitMode]))
@click.option("--method", "methods", multiple=True, default=["full"],
              show_default=True)
@click.option("--out", type=click.Path(), help="Write the report JSON here.")
@click.option("--json", "as_json", is_flag=True)
@_model_options
def eval_cmd(dataset, vocab_path, modes, methods, out, as_json, **kw):
    """Train/evaluate methods per mode and emit a report table."""
    vocab = Vocabulary.load(vocab_path)
    samples = read_samples(dataset)
    mc, tc = _configs(vocab, **kw)
    config = SuiteConfig(modes=tuple(modes), methods=tuple(methods),
                         model_config=mc, train_config=tc, seed=kw["seed"])
    log = None if as_json else \
        (lambda e: click.echo(json.dumps(e), err=True))
    report = run_suite(samples, config, log=log)
    if out:
        with open(out, "w") as f:
            json.dump(report, f, indent=1, sort_keys=True)
    click.echo(json.dumps(report) if as_json else render_table(report))


@main.command()
@click.option("--dataset", required=True, type=click.Path(exists=True))
@click.option("--vocab", "vocab_path", required=True,
              type=click.Path(exists=True))
@click.option("--checkpoint", required=True, type=click.Path(exists=True))
@click.option("--mode", default="mixed", show_default=True,
              type=click.Choice([m.value for m in SplitMode]))
@click.option("--seed", default=0, show_default=True)
@click.option("--json", "as_json", is_flag=True)
def threshold(dataset, vocab_path, checkpoint, mode, seed, as_json):
    """Recalibrate the decision threshold on the dev split."""
    model, _, vocab_hash = load_model(checkpoint)
    vocab = Vocabulary.load(vocab_path)
    if vocab_hash and vocab_hash != vocab.content_hash():
        raise click.ClickException("vocabulary does not match checkpoint")
    samples = read_samples(dataset)
    parts = split(samples, make_split_spec(samples, mode, seed))
    probs = predict(model, parts["dev"])
    labels = np.array([s.label for s in parts["dev"]])
    theta = search_threshold(probs, labels)
    report = word_level_metrics(probs, labels, theta)
    payload = {"threshold": theta, "dev_f1": round(report.f1, 2)}
    click.echo(json.dumps(payload) if as_json
               else f"theta* = {theta:.2f} (dev F1 {report.f1:.1f})")


def _engine(checkpoint, vocab_path, freq, dictionary):
    from .service import DetectionEngine
    return DetectionEngine.from_files(checkpoint, vocab_path, freq,
                                      dictionary_path=dictionary)


@main.command()
@click.option("--checkpoint", required=True, type=click.Path(exists=True))
@click.option("--vocab", "vocab_path", required=True,
              type=click.Path(exists=True))
@click.option("--freq", required=True, type=click.Path(exists=True))
@click.option("--layouts", required=True, type=click.Path(exists=True))
@click.option("--dictionary", type=click.Path(exists=True))
@click.option("--frontend", type=click.Path(exists=True),
              help="Static directory with the reader frontend build.")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8750, show_default=True)
def serve(checkpoint, vocab_path, freq, layouts, dictionary, frontend,
          host, port):
    """Run the real-time detection service."""
    import uvicorn
    from .service import create_app
    engine = _engine(checkpoint, vocab_path, freq, dictionary)
    app = create_app(engine, layouts, frontend_dir=frontend)
    uvicorn.run(app, host=host, port=port, log_level="warning")


@main.command()
@click.option("--checkpoint", required=True, type=click.Path(exists=True))
@click.option("--vocab", "vocab_path", required=True,
              type=click.Path(exists=True))
@click.option("--freq", required=True, type=click.Path(exists=True))
@click.option("--dataset", required=True, type=click.Path(exists=True),
              help="Sample file providing representative inputs.")
@click.option("--trials", default=50, show_default=True)
@click.option("--json", "as_json", is_flag=True)
def latency(checkpoint, vocab_path, freq, dataset, trials, as_json):
    """Measure batch-1 inference latency and memory high-water mark."""
    from .service import measure_latency
    engine = _engine(checkpoint, vocab_path, freq, None)
    samples = read_samples(dataset)[:64]
    stats = measure_latency(engine, samples, n_trials=trials)
    click.echo(json.dumps(stats) if as_json else
               f"mean {stats['mean_ms']:.1f} ms, p95 {stats['p95_ms']:.1f} ms, "
               f"rss {stats['max_rss_mb']} MB")


@main.command()
@click.option("--checkpoint", required=True, type=click.Path(exists=True))
@click.option("--vocab", "vocab_path", required=True,
              type=click.Path(exists=True))
@click.option("--freq", required=True, type=click.Path(exists=True))
@click.option("--layout", "layout_path", required=True,
              type=click.Path(exists=True))
@click.option("--stream", "stream_path", required=True,
              type=click.Path(exists=True))
@click.option("--dictionary", type=click.Path(exists=True))
@click.option("--json", "as_json", is_flag=True)
def replay(checkpoint, vocab_path, freq, layout_path, stream_path,
           dictionary, as_json):
    """Replay a recorded stream offline and print detection events."""
    from .gaze import read_stream
    from .service import replay as run_replay
    engine = _engine(checkpoint, vocab_path, freq, dictionary)
    layout = read_layout(layout_path)
    stream = read_stream(stream_path)
    events, latency_log = run_replay(stream, layout, engine)
    if as_json:
        click.echo(json.dumps({"events": [e.to_json() for e in events],
                               "latency": latency_log}))
    else:
        for e in events:
            click.echo(json.dumps(e.to_json()))
        click.echo(f"{len(events)} events over {len(latency_log)} windows",
                   err=True)


if __name__ == "__main__":
    sys.exit(main())
