"""Command-line pipeline: synth -> train -> detect -> eval / ensemble,
plus plot-cas for inspection.

One JSON config file can carry per-command sections ("synth", "model",
"train", "localization"); explicit CLI flags override config values.
Exit codes: 0 ok, 2 config error, 3 data error, 4 numerical failure.
"""

import dataclasses
import functools
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import click

from . import ensemble as ensemble_mod
from . import features as feat
from .errors import ConfigError, DataError, LGBMNetError
from .evaluation import DEFAULT_THRESHOLDS, evaluate
from .localization import (LocalizationConfig, detections_to_results, localize,
                           results_to_detections)
from .model import ModelConfig, load_checkpoint
from .training import TrainConfig, train as train_fn


def _load_config(path, section):
    if path is None:
        return {}
    try:
        payload = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    part = payload.get(section, {})
    if not isinstance(part, dict):
        raise ConfigError(f"config section '{section}' must be an object")
    return part


def _build(dc_type, config_values, overrides):
    values = dict(config_values)
    values.update({k: v for k, v in overrides.items() if v is not None})
    names = {f.name for f in dataclasses.fields(dc_type)}
    unknown = set(values) - names
    if unknown:
        raise ConfigError(f"unknown {dc_type.__name__} keys: {sorted(unknown)}")
    try:
        obj = dc_type(**{k: v for k, v in values.items() if k in names})
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad {dc_type.__name__}: {exc}") from exc
    if hasattr(obj, "validate"):
        obj.validate()
    return obj


def _command_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except LGBMNetError as exc:
            kind = type(exc).__name__
            click.echo(f"error kind={kind} code={exc.exit_code} msg={str(exc)!r}", err=True)
            sys.exit(exc.exit_code)
    return wrapper


@click.group()
def main():
    """Weakly-supervised temporal action localization pipeline."""


@main.command()
@click.option("--config", type=click.Path(exists=True), default=None, help="JSON config with a 'synth' section.")
@click.option("--out", "out_dir", required=True, type=click.Path(), help="Output dataset directory.")
@click.option("--n-videos", type=int, default=None)
@click.option("--n-classes", type=int, default=None)
@click.option("--feature-dim", type=int, default=None)
@click.option("--fg-snr", type=float, default=None)
@click.option("--seed", type=int, default=None)
@_command_errors
def synth(config, out_dir, n_videos, n_classes, feature_dim, fg_snr, seed):
    """Generate a synthetic dataset (features + annotations + manifest)."""
    cfg = _build(feat.SynthConfig, _load_config(config, "synth"),
                 {"n_videos": n_videos, "C": n_classes, "D": feature_dim,
                  "fg_snr": fg_snr, "seed": seed})
    manifest, sequences, annotations = feat.generate_synthetic_dataset(cfg)
    feat.write_dataset(out_dir, manifest, sequences, annotations)
    click.echo(f"wrote {len(sequences)} videos to {out_dir}")


@main.command()
@click.option("--config", type=click.Path(exists=True), default=None, help="JSON config with 'model'/'train' sections.")
@click.option("--data", "data_dir", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--steps", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--global-op", type=click.Choice(["recurrent", "non_local", "global_pool"]), default=None)
@click.option("--attention-kind", type=click.Choice(["local_global", "local_only"]), default=None)
@click.option("--hidden", type=int, default=None)
@click.option("--learning-rate", type=float, default=None)
@_command_errors
def train(config, data_dir, out_dir, steps, seed, global_op, attention_kind, hidden,
          learning_rate):
    """Train on the train split; writes checkpoints and a JSONL loss log."""
    manifest, sequences, annotations = feat.load_dataset(data_dir)
    any_seq = next(iter(sequences.values()))
    model_cfg = _build(ModelConfig, _load_config(config, "model"),
                       {"D": any_seq.feature_dim, "C": manifest.num_classes,
                        "global_op": global_op, "attention_kind": attention_kind,
                        "hidden": hidden})
    train_cfg = _build(TrainConfig, _load_config(config, "train"),
                       {"steps": steps, "seed": seed, "learning_rate": learning_rate})
    _, log = train_fn(manifest, sequences, annotations, model_cfg, train_cfg,
                      out_dir=out_dir)
    click.echo(f"trained {train_cfg.steps} steps, final loss {log[-1]['loss_total']:.4f}; "
               f"checkpoints in {out_dir}")


@main.command()
@click.option("--config", type=click.Path(exists=True), default=None, help="JSON config with a 'localization' section.")
@click.option("--ckpt", required=True, type=click.Path(exists=True))
@click.option("--data", "data_dir", required=True, type=click.Path(exists=True))
@click.option("--split", type=click.Choice(["train", "val", "test"]), default="val")
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--workers", type=int, default=1)
@_command_errors
def detect(config, ckpt, data_dir, split, out_path, workers):
    """Localize every video of a split and write ActivityNet-style results JSON."""
    manifest, sequences, _ = feat.load_dataset(data_dir)
    model, _ = load_checkpoint(ckpt)
    loc_cfg = _build(LocalizationConfig, _load_config(config, "localization"), {})
    vids = manifest.videos(split)
    if not vids:
        raise DataError(f"split '{split}' is empty")

    def run(vid):
        return vid, localize(sequences[vid], model, loc_cfg)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            pairs = list(pool.map(run, vids))
    else:
        pairs = [run(v) for v in vids]
    payload = detections_to_results(dict(pairs), manifest.class_names)
    Path(out_path).write_text(json.dumps(payload, indent=2, sort_keys=True))
    n = sum(len(v) for v in payload["results"].values())
    click.echo(f"wrote {n} detections for {len(vids)} videos to {out_path}")


@main.command("eval")
@click.option("--results", required=True, type=click.Path(exists=True))
@click.option("--gt", required=True, type=click.Path(exists=True))
@click.option("--split", default=None, help="Restrict to one subset (e.g. val).")
@click.option("--out", "report_path", type=click.Path(), default=None)
@_command_errors
def eval_cmd(results, gt, split, report_path):
    """Score detections; prints a per-threshold mAP table."""
    try:
        results_payload = json.loads(Path(results).read_text())
        gt_payload = json.loads(Path(gt).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read inputs: {exc}") from exc
    report = evaluate(results_payload, gt_payload, DEFAULT_THRESHOLDS, subset=split)
    click.echo(report.format_table())
    if report.unknown_label_count:
        click.echo(f"warning: skipped {report.unknown_label_count} detections "
                   "with unknown labels", err=True)
    if report_path:
        Path(report_path).write_text(report.to_json())


@main.command("ensemble")
@click.option("--inputs", required=True, multiple=True, type=click.Path(exists=True))
@click.option("--gt", required=True, type=click.Path(exists=True), help="Annotation JSON (for the class vocabulary).")
@click.option("--weights", multiple=True, type=float)
@click.option("--nms-tiou", type=float, default=0.6)
@click.option("--out", "out_path", required=True, type=click.Path())
@_command_errors
def ensemble_cmd(inputs, gt, weights, nms_tiou, out_path):
    """Fuse several results JSON files into one detection set."""
    try:
        class_names = json.loads(Path(gt).read_text())["classes"]
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        raise DataError(f"cannot read class list from {gt}: {exc}") from exc
    model_outputs = []
    for path in inputs:
        payload = json.loads(Path(path).read_text())
        by_video, unknown = results_to_detections(payload, class_names)
        if unknown:
            click.echo(f"warning: {path}: skipped {unknown} unknown-label detections", err=True)
        model_outputs.append([d for dets in by_video.values() for d in dets])
    fused = ensemble_mod.ensemble_detections(
        model_outputs, weights=list(weights) or None, nms_threshold=nms_tiou)
    Path(out_path).write_text(json.dumps(detections_to_results(fused, class_names),
                                         indent=2, sort_keys=True))
    click.echo(f"fused {len(inputs)} result sets into {out_path}")


@main.command("plot-cas")
@click.option("--ckpt", required=True, type=click.Path(exists=True))
@click.option("--data", "data_dir", required=True, type=click.Path(exists=True))
@click.option("--video", "video_id", required=True)
@click.option("--out", "out_path", required=True, type=click.Path())
@_command_errors
def plot_cas(ckpt, data_dir, video_id, out_path):
    """Render activation + attention curves for one video to a PNG."""
    from .plotting import plot_cas as plot_cas_fn  # defers matplotlib import

    manifest, sequences, annotations = feat.load_dataset(data_dir)
    if video_id not in sequences:
        raise DataError(f"unknown video id '{video_id}'")
    model, _ = load_checkpoint(ckpt)
    plot_cas_fn(sequences[video_id], model, out_path,
                annotation=annotations.get(video_id), class_names=manifest.class_names)
    click.echo(f"wrote {out_path}")


if __name__ == "__main__":
    main()
