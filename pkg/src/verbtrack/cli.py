"""Command-line entry point.

Stages are file-coupled: ``track`` writes ``<work>/<video>/tracks.json``,
``smooth`` writes ``smoothed_tracks.json`` beside it, ``extract`` writes
``features.csv`` (and ``pair_features.csv`` for two-track videos),
``train`` writes a models file and ``label`` a labels file. ``cv`` runs
everything in memory and writes ``confusion.json``, ``confusion.txt`` and
``labels.json``; ``report`` renders saved confusion matrices.
"""

from __future__ import annotations

import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import fields

import click

from . import __version__
from .classify import decide, train_from_features
from .config import PipelineConfig
from .corpus_io import (
    dump_json,
    load_detection_stream,
    load_features,
    load_manifest,
    load_models,
    load_motion_field,
    load_tracks,
    read_json,
    save_features,
    save_models,
    save_tracks,
)
from .errors import SchemaError, VerbTrackError
from .evaluation import (
    FAILED,
    ConfusionMatrix,
    accuracy_from_labels,
    cross_validate,
    default_jobs,
    make_folds,
    process_corpus,
    write_cv_outputs,
)
from .features import video_features
from .pipeline import track_video
from .smoothing import smooth_track
from .synth import ARCHETYPES, NoiseConfig, write_corpus

TRACKS = "tracks.json"
SMOOTHED = "smoothed_tracks.json"
SINGLE = "features.csv"
PAIR = "pair_features.csv"
STATUS = "status.json"


def _coerce(name, raw):
    kinds = {f.name: f.type for f in fields(PipelineConfig)}
    if name not in kinds:
        raise SchemaError(f"unknown config key {name!r}")
    kind = kinds[name]
    try:
        if kind == "bool":
            if raw.lower() not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            return raw.lower() in ("true", "1", "yes")
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
    except ValueError:
        raise SchemaError(f"bad value for {name}: {raw!r}") from None
    return raw


def build_config(config_path, overrides, settings) -> PipelineConfig:
    """Config file, then ``--set key=value`` pairs, then dedicated flags."""
    cfg = PipelineConfig.load(config_path)
    extra = {}
    for item in settings:
        if "=" not in item:
            raise SchemaError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        extra[k.strip().replace("-", "_")] = _coerce(k.strip().replace("-", "_"), v.strip())
    cfg = PipelineConfig.from_dict({**cfg.to_dict(), **extra})
    return cfg.updated(**overrides)


def _fail(exc):
    click.echo(f"error: {type(exc).__name__}: {exc}", err=True)
    sys.exit(2)


def _manifest_path(corpus):
    return os.path.join(corpus, "manifest.json") if os.path.isdir(corpus) else corpus


def _pmap(fn, items, jobs):
    # executor.map keeps input order, so outputs do not depend on the job count
    if jobs > 1 and len(items) > 1:
        with ProcessPoolExecutor(jobs) as pool:
            return list(pool.map(fn, items, chunksize=4))
    return [fn(x) for x in items]


def _video_dir(work, vid):
    d = os.path.join(work, vid)
    os.makedirs(d, exist_ok=True)
    return d


def _write_status(work, stage, status):
    path = os.path.join(work, STATUS)
    doc = read_json(path) if os.path.exists(path) else {}
    doc[stage] = status
    dump_json(doc, path)


def _report_failures(stage, results):
    failed = {vid: err for vid, err in results if err}
    for vid, err in failed.items():
        click.echo(f"warning: {stage} {vid}: {err}", err=True)
    return failed


# ---------------------------------------------------------------------------
# per-video stage workers (top level so process pools can pickle them)


def _track_one(args):
    root, entry, work, cfg = args
    try:
        stream = load_detection_stream(_join(root, entry.detection_stream_path))
        field = load_motion_field(_join(root, entry.motion_field_path), stream.frame_count)
        tracks = track_video(stream, field, cfg.updated(smooth=False))
        save_tracks(tracks, os.path.join(_video_dir(work, entry.video_id), TRACKS))
        return entry.video_id, None
    except VerbTrackError as exc:
        return entry.video_id, f"{type(exc).__name__}: {exc}"


def _smooth_one(args):
    vid, work, cfg = args
    try:
        tracks = load_tracks(os.path.join(work, vid, TRACKS), vid)
        out = [smooth_track(t, cfg.spline_pieces_center, cfg.spline_pieces_dims) for t in tracks]
        save_tracks(out, os.path.join(work, vid, SMOOTHED))
        return vid, None
    except VerbTrackError as exc:
        return vid, f"{type(exc).__name__}: {exc}"


def _extract_one(args):
    vid, work, name = args
    try:
        tracks = load_tracks(os.path.join(work, vid, name), vid)
        single, pair = video_features(tracks)
        save_features(single, os.path.join(work, vid, SINGLE))
        pair_path = os.path.join(work, vid, PAIR)
        if pair is not None and len(tracks) >= 2:
            save_features(pair, pair_path)
        else:
            for p in (pair_path, pair_path + ".json"):
                if os.path.exists(p):
                    os.remove(p)
        return vid, None
    except VerbTrackError as exc:
        return vid, f"{type(exc).__name__}: {exc}"


def _join(root, path):
    return path if os.path.isabs(path) else os.path.join(root, path)


def _load_video_features(work, vid):
    """(single, pair or None) from a video's extracted features; None when absent."""
    single_path = os.path.join(work, vid, SINGLE)
    if not os.path.exists(single_path):
        return None
    pair_path = os.path.join(work, vid, PAIR)
    pair = load_features(pair_path) if os.path.exists(pair_path) else None
    return load_features(single_path), pair


# ---------------------------------------------------------------------------
# commands


def _config_options(fn):
    fn = click.option("--config", "config_path", type=click.Path(dir_okay=False),
                      help="JSON file mirroring the pipeline configuration.")(fn)
    fn = click.option("--set", "settings", multiple=True, metavar="KEY=VALUE",
                      help="Override any configuration field; repeatable.")(fn)
    fn = click.option("--jobs", type=int, default=None,
                      help="Worker processes (default: $VERBTRACK_JOBS or 1).")(fn)
    return fn


def _cfg(config_path, settings, jobs, **flags):
    return build_config(config_path, {"jobs": jobs if jobs else default_jobs(), **flags}, settings)


@click.group()
@click.version_option(__version__, prog_name="verbtrack")
def main():
    """Track objects in detection streams and label videos with verbs."""


@main.command("synth-gen")
@click.option("--out", required=True, type=click.Path(file_okay=False), help="Corpus directory to create.")
@click.option("--verbs", default=",".join(ARCHETYPES), show_default=True, help="Comma-separated archetypes.")
@click.option("--per-verb", default=40, show_default=True, type=int)
@click.option("--frames", default=48, show_default=True, type=int)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--jitter", default=3.0, show_default=True, type=float)
@click.option("--fp-rate", default=10.0, show_default=True, type=float)
@click.option("--fn-rate", default=0.2, show_default=True, type=float)
def synth_gen(out, verbs, per_verb, frames, seed, jitter, fp_rate, fn_rate):
    """Write a synthetic corpus with ground truth."""
    try:
        vs = [v.strip() for v in verbs.split(",") if v.strip()]
        unknown = [v for v in vs if v not in ARCHETYPES]
        if unknown:
            raise SchemaError(f"unknown archetypes {unknown}; choose from {list(ARCHETYPES)}")
        noise = NoiseConfig(jitter_std=jitter, fp_rate=fp_rate, fn_rate=fn_rate)
        manifest = write_corpus(out, vs, per_verb, noise, seed, frames)
    except (VerbTrackError, ValueError) as exc:
        _fail(exc)
    click.echo(f"wrote {len(manifest.entries)} videos to {out}")


@main.command()
@click.option("--corpus", required=True, help="Corpus directory or manifest path.")
@click.option("--work", required=True, type=click.Path(file_okay=False), help="Artifact directory.")
@_config_options
def track(corpus, work, config_path, settings, jobs):
    """Select tracks for every video (unsmoothed)."""
    try:
        cfg = _cfg(config_path, settings, jobs)
        manifest = load_manifest(_manifest_path(corpus))
        os.makedirs(work, exist_ok=True)
        dump_json(cfg.to_dict(), os.path.join(work, "config.json"))
        results = _pmap(_track_one, [(manifest.root, e, work, cfg) for e in manifest.entries], cfg.jobs)
    except VerbTrackError as exc:
        _fail(exc)
    failed = _report_failures("track", results)
    _write_status(work, "track", failed)
    click.echo(f"tracked {len(results) - len(failed)}/{len(results)} videos")


def _stage_ids(corpus, work, name):
    manifest = load_manifest(_manifest_path(corpus))
    return [e.video_id for e in manifest.entries if os.path.exists(os.path.join(work, e.video_id, name))]


@main.command()
@click.option("--corpus", required=True)
@click.option("--work", required=True, type=click.Path(file_okay=False))
@_config_options
def smooth(corpus, work, config_path, settings, jobs):
    """Fit cubic splines to every tracked box sequence."""
    try:
        cfg = _cfg(config_path, settings, jobs)
        ids = _stage_ids(corpus, work, TRACKS)
        results = _pmap(_smooth_one, [(v, work, cfg) for v in ids], cfg.jobs)
    except VerbTrackError as exc:
        _fail(exc)
    failed = _report_failures("smooth", results)
    _write_status(work, "smooth", failed)
    click.echo(f"smoothed {len(results) - len(failed)}/{len(results)} videos")


@main.command()
@click.option("--corpus", required=True)
@click.option("--work", required=True, type=click.Path(file_okay=False))
@click.option("--raw", is_flag=True, help="Use unsmoothed tracks.")
@_config_options
def extract(corpus, work, raw, config_path, settings, jobs):
    """Compute agent and agent/patient feature series."""
    name = TRACKS if raw else SMOOTHED
    try:
        cfg = _cfg(config_path, settings, jobs)
        ids = _stage_ids(corpus, work, name)
        results = _pmap(_extract_one, [(v, work, name) for v in ids], cfg.jobs)
    except VerbTrackError as exc:
        _fail(exc)
    failed = _report_failures("extract", results)
    _write_status(work, "extract", failed)
    click.echo(f"extracted {len(results) - len(failed)}/{len(results)} videos")


def _fold_filter(manifest, cfg, fold, want_test):
    if fold is None:
        return {e.video_id for e in manifest.entries}
    plan = make_folds(manifest, cfg.k_folds, cfg.seed)
    if not 0 <= fold < cfg.k_folds:
        raise SchemaError(f"fold must lie in 0..{cfg.k_folds - 1}")
    test = plan.test_ids(fold)
    return test if want_test else {e.video_id for e in manifest.entries} - test


@main.command()
@click.option("--corpus", required=True)
@click.option("--work", required=True, type=click.Path(file_okay=False))
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False), help="Models file.")
@click.option("--classifier", type=click.Choice(["hmm", "dtw"]), default=None)
@click.option("--seed", type=int, default=None)
@click.option("--holdout-fold", type=int, default=None, help="Train on every fold but this one.")
@_config_options
def train(corpus, work, out_path, classifier, seed, holdout_fold, config_path, settings, jobs):
    """Train one model per verb from extracted features."""
    try:
        cfg = _cfg(config_path, settings, jobs, classifier=classifier, seed=seed)
        manifest = load_manifest(_manifest_path(corpus))
        keep = _fold_filter(manifest, cfg, holdout_fold, want_test=False)
        examples = []
        for e in manifest.entries:
            feats = _load_video_features(work, e.video_id) if e.video_id in keep else None
            if feats is not None:
                examples.append((e.verb_label, *feats))
        models = train_from_features(examples, manifest.verbs, cfg.classifier, cfg.seed,
                                     cfg.hmm_states, cfg.hmm_restarts, cfg.dtw_zscore)
        save_models(models, out_path, {"classifier": cfg.classifier, "seed": cfg.seed,
                                       "n_examples": len(examples), "holdout_fold": holdout_fold})
    except VerbTrackError as exc:
        _fail(exc)
    click.echo(f"trained {len(models)} {cfg.classifier} models on {len(examples)} videos")


@main.command()
@click.option("--corpus", required=True)
@click.option("--work", required=True, type=click.Path(file_okay=False))
@click.option("--models", "models_path", required=True, type=click.Path(dir_okay=False))
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False), help="Labels file.")
@click.option("--fold", type=int, default=None, help="Label only this fold's held-out videos.")
@_config_options
def label(corpus, work, models_path, out_path, fold, config_path, settings, jobs):
    """Assign each video the best-scoring verb."""
    try:
        cfg = _cfg(config_path, settings, jobs)
        manifest = load_manifest(_manifest_path(corpus))
        models = load_models(models_path)
        keep = _fold_filter(manifest, cfg, fold, want_test=True)
        labels = {}
        for e in manifest.entries:
            if e.video_id not in keep:
                continue
            feats = _load_video_features(work, e.video_id)
            scores = {}
            if feats is None:
                predicted = FAILED
            else:
                predicted, scores = decide(models, *feats)
            labels[e.video_id] = {"predicted": predicted, "gold": e.verb_label,
                                  "scores": {v: float(s) for v, s in sorted(scores.items())}}
        dump_json(labels, out_path)
    except VerbTrackError as exc:
        _fail(exc)
    click.echo(f"labelled {len(labels)} videos, accuracy {100 * accuracy_from_labels(labels):.1f}%")


@main.command()
@click.option("--corpus", required=True)
@click.option("--out", "out_dir", default=None, type=click.Path(file_okay=False),
              help="Output directory (default: <corpus>/cv-<classifier>).")
@click.option("--classifier", type=click.Choice(["hmm", "dtw"]), default=None)
@click.option("--seed", type=int, default=None)
@click.option("--folds", "k_folds", type=int, default=None)
@_config_options
def cv(corpus, out_dir, classifier, seed, k_folds, config_path, settings, jobs):
    """Full pipeline with k-fold cross-validation."""
    try:
        cfg = _cfg(config_path, settings, jobs, classifier=classifier, seed=seed, k_folds=k_folds)
        manifest = load_manifest(_manifest_path(corpus))
        if out_dir is None:
            out_dir = os.path.join(os.path.dirname(_manifest_path(corpus)), f"cv-{cfg.classifier}")
        os.makedirs(out_dir, exist_ok=True)
        start = time.perf_counter()
        results = process_corpus(manifest, cfg, cfg.jobs)
        run = cross_validate(manifest, cfg, results)
    except VerbTrackError as exc:
        _fail(exc)
    table = write_cv_outputs(run, cfg, out_dir)
    click.echo(table)
    folds = " ".join(f"{100 * a:.1f}" for a in run.fold_accuracies)
    click.echo(f"{cfg.classifier} folds: {folds}  ({time.perf_counter() - start:.1f} s)")


@main.command()
@click.argument("paths", nargs=-1, required=True)
def report(paths):
    """Render saved confusion matrices (files or cv output directories)."""
    try:
        for p in paths:
            path = os.path.join(p, "confusion.json") if os.path.isdir(p) else p
            doc = read_json(path)
            if not isinstance(doc, dict) or "counts" not in doc:
                raise SchemaError(f"{path}: not a confusion matrix")
            cm = ConfusionMatrix.from_dict(doc)
            click.echo(f"== {path} ({doc.get('classifier', '?')})")
            click.echo(cm.render())
            labels_path = os.path.join(os.path.dirname(path), "labels.json")
            if os.path.exists(labels_path):
                recomputed = accuracy_from_labels(read_json(labels_path))
                if abs(recomputed - cm.accuracy) > 1e-12:
                    raise SchemaError(f"{labels_path} disagrees with {path} "
                                      f"({recomputed:.4f} vs {cm.accuracy:.4f})")
    except (VerbTrackError, json.JSONDecodeError) as exc:
        _fail(exc)


if __name__ == "__main__":  # pragma: no cover
    main()
