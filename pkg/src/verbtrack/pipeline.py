"""Per-video stages: detections and motion in, tracks and features out."""

from __future__ import annotations

import os
from dataclasses import dataclass

from .config import PipelineConfig
from .corpus_io import load_detection_stream, load_motion_field
from .features import video_features
from .flow import augment_with_projections
from .smoothing import smooth_track
from .tracker import CostWeights, bias_detections, merge_sources, nms_stream, track_n


def cost_weights(cfg: PipelineConfig) -> CostWeights:
    return CostWeights(cfg.confidence_weight, cfg.flow_weight, cfg.appearance_weight)


def prepare_stream(stream, field, cfg: PipelineConfig):
    """Bias, suppress and forward-project raw detections."""
    stream = bias_detections(stream, cfg.detection_offset)
    stream = nms_stream(stream, cfg.nms_overlap)
    return augment_with_projections(stream, field, cfg.projection_depth)


def track_video(stream, field, cfg: PipelineConfig = PipelineConfig(), coherence_field=None,
                stats: dict | None = None) -> list:
    """All tracks of a video, per object class, sorted by coherence.

    ``coherence_field`` optionally supplies separate correspondences for the
    edge-cost flow term; by default the projection field serves both roles.
    """
    stream = prepare_stream(stream, field, cfg)
    coherence_field = field if coherence_field is None else coherence_field
    tracks = []
    for label in stream.class_labels():
        ids = stream.sources_of_class(label)
        pool = merge_sources(stream, ids, bins=cfg.otsu_bins, cap_offset=cfg.cap_offset) if len(ids) > 1 else stream
        tracks.extend(track_n(pool, coherence_field, cfg.max_tracks_per_class, ids, cost_weights(cfg),
                              cfg.otsu_bins, cfg.cap_offset, cfg.appearance_mode,
                              cfg.require_track_support, label, stats,
                              cfg.min_track_length))
    tracks.sort(key=lambda t: -t.coherence)
    if cfg.smooth:
        tracks = [smooth_track(t, cfg.spline_pieces_center, cfg.spline_pieces_dims) for t in tracks]
    return tracks


@dataclass
class VideoResult:
    video_id: str
    tracks: list
    single: object = None
    pair: object = None
    error: str | None = None


def process_entry(entry, root: str, cfg: PipelineConfig) -> VideoResult:
    """Track one manifest entry and extract its features; failures are recorded, not raised."""
    from .errors import VerbTrackError

    try:
        stream = load_detection_stream(_resolve(root, entry.detection_stream_path))
        field = load_motion_field(_resolve(root, entry.motion_field_path), stream.frame_count)
        tracks = track_video(stream, field, cfg)
        single, pair = video_features(tracks)
        return VideoResult(entry.video_id, tracks, single, pair if len(tracks) >= 2 else None)
    except VerbTrackError as exc:
        return VideoResult(entry.video_id, [], error=f"{type(exc).__name__}: {exc}")


def _resolve(root, path):
    return path if os.path.isabs(path) else os.path.join(root, path)
