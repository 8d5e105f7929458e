"""Seeded random problem instances shared by the oracle tests."""

import numpy as np

from verbtrack.appearance import AppearanceHistogram
from verbtrack.corpus_io import (
    ANGULAR,
    LINEAR,
    DetectionBox,
    DetectionStream,
    FeatureSchema,
    FeatureSeries,
    MotionField,
    SourceInfo,
)
from verbtrack.timeseries.hmm import HmmModel
from verbtrack.tracker import CostWeights

SOURCES = {"a": SourceInfo("a", 0.0, "person"), "b": SourceInfo("b", 0.0, "person")}


def random_histogram(rng, bins):
    mass = rng.dirichlet(np.ones(bins), size=3)
    if rng.random() < 0.3:
        # sparse histograms exercise zero-mass bins
        mass = mass * (rng.random(mass.shape) < 0.6)
        mass[:, 0] += 1e-3
        mass = mass / mass.sum(axis=1, keepdims=True)
    return AppearanceHistogram(mass)


def random_field(rng, frame_count, extent=100.0):
    pairs = []
    for t in range(frame_count):
        if t == frame_count - 1:
            pairs.append(np.zeros((0, 4)))
            continue
        n = int(rng.integers(0, 25))
        xy = rng.uniform(0, extent, size=(n, 2))
        xy2 = xy * rng.uniform(0.8, 1.2) + rng.normal(0, 4, size=(n, 2))
        pairs.append(np.column_stack([xy, xy2]))
    return MotionField(frame_count, pairs)


def random_path_instance(rng, max_frames=6, max_cands=3):
    """(stream, field, interval, weights, appearance) with at most ``max_cands`` boxes of source a."""
    length = int(rng.integers(1, max_frames + 1))
    frame_count = length + int(rng.integers(0, 3))
    t0 = int(rng.integers(0, frame_count - length + 1))
    appearance = bool(rng.random() < 0.5)
    bins = int(rng.integers(2, 6))
    boxes = []
    for t in range(frame_count):
        for _ in range(int(rng.integers(1, max_cands + 1))):
            hist = random_histogram(rng, bins) if appearance and rng.random() < 0.9 else None
            boxes.append(DetectionBox(t, *rng.uniform(0, 100, 2), *rng.uniform(5, 40, 2),
                                      float(rng.normal(0, 1)), "a", 0, hist))
        if rng.random() < 0.5:
            boxes.append(DetectionBox(t, *rng.uniform(0, 100, 2), 10.0, 10.0, 5.0, "b"))
    stream = DetectionStream.from_boxes("rand", frame_count, SOURCES, boxes)
    weights = CostWeights(*rng.uniform(0.05, 2.0, size=3))
    return stream, random_field(rng, frame_count), (t0, t0 + length - 1), weights, appearance


def random_schema(rng, max_features=3):
    f = int(rng.integers(1, max_features + 1))
    kinds = tuple(ANGULAR if rng.random() < 0.4 else LINEAR for _ in range(f))
    return FeatureSchema(tuple(f"f{i}" for i in range(f)), kinds)


def random_series(rng, schema, length, video_id="s"):
    x = rng.normal(0, 2, size=(length, len(schema)))
    ang = schema.angular_mask
    x[:, ang] = rng.uniform(-np.pi, np.pi, size=(length, ang.sum()))
    return FeatureSeries(video_id, schema, x)


def random_hmm(rng, schema, K):
    ang = schema.angular_mask
    loc = rng.normal(0, 1.5, size=(K, len(schema)))
    loc[:, ang] = rng.uniform(-np.pi, np.pi, size=(K, ang.sum()))
    spread = rng.uniform(0.2, 3.0, size=(K, len(schema)))
    spread[:, ang] = rng.uniform(0.0, 6.0, size=(K, ang.sum()))
    return HmmModel(schema, rng.dirichlet(np.ones(K)), rng.dirichlet(np.ones(K), size=K), loc, spread)


def random_otsu_counts(rng):
    bins = int(rng.integers(1, 51))
    counts = rng.integers(0, 20, size=bins) * (rng.random(bins) < 0.7)
    if counts.sum() == 0:
        counts[int(rng.integers(bins))] = 1
    lo = rng.uniform(-3, 1)
    edges = np.linspace(lo, lo + rng.uniform(0.5, 4), bins + 1)
    return counts, edges
