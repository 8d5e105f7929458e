"""Per-frame motion features of the agent and (optionally) the patient track."""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from .corpus_io import ANGULAR, LINEAR, FeatureSchema, FeatureSeries, Track
from .errors import NoOverlap, NoTracks, TooShort

_SINGLE = (
    ("x", LINEAR),
    ("y", LINEAR),
    ("aspect", LINEAR),
    ("aspect_rate", LINEAR),
    ("speed", LINEAR),
    ("velocity_dir", ANGULAR),
    ("accel", LINEAR),
    ("accel_dir", ANGULAR),
)
_RELATIVE = (
    ("distance", LINEAR),
    ("orientation", ANGULAR),
    ("distance_rate", LINEAR),
)

SINGLE_SCHEMA = FeatureSchema(tuple(n for n, _ in _SINGLE), tuple(k for _, k in _SINGLE))
PAIR_SCHEMA = FeatureSchema(
    tuple([f"agent_{n}" for n, _ in _SINGLE] + [f"patient_{n}" for n, _ in _SINGLE]
          + [n for n, _ in _RELATIVE]),
    tuple([k for _, k in _SINGLE] * 2 + [k for _, k in _RELATIVE]),
)

PERSON_CLASSES = {"person"}
VEHICLE_CLASSES = {"bicycle", "motorcycle", "suv"}


def wrap_angle(a):
    """Map angles into (-pi, pi]."""
    a = np.asarray(a, dtype=float)
    w = np.mod(a + np.pi, 2 * np.pi) - np.pi
    return np.where(w <= -np.pi, w + 2 * np.pi, w)


def direction(dx, dy):
    """atan2 wrapped into (-pi, pi]; zero vectors point along angle 0."""
    dx = np.asarray(dx, dtype=float)
    dy = np.asarray(dy, dtype=float)
    zero = (dx == 0) & (dy == 0)
    return np.where(zero, 0.0, wrap_angle(np.arctan2(dy, dx)))


def forward_diff(x, pad: int = 1):
    """x[t+1] - x[t] along axis 0, with the last sample repeated to restore length."""
    d = np.diff(x, axis=0)
    return np.concatenate([d, np.repeat(d[-1:], pad, axis=0)], axis=0)


def class_priority(label: str) -> int:
    label = label.lower()
    if label in PERSON_CLASSES:
        return 0
    if label in VEHICLE_CLASSES:
        return 1
    return 2


def pick_roles(tracks):
    """Agent and patient by class priority, then by coherence."""
    if not tracks:
        raise NoTracks("cannot assign roles without tracks")
    ranked = sorted(enumerate(tracks),
                    key=lambda it: (class_priority(it[1].class_label), -it[1].coherence, it[0]))
    agent = ranked[0][1]
    patient = ranked[1][1] if len(ranked) > 1 else None
    return agent, patient


def _absolute(arr: np.ndarray) -> np.ndarray:
    """(l, 8) absolute-motion features from an (l, 4) cx, cy, w, h array."""
    p = arr[:, :2]
    aspect = arr[:, 2] / arr[:, 3]
    v_raw = np.diff(p, axis=0)
    v = np.concatenate([v_raw, v_raw[-1:]], axis=0)
    a = forward_diff(v_raw, pad=2)
    return np.column_stack([
        p[:, 0], p[:, 1], aspect, forward_diff(aspect),
        np.hypot(v[:, 0], v[:, 1]), direction(v[:, 0], v[:, 1]),
        np.hypot(a[:, 0], a[:, 1]), direction(a[:, 0], a[:, 1]),
    ])


def single_features(track: Track) -> FeatureSeries:
    if len(track) < 3:
        raise TooShort(f"track of length {len(track)} too short for acceleration features")
    return FeatureSeries(track.video_id, SINGLE_SCHEMA, _absolute(track.array()))


def _window(track: Track, t0: int, t1: int) -> Track:
    return replace(track, t0=t0, t1=t1, boxes=track.boxes[t0 - track.t0:t1 - track.t0 + 1])


def pair_features(agent: Track, patient: Track) -> FeatureSeries:
    t0 = max(agent.t0, patient.t0)
    t1 = min(agent.t1, patient.t1)
    if t1 - t0 + 1 < 3:
        raise NoOverlap(f"agent and patient share {max(0, t1 - t0 + 1)} frames, need 3")
    a = _window(agent, t0, t1).array()
    b = _window(patient, t0, t1).array()
    d = b[:, :2] - a[:, :2]
    dist = np.hypot(d[:, 0], d[:, 1])
    rel = np.column_stack([dist, direction(d[:, 0], d[:, 1]), forward_diff(dist)])
    return FeatureSeries(agent.video_id, PAIR_SCHEMA, np.hstack([_absolute(a), _absolute(b), rel]))


def video_features(tracks):
    """Agent-only features and, when a patient overlaps the agent, pair features."""
    agent, patient = pick_roles(tracks)
    single = single_features(agent)
    pair = None
    if patient is not None:
        try:
            pair = pair_features(agent, patient)
        except NoOverlap:
            pair = None
    return single, pair
