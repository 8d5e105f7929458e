"""Data types and on-disk formats for every pipeline artifact.

Detection streams and motion fields are JSON Lines so large videos can be
appended and diffed line by line; tracks, models, manifests and reports are
single JSON documents. Coordinates are pixels, origin top-left, y downward.
"""

from __future__ import annotations

import csv
import json
import math
import os
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field, replace

import numpy as np

from .appearance import AppearanceHistogram
from .errors import FrameIndexError, ParseError, SchemaError

MAX_PROJECTION_DEPTH = 5

LINEAR = "linear"
ANGULAR = "angular"


@dataclass(frozen=True)
class DetectionBox:
    frame: int
    cx: float
    cy: float
    w: float
    h: float
    score: float
    source_id: str
    projected_depth: int = 0
    appearance: AppearanceHistogram | None = field(default=None, compare=False)

    def __post_init__(self):
        if not (self.w > 0 and self.h > 0):
            raise SchemaError(f"box width/height must be positive, got w={self.w} h={self.h}")
        if not 0 <= self.projected_depth <= MAX_PROJECTION_DEPTH:
            raise SchemaError(f"projected_depth {self.projected_depth} outside 0..{MAX_PROJECTION_DEPTH}")
        if self.frame < 0:
            raise FrameIndexError(f"negative frame index {self.frame}")

    @property
    def center(self):
        return (self.cx, self.cy)

    def corners(self):
        return (self.cx - self.w / 2, self.cy - self.h / 2, self.cx + self.w / 2, self.cy + self.h / 2)


@dataclass(frozen=True)
class SourceInfo:
    source_id: str
    learned_threshold: float
    class_label: str
    posture_label: str | None = None


@dataclass
class DetectionStream:
    """All boxes of one video, grouped per frame.

    Treated as immutable: every transformation returns a new stream.
    """

    video_id: str
    frame_count: int
    sources: dict  # source_id -> SourceInfo
    frames: list  # frame_count lists of DetectionBox

    def __post_init__(self):
        if self.frame_count < 1:
            raise SchemaError("frame_count must be >= 1")
        if len(self.frames) != self.frame_count:
            raise SchemaError("frames list length must equal frame_count")
        for t, boxes in enumerate(self.frames):
            for b in boxes:
                if b.frame != t:
                    raise FrameIndexError(f"box with frame {b.frame} filed under frame {t}")
                if b.source_id not in self.sources:
                    raise SchemaError(f"source {b.source_id!r} missing from stream metadata")

    @classmethod
    def from_boxes(cls, video_id, frame_count, sources, boxes):
        if isinstance(sources, (list, tuple)):
            sources = {s.source_id: s for s in sources}
        frames = [[] for _ in range(frame_count)]
        for b in boxes:
            if b.frame >= frame_count:
                raise FrameIndexError(f"box frame {b.frame} >= frame_count {frame_count}")
            frames[b.frame].append(b)
        return cls(video_id, frame_count, dict(sources), frames)

    def boxes(self):
        for frame_boxes in self.frames:
            yield from frame_boxes

    def with_frames(self, frames, sources=None):
        return replace(self, frames=frames, sources=dict(self.sources if sources is None else sources))

    def sources_of_class(self, class_label):
        return [s for s, info in self.sources.items() if info.class_label == class_label]

    def class_labels(self):
        return sorted({info.class_label for info in self.sources.values()})


@dataclass(eq=False)
class MotionField:
    """Sparse point correspondences between consecutive frames.

    ``pairs[t]`` is a (P, 4) array of (x, y, x2, y2) rows mapping frame t to t+1.
    """

    frame_count: int
    pairs: list

    def __post_init__(self):
        if len(self.pairs) != self.frame_count:
            raise SchemaError("motion field must hold one correspondence array per frame")
        fixed = []
        for t, p in enumerate(self.pairs):
            arr = np.asarray(p, dtype=float).reshape(-1, 4)
            if t == self.frame_count - 1 and len(arr):
                raise FrameIndexError(f"correspondence at frame {t} has no successor frame")
            fixed.append(arr)
        self.pairs = fixed

    @classmethod
    def empty(cls, frame_count):
        return cls(frame_count, [np.zeros((0, 4)) for _ in range(frame_count)])

    def __eq__(self, other):
        if not isinstance(other, MotionField) or other.frame_count != self.frame_count:
            return False
        return all(np.array_equal(a, b) for a, b in zip(self.pairs, other.pairs))


@dataclass(frozen=True)
class ManifestEntry:
    video_id: str
    verb_label: str
    detection_stream_path: str
    motion_field_path: str
    frame_width: float
    frame_height: float


@dataclass
class CorpusManifest:
    verbs: list
    entries: list
    root: str = "."

    def __post_init__(self):
        vocab = set(self.verbs)
        for e in self.entries:
            if e.verb_label not in vocab:
                raise SchemaError(f"verb {e.verb_label!r} of {e.video_id} not in vocabulary")

    def resolve(self, path):
        return path if os.path.isabs(path) else os.path.join(self.root, path)

    def by_verb(self):
        out = {v: [] for v in self.verbs}
        for e in self.entries:
            out[e.verb_label].append(e)
        return out


@dataclass
class Track:
    video_id: str
    t0: int
    t1: int
    boxes: list
    coherence: float
    class_label: str

    def __post_init__(self):
        if self.t1 < self.t0:
            raise SchemaError("track interval is empty")
        if len(self.boxes) != self.t1 - self.t0 + 1:
            raise SchemaError("track needs exactly one box per frame of its interval")
        for i, b in enumerate(self.boxes):
            if b.frame != self.t0 + i:
                raise SchemaError(f"track box {i} has frame {b.frame}, expected {self.t0 + i}")

    def __len__(self):
        return len(self.boxes)

    @property
    def source_ids(self):
        return [b.source_id for b in self.boxes]

    def box_at(self, t):
        return self.boxes[t - self.t0]

    def array(self):
        """(l, 4) array of cx, cy, w, h."""
        return np.array([[b.cx, b.cy, b.w, b.h] for b in self.boxes], dtype=float)


@dataclass(frozen=True)
class FeatureSchema:
    names: tuple
    kinds: tuple

    def __post_init__(self):
        if len(self.names) != len(self.kinds):
            raise SchemaError("schema names and kinds differ in length")
        for k in self.kinds:
            if k not in (LINEAR, ANGULAR):
                raise SchemaError(f"unknown feature kind {k!r}")

    def __len__(self):
        return len(self.names)

    @property
    def angular_mask(self):
        return np.array([k == ANGULAR for k in self.kinds], dtype=bool)

    def to_dict(self):
        return {"names": list(self.names), "kinds": list(self.kinds)}

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(d["names"]), tuple(d["kinds"]))


@dataclass(eq=False)
class FeatureSeries:
    video_id: str
    schema: FeatureSchema
    values: np.ndarray  # (T, F)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2 or self.values.shape[1] != len(self.schema):
            raise SchemaError(f"feature array shape {self.values.shape} does not match schema")
        if not np.all(np.isfinite(self.values)):
            raise SchemaError("feature series contains non-finite entries")

    def __len__(self):
        return self.values.shape[0]

    def __eq__(self, other):
        return (isinstance(other, FeatureSeries) and self.video_id == other.video_id
                and self.schema == other.schema and np.array_equal(self.values, other.values))


# ---------------------------------------------------------------------------
# JSON helpers


def _json_line(line, path, lineno):
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}:{lineno}: {exc}") from None
    if not isinstance(obj, dict):
        raise ParseError(f"{path}:{lineno}: expected a JSON object")
    return obj


def _need(obj, key, where):
    try:
        return obj[key]
    except KeyError:
        raise SchemaError(f"{where}: missing field {key!r}") from None


def _real(obj, key, where):
    v = _need(obj, key, where)
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise SchemaError(f"{where}: field {key!r} must be a finite number")
    return float(v)


def _int(obj, key, where):
    v = _need(obj, key, where)
    if isinstance(v, bool) or not isinstance(v, int):
        raise SchemaError(f"{where}: field {key!r} must be an integer")
    return v


def _open_read(path):
    try:
        return open(path, encoding="utf-8")
    except FileNotFoundError:
        raise ParseError(f"{path}: no such file") from None


def dump_json(obj, path):
    """Write deterministic JSON (sorted keys, fixed indentation)."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_json(path):
    with _open_read(path) as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: {exc}") from None


# ---------------------------------------------------------------------------
# detections.jsonl


def box_to_record(box: DetectionBox) -> dict:
    rec = {"frame": box.frame, "cx": box.cx, "cy": box.cy, "w": box.w, "h": box.h,
           "score": box.score, "source_id": box.source_id}
    if box.appearance is not None:
        rec["appearance"] = box.appearance.to_list()
    return rec


def box_from_record(rec: dict, where: str) -> DetectionBox:
    frame = _int(rec, "frame", where)
    if frame < 0:
        raise FrameIndexError(f"{where}: negative frame {frame}")
    source = _need(rec, "source_id", where)
    if not isinstance(source, str):
        raise SchemaError(f"{where}: source_id must be a string")
    appearance = None
    if rec.get("appearance") is not None:
        try:
            appearance = AppearanceHistogram.from_list(rec["appearance"])
        except (ValueError, TypeError) as exc:
            raise SchemaError(f"{where}: bad appearance histogram ({exc})") from None
    return DetectionBox(frame, _real(rec, "cx", where), _real(rec, "cy", where),
                        _real(rec, "w", where), _real(rec, "h", where),
                        _real(rec, "score", where), source, 0, appearance)


def load_detection_stream(path) -> DetectionStream:
    with _open_read(path) as fh:
        lines = [(i + 1, ln) for i, ln in enumerate(fh) if ln.strip()]
    if not lines:
        raise ParseError(f"{path}: empty detection file")
    lineno, first = lines[0]
    header = _json_line(first, path, lineno)
    where = f"{path}:{lineno}"
    video_id = _need(header, "video_id", where)
    frame_count = _int(header, "frame_count", where)
    if frame_count < 1:
        raise SchemaError(f"{where}: frame_count must be >= 1")
    sources = {}
    for s in _need(header, "sources", where):
        sid = _need(s, "source_id", where)
        sources[sid] = SourceInfo(sid, _real(s, "learned_threshold", where),
                                  _need(s, "class_label", where), s.get("posture_label"))
    frames = [[] for _ in range(frame_count)]
    for lineno, ln in lines[1:]:
        where = f"{path}:{lineno}"
        box = box_from_record(_json_line(ln, path, lineno), where)
        if box.frame >= frame_count:
            raise FrameIndexError(f"{where}: frame {box.frame} >= frame_count {frame_count}")
        if box.source_id not in sources:
            raise SchemaError(f"{where}: source {box.source_id!r} not declared in header")
        frames[box.frame].append(box)
    return DetectionStream(video_id, frame_count, sources, frames)


def save_detection_stream(stream: DetectionStream, path) -> None:
    """Write raw detections only; projected boxes are recomputed on load."""
    header = {
        "video_id": stream.video_id,
        "frame_count": stream.frame_count,
        "sources": [
            {"source_id": s.source_id, "learned_threshold": s.learned_threshold,
             "class_label": s.class_label, "posture_label": s.posture_label}
            for s in stream.sources.values()
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(header) + "\n")
        for box in stream.boxes():
            if box.projected_depth == 0:
                fh.write(json.dumps(box_to_record(box)) + "\n")


# ---------------------------------------------------------------------------
# motion.jsonl


def load_motion_field(path, frame_count: int) -> MotionField:
    pairs = [[] for _ in range(frame_count)]
    with _open_read(path) as fh:
        for i, ln in enumerate(fh):
            if not ln.strip():
                continue
            where = f"{path}:{i + 1}"
            rec = _json_line(ln, path, i + 1)
            t = _int(rec, "frame", where)
            if not 0 <= t < frame_count - 1:
                raise FrameIndexError(f"{where}: correspondence frame {t} outside [0, {frame_count - 1})")
            pairs[t].append([_real(rec, k, where) for k in ("x", "y", "x2", "y2")])
    return MotionField(frame_count, pairs)


def save_motion_field(field_: MotionField, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for t, arr in enumerate(field_.pairs):
            fh.writelines(json.dumps({"frame": t, "x": x, "y": y, "x2": x2, "y2": y2}) + "\n" for x, y, x2, y2 in arr.tolist())


# ---------------------------------------------------------------------------
# manifest.json


def load_manifest(path) -> CorpusManifest:
    doc = read_json(path)
    if isinstance(doc, dict):
        verbs = doc.get("verbs")
        items = _need(doc, "videos", str(path))
    else:
        verbs, items = None, doc
    if not isinstance(items, list):
        raise SchemaError(f"{path}: manifest must be an array of entries")
    entries = []
    for i, rec in enumerate(items):
        where = f"{path}[{i}]"
        entries.append(ManifestEntry(
            _need(rec, "video_id", where), _need(rec, "verb_label", where),
            _need(rec, "detection_stream_path", where), _need(rec, "motion_field_path", where),
            _real(rec, "frame_width", where), _real(rec, "frame_height", where)))
    if verbs is None:
        verbs = sorted({e.verb_label for e in entries})
    return CorpusManifest(list(verbs), entries, root=os.path.dirname(os.path.abspath(path)))


def save_manifest(manifest: CorpusManifest, path) -> None:
    dump_json([
        {"video_id": e.video_id, "verb_label": e.verb_label,
         "detection_stream_path": e.detection_stream_path,
         "motion_field_path": e.motion_field_path,
         "frame_width": e.frame_width, "frame_height": e.frame_height}
        for e in manifest.entries
    ], path)


# ---------------------------------------------------------------------------
# tracks.json


def track_to_dict(track: Track) -> dict:
    return {
        "video_id": track.video_id,
        "class_label": track.class_label,
        "t0": track.t0,
        "t1": track.t1,
        "coherence": track.coherence,
        "boxes": [{"frame": b.frame, "cx": b.cx, "cy": b.cy, "w": b.w, "h": b.h,
                   "source_id": b.source_id, "score": b.score} for b in track.boxes],
    }


def track_from_dict(d: dict, video_id: str = "") -> Track:
    where = "track"
    boxes = [DetectionBox(_int(b, "frame", where), _real(b, "cx", where), _real(b, "cy", where),
                          _real(b, "w", where), _real(b, "h", where),
                          float(b.get("score", 0.0)), _need(b, "source_id", where))
             for b in _need(d, "boxes", where)]
    return Track(d.get("video_id", video_id), _int(d, "t0", where), _int(d, "t1", where),
                 boxes, _real(d, "coherence", where), _need(d, "class_label", where))


def save_tracks(tracks: Sequence[Track], path) -> None:
    dump_json([track_to_dict(t) for t in tracks], path)


def load_tracks(path, video_id: str = "") -> list:
    doc = read_json(path)
    if not isinstance(doc, list):
        raise SchemaError(f"{path}: tracks file must hold an array")
    return [track_from_dict(d, video_id) for d in doc]


# ---------------------------------------------------------------------------
# features.csv + sidecar


def save_features(series: FeatureSeries, path) -> None:
    """Write ``path`` (CSV) and ``path + '.json'`` (schema sidecar)."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(series.schema.names)
        for row in series.values:
            w.writerow([repr(float(v)) for v in row])
    dump_json({"video_id": series.video_id, **series.schema.to_dict()}, str(path) + ".json")


def load_features(path) -> FeatureSeries:
    side = read_json(str(path) + ".json")
    schema = FeatureSchema.from_dict(side)
    with _open_read(path) as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != schema.names:
        raise SchemaError(f"{path}: CSV header does not match sidecar schema")
    try:
        values = np.array([[float(v) for v in r] for r in rows[1:]], dtype=float).reshape(-1, len(schema))
    except ValueError as exc:
        raise ParseError(f"{path}: {exc}") from None
    return FeatureSeries(side.get("video_id", ""), schema, values)


# ---------------------------------------------------------------------------
# models


def save_models(models: Iterable, path, metadata: dict | None = None) -> None:
    dump_json({"metadata": metadata or {}, "models": [m.to_dict() for m in models]}, path)


def load_models(path) -> list:
    from .classify import VerbModel

    doc = read_json(path)
    return [VerbModel.from_dict(d) for d in _need(doc, "models", str(path))]
