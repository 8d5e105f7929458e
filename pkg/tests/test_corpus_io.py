import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from verbtrack.appearance import AppearanceHistogram
from verbtrack.classify import train_from_features
from verbtrack.corpus_io import (
    CorpusManifest,
    DetectionBox,
    DetectionStream,
    FeatureSchema,
    FeatureSeries,
    ManifestEntry,
    MotionField,
    SourceInfo,
    Track,
    load_detection_stream,
    load_features,
    load_manifest,
    load_models,
    load_motion_field,
    load_tracks,
    save_detection_stream,
    save_features,
    save_manifest,
    save_models,
    save_motion_field,
    save_tracks,
)
from verbtrack.errors import FrameIndexError, ParseError, SchemaError
from verbtrack.features import SINGLE_SCHEMA

HEADER = {"video_id": "v", "frame_count": 1,
          "sources": [{"source_id": "person", "learned_threshold": 0.0, "class_label": "person"}]}


def write_lines(path, *records):
    path.write_text("".join((r if isinstance(r, str) else json.dumps(r)) + "\n" for r in records))
    return path


def test_minimal_stream(tmp_path):
    p = write_lines(tmp_path / "d.jsonl", HEADER,
                    {"frame": 0, "cx": 10, "cy": 10, "w": 4, "h": 8, "score": 1.0, "source_id": "person"})
    s = load_detection_stream(p)
    assert s.frame_count == 1
    assert list(s.boxes()) == [DetectionBox(0, 10.0, 10.0, 4.0, 8.0, 1.0, "person")]


@pytest.mark.parametrize("box, error", [
    ({"frame": 0, "cx": 1, "cy": 1, "w": 0, "h": 8, "score": 1, "source_id": "person"}, SchemaError),
    ({"frame": 0, "cx": 1, "cy": 1, "h": 8, "score": 1, "source_id": "person"}, SchemaError),
    ({"frame": 1, "cx": 1, "cy": 1, "w": 2, "h": 8, "score": 1, "source_id": "person"}, IndexError),
    ({"frame": 0, "cx": 1, "cy": 1, "w": 2, "h": 8, "score": 1, "source_id": "dog"}, SchemaError),
    ({"frame": 0, "cx": "x", "cy": 1, "w": 2, "h": 8, "score": 1, "source_id": "person"}, SchemaError),
    ("{not json", ParseError),
])
def test_stream_rejects(tmp_path, box, error):
    with pytest.raises(error):
        load_detection_stream(write_lines(tmp_path / "d.jsonl", HEADER, box))


def test_missing_file_is_parse_error(tmp_path):
    with pytest.raises(ParseError):
        load_detection_stream(tmp_path / "nope.jsonl")
    with pytest.raises(ParseError):
        load_manifest(tmp_path / "manifest.json")


def test_frame_index_error_is_index_error():
    assert issubclass(FrameIndexError, IndexError)


def test_motion_field_files(tmp_path):
    p = tmp_path / "m.jsonl"
    p.write_text("")
    f = load_motion_field(p, 4)
    assert f == MotionField.empty(4)
    write_lines(p, {"frame": 3, "x": 0, "y": 0, "x2": 1, "y2": 1})
    with pytest.raises(IndexError):
        load_motion_field(p, 4)
    with pytest.raises(FrameIndexError):
        MotionField(2, [np.zeros((0, 4)), np.ones((1, 4))])


# ---------------------------------------------------------------------------
# round trips

reals = st.floats(-1e4, 1e4, allow_nan=False)
sizes = st.floats(0.01, 1e3, allow_nan=False)


@st.composite
def histograms(draw, bins=4):
    raw = np.array(draw(st.lists(st.floats(0.01, 1.0), min_size=3 * bins, max_size=3 * bins))).reshape(3, bins)
    return AppearanceHistogram(raw / raw.sum(axis=1, keepdims=True))


@st.composite
def streams(draw):
    n = draw(st.integers(1, 6))
    sources = {s: SourceInfo(s, draw(reals), draw(st.sampled_from(["person", "ball"])),
                             draw(st.none() | st.just("standing")))
               for s in draw(st.sets(st.sampled_from(["a", "b", "c"]), min_size=1))}
    boxes = []
    for _ in range(draw(st.integers(0, 12))):
        hist = draw(st.none() | histograms())
        boxes.append(DetectionBox(draw(st.integers(0, n - 1)), draw(reals), draw(reals), draw(sizes),
                                  draw(sizes), draw(reals), draw(st.sampled_from(sorted(sources))), 0, hist))
    boxes.sort(key=lambda b: b.frame)
    return DetectionStream.from_boxes(draw(st.text("abcxyz-_0123", min_size=1, max_size=8)), n, sources, boxes)


@settings(max_examples=60, deadline=None)
@given(streams())
def test_stream_round_trip(tmp_path_factory, stream):
    p = tmp_path_factory.mktemp("rt") / "d.jsonl"
    save_detection_stream(stream, p)
    back = load_detection_stream(p)
    assert back == stream
    assert [b.appearance for b in back.boxes()] == [b.appearance for b in stream.boxes()]


@st.composite
def fields(draw):
    n = draw(st.integers(1, 5))
    pairs = [np.array(draw(st.lists(st.tuples(reals, reals, reals, reals), max_size=4))).reshape(-1, 4)
             for _ in range(n - 1)]
    return MotionField(n, pairs + [np.zeros((0, 4))])


@settings(max_examples=60, deadline=None)
@given(fields())
def test_motion_round_trip(tmp_path_factory, field):
    p = tmp_path_factory.mktemp("rt") / "m.jsonl"
    save_motion_field(field, p)
    assert load_motion_field(p, field.frame_count) == field


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 5), st.integers(1, 6), st.lists(reals, min_size=4, max_size=4), reals)
def test_track_round_trip(tmp_path_factory, t0, length, xy, coherence):
    boxes = [DetectionBox(t0 + i, xy[0] + i, xy[1], abs(xy[2]) + 1, abs(xy[3]) + 1, 0.5, "a")
             for i in range(length)]
    track = Track("vid", t0, t0 + length - 1, boxes, coherence, "person")
    p = tmp_path_factory.mktemp("rt") / "tracks.json"
    save_tracks([track, track], p)
    back = load_tracks(p)
    assert back == [track, track]


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 10), st.data())
def test_features_round_trip(tmp_path_factory, n, data):
    values = np.array(data.draw(st.lists(reals, min_size=8 * n, max_size=8 * n))).reshape(n, 8)
    series = FeatureSeries("vid", SINGLE_SCHEMA, values)
    p = tmp_path_factory.mktemp("rt") / "features.csv"
    save_features(series, p)
    assert load_features(p) == series


def test_features_header_mismatch(tmp_path):
    series = FeatureSeries("v", FeatureSchema(("a", "b"), ("linear", "angular")), np.zeros((2, 2)))
    p = tmp_path / "f.csv"
    save_features(series, p)
    p.write_text("b,a\n0,0\n")
    with pytest.raises(SchemaError):
        load_features(p)


def test_manifest_round_trip(tmp_path):
    entries = [ManifestEntry(f"v{i}", verb, f"v{i}/d.jsonl", f"v{i}/m.jsonl", 640.0, 480.0)
               for i, verb in enumerate(["run", "jump", "run"])]
    m = CorpusManifest(["jump", "run"], entries, str(tmp_path))
    save_manifest(m, tmp_path / "manifest.json")
    assert isinstance(json.loads((tmp_path / "manifest.json").read_text()), list)
    back = load_manifest(tmp_path / "manifest.json")
    assert back.entries == entries and back.verbs == ["jump", "run"] and back.root == str(tmp_path)


def test_manifest_vocabulary(tmp_path):
    doc = {"verbs": ["run"], "videos": [{"video_id": "a", "verb_label": "fly", "detection_stream_path": "d",
                                         "motion_field_path": "m", "frame_width": 1, "frame_height": 1}]}
    (tmp_path / "manifest.json").write_text(json.dumps(doc))
    with pytest.raises(SchemaError):
        load_manifest(tmp_path / "manifest.json")


@pytest.mark.parametrize("kind", ["hmm", "dtw"])
def test_models_round_trip(tmp_path, kind):
    rng = np.random.default_rng(0)
    ex = [(v, FeatureSeries(f"{v}{i}", SINGLE_SCHEMA, rng.normal(size=(12, 8)) + k), None)
          for k, v in enumerate(["a", "b"]) for i in range(2)]
    models = train_from_features(ex, ["a", "b"], kind, seed=1, states=2, restarts=1)
    save_models(models, tmp_path / "models.json")
    back = load_models(tmp_path / "models.json")
    assert [m.to_dict() for m in back] == [m.to_dict() for m in models]
    q = ex[0][1]
    assert [m.score(q) for m in back] == [m.score(q) for m in models]
