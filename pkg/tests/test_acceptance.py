"""End-to-end acceptance checks, one test per criterion.

Each test records a PASS/FAIL line that pytest prints in its summary.
Tolerances and scene counts are fixed here.
"""

import time

import numpy as np
import pytest
from click.testing import CliRunner
from instances import (
    random_histogram,
    random_hmm,
    random_otsu_counts,
    random_path_instance,
    random_schema,
    random_series,
)

from verbtrack.appearance import emd
from verbtrack.cli import main
from verbtrack.config import PipelineConfig
from verbtrack.corpus_io import Track
from verbtrack.evaluation import cross_validate, process_corpus, write_cv_outputs
from verbtrack.features import pair_features, single_features, wrap_angle
from verbtrack.oracles import (
    oracle_best_path,
    oracle_dtw,
    oracle_emd,
    oracle_hmm_loglik,
    oracle_otsu,
)
from verbtrack.pipeline import track_video
from verbtrack.synth import (
    NOISELESS,
    NoiseConfig,
    Participant,
    SceneScript,
    Segment,
    crossover_script,
    generate_scene,
    single_object_script,
    write_corpus,
)
from verbtrack.timeseries.dtw import dtw_distance
from verbtrack.timeseries.hmm import _initial_model, baum_welch, hmm_loglik
from verbtrack.tracker import iou, otsu_threshold, viterbi_select

ORACLE_TOL = 1e-9
ORACLE_BUDGET_S = 60.0
MONOTONE_TOL = 1e-9
IOU_PASS = 0.7
COVERAGE_IOU = 0.5
CV_BUDGET_S = 600.0
FEATURE_TOL = 1e-6


# ---------------------------------------------------------------------------
# 1. oracle equivalence


def _oracle_gap(kind, rng):
    if kind == "viterbi":
        stream, field, interval, weights, app = random_path_instance(rng)
        fast = viterbi_select(stream, field, ["a"], interval, weights, app)
        slow = oracle_best_path(stream, field, interval, ["a"], weights, app)
        return abs(fast.coherence - slow.coherence)
    if kind == "hmm":
        schema = random_schema(rng)
        model = random_hmm(rng, schema, int(rng.integers(1, 4)))
        series = random_series(rng, schema, int(rng.integers(1, 6)))
        return abs(hmm_loglik(model, series) - oracle_hmm_loglik(model, series))
    if kind == "dtw":
        schema = random_schema(rng)
        a = random_series(rng, schema, int(rng.integers(1, 8)))
        b = random_series(rng, schema, int(rng.integers(1, 8)))
        return abs(dtw_distance(a, b) - oracle_dtw(a, b))
    if kind == "otsu":
        counts, edges = random_otsu_counts(rng)
        return abs(otsu_threshold(counts, edges) - oracle_otsu(counts, edges))
    bins = int(rng.integers(1, 5))
    h1, h2 = random_histogram(rng, bins), random_histogram(rng, bins)
    return abs(emd(h1, h2) - oracle_emd(h1, h2))


def test_oracle_equivalence(criterion):
    kinds = ("viterbi", "hmm", "dtw", "otsu", "emd")
    start = time.perf_counter()
    worst = {}
    for ki, kind in enumerate(kinds):
        worst[kind] = max(_oracle_gap(kind, np.random.default_rng([101, ki, i])) for i in range(1000))
    elapsed = time.perf_counter() - start
    ok = all(w <= ORACLE_TOL for w in worst.values()) and elapsed < ORACLE_BUDGET_S
    gaps = ", ".join(f"{k} {w:.1e}" for k, w in worst.items())
    assert criterion(1, ok, f"max |fast - oracle| over 1000 instances each: {gaps} "
                            f"(tol {ORACLE_TOL:g}); {elapsed:.1f} s (< {ORACLE_BUDGET_S:.0f} s)")


# ---------------------------------------------------------------------------
# 2. Baum-Welch monotonicity


def test_baum_welch_monotone(criterion):
    worst = 0.0
    steps = 0
    for i in range(100):
        rng = np.random.default_rng([102, i])
        schema = random_schema(rng, 4)
        K = int(rng.integers(1, 6))
        data = [random_series(rng, schema, int(rng.integers(K + 1, 40))).values
                for _ in range(int(rng.integers(1, 5)))]
        _, history = baum_welch(_initial_model(schema, data, K, rng, True), data, max_iter=60, tol=0.0)
        d = np.diff(history)
        steps += len(d)
        if len(d):
            worst = min(worst, float(d.min()))
    ok = worst >= -MONOTONE_TOL
    assert criterion(2, ok, f"largest per-iteration decrease {-worst:.1e} over {steps} EM steps "
                            f"in 100 sets (tol {MONOTONE_TOL:g})")


# ---------------------------------------------------------------------------
# 3. tracker robustness


def _per_frame_iou(track, truth):
    return np.array([iou(track.box_at(g.frame), g) if track is not None and track.t0 <= g.frame <= track.t1
                     else 0.0 for g in truth.boxes])


def _robustness(depth):
    cfg = PipelineConfig(max_tracks_per_class=1, projection_depth=depth)
    good = failures = 0
    for s in range(200):
        scene = generate_scene(single_object_script(np.random.default_rng([103, s])),
                               NoiseConfig(jitter_std=3.0, fp_rate=10.0, fn_rate=0.2, seed=1300 + s))
        tracks = track_video(scene.stream, scene.field, cfg)
        f = _per_frame_iou(tracks[0] if tracks else None, scene.ground_truth[0])
        good += f.mean() >= IOU_PASS
        failures += int((f < COVERAGE_IOU).sum())
    return good, failures


def test_tracker_robustness(criterion):
    good, fail_on = _robustness(5)
    _, fail_off = _robustness(0)
    ok = good >= 190 and fail_off > fail_on
    assert criterion(3, ok, f"{good}/200 scenes with mean IoU >= {IOU_PASS} (need 190); frames with "
                            f"IoU < {COVERAGE_IOU}: {fail_on} with projection, {fail_off} without")


# ---------------------------------------------------------------------------
# 4. crossover identity


def _keeps_identity(track, truth):
    first = np.argmax([iou(track.boxes[0], g.box_at(track.t0)) for g in truth])
    last = np.argmax([iou(track.boxes[-1], g.box_at(track.t1)) for g in truth])
    return first == last


def _crossover(mode):
    cfg = PipelineConfig(max_tracks_per_class=2, appearance_mode=mode)
    kept = 0
    for s in range(100):
        scene = generate_scene(crossover_script(np.random.default_rng([4, s])), NoiseConfig(seed=2000 + s))
        tracks = track_video(scene.stream, scene.field, cfg)
        kept += len(tracks) == 2 and all(_keeps_identity(t, scene.ground_truth) for t in tracks)
    return kept


def test_crossover_identity(criterion):
    on = _crossover("all")
    off = _crossover("none")
    ok = on >= 90 and on - off >= 5
    assert criterion(4, ok, f"identity kept in {on}/100 scenes with appearance (need 90), "
                            f"{off}/100 without (need at least 5 fewer)")


# ---------------------------------------------------------------------------
# 5 and 6. synthetic cross-validation


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("corpus")
    start = time.perf_counter()
    manifest = write_corpus(str(root), per_verb=40, noise=NoiseConfig(), seed=0)
    return manifest, time.perf_counter() - start


@pytest.fixture(scope="module")
def cv_runs(corpus, tmp_path_factory):
    manifest, gen_s = corpus
    out = tmp_path_factory.mktemp("cv")
    start = time.perf_counter()
    cfg = PipelineConfig(seed=7, dtw_zscore=True)
    results = process_corpus(manifest, cfg)
    runs = {}
    for kind in ("hmm", "dtw"):
        kcfg = cfg.updated(classifier=kind)
        runs[kind] = cross_validate(manifest, kcfg, results)
        write_cv_outputs(runs[kind], kcfg, str(out / kind))
    return runs, out, gen_s + time.perf_counter() - start


def test_synthetic_cv(criterion, cv_runs):
    runs, _, elapsed = cv_runs
    acc = {k: r.confusion.accuracy for k, r in runs.items()}
    rows_ok = all(sum(row) == 40 for r in runs.values() for row in r.confusion.matrix())
    ok = (min(acc.values()) >= 0.85 and abs(acc["hmm"] - acc["dtw"]) <= 0.10
          and elapsed < CV_BUDGET_S and rows_ok)
    assert criterion(5, ok, f"8 verbs x 40, 5 folds: HMM {100 * acc['hmm']:.1f}%, DTW {100 * acc['dtw']:.1f}% "
                            f"(need 85%, gap {100 * abs(acc['hmm'] - acc['dtw']):.1f} pp <= 10); "
                            f"{elapsed:.0f} s (< {CV_BUDGET_S:.0f} s)")


def test_cv_determinism(criterion, corpus, cv_runs, tmp_path):
    manifest, _ = corpus
    _, out, _ = cv_runs
    runner = CliRunner()
    blobs = []
    for i in range(2):
        res = runner.invoke(main, ["cv", "--corpus", manifest.root, "--out", str(tmp_path / f"r{i}"),
                                   "--classifier", "hmm", "--seed", "7", "--set", "dtw_zscore=true"])
        assert res.exit_code == 0, res.output
        blobs.append((tmp_path / f"r{i}" / "confusion.json").read_bytes())
    reference = (out / "hmm" / "confusion.json").read_bytes()
    ok = blobs[0] == blobs[1] == reference
    assert criterion(6, ok, "confusion.json byte-identical across two CLI runs and the library run "
                            f"({len(reference)} bytes)")


# ---------------------------------------------------------------------------
# 7. feature exactness


def _ballistic_script(rng):
    T = 40
    parts = []
    for k in range(2):
        cuts = sorted(rng.choice(np.arange(6, T - 6), size=2, replace=False))
        bounds = [0, *cuts, T]
        segs = [Segment(int(b - a), *rng.uniform(-4, 4, 2), *rng.uniform(-0.3, 0.3, 2),
                        *rng.uniform(-0.5, 0.5, 2)) for a, b in zip(bounds, bounds[1:])]
        start = (5000.0 + 200 * k, 5000.0, rng.uniform(40, 80), rng.uniform(60, 120))
        parts.append(Participant("person", start, segs))
    return SceneScript("scripted", parts, T, 1e4, 1e4)


def _analytic(part, T):
    """Closed-form per-frame single features plus a validity mask."""
    rows, valid = [], []
    cx, cy, w, h = part.start
    t = 0
    for seg in part.segments:
        for tau in range(seg.duration):
            vx = seg.vx + seg.ax * (tau + 0.5)
            vy = seg.vy + seg.ay * (tau + 0.5)
            asp = (w + seg.dw * tau) / (h + seg.dh * tau)
            asp_next = (w + seg.dw * (tau + 1)) / (h + seg.dh * (tau + 1))
            rows.append([cx + seg.vx * tau + 0.5 * seg.ax * tau ** 2, cy + seg.vy * tau + 0.5 * seg.ay * tau ** 2,
                         asp, asp_next - asp, np.hypot(vx, vy), np.arctan2(vy, vx),
                         np.hypot(seg.ax, seg.ay), np.arctan2(seg.ay, seg.ax)])
            # forward differences reach two frames ahead
            valid.append(tau + 2 < seg.duration and t + 2 < T)
            t += 1
        d = seg.duration
        cx += seg.vx * d + 0.5 * seg.ax * d * d
        cy += seg.vy * d + 0.5 * seg.ay * d * d
        w += seg.dw * d
        h += seg.dh * d
    return np.array(rows), np.array(valid)


def _gap(got, want, angular):
    d = np.abs(got - want)
    d[:, angular] = np.abs(wrap_angle(got[:, angular] - want[:, angular]))
    return d


def test_feature_exactness(criterion):
    worst = 0.0
    checked = 0
    ang = np.array([False] * 5 + [True, False, True])
    for s in range(50):
        script = _ballistic_script(np.random.default_rng([107, s]))
        scene = generate_scene(script, NOISELESS)
        truth = [Track(t.video_id, t.t0, t.t1, t.boxes, 1.0 - i, t.class_label)
                 for i, t in enumerate(scene.ground_truth)]
        want = [_analytic(p, script.frame_count) for p in script.participants]
        got = single_features(truth[0]).values
        worst = max(worst, _gap(got, want[0][0], ang)[want[0][1]].max())
        pair = pair_features(truth[0], truth[1]).values
        mask = want[0][1] & want[1][1]
        worst = max(worst, _gap(pair[:, :8], want[0][0], ang)[mask].max(),
                    _gap(pair[:, 8:16], want[1][0], ang)[mask].max())
        d = want[1][0][:, :2] - want[0][0][:, :2]
        dist = np.hypot(d[:, 0], d[:, 1])
        rel = np.column_stack([dist, np.arctan2(d[:, 1], d[:, 0]), np.append(np.diff(dist), 0.0)])
        worst = max(worst, _gap(pair[:, 16:18], rel[:, :2], np.array([False, True]))[mask].max(),
                    np.abs(pair[:-1, 18] - rel[:-1, 2])[mask[:-1]].max())
        checked += int(mask.sum())
    ok = worst <= FEATURE_TOL
    assert criterion(7, ok, f"max feature error {worst:.1e} over {checked} interior frames of 50 "
                            f"scripted pairs (tol {FEATURE_TOL:g})")

