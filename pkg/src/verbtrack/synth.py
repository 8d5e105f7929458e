"""Synthetic scenes with known ground truth.

Participants follow piecewise trajectories built from constant-velocity and
constant-acceleration segments, so positions, velocities and accelerations
are available in closed form. A scene is rendered as a noisy detection
stream (jitter, dropouts, false positives) plus point correspondences that
follow the true motion.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, replace

import numpy as np

from .appearance import solid_color_histogram
from .corpus_io import (
    CorpusManifest,
    DetectionBox,
    DetectionStream,
    ManifestEntry,
    MotionField,
    SourceInfo,
    Track,
    save_detection_stream,
    save_manifest,
    save_motion_field,
    save_tracks,
)

FRAME_W = 640.0
FRAME_H = 480.0
FRAME_COUNT = 48
MARGIN = 4.0

CLASS_SIZES = {"person": (40.0, 90.0), "ball": (22.0, 22.0), "dog": (56.0, 34.0)}
DEFAULT_SOURCES = tuple(SourceInfo(c, 0.0, c) for c in ("person", "ball", "dog"))

ARCHETYPES = ("approach", "leave", "chase", "jump", "fall", "bounce", "pick-up", "run")


@dataclass(frozen=True)
class Segment:
    """``duration`` frames of motion with initial velocity, constant acceleration
    and constant per-frame size change."""

    duration: int
    vx: float = 0.0
    vy: float = 0.0
    ax: float = 0.0
    ay: float = 0.0
    dw: float = 0.0
    dh: float = 0.0


@dataclass
class Participant:
    class_label: str
    start: tuple  # cx, cy, w, h at frame 0
    segments: list
    visible: tuple | None = None  # inclusive (first, last) frame
    color: tuple | None = None  # sRGB in [0, 1], enables appearance histograms

    def states(self, frame_count):
        """(frame_count, 4) closed-form cx, cy, w, h per frame."""
        out = np.zeros((frame_count, 4))
        cx, cy, w, h = self.start
        t = 0
        segs = list(self.segments) or [Segment(frame_count)]
        for k, seg in enumerate(segs):
            dur = seg.duration if k < len(segs) - 1 else max(seg.duration, frame_count - t)
            for tau in range(dur):
                if t >= frame_count:
                    break
                out[t] = (cx + seg.vx * tau + 0.5 * seg.ax * tau * tau,
                          cy + seg.vy * tau + 0.5 * seg.ay * tau * tau,
                          w + seg.dw * tau, h + seg.dh * tau)
                t += 1
            cx += seg.vx * dur + 0.5 * seg.ax * dur * dur
            cy += seg.vy * dur + 0.5 * seg.ay * dur * dur
            w += seg.dw * dur
            h += seg.dh * dur
            if t >= frame_count:
                break
        return out

    def visible_range(self, frame_count):
        return self.visible if self.visible is not None else (0, frame_count - 1)


@dataclass
class SceneScript:
    verb: str
    participants: list
    frame_count: int = FRAME_COUNT
    width: float = FRAME_W
    height: float = FRAME_H
    sources: tuple = DEFAULT_SOURCES
    video_id: str = "video"

    def ground_truth(self):
        """Per participant, the clamped (frame_count, 4) box array."""
        out = []
        for p in self.participants:
            s = p.states(self.frame_count)
            s[:, 2] = np.maximum(s[:, 2], 2.0)
            s[:, 3] = np.maximum(s[:, 3], 2.0)
            s[:, 0] = np.clip(s[:, 0], MARGIN, self.width - MARGIN)
            s[:, 1] = np.clip(s[:, 1], MARGIN, self.height - MARGIN)
            out.append(s)
        return out


@dataclass(frozen=True)
class NoiseConfig:
    jitter_std: float = 3.0
    fp_rate: float = 10.0
    fn_rate: float = 0.2
    true_mean: float = 1.0
    true_std: float = 0.3
    fp_mean: float = -0.6
    fp_std: float = 0.25
    flow_noise: float = 0.3
    flow_grid: int = 4
    seed: int = 0

    def __post_init__(self):
        if min(self.jitter_std, self.fp_rate, self.true_std, self.fp_std, self.flow_noise) < 0:
            raise ValueError("noise magnitudes must be non-negative")
        if not 0.0 <= self.fn_rate <= 1.0:
            raise ValueError("fn_rate must be a probability")


NOISELESS = NoiseConfig(jitter_std=0.0, fp_rate=0.0, fn_rate=0.0, true_std=0.0, flow_noise=0.0)


@dataclass
class Scene:
    stream: DetectionStream
    field: MotionField
    ground_truth: list  # Track per participant
    verb: str


def _source_for(script, class_label):
    for s in script.sources:
        if s.class_label == class_label:
            return s.source_id
    raise ValueError(f"no detection source for class {class_label!r}")


def _random_histogram(rng, bins=12):
    return solid_color_histogram(rng.uniform(0, 1, size=3), bins)


def generate_scene(script: SceneScript, noise: NoiseConfig = NoiseConfig()) -> Scene:
    """Render a script into detections, correspondences and ground-truth tracks.

    A pure function of ``(script, noise)``; all randomness comes from ``noise.seed``.
    """
    rng = np.random.default_rng(noise.seed)
    T = script.frame_count
    truth = script.ground_truth()
    use_app = any(p.color is not None for p in script.participants)
    hists = [solid_color_histogram(p.color) if p.color is not None else None
             for p in script.participants]
    boxes = []
    gt_tracks = []
    for p, states, hist in zip(script.participants, truth, hists):
        src = _source_for(script, p.class_label)
        v0, v1 = p.visible_range(T)
        gt_boxes = [DetectionBox(t, *map(float, states[t]), 1.0, src) for t in range(v0, v1 + 1)]
        gt_tracks.append(Track(script.video_id, v0, v1, gt_boxes, 0.0, p.class_label))
        for t in range(v0, v1 + 1):
            if rng.random() < noise.fn_rate:
                continue
            cx, cy, w, h = states[t] + rng.normal(0, noise.jitter_std, size=4) * (noise.jitter_std > 0)
            score = noise.true_mean + noise.true_std * rng.standard_normal()
            boxes.append(DetectionBox(t, float(cx), float(cy), float(max(w, 2.0)), float(max(h, 2.0)),
                                      float(score), src, 0, hist))
    for src in script.sources:
        bw, bh = CLASS_SIZES.get(src.class_label, (40.0, 40.0))
        for t in range(T):
            for _ in range(rng.poisson(noise.fp_rate)):
                w = bw * rng.uniform(0.7, 1.3)
                h = bh * rng.uniform(0.7, 1.3)
                cx = rng.uniform(w / 2, script.width - w / 2)
                cy = rng.uniform(h / 2, script.height - h / 2)
                score = noise.fp_mean + noise.fp_std * rng.standard_normal()
                boxes.append(DetectionBox(t, float(cx), float(cy), float(w), float(h), float(score),
                                          src.source_id, 0, _random_histogram(rng) if use_app else None))
    boxes.sort(key=lambda b: b.frame)
    stream = DetectionStream.from_boxes(script.video_id, T, script.sources, boxes)
    field_ = MotionField(T, _correspondences(script, truth, noise, rng))
    return Scene(stream, field_, gt_tracks, script.verb)


def _correspondences(script, truth, noise, rng):
    T = script.frame_count
    g = noise.flow_grid
    grid = (np.arange(g) + 0.5) / g - 0.5  # offsets in units of box size
    gx, gy = np.meshgrid(grid, grid)
    gx, gy = gx.ravel() * 0.8, gy.ravel() * 0.8
    ranges = [p.visible_range(T) for p in script.participants]
    pairs = [[] for _ in range(T)]
    for i, (p, states) in enumerate(zip(script.participants, truth)):
        v0, v1 = ranges[i]
        for t in range(v0, min(v1, T - 2) + 1):
            cx, cy, w, h = states[t]
            nx, ny, nw, nh = states[t + 1]
            x = cx + gx * w
            y = cy + gy * h
            x2 = nx + gx * nw + rng.normal(0, noise.flow_noise, size=len(gx)) * (noise.flow_noise > 0)
            y2 = ny + gy * nh + rng.normal(0, noise.flow_noise, size=len(gy)) * (noise.flow_noise > 0)
            # later participants are drawn in front and hide what lies behind them
            seen = np.ones(len(x), dtype=bool)
            for j in range(i + 1, len(truth)):
                if ranges[j][0] <= t <= ranges[j][1]:
                    ox, oy, ow, oh = truth[j][t]
                    seen &= (np.abs(x - ox) > ow / 2) | (np.abs(y - oy) > oh / 2)
            pairs[t].append(np.column_stack([x, y, x2, y2])[seen])
    return [np.vstack(p) if p else np.zeros((0, 4)) for p in pairs]


# ---------------------------------------------------------------------------
# verb archetypes


def _person(rng, cx, cy):
    w, h = CLASS_SIZES["person"]
    return (cx, cy, w * rng.uniform(0.9, 1.1), h * rng.uniform(0.9, 1.1))


def _ball(rng, cx, cy):
    s = CLASS_SIZES["ball"][0] * rng.uniform(0.9, 1.1)
    return (cx, cy, s, s)


def _dog(rng, cx, cy):
    w, h = CLASS_SIZES["dog"]
    return (cx, cy, w * rng.uniform(0.9, 1.1), h * rng.uniform(0.9, 1.1))


def make_script(verb: str, rng, frame_count: int = FRAME_COUNT, video_id: str = "video") -> SceneScript:
    """Random instance of one verb archetype."""
    T = frame_count
    W, H = FRAME_W, FRAME_H
    side = rng.choice([-1.0, 1.0])
    ground = rng.uniform(0.55, 0.75) * H
    parts = []
    if verb in ("approach", "leave", "pick-up"):
        ball_x = W / 2 + rng.uniform(-60, 60)
        ball_y = ground + 30
        speed = rng.uniform(2.5, 4.0)
        if verb == "approach":
            walk = int(T * rng.uniform(0.6, 0.75))
            start = ball_x - side * (speed * walk + 30)
            parts.append(Participant("person", _person(rng, start, ground),
                                     [Segment(walk, vx=side * speed), Segment(T - walk)]))
            parts.append(Participant("ball", _ball(rng, ball_x, ball_y), [Segment(T)]))
        elif verb == "leave":
            still = int(T * rng.uniform(0.15, 0.3))
            start = ball_x - side * 30
            parts.append(Participant("person", _person(rng, start, ground),
                                     [Segment(still), Segment(T - still, vx=-side * speed)]))
            parts.append(Participant("ball", _ball(rng, ball_x, ball_y), [Segment(T)]))
        else:
            walk = int(T * rng.uniform(0.35, 0.45))
            lift = int(rng.integers(8, 12))
            start = ball_x - side * (speed * walk + 25)
            rise = rng.uniform(3.0, 4.5)
            parts.append(Participant("person", _person(rng, start, ground),
                                     [Segment(walk, vx=side * speed), Segment(T - walk)]))
            parts.append(Participant("ball", _ball(rng, ball_x, ball_y),
                                     [Segment(walk), Segment(lift, vy=-rise), Segment(T - walk - lift)]))
    elif verb == "chase":
        speed = rng.uniform(4.0, 6.0)
        gap = rng.uniform(90, 130)
        lead_x = W / 2 - side * (speed * T / 2) + side * gap / 2
        parts.append(Participant("dog", _dog(rng, lead_x, ground + 25), [Segment(T, vx=side * speed)]))
        parts.append(Participant("person", _person(rng, lead_x - side * gap, ground),
                                 [Segment(T, vx=side * speed)]))
    elif verb == "jump":
        x = rng.uniform(0.25, 0.75) * W
        pre = int(T * rng.uniform(0.25, 0.4))
        air = int(rng.integers(14, 20))
        g = rng.uniform(0.5, 0.7)
        drift = rng.uniform(-1.0, 1.0)
        parts.append(Participant("person", _person(rng, x, ground),
                                 [Segment(pre), Segment(air, vx=drift, vy=-g * air / 2, ay=g),
                                  Segment(T - pre - air)]))
    elif verb == "fall":
        x = rng.uniform(0.25, 0.75) * W
        pre = int(T * rng.uniform(0.25, 0.4))
        dur = int(rng.integers(8, 12))
        w0, h0 = CLASS_SIZES["person"]
        parts.append(Participant("person", _person(rng, x, ground),
                                 [Segment(pre),
                                  Segment(dur, vx=side * 1.5, vy=(h0 - w0) / 2 / dur,
                                          dw=(h0 - w0) / dur, dh=-(h0 - w0) / dur),
                                  Segment(T - pre - dur)]))
    elif verb == "bounce":
        period = int(rng.integers(10, 16))
        g = rng.uniform(0.8, 1.2)
        vx = side * rng.uniform(1.0, 3.0)
        x = W / 2 - vx * T / 2
        segs = [Segment(period, vx=vx, vy=-g * period / 2, ay=g) for _ in range(T // period + 1)]
        parts.append(Participant("ball", _ball(rng, x, ground + 30), segs))
    elif verb == "run":
        speed = rng.uniform(6.0, 9.0)
        x = W / 2 - side * speed * T / 2
        parts.append(Participant("person", _person(rng, x, ground), [Segment(T, vx=side * speed)]))
    else:
        raise ValueError(f"unknown verb archetype {verb!r}")
    return SceneScript(verb, parts, T, W, H, DEFAULT_SOURCES, video_id)


def single_object_script(rng, frame_count: int = FRAME_COUNT, video_id: str = "video") -> SceneScript:
    """One person on a random piecewise constant-velocity path."""
    T = frame_count
    n_seg = int(rng.integers(1, 4))
    cuts = np.sort(rng.choice(np.arange(5, T - 5), size=n_seg - 1, replace=False)) if n_seg > 1 else []
    bounds = [0, *cuts, T]
    segs = []
    for a, b in zip(bounds, bounds[1:]):
        ang = rng.uniform(-np.pi, np.pi)
        sp = rng.uniform(0.0, 5.0)
        segs.append(Segment(int(b - a), vx=sp * np.cos(ang), vy=sp * np.sin(ang)))
    start = _person(rng, FRAME_W / 2 + rng.uniform(-60, 60), FRAME_H / 2 + rng.uniform(-40, 40))
    p = Participant("person", start, segs)
    return SceneScript("move", [p], T, FRAME_W, FRAME_H, (SourceInfo("person", 0.0, "person"),), video_id)


CROSS_COLORS = ((0.05, 0.1, 0.95), (0.95, 0.9, 0.05))


def crossover_script(rng, frame_count: int = FRAME_COUNT, video_id: str = "video") -> SceneScript:
    """Two people walking towards each other whose boxes overlap mid-video."""
    T = frame_count
    speed = rng.uniform(3.0, 5.0)
    meet_x = FRAME_W / 2 + rng.uniform(-40, 40)
    y = FRAME_H / 2 + rng.uniform(-30, 30)
    dy = rng.uniform(25.0, 45.0) * rng.choice([-1.0, 1.0])
    meet_t = T / 2 + rng.uniform(-4, 4)
    a = Participant("person", _person(rng, meet_x - speed * meet_t, y - dy / 2),
                    [Segment(T, vx=speed)], color=CROSS_COLORS[0])
    b = Participant("person", _person(rng, meet_x + speed * meet_t, y + dy / 2),
                    [Segment(T, vx=-speed)], color=CROSS_COLORS[1])
    return SceneScript("cross", [a, b], T, FRAME_W, FRAME_H, (SourceInfo("person", 0.0, "person"),), video_id)


# ---------------------------------------------------------------------------
# corpora


def write_corpus(outdir, verbs=ARCHETYPES, per_verb: int = 40, noise: NoiseConfig = NoiseConfig(),
                 seed: int = 0, frame_count: int = FRAME_COUNT) -> CorpusManifest:
    """Write manifest.json plus per-video detections, motion and ground truth."""
    os.makedirs(outdir, exist_ok=True)
    entries = []
    for vi, verb in enumerate(verbs):
        for i in range(per_verb):
            vid = f"{verb}-{i:03d}"
            rng = np.random.default_rng([seed, vi, i])
            script = make_script(verb, rng, frame_count, vid)
            scene = generate_scene(script, replace(noise, seed=int(rng.integers(2**31))))
            vdir = os.path.join(outdir, vid)
            os.makedirs(vdir, exist_ok=True)
            save_detection_stream(scene.stream, os.path.join(vdir, "detections.jsonl"))
            save_motion_field(scene.field, os.path.join(vdir, "motion.jsonl"))
            save_tracks(scene.ground_truth, os.path.join(vdir, "ground_truth_tracks.json"))
            entries.append(ManifestEntry(vid, verb, f"{vid}/detections.jsonl", f"{vid}/motion.jsonl",
                                         script.width, script.height))
    manifest = CorpusManifest(sorted(verbs), entries, root=os.path.abspath(outdir))
    save_manifest(manifest, os.path.join(outdir, "manifest.json"))
    return manifest
