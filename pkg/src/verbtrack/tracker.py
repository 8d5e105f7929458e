"""Globally optimal track selection over per-frame detections.

Each frame contributes one candidate vertex per detection (raw or forward
projected). Edges between adjacent frames cost

    -w_conf * score(v) + w_flow * |center(v) - flowed_center(u)| [+ w_app * EMD(u, v)]

and the minimum-cost path through the interval is found by dynamic
programming. Lower cost means a more coherent track; a track's coherence is
the negated cost of its path.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, replace

import numpy as np

from .appearance import emd, pairwise_emd
from .corpus_io import DetectionBox, DetectionStream, MotionField, SourceInfo, Track
from .errors import EmptyFrame, MissingThreshold, NoObjectPresent
from .flow import box_motion, box_motion_many

OTSU_BINS = 50
CAP_OFFSET = 0.4
DETECTION_OFFSET = 1.0
NMS_OVERLAP = 0.8

_TIE_TOL = 1e-12


@dataclass(frozen=True)
class CostWeights:
    w_conf: float = 1.0
    w_flow: float = 0.1
    w_app: float = 1.0

    def __post_init__(self):
        if min(self.w_conf, self.w_flow, self.w_app) < 0:
            raise ValueError("cost weights must be non-negative")


# ---------------------------------------------------------------------------
# detection filtering


def bias_detections(stream: DetectionStream, offset: float = DETECTION_OFFSET) -> DetectionStream:
    """Keep boxes scoring at least ``learned_threshold - offset`` for their source."""
    floors = {}
    for sid, info in stream.sources.items():
        thr = info.learned_threshold
        if thr is None or not math.isfinite(thr):
            raise MissingThreshold(f"source {sid!r} has no learned threshold")
        floors[sid] = thr - offset
    frames = [[b for b in fb if b.score >= floors[b.source_id]] for fb in stream.frames]
    return stream.with_frames(frames)


def iou(a: DetectionBox, b: DetectionBox) -> float:
    ax0, ay0, ax1, ay1 = a.corners()
    bx0, by0, bx1, by1 = b.corners()
    iw = max(0.0, min(ax1, bx1) - max(ax0, bx0))
    ih = max(0.0, min(ay1, by1) - max(ay0, by0))
    inter = iw * ih
    union = a.w * a.h + b.w * b.h - inter
    return inter / union if union > 0 else 0.0


def nms(frame_boxes: Sequence[DetectionBox], overlap: float = NMS_OVERLAP) -> list:
    """Greedy non-maximum suppression; earlier list position wins score ties."""
    order = sorted(range(len(frame_boxes)), key=lambda i: -frame_boxes[i].score)
    kept = []
    for i in order:
        b = frame_boxes[i]
        if all(iou(b, k) <= overlap for k in kept):
            kept.append(b)
    return kept


def nms_stream(stream: DetectionStream, overlap: float = NMS_OVERLAP) -> DetectionStream:
    frames = []
    for fb in stream.frames:
        out = []
        for sid in sorted({b.source_id for b in fb}):
            out.extend(nms([b for b in fb if b.source_id == sid], overlap))
        frames.append(out)
    return stream.with_frames(frames)


# ---------------------------------------------------------------------------
# subinterval selection


def otsu_histogram(values, bins: int = OTSU_BINS):
    values = np.asarray(values, dtype=float)
    lo, hi = float(values.min()), float(values.max())
    counts, edges = np.histogram(values, bins=bins, range=(lo, hi) if hi > lo else (lo, lo + 1.0))
    if hi == lo:
        edges = np.full(bins + 1, lo)
    return counts, edges


def otsu_threshold(counts, edges) -> float:
    """Bin edge that maximises between-class variance of a histogram.

    Candidate thresholds are the lower edges of every bin (class 0 holds the
    bins strictly below). Ties go to the lowest threshold.
    """
    counts = np.asarray(counts, dtype=float)
    p = counts / counts.sum()
    centers = (edges[:-1] + edges[1:]) / 2
    w0 = np.concatenate([[0.0], np.cumsum(p)[:-1]])
    m0 = np.concatenate([[0.0], np.cumsum(p * centers)[:-1]])
    total_mean = (p * centers).sum()
    w1 = 1.0 - w0
    with np.errstate(divide="ignore", invalid="ignore"):
        mu0 = np.where(w0 > 0, m0 / w0, 0.0)
        mu1 = np.where(w1 > 0, (total_mean - m0) / w1, 0.0)
    var = np.where((w0 > 0) & (w1 > 0), w0 * w1 * (mu0 - mu1) ** 2, 0.0)
    best = var.max()
    k = int(np.flatnonzero(var >= best - _TIE_TOL * max(1.0, best))[0])
    return float(edges[k])


def max_scores(stream: DetectionStream, source_ids: Iterable[str]) -> np.ndarray:
    """Per-frame maximum score over ``source_ids`` (-inf where none)."""
    ids = set(source_ids)
    out = np.full(stream.frame_count, -np.inf)
    for t, fb in enumerate(stream.frames):
        s = [b.score for b in fb if b.source_id in ids]
        if s:
            out[t] = max(s)
    return out


def subinterval_threshold(stream: DetectionStream, source_ids, bins: int = OTSU_BINS,
                          cap_offset: float = CAP_OFFSET) -> float:
    if isinstance(source_ids, str):
        source_ids = [source_ids]
    m = max_scores(stream, source_ids)
    finite = m[np.isfinite(m)]
    if len(finite) == 0:
        raise NoObjectPresent(f"no detections from {sorted(source_ids)} in {stream.video_id}")
    counts, edges = otsu_histogram(finite, bins)
    cap = min(stream.sources[s].learned_threshold for s in source_ids) + cap_offset
    return min(otsu_threshold(counts, edges), cap)


def subinterval(stream: DetectionStream, source_ids, bins: int = OTSU_BINS,
                cap_offset: float = CAP_OFFSET):
    """First and last frame whose maximum score reaches the presence threshold."""
    if isinstance(source_ids, str):
        source_ids = [source_ids]
    tau = subinterval_threshold(stream, source_ids, bins, cap_offset)
    present = np.flatnonzero(max_scores(stream, source_ids) >= tau)
    if len(present) == 0:
        raise NoObjectPresent(f"no frame reaches threshold {tau}")
    return int(present[0]), int(present[-1])


# ---------------------------------------------------------------------------
# path selection


def edge_cost(u: DetectionBox, v: DetectionBox, field: MotionField,
              weights: CostWeights = CostWeights(), appearance: bool = False) -> float:
    if v.frame != u.frame + 1:
        raise ValueError("edge must join adjacent frames")
    m = box_motion(field, u.frame, u)
    dist = math.hypot(v.cx - (u.cx + m.vx), v.cy - (u.cy + m.vy))
    cost = -weights.w_conf * v.score + weights.w_flow * dist
    if appearance and u.appearance is not None and v.appearance is not None:
        cost += weights.w_app * emd(u.appearance, v.appearance)
    return cost


def candidates(stream: DetectionStream, source_ids, interval):
    ids = set(source_ids)
    t0, t1 = interval
    return [[b for b in stream.frames[t] if b.source_id in ids] for t in range(t0, t1 + 1)]


class _FrameArrays:
    __slots__ = ("boxes", "cdf", "has_app", "scores")

    def __init__(self, boxes, with_appearance):
        self.boxes = np.array([[b.cx, b.cy, b.w, b.h] for b in boxes], dtype=float)
        self.scores = np.array([b.score for b in boxes], dtype=float)
        self.cdf = None
        self.has_app = None
        if with_appearance:
            self.has_app = np.array([b.appearance is not None for b in boxes])
            if self.has_app.any():
                bins = next(b.appearance.bins for b in boxes if b.appearance is not None)
                self.cdf = np.stack([b.appearance.cdf if b.appearance is not None
                                     else np.zeros((3, bins)) for b in boxes])


def _transition_costs(field, frame, prev: _FrameArrays, nxt: _FrameArrays, weights, appearance):
    vel = box_motion_many(field, frame, prev.boxes)[:, :2]
    proj = prev.boxes[:, :2] + vel
    diff = nxt.boxes[None, :, :2] - proj[:, None, :]
    dist = np.sqrt((diff ** 2).sum(axis=2))
    cost = -weights.w_conf * nxt.scores[None, :] + weights.w_flow * dist
    if appearance and prev.cdf is not None and nxt.cdf is not None:
        both = prev.has_app[:, None] & nxt.has_app[None, :]
        cost = cost + weights.w_app * np.where(both, pairwise_emd(prev.cdf, nxt.cdf), 0.0)
    return cost


def path_cost(boxes: Sequence[DetectionBox], field: MotionField,
              weights: CostWeights = CostWeights(), appearance: bool = False) -> float:
    """Total cost of a box sequence: start confidence term plus every edge."""
    cost = -weights.w_conf * boxes[0].score
    for u, v in zip(boxes, boxes[1:]):
        cost += edge_cost(u, v, field, weights, appearance)
    return cost


def viterbi_select(stream: DetectionStream, field: MotionField, source_ids, interval,
                   weights: CostWeights = CostWeights(), appearance: bool = False,
                   class_label: str | None = None, stats: dict | None = None) -> Track:
    """Minimum-cost one-box-per-frame path through ``interval`` (inclusive).

    ``stats``, when given, receives the number of edges evaluated.
    """
    if isinstance(source_ids, str):
        source_ids = [source_ids]
    t0, t1 = interval
    cands = candidates(stream, source_ids, interval)
    for i, c in enumerate(cands):
        if not c:
            raise EmptyFrame(t0 + i)
    arrays = [_FrameArrays(c, appearance) for c in cands]
    acc = -weights.w_conf * arrays[0].scores
    back = []
    n_edges = 0
    for i in range(1, len(cands)):
        total = acc[:, None] + _transition_costs(field, t0 + i - 1, arrays[i - 1], arrays[i],
                                                 weights, appearance)
        n_edges += total.size
        arg = np.argmin(total, axis=0)
        back.append(arg)
        acc = total[arg, np.arange(total.shape[1])]
    j = int(np.argmin(acc))
    best = float(acc[j])
    path = [j]
    for arg in reversed(back):
        j = int(arg[j])
        path.append(j)
    path.reverse()
    boxes = [cands[i][k] for i, k in enumerate(path)]
    if stats is not None:
        stats["edge_evaluations"] = stats.get("edge_evaluations", 0) + n_edges
    if class_label is None:
        class_label = stream.sources[boxes[0].source_id].class_label
    return Track(stream.video_id, t0, t1, boxes, -best, class_label)


# ---------------------------------------------------------------------------
# multiple tracks


def lower_quartile_max(scores: Sequence[float]) -> float:
    """Largest of the lowest ceil(n/4) scores."""
    s = sorted(scores)
    return s[max(1, math.ceil(len(s) / 4)) - 1]


def rescore_for_next(stream: DetectionStream, track: Track, source_ids=None) -> DetectionStream:
    """Demote detections centred strictly inside the track's boxes.

    Affected boxes take the frame's lower-quartile maximum score, computed
    over ``source_ids`` (all sources by default) before any rescoring.
    """
    ids = set(stream.sources if source_ids is None else source_ids)
    frames = list(stream.frames)
    for tb in track.boxes:
        t = tb.frame
        pool = [b for b in frames[t] if b.source_id in ids]
        if not pool:
            continue
        q = lower_quartile_max([b.score for b in pool])
        x0, y0, x1, y1 = tb.corners()
        frames[t] = [replace(b, score=q)
                     if b.source_id in ids and x0 < b.cx < x1 and y0 < b.cy < y1 else b
                     for b in frames[t]]
    return stream.with_frames(frames)


def track_is_supported(stream: DetectionStream, track: Track) -> bool:
    """Whether the track's boxes score, on average, at or above their sources' thresholds."""
    margins = [b.score - stream.sources[b.source_id].learned_threshold for b in track.boxes]
    return float(np.mean(margins)) >= 0.0


def track_n(stream: DetectionStream, field: MotionField, n: int, source_ids,
            weights: CostWeights = CostWeights(), bins: int = OTSU_BINS,
            cap_offset: float = CAP_OFFSET, appearance: str = "after_first",
            require_support: bool = True, class_label: str | None = None,
            stats: dict | None = None, min_length: int = 1) -> list:
    """Extract up to ``n`` tracks by repeated selection and rescoring.

    ``appearance`` is one of ``"after_first"`` (appearance term from the second
    track on), ``"all"`` or ``"none"``. Extraction stops early when no frame
    reaches the presence threshold, when the selected path is shorter than
    ``min_length`` frames or, with ``require_support``, when its mean score
    falls below the sources' learned thresholds.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if appearance not in ("after_first", "all", "none"):
        raise ValueError(f"unknown appearance mode {appearance!r}")
    if isinstance(source_ids, str):
        source_ids = [source_ids]
    tracks = []
    cur = stream
    for i in range(n):
        try:
            interval = subinterval(cur, source_ids, bins, cap_offset)
        except NoObjectPresent:
            break
        use_app = appearance == "all" or (appearance == "after_first" and i > 0)
        track = viterbi_select(cur, field, source_ids, interval, weights, use_app,
                               class_label, stats)
        if len(track) < min_length or (require_support and not track_is_supported(cur, track)):
            break
        tracks.append(track)
        cur = rescore_for_next(cur, track, source_ids)
    return sorted(tracks, key=lambda tr: -tr.coherence)


# ---------------------------------------------------------------------------
# multiple detection sources


def source_thresholds(stream: DetectionStream, source_ids, bins: int = OTSU_BINS,
                      cap_offset: float = CAP_OFFSET) -> dict:
    """Presence threshold of each source; sources with no detections are omitted."""
    taus = {}
    for s in source_ids:
        try:
            taus[s] = subinterval_threshold(stream, [s], bins, cap_offset)
        except NoObjectPresent:
            pass
    return taus


def merge_sources(stream: DetectionStream, source_ids, thresholds: dict | None = None,
                  bins: int = OTSU_BINS, cap_offset: float = CAP_OFFSET) -> DetectionStream:
    """Make several sources' scores comparable by subtracting each one's presence threshold.

    Each box keeps its own ``source_id`` so tracks can report per-frame sources.
    The learned thresholds in the metadata shift by the same amount. Sources
    without any detection contribute nothing.
    """
    if not source_ids:
        raise ValueError("need at least one source")
    taus = source_thresholds(stream, source_ids, bins, cap_offset) if thresholds is None else dict(thresholds)
    sources = dict(stream.sources)
    for s, tau in taus.items():
        info = sources[s]
        sources[s] = SourceInfo(s, info.learned_threshold - tau, info.class_label, info.posture_label)
    ids = set(source_ids)
    frames = []
    for fb in stream.frames:
        out = []
        for b in fb:
            if b.source_id not in ids:
                out.append(b)
            elif b.source_id in taus:
                out.append(replace(b, score=b.score - taus[b.source_id]))
        frames.append(out)
    return stream.with_frames(frames, sources)
