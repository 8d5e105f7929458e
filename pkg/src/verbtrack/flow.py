"""Box motion from point correspondences, and forward projection of boxes."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .corpus_io import MAX_PROJECTION_DEPTH, DetectionBox, DetectionStream, MotionField
from .errors import OutOfRange

SCALE_MIN = 0.5
SCALE_MAX = 2.0


@dataclass(frozen=True)
class BoxMotion:
    vx: float
    vy: float
    sx: float
    sy: float


def _inside(points_xy, boxes):
    """Closed containment mask of shape (N boxes, P points)."""
    x = points_xy[:, 0][None, :]
    y = points_xy[:, 1][None, :]
    cx, cy, w, h = (boxes[:, i][:, None] for i in range(4))
    return (np.abs(x - cx) <= w / 2) & (np.abs(y - cy) <= h / 2)


def _slopes(mask, n, u, u2):
    mean_u = np.where(n > 0, (mask * u).sum(axis=1) / np.maximum(n, 1), 0.0)
    mean_u2 = np.where(n > 0, (mask * u2).sum(axis=1) / np.maximum(n, 1), 0.0)
    du = np.where(mask, u[None, :] - mean_u[:, None], 0.0)
    du2 = np.where(mask, u2[None, :] - mean_u2[:, None], 0.0)
    sxx = (du * du).sum(axis=1)
    sxy = (du * du2).sum(axis=1)
    slope = np.where(sxx > 1e-12, sxy / np.where(sxx > 1e-12, sxx, 1.0), 1.0)
    return np.clip(slope, SCALE_MIN, SCALE_MAX)


def box_motion_many(field: MotionField, frame: int, boxes: np.ndarray) -> np.ndarray:
    """Vectorised :func:`box_motion` for an (N, 4) array of cx, cy, w, h.

    Returns an (N, 4) array of vx, vy, sx, sy.
    """
    boxes = np.asarray(boxes, dtype=float).reshape(-1, 4)
    out = np.zeros((len(boxes), 4))
    out[:, 2:] = 1.0
    if not 0 <= frame < field.frame_count - 1:
        return out
    pts = field.pairs[frame]
    if len(pts) == 0 or len(boxes) == 0:
        return out
    mask = _inside(pts[:, :2], boxes)
    n = mask.sum(axis=1)
    has = n > 0
    safe_n = np.maximum(n, 1)
    dx = pts[:, 2] - pts[:, 0]
    dy = pts[:, 3] - pts[:, 1]
    out[:, 0] = np.where(has, (mask * dx).sum(axis=1) / safe_n, 0.0)
    out[:, 1] = np.where(has, (mask * dy).sum(axis=1) / safe_n, 0.0)
    out[:, 2] = np.where(has, _slopes(mask, n, pts[:, 0], pts[:, 2]), 1.0)
    out[:, 3] = np.where(has, _slopes(mask, n, pts[:, 1], pts[:, 3]), 1.0)
    return out


def box_motion(field: MotionField, frame: int, box: DetectionBox) -> BoxMotion:
    """Mean displacement and per-axis expansion of the points inside ``box``.

    Expansion is the least-squares slope of next-frame against current-frame
    coordinates, clamped to [0.5, 2]. No points inside gives zero motion and
    unit scale.
    """
    vx, vy, sx, sy = box_motion_many(field, frame, [[box.cx, box.cy, box.w, box.h]])[0]
    return BoxMotion(float(vx), float(vy), float(sx), float(sy))


def _step(boxes, motion):
    out = boxes.copy()
    out[:, 0] += motion[:, 0]
    out[:, 1] += motion[:, 1]
    out[:, 2] *= motion[:, 2]
    out[:, 3] *= motion[:, 3]
    return out


def project_forward(field: MotionField, box: DetectionBox, depth: int) -> DetectionBox:
    if not isinstance(depth, (int, np.integer)) or not 1 <= depth <= MAX_PROJECTION_DEPTH:
        raise ValueError(f"projection depth must be an integer in 1..{MAX_PROJECTION_DEPTH}")
    if box.frame + depth >= field.frame_count:
        raise OutOfRange(f"projecting frame {box.frame} by {depth} leaves the video")
    cur = np.array([[box.cx, box.cy, box.w, box.h]], dtype=float)
    for s in range(depth):
        cur = _step(cur, box_motion_many(field, box.frame + s, cur))
    cx, cy, w, h = (float(v) for v in cur[0])
    return replace(box, frame=box.frame + depth, cx=cx, cy=cy, w=w, h=h,
                   projected_depth=box.projected_depth + depth)


def augment_with_projections(stream: DetectionStream, field: MotionField,
                             depth: int = MAX_PROJECTION_DEPTH) -> DetectionStream:
    """Add up to ``depth`` forward projections of every raw detection.

    Projected boxes keep the score, source and appearance of the detection they
    came from. Only raw boxes are projected.
    """
    if not 0 <= depth <= MAX_PROJECTION_DEPTH:
        raise ValueError(f"projection depth must lie in 0..{MAX_PROJECTION_DEPTH}")
    frames = [list(b for b in fb if b.projected_depth == 0) for fb in stream.frames]
    last = stream.frame_count - 1
    for t in range(stream.frame_count):
        raw = [b for b in stream.frames[t] if b.projected_depth == 0]
        if not raw or t == last or depth == 0:
            continue
        cur = np.array([[b.cx, b.cy, b.w, b.h] for b in raw], dtype=float)
        for s in range(1, min(depth, last - t) + 1):
            cur = _step(cur, box_motion_many(field, t + s - 1, cur))
            for b, (cx, cy, w, h) in zip(raw, cur.tolist()):
                frames[t + s].append(DetectionBox(t + s, cx, cy, w, h, b.score, b.source_id, s, b.appearance))
    return stream.with_frames(frames)
