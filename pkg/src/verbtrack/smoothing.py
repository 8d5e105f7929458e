"""Least-squares cubic spline smoothing of box tracks."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.interpolate import BSpline

from .corpus_io import Track
from .errors import TooShort

CENTER_PIECES = 10
SIZE_PIECES = 5
MIN_SIZE = 1.0


@dataclass(frozen=True)
class SplineFit:
    """A fitted C2 cubic spline on uniform knots over [0, n - 1]."""

    knots: np.ndarray
    coefficients: np.ndarray
    pieces: int

    def __call__(self, t):
        return BSpline(self.knots, self.coefficients, 3, extrapolate=False)(t)


def effective_pieces(n: int, pieces: int) -> int:
    return max(1, min(pieces, n // 4))


def fit_spline(values, pieces: int) -> SplineFit:
    y = np.asarray(values, dtype=float)
    n = len(y)
    if n < 2:
        raise TooShort(f"need at least 2 samples to smooth, got {n}")
    p = effective_pieces(n, pieces)
    inner = np.linspace(0.0, n - 1.0, p + 1)
    knots = np.concatenate([[inner[0]] * 3, inner, [inner[-1]] * 3])
    t = np.arange(n, dtype=float)
    basis = BSpline.design_matrix(t, knots, 3).toarray()
    # minimum-norm solution when n < 4 leaves the fit interpolating
    coef, *_ = np.linalg.lstsq(basis, y, rcond=None)
    return SplineFit(knots, coef, p)


def smooth_signal(values, pieces: int) -> np.ndarray:
    """Fit a least-squares cubic spline with ``pieces`` uniform spans and resample it.

    Short signals use fewer pieces: at most one per four samples, never fewer
    than one.
    """
    fit = fit_spline(values, pieces)
    return fit(np.arange(len(values), dtype=float))


def smooth_track(track: Track, center_pieces: int = CENTER_PIECES,
                 size_pieces: int = SIZE_PIECES) -> Track:
    arr = track.array()
    cx = smooth_signal(arr[:, 0], center_pieces)
    cy = smooth_signal(arr[:, 1], center_pieces)
    w = np.maximum(smooth_signal(arr[:, 2], size_pieces), MIN_SIZE)
    h = np.maximum(smooth_signal(arr[:, 3], size_pieces), MIN_SIZE)
    boxes = [replace(b, cx=float(cx[i]), cy=float(cy[i]), w=float(w[i]), h=float(h[i]))
             for i, b in enumerate(track.boxes)]
    return replace(track, boxes=boxes)
