"""CIELAB colour histograms and their earth mover's distance."""

from __future__ import annotations

import numpy as np
from skimage.color import rgb2lab

from .errors import EmptyRegion, SchemaError

DEFAULT_BINS = 12
# (low, high) per channel: L*, a*, b*
LAB_RANGES = ((0.0, 100.0), (-110.0, 110.0), (-110.0, 110.0))


class AppearanceHistogram:
    """Three per-channel histograms (L*, a*, b*), each summing to one."""

    __slots__ = ("_cdf", "channels")

    def __init__(self, channels):
        arr = np.array(channels, dtype=float)
        if arr.ndim != 2 or arr.shape[0] != 3 or arr.shape[1] < 1:
            raise SchemaError(f"appearance histogram needs shape (3, bins), got {arr.shape}")
        if np.any(arr < 0) or not np.all(np.isfinite(arr)):
            raise SchemaError("appearance histogram mass must be finite and non-negative")
        if np.any(np.abs(arr.sum(axis=1) - 1.0) > 1e-9):
            raise SchemaError("each appearance channel must sum to 1")
        arr.setflags(write=False)
        self.channels = arr
        self._cdf = None

    @classmethod
    def from_counts(cls, counts):
        counts = np.asarray(counts, dtype=float)
        totals = counts.sum(axis=1, keepdims=True)
        if np.any(totals <= 0):
            raise EmptyRegion("histogram channel has no mass")
        return cls(counts / totals)

    @classmethod
    def from_list(cls, rows):
        return cls(rows)

    def to_list(self):
        return self.channels.tolist()

    @property
    def bins(self):
        return self.channels.shape[1]

    @property
    def cdf(self):
        if self._cdf is None:
            self._cdf = np.cumsum(self.channels, axis=1)
        return self._cdf

    def __eq__(self, other):
        return isinstance(other, AppearanceHistogram) and np.array_equal(self.channels, other.channels)

    def __repr__(self):
        return f"AppearanceHistogram(bins={self.bins})"


def lab_histogram(lab_pixels, bins=DEFAULT_BINS) -> AppearanceHistogram:
    """Histogram an (N, 3) array of CIELAB pixels over the fixed channel ranges."""
    lab = np.round(np.asarray(lab_pixels, dtype=float).reshape(-1, 3), 6)
    if len(lab) == 0:
        raise EmptyRegion("no pixels to histogram")
    counts = []
    for c, (lo, hi) in enumerate(LAB_RANGES):
        h, _ = np.histogram(np.clip(lab[:, c], lo, hi), bins=bins, range=(lo, hi))
        counts.append(h)
    return AppearanceHistogram.from_counts(counts)


def appearance_histogram(image, box, shrink=0.6, bins=DEFAULT_BINS) -> AppearanceHistogram:
    """Colour histogram of the pixels inside ``box`` scaled about its centre.

    ``image`` is an (H, W, 3) sRGB array, either uint8 or float in [0, 1].
    The box is scaled to ``shrink`` times its width and height before pixels
    are gathered, which keeps background out of the histogram.
    """
    img = np.asarray(image)
    if img.dtype == np.uint8:
        img = img.astype(float) / 255.0
    H, W = img.shape[:2]
    hw, hh = box.w * shrink / 2, box.h * shrink / 2
    x0 = max(int(np.ceil(box.cx - hw - 0.5)), 0)
    x1 = min(int(np.floor(box.cx + hw - 0.5)), W - 1)
    y0 = max(int(np.ceil(box.cy - hh - 0.5)), 0)
    y1 = min(int(np.floor(box.cy + hh - 0.5)), H - 1)
    if x1 < x0 or y1 < y0:
        raise EmptyRegion(f"shrunken box around ({box.cx}, {box.cy}) holds no pixels")
    region = img[y0:y1 + 1, x0:x1 + 1, :3]
    return lab_histogram(rgb2lab(region).reshape(-1, 3), bins)


def emd(h1: AppearanceHistogram, h2: AppearanceHistogram) -> float:
    """Sum over channels of the 1-D EMD with unit bin spacing, divided by bin count."""
    if h1.bins != h2.bins:
        raise SchemaError("histograms have different bin counts")
    return float(np.abs(h1.cdf - h2.cdf).sum() / h1.bins)


def pairwise_emd(cdf_a, cdf_b) -> np.ndarray:
    """EMD matrix between stacked CDFs of shape (n, 3, b) and (m, 3, b)."""
    bins = cdf_a.shape[-1]
    return np.abs(cdf_a[:, None, :, :] - cdf_b[None, :, :, :]).sum(axis=(2, 3)) / bins


def solid_color_histogram(rgb, bins=DEFAULT_BINS) -> AppearanceHistogram:
    """Histogram of a uniform patch of one sRGB colour (floats in [0, 1])."""
    patch = np.broadcast_to(np.asarray(rgb, dtype=float), (2, 2, 3))
    return lab_histogram(rgb2lab(patch).reshape(-1, 3), bins)
