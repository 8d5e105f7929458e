"""Dynamic time warping distance and nearest-neighbour classification."""

from __future__ import annotations

from dataclasses import dataclass, field

import numba
import numpy as np

from ..corpus_io import FeatureSchema, FeatureSeries
from ..errors import EmptyBank, EmptySeries, SchemaMismatch


def frame_distances(a: np.ndarray, b: np.ndarray, angular_mask) -> np.ndarray:
    """Euclidean distance between every frame of ``a`` and of ``b``.

    Angular components contribute their wrapped difference min(|d|, 2pi - |d|).
    """
    d = np.abs(a[:, None, :] - b[None, :, :])
    if np.any(angular_mask):
        ang = d[:, :, angular_mask] % (2 * np.pi)
        d[:, :, angular_mask] = np.minimum(ang, 2 * np.pi - ang)
    return np.sqrt((d * d).sum(axis=2))


@numba.njit(cache=True)
def _accumulate(cost):
    n, m = cost.shape
    D = np.empty((n, m))
    for i in range(n):
        for j in range(m):
            c = cost[i, j]
            if i == 0 and j == 0:
                D[i, j] = c
            elif i == 0:
                D[i, j] = c + D[i, j - 1]
            elif j == 0:
                D[i, j] = c + D[i - 1, j]
            else:
                best = D[i - 1, j - 1]
                best = min(best, D[i - 1, j])
                best = min(best, D[i, j - 1])
                D[i, j] = c + best
    return D[n - 1, m - 1]


def _check(a: FeatureSeries, b: FeatureSeries):
    if a.schema != b.schema:
        raise SchemaMismatch("DTW operands have different schemas")
    if len(a) == 0 or len(b) == 0:
        raise EmptySeries("DTW needs non-empty series")


def dtw_distance(a: FeatureSeries, b: FeatureSeries) -> float:
    """Unnormalised cost of the best monotone alignment of two series."""
    _check(a, b)
    return dtw_values(a.values, b.values, a.schema.angular_mask)


def dtw_values(a: np.ndarray, b: np.ndarray, angular_mask) -> float:
    return float(_accumulate(frame_distances(a, b, angular_mask)))


@dataclass(eq=False)
class DtwBank:
    """Labelled training exemplars for 1-nearest-neighbour DTW.

    With ``zscore`` set, linear features are standardised by the bank's
    training mean and standard deviation before distances are taken.
    """

    schema: FeatureSchema
    exemplars: list  # FeatureSeries
    labels: list
    zscore: bool = False
    center: np.ndarray = None
    scale: np.ndarray = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.exemplars) != len(self.labels):
            raise ValueError("one label per exemplar required")
        for e in self.exemplars:
            if e.schema != self.schema:
                raise SchemaMismatch("bank exemplars disagree on schema")
        F = len(self.schema)
        if self.center is None:
            self.center = np.zeros(F)
            self.scale = np.ones(F)
            if self.zscore and self.exemplars:
                allv = np.vstack([e.values for e in self.exemplars])
                lin = ~self.schema.angular_mask
                self.center[lin] = allv[:, lin].mean(axis=0)
                sd = allv[:, lin].std(axis=0)
                self.scale[lin] = np.where(sd > 1e-12, sd, 1.0)
        self.center = np.asarray(self.center, dtype=float)
        self.scale = np.asarray(self.scale, dtype=float)
        self._normed = [self.normalize(e.values) for e in self.exemplars]

    def normalize(self, values):
        return (np.asarray(values, dtype=float) - self.center) / self.scale

    def distances(self, series: FeatureSeries) -> np.ndarray:
        if series.schema != self.schema:
            raise SchemaMismatch("query schema differs from the bank's")
        if len(series) == 0:
            raise EmptySeries("empty query")
        q = self.normalize(series.values)
        mask = self.schema.angular_mask
        return np.array([dtw_values(q, e, mask) for e in self._normed])

    def to_dict(self):
        return {
            "kind": "dtw",
            "schema": self.schema.to_dict(),
            "zscore": self.zscore,
            "center": self.center.tolist(),
            "scale": self.scale.tolist(),
            "labels": list(self.labels),
            "exemplars": [{"video_id": e.video_id, "values": e.values.tolist()} for e in self.exemplars],
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, d):
        schema = FeatureSchema.from_dict(d["schema"])
        F = len(schema)
        ex = [FeatureSeries(e["video_id"], schema, np.array(e["values"], dtype=float).reshape(-1, F))
              for e in d["exemplars"]]
        return cls(schema, ex, list(d["labels"]), d.get("zscore", False),
                   np.array(d["center"], dtype=float), np.array(d["scale"], dtype=float),
                   dict(d.get("metadata", {})))


def dtw_classify(bank: DtwBank, series: FeatureSeries):
    """Label of the nearest exemplar; the earliest exemplar wins ties."""
    if not bank.exemplars:
        raise EmptyBank("DTW bank has no exemplars")
    d = bank.distances(series)
    return bank.labels[int(np.argmin(d))]
