import numpy as np
import pytest
from instances import random_hmm, random_series

from verbtrack.appearance import AppearanceHistogram
from verbtrack.corpus_io import (
    DetectionBox,
    DetectionStream,
    FeatureSchema,
    MotionField,
    SourceInfo,
)
from verbtrack.errors import SizeExceeded
from verbtrack.oracles import (
    oracle_best_path,
    oracle_dtw,
    oracle_emd,
    oracle_hmm_loglik,
)

LIN = FeatureSchema(("x",), ("linear",))


def test_size_limits():
    rng = np.random.default_rng(0)
    src = {"a": SourceInfo("a", 0.0, "person")}
    boxes = [DetectionBox(t, 0, 0, 1, 1, 1, "a") for t in range(7)]
    stream = DetectionStream.from_boxes("v", 7, src, boxes)
    with pytest.raises(SizeExceeded):
        oracle_best_path(stream, MotionField.empty(7), (0, 6), ["a"])
    with pytest.raises(SizeExceeded):
        oracle_hmm_loglik(random_hmm(rng, LIN, 2), random_series(rng, LIN, 6))
    with pytest.raises(SizeExceeded):
        oracle_hmm_loglik(random_hmm(rng, LIN, 4), random_series(rng, LIN, 2))
    with pytest.raises(SizeExceeded):
        oracle_dtw(random_series(rng, LIN, 8), random_series(rng, LIN, 2))
    h = AppearanceHistogram(np.full((3, 5), 0.2))
    with pytest.raises(SizeExceeded):
        oracle_emd(h, h)


def test_identical_inputs():
    rng = np.random.default_rng(1)
    s = random_series(rng, LIN, 5)
    assert oracle_dtw(s, s) == 0
    h = AppearanceHistogram(np.full((3, 4), 0.25))
    assert oracle_emd(h, h) == 0


def test_emd_transport_example():
    a = np.zeros((3, 4))
    a[:, 0] = 1
    b = np.zeros((3, 4))
    b[:, 2] = 1
    # all mass moves two bins in each channel
    assert oracle_emd(AppearanceHistogram(a), AppearanceHistogram(b)) == pytest.approx(3 * 2 / 4)
