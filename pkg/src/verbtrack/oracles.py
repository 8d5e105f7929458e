"""Exhaustive reference computations for small instances.

Each oracle solves the same problem as a fast routine elsewhere in the
package by brute force, sharing no code with it beyond input types.
"""

from __future__ import annotations

import itertools
import math

import numpy as np
from scipy.optimize import linprog
from scipy.stats import norm, vonmises

from .corpus_io import Track
from .errors import EmptyFrame, SizeExceeded
from .tracker import CostWeights, candidates, edge_cost

MAX_PATH_FRAMES = 6
MAX_PATH_CANDIDATES = 3
MAX_HMM_T = 5
MAX_HMM_K = 3
MAX_DTW_LEN = 7
MAX_EMD_BINS = 4


def oracle_best_path(stream, field, interval, source_ids=None, weights=CostWeights(),
                     appearance=False) -> Track:
    """Minimum-cost path by enumerating every box combination."""
    source_ids = list(stream.sources) if source_ids is None else source_ids
    t0, t1 = interval
    cands = candidates(stream, source_ids, interval)
    if len(cands) > MAX_PATH_FRAMES or any(len(c) > MAX_PATH_CANDIDATES for c in cands):
        raise SizeExceeded("path oracle limited to 6 frames of at most 3 candidates")
    for i, c in enumerate(cands):
        if not c:
            raise EmptyFrame(t0 + i)
    edges = [{(a, b): edge_cost(u, v, field, weights, appearance)
              for a, u in enumerate(cands[i]) for b, v in enumerate(cands[i + 1])}
             for i in range(len(cands) - 1)]
    best, best_path = math.inf, None
    for path in itertools.product(*(range(len(c)) for c in cands)):
        cost = -weights.w_conf * cands[0][path[0]].score
        for i in range(len(path) - 1):
            cost += edges[i][(path[i], path[i + 1])]
        if cost < best:
            best, best_path = cost, path
    boxes = [cands[i][k] for i, k in enumerate(best_path)]
    label = stream.sources[boxes[0].source_id].class_label
    return Track(stream.video_id, t0, t1, boxes, -best, label)


def _emission_table(model, X):
    T, K = X.shape[0], model.n_states
    table = np.zeros((T, K))
    kinds = model.schema.kinds
    for t in range(T):
        for k in range(K):
            total = 0.0
            for f, kind in enumerate(kinds):
                if kind == "angular":
                    total += vonmises.logpdf(X[t, f], model.spread[k, f], loc=model.loc[k, f])
                else:
                    total += norm.logpdf(X[t, f], loc=model.loc[k, f], scale=math.sqrt(model.spread[k, f]))
            table[t, k] = total
    return table


def oracle_hmm_loglik(model, series) -> float:
    """log P(series) by summing over every hidden state sequence."""
    X = series.values
    T, K = X.shape[0], model.n_states
    if T > MAX_HMM_T or K > MAX_HMM_K:
        raise SizeExceeded("HMM oracle limited to T <= 5, K <= 3")
    logb = _emission_table(model, X)
    terms = []
    for seq in itertools.product(range(K), repeat=T):
        lp = math.log(model.pi[seq[0]]) + logb[0, seq[0]]
        for t in range(1, T):
            lp += math.log(model.A[seq[t - 1], seq[t]]) + logb[t, seq[t]]
        terms.append(lp)
    m = max(terms)
    return m + math.log(sum(math.exp(x - m) for x in terms))


def _frame_dist(u, v, kinds):
    total = 0.0
    for a, b, kind in zip(u, v, kinds):
        d = abs(a - b)
        if kind == "angular":
            d = math.fmod(d, 2 * math.pi)
            d = min(d, 2 * math.pi - d)
        total += d * d
    return math.sqrt(total)


def oracle_dtw(a, b) -> float:
    """Minimum alignment cost over every monotone warping path."""
    n, m = len(a), len(b)
    if n > MAX_DTW_LEN or m > MAX_DTW_LEN:
        raise SizeExceeded("DTW oracle limited to length 7")
    kinds = a.schema.kinds
    d = [[_frame_dist(a.values[i], b.values[j], kinds) for j in range(m)] for i in range(n)]
    best = math.inf

    def walk(i, j, acc):
        nonlocal best
        acc += d[i][j]
        if i == n - 1 and j == m - 1:
            best = min(best, acc)
            return
        if i + 1 < n:
            walk(i + 1, j, acc)
        if j + 1 < m:
            walk(i, j + 1, acc)
        if i + 1 < n and j + 1 < m:
            walk(i + 1, j + 1, acc)

    walk(0, 0, 0.0)
    return best


def oracle_otsu(counts, edges, tie_tol=1e-12) -> float:
    """Threshold edge maximising between-class variance, by trying every split."""
    counts = list(map(float, counts))
    centers = [(edges[i] + edges[i + 1]) / 2 for i in range(len(counts))]
    total = sum(counts)
    results = []
    for k in range(len(counts)):
        lo = [(c, x) for c, x in zip(counts[:k], centers[:k])]
        hi = [(c, x) for c, x in zip(counts[k:], centers[k:])]
        n0 = sum(c for c, _ in lo)
        n1 = sum(c for c, _ in hi)
        if n0 == 0 or n1 == 0:
            results.append(0.0)
            continue
        mu0 = sum(c * x for c, x in lo) / n0
        mu1 = sum(c * x for c, x in hi) / n1
        results.append((n0 / total) * (n1 / total) * (mu0 - mu1) ** 2)
    best = max(results)
    for k, v in enumerate(results):
        if v >= best - tie_tol * max(1.0, best):
            return float(edges[k])


def oracle_emd(h1, h2) -> float:
    """Per-channel optimal transport by linear programming, normalised like :func:`emd`."""
    b = h1.bins
    if b > MAX_EMD_BINS:
        raise SizeExceeded("EMD oracle limited to 4 bins")
    cost = np.array([[abs(i - j) for j in range(b)] for i in range(b)], dtype=float).ravel()
    total = 0.0
    for c in range(3):
        p, q = h1.channels[c], h2.channels[c]
        A_eq = []
        for i in range(b):
            row = np.zeros((b, b))
            row[i, :] = 1
            A_eq.append(row.ravel())
        for j in range(b):
            col = np.zeros((b, b))
            col[:, j] = 1
            A_eq.append(col.ravel())
        res = linprog(cost, A_eq=np.array(A_eq), b_eq=np.concatenate([p, q]), bounds=(0, None),
                      method="highs")
        total += res.fun
    return total / b
