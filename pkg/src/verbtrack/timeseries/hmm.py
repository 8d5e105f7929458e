"""Continuous-emission HMMs trained by Baum-Welch.

Every state emits each feature independently: Gaussian for linear features,
Von Mises for angular ones. Forward/backward passes use per-frame scaling, so
arbitrarily long series stay finite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np

from ..corpus_io import FeatureSchema, FeatureSeries
from ..errors import DegenerateInput, SchemaMismatch
from .circular import KAPPA_CAP, circular_mean, estimate_kappa, log_i0

N_STATES = 5
VAR_FLOOR = 1e-4
MAX_ITER = 100
REL_TOL = 1e-6
RESTARTS = 3

_LOG_2PI = math.log(2 * math.pi)


@dataclass(eq=False)
class HmmModel:
    schema: FeatureSchema
    pi: np.ndarray  # (K,)
    A: np.ndarray  # (K, K) row-stochastic
    loc: np.ndarray  # (K, F) mean or mean direction
    spread: np.ndarray  # (K, F) variance (linear) or concentration (angular)
    metadata: dict = field(default_factory=dict)

    @property
    def n_states(self):
        return len(self.pi)

    def log_emissions(self, X) -> np.ndarray:
        """(T, K) log emission densities of an observation matrix."""
        X = np.asarray(X, dtype=float)
        ang = self.schema.angular_mask
        lin = ~ang
        out = np.zeros((X.shape[0], self.n_states))
        if lin.any():
            mu = self.loc[:, lin][None]
            var = self.spread[:, lin][None]
            d = X[:, None, lin] - mu
            out += (-0.5 * (_LOG_2PI + np.log(var)) - d * d / (2 * var)).sum(axis=2)
        if ang.any():
            mu = self.loc[:, ang][None]
            kap = self.spread[:, ang][None]
            out += (kap * np.cos(X[:, None, ang] - mu) - _LOG_2PI - log_i0(kap)).sum(axis=2)
        return out

    def to_dict(self):
        return {
            "kind": "hmm",
            "schema": self.schema.to_dict(),
            "pi": self.pi.tolist(),
            "A": self.A.tolist(),
            "loc": self.loc.tolist(),
            "spread": self.spread.tolist(),
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(FeatureSchema.from_dict(d["schema"]), np.array(d["pi"], dtype=float),
                   np.array(d["A"], dtype=float), np.array(d["loc"], dtype=float),
                   np.array(d["spread"], dtype=float), dict(d.get("metadata", {})))


@numba.njit(cache=True)
def _forward_backward(log_b, pi, A):
    T, K = log_b.shape
    b = np.empty((T, K))
    for t in range(T):
        m = log_b[t].max()
        for k in range(K):
            b[t, k] = math.exp(log_b[t, k] - m)
    alpha = np.empty((T, K))
    scale = np.empty(T)
    loglik = 0.0
    for t in range(T):
        s = 0.0
        for j in range(K):
            if t == 0:
                acc = pi[j]
            else:
                acc = 0.0
                for i in range(K):
                    acc += alpha[t - 1, i] * A[i, j]
            alpha[t, j] = acc * b[t, j]
            s += alpha[t, j]
        if s <= 0.0:
            return -np.inf, alpha, alpha, np.zeros((K, K))
        for j in range(K):
            alpha[t, j] /= s
        scale[t] = s
        loglik += math.log(s) + log_b[t].max()
    beta = np.empty((T, K))
    for k in range(K):
        beta[T - 1, k] = 1.0
    xi = np.zeros((K, K))
    for t in range(T - 2, -1, -1):
        for i in range(K):
            acc = 0.0
            for j in range(K):
                acc += A[i, j] * b[t + 1, j] * beta[t + 1, j]
            beta[t, i] = acc / scale[t + 1]
        for i in range(K):
            for j in range(K):
                xi[i, j] += alpha[t, i] * A[i, j] * b[t + 1, j] * beta[t + 1, j] / scale[t + 1]
    gamma = alpha * beta
    for t in range(T):
        s = gamma[t].sum()
        for k in range(K):
            gamma[t, k] /= s
    return loglik, gamma, alpha, xi


def _check_schema(model, series):
    if series.schema != model.schema:
        raise SchemaMismatch("series schema differs from the model's")


def hmm_loglik(model: HmmModel, series: FeatureSeries) -> float:
    """log P(series | model) by the scaled forward recursion."""
    _check_schema(model, series)
    ll, *_ = _forward_backward(model.log_emissions(series.values), model.pi, model.A)
    return float(ll)


def _segment_init(schema, data, K):
    """Per-state moments from splitting each series into K equal segments."""
    ang = schema.angular_mask
    F = len(schema)
    loc = np.zeros((K, F))
    spread = np.zeros((K, F))
    for k in range(K):
        seg = np.vstack([np.array_split(X, K)[k] for X in data])
        loc[k, ~ang] = seg[:, ~ang].mean(axis=0)
        spread[k, ~ang] = np.maximum(seg[:, ~ang].var(axis=0), VAR_FLOOR)
        if ang.any():
            mu, rbar = circular_mean(seg[:, ang], axis=0)
            loc[k, ang] = mu
            spread[k, ang] = estimate_kappa(rbar)
    return loc, spread


def _m_step(model, data, stats):
    K = model.n_states
    ang = model.schema.angular_mask
    lin = ~ang
    pi = np.zeros(K)
    xi = np.zeros((K, K))
    w = np.zeros(K)
    sx = np.zeros((K, lin.sum()))
    sxx = np.zeros((K, lin.sum()))
    sc = np.zeros((K, ang.sum()))
    ss = np.zeros((K, ang.sum()))
    for X, (gamma, xi_s) in zip(data, stats):
        pi += gamma[0]
        xi += xi_s
        w += gamma.sum(axis=0)
        sx += gamma.T @ X[:, lin]
        sxx += gamma.T @ (X[:, lin] ** 2)
        sc += gamma.T @ np.cos(X[:, ang])
        ss += gamma.T @ np.sin(X[:, ang])
    pi = pi / pi.sum()
    A = model.A.copy()
    rows = xi.sum(axis=1)
    ok = rows > 0
    A[ok] = xi[ok] / rows[ok, None]
    loc = model.loc.copy()
    spread = model.spread.copy()
    live = w > 1e-10
    wl = w[live, None]
    mu = sx[live] / wl
    var = sxx[live] / wl - mu ** 2
    idx = np.flatnonzero(live)
    loc[np.ix_(idx, np.flatnonzero(lin))] = mu
    spread[np.ix_(idx, np.flatnonzero(lin))] = np.maximum(var, VAR_FLOOR)
    if ang.any():
        c, s = sc[live], ss[live]
        loc[np.ix_(idx, np.flatnonzero(ang))] = np.arctan2(s, c)
        rbar = np.clip(np.hypot(c, s) / wl, 0.0, 1.0)
        spread[np.ix_(idx, np.flatnonzero(ang))] = estimate_kappa(rbar)
    return HmmModel(model.schema, pi, A, loc, spread, model.metadata)


def _e_step(model, data):
    total = 0.0
    stats = []
    for X in data:
        ll, gamma, _, xi = _forward_backward(model.log_emissions(X), model.pi, model.A)
        total += ll
        stats.append((gamma, xi))
    return total, stats


def baum_welch(model: HmmModel, data, max_iter=MAX_ITER, tol=REL_TOL):
    """Run EM from ``model``; returns the fitted model and the log-likelihood history.

    ``history[i]`` is the data log-likelihood of the parameters after ``i``
    M-steps, so ``history[0]`` scores the starting point.
    """
    history = []
    ll, stats = _e_step(model, data)
    history.append(ll)
    for _ in range(max_iter):
        new = _m_step(model, data, stats)
        new_ll, new_stats = _e_step(new, data)
        history.append(new_ll)
        improved = new_ll - ll
        model, ll, stats = new, new_ll, new_stats
        if improved <= tol * abs(ll):
            break
    return model, history


def _initial_model(schema, data, K, rng, jitter):
    loc, spread = _segment_init(schema, data, K)
    A = np.full((K, K), 1.0 / K)
    pi = np.full(K, 1.0 / K)
    if jitter:
        A = A + rng.uniform(0, 0.1, size=(K, K))
        pi = pi + rng.uniform(0, 0.1, size=K)
        lin = ~schema.angular_mask
        loc[:, lin] += rng.normal(0, 0.1, size=(K, lin.sum())) * np.sqrt(spread[:, lin])
    A = A / A.sum(axis=1, keepdims=True)
    pi = pi / pi.sum()
    return HmmModel(schema, pi, A, loc, spread)


def hmm_train(series_list, K: int = N_STATES, seed: int = 0, restarts: int = RESTARTS,
              max_iter: int = MAX_ITER, tol: float = REL_TOL) -> HmmModel:
    """Fit an ergodic K-state HMM to one or more feature series.

    Each restart starts from per-segment moments with seeded jitter on the
    transitions and means; the restart with the best final likelihood wins.
    """
    if not series_list:
        raise DegenerateInput("no training series")
    schema = series_list[0].schema
    for s in series_list:
        if s.schema != schema:
            raise SchemaMismatch("training series disagree on schema")
        if len(s) < K:
            raise DegenerateInput(f"series {s.video_id!r} shorter than {K} states")
    data = [s.values for s in series_list]
    best = None
    for r in range(restarts):
        rng = np.random.default_rng([seed, r])
        init = _initial_model(schema, data, K, rng, jitter=r > 0)
        model, history = baum_welch(init, data, max_iter, tol)
        if best is None or history[-1] > best[1][-1]:
            best = (model, history, r)
    model, history, r = best
    model.metadata = {
        "seed": seed, "restarts": restarts, "best_restart": r, "iterations": len(history) - 1,
        "loglik": history[-1], "n_series": len(series_list), "states": K,
        "var_floor": VAR_FLOOR, "kappa_cap": KAPPA_CAP, "tol": tol, "max_iter": max_iter,
    }
    return model
