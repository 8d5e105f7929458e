"""Von Mises density and concentration estimation."""

from __future__ import annotations

import numpy as np
from scipy.special import i0e, i1e

KAPPA_CAP = 1e3
_LOG_2PI = np.log(2 * np.pi)


def log_i0(kappa):
    kappa = np.asarray(kappa, dtype=float)
    return np.log(i0e(kappa)) + kappa


def vonmises_logpdf(x, mu, kappa):
    return kappa * np.cos(np.asarray(x) - mu) - _LOG_2PI - log_i0(kappa)


def bessel_ratio(kappa):
    """I1(kappa) / I0(kappa)."""
    kappa = np.asarray(kappa, dtype=float)
    return i1e(kappa) / i0e(kappa)


def kappa_approx(rbar):
    """Closed-form approximation rbar (2 - rbar^2) / (1 - rbar^2), capped."""
    r = np.clip(np.asarray(rbar, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore"):
        k = np.where(r < 1.0, r * (2 - r * r) / np.maximum(1 - r * r, 0.0), np.inf)
    return np.minimum(k, KAPPA_CAP)


def estimate_kappa(rbar, cap=KAPPA_CAP, iters=30):
    """Maximum-likelihood concentration for mean resultant length ``rbar``.

    Solves I1(k)/I0(k) = rbar by Newton iteration seeded with
    :func:`kappa_approx`; the result is capped at ``cap``.
    """
    r = np.clip(np.asarray(rbar, dtype=float), 0.0, 1.0)
    k = np.minimum(kappa_approx(r), cap)
    at_cap = bessel_ratio(cap) <= r
    for _ in range(iters):
        a = bessel_ratio(k)
        with np.errstate(divide="ignore", invalid="ignore"):
            deriv = np.where(k > 0, 1 - a / np.where(k > 0, k, 1.0) - a * a, 0.5)
        step = (a - r) / deriv
        k = np.clip(k - step, 0.0, cap)
        if np.all(np.abs(step) <= 1e-13 * np.maximum(1.0, k)):
            break
    k = np.where(at_cap, cap, k)
    return np.where(r <= 0.0, 0.0, k)


def circular_mean(angles, weights=None, axis=0):
    """Weighted mean direction and mean resultant length."""
    angles = np.asarray(angles, dtype=float)
    w = np.ones_like(angles) if weights is None else np.asarray(weights, dtype=float)
    total = w.sum(axis=axis)
    c = (w * np.cos(angles)).sum(axis=axis)
    s = (w * np.sin(angles)).sum(axis=axis)
    with np.errstate(divide="ignore", invalid="ignore"):
        rbar = np.where(total > 0, np.hypot(c, s) / np.where(total > 0, total, 1.0), 0.0)
    return np.arctan2(s, c), np.clip(rbar, 0.0, 1.0)
