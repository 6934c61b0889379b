"""Tail-stable Gaussian helpers: Q-function, interval probabilities, truncated means."""
from __future__ import annotations

import numpy as np
from scipy.special import erfc, log_ndtr, ndtr

_SQRT2 = np.sqrt(2.0)
_LOG_SQRT_2PI = 0.5 * np.log(2 * np.pi)
_Q_ASYMPTOTIC_FROM = 38.0


def qfunc(x):
    """Gaussian tail ``Q(x) = P(Z > x)``.

    Uses ``erfc`` up to ``x = 38`` and the asymptotic series beyond, where
    ``erfc`` is at the edge of the double range.
    """
    x = np.asarray(x, dtype=float)
    out = 0.5 * erfc(x / _SQRT2)
    big = x > _Q_ASYMPTOTIC_FROM
    if np.any(big):
        out = np.where(big, np.exp(log_qfunc(np.where(big, x, _Q_ASYMPTOTIC_FROM))), out)
    return out if out.ndim else float(out)


def log_qfunc(x):
    """``log Q(x)``; finite far beyond the underflow point of ``Q``."""
    x = np.asarray(x, dtype=float)
    out = log_ndtr(-x)
    big = x > _Q_ASYMPTOTIC_FROM
    if np.any(big):
        xb = np.where(big, x, _Q_ASYMPTOTIC_FROM)
        x2 = xb * xb
        series = 1 - 1 / x2 + 3 / x2**2 - 15 / x2**3 + 105 / x2**4
        asym = -0.5 * x2 - np.log(xb) - _LOG_SQRT_2PI + np.log(series)
        out = np.where(big, asym, out)
    return out if out.ndim else float(out)


def log_norm_pdf(z):
    return -0.5 * np.asarray(z, dtype=float) ** 2 - _LOG_SQRT_2PI


def log_interval_prob(lo, hi):
    """``log P(lo < Z < hi)`` for standard normal ``Z``; ``-inf`` for empty intervals."""
    lo, hi = np.broadcast_arrays(np.asarray(lo, dtype=float), np.asarray(hi, dtype=float))
    out = np.full(lo.shape, -np.inf)
    ok = hi > lo
    # Work in whichever tail keeps both ends away from 1.
    right = ok & (lo > 0)
    left = ok & (hi <= 0)
    mid = ok & ~right & ~left
    with np.errstate(divide="ignore", invalid="ignore"):
        if np.any(right):
            a, b = log_ndtr(-lo[right]), log_ndtr(-hi[right])
            out[right] = a + np.log1p(-np.exp(b - a))
        if np.any(left):
            a, b = log_ndtr(hi[left]), log_ndtr(lo[left])
            out[left] = a + np.log1p(-np.exp(b - a))
        if np.any(mid):
            out[mid] = np.log1p(-ndtr(lo[mid]) - ndtr(-hi[mid]))
    return out if out.ndim else float(out)


def interval_prob(lo, hi, mu=0.0, sigma=1.0):
    return np.exp(log_interval_prob((np.asarray(lo) - mu) / sigma, (np.asarray(hi) - mu) / sigma))


def truncated_mean(lo, hi, mu, sigma):
    """``E[Y | lo < Y < hi]`` for ``Y ~ N(mu, sigma^2)``, stable far in the tails."""
    a = (np.asarray(lo, dtype=float) - mu) / sigma
    b = (np.asarray(hi, dtype=float) - mu) / sigma
    logp = log_interval_prob(a, b)
    with np.errstate(over="ignore", invalid="ignore"):
        ta = np.where(np.isfinite(a), np.exp(log_norm_pdf(np.where(np.isfinite(a), a, 0.0)) - logp), 0.0)
        tb = np.where(np.isfinite(b), np.exp(log_norm_pdf(np.where(np.isfinite(b), b, 0.0)) - logp), 0.0)
    res = mu + sigma * (ta - tb)
    return np.clip(res, lo, hi)
