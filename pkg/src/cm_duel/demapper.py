"""Max-log L-values and the exact piecewise description of L-values and bit SMDs."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constellation import Constellation
from .gauss import log_interval_prob, truncated_mean


class DemapperError(ValueError):
    pass


def maxlog_llrs(c: Constellation, y, sigma: float, h=1.0) -> np.ndarray:
    """Max-log L-values, shape ``y.shape + (m,)``; positive values favour bit 1."""
    if not sigma > 0:
        raise DemapperError("sigma must be positive")
    y = np.asarray(y, dtype=float)
    h = np.asarray(h, dtype=float)
    dist = (y[..., None] - h[..., None] * c.points) ** 2
    out = np.empty(y.shape + (c.m,))
    for j in range(c.m):
        d0 = dist[..., c.bits[:, j] == 0].min(axis=-1)
        d1 = dist[..., c.bits[:, j] == 1].min(axis=-1)
        out[..., j] = (d0 - d1) / (2 * sigma**2)
    return out


@dataclass(frozen=True)
class PiecewiseLinear:
    """Continuous piecewise-affine function on the real line.

    Piece ``i`` covers ``[breaks[i-1], breaks[i]]`` with ``breaks[-1] = -inf``
    and ``breaks[len] = +inf``, and equals ``slopes[i] * y + intercepts[i]``.
    """

    breaks: np.ndarray
    slopes: np.ndarray
    intercepts: np.ndarray

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        idx = np.searchsorted(self.breaks, y)
        return self.slopes[idx] * y + self.intercepts[idx]

    @property
    def intervals(self):
        edges = np.concatenate(([-np.inf], self.breaks, [np.inf]))
        return list(zip(edges[:-1], edges[1:]))

    def pieces(self):
        for (lo, hi), a, b in zip(self.intervals, self.slopes, self.intercepts):
            yield lo, hi, a, b

    def scale(self, factor: float) -> "PiecewiseLinear":
        return PiecewiseLinear(self.breaks, self.slopes * factor, self.intercepts * factor)

    def simplified(self, tol: float = 1e-12) -> "PiecewiseLinear":
        """Merge adjacent pieces that are the same affine function."""
        keep_b, sl, ic = [], [self.slopes[0]], [self.intercepts[0]]
        for bk, a, b in zip(self.breaks, self.slopes[1:], self.intercepts[1:]):
            scale = max(1.0, abs(a), abs(b), abs(sl[-1]), abs(ic[-1]))
            if abs(a - sl[-1]) <= tol * scale and abs(b - ic[-1]) <= tol * scale:
                continue
            keep_b.append(bk)
            sl.append(a)
            ic.append(b)
        return PiecewiseLinear(np.array(keep_b), np.array(sl), np.array(ic))


def combine(funcs, weights) -> PiecewiseLinear:
    """Pointwise linear combination of piecewise-linear functions."""
    brk = np.unique(np.concatenate([f.breaks for f in funcs]))
    probes = _probe_points(brk)
    slopes = np.zeros(len(probes))
    inter = np.zeros(len(probes))
    for f, w in zip(funcs, weights):
        idx = np.searchsorted(f.breaks, probes)
        slopes += w * f.slopes[idx]
        inter += w * f.intercepts[idx]
    return PiecewiseLinear(brk, slopes, inter).simplified()


def _probe_points(brk: np.ndarray) -> np.ndarray:
    """One interior point per interval of the partition defined by ``brk``."""
    if brk.size == 0:
        return np.array([0.0])
    inner = (brk[:-1] + brk[1:]) / 2
    return np.concatenate(([brk[0] - 1.0], inner, [brk[-1] + 1.0]))


def llr_piecewise(c: Constellation, j: int, sigma: float, h: float = 1.0) -> PiecewiseLinear:
    """``y -> L_j(y)`` as an explicit piecewise-linear function.

    Between consecutive midpoints of constellation points the nearest point of
    each subset is fixed, so the difference of squared distances is affine.
    """
    if c.m not in (2, 3):
        raise DemapperError(f"unsupported m={c.m}")
    if not sigma > 0 or not h > 0:
        raise DemapperError("sigma and h must be positive")
    pts = h * c.points
    mids = np.unique([(a + b) / 2 for i, a in enumerate(pts) for b in pts[i + 1 :]])
    probes = _probe_points(mids)
    s0 = pts[c.bits[:, j] == 0]
    s1 = pts[c.bits[:, j] == 1]
    n0 = s0[np.argmin((probes[:, None] - s0) ** 2, axis=1)]
    n1 = s1[np.argmin((probes[:, None] - s1) ** 2, axis=1)]
    # (y - n0)^2 - (y - n1)^2 = 2 y (n1 - n0) + n0^2 - n1^2
    slopes = 2 * (n1 - n0) / (2 * sigma**2)
    inter = (n0**2 - n1**2) / (2 * sigma**2)
    return PiecewiseLinear(mids, slopes, inter).simplified()


def label_difference(c: Constellation, x: int, xhat: int) -> np.ndarray:
    return c.bits[x].astype(int) - c.bits[xhat].astype(int)


def smd_piecewise(c: Constellation, x: int, xhat: int, sigma: float, h: float = 1.0) -> PiecewiseLinear:
    """Bit-decoder SMD ``2 (b(x) - b(xhat)) . L(y)`` as a function of ``y``."""
    if x == xhat:
        raise DemapperError("SMD needs two different symbols")
    diff = label_difference(c, x, xhat)
    funcs, w = [], []
    for j in range(c.m):
        if diff[j]:
            funcs.append(llr_piecewise(c, j, sigma, h))
            w.append(2.0 * diff[j])
    return combine(funcs, w)


def smd_bdec(c: Constellation, x, xhat, llrs) -> np.ndarray:
    """Per-position bit SMDs from L-values (``llrs`` shape ``(..., N, m)``)."""
    diff = c.bits[np.asarray(x)].astype(float) - c.bits[np.asarray(xhat)].astype(float)
    return 2.0 * np.sum(diff * llrs, axis=-1)


@dataclass(frozen=True)
class Segment:
    """Image of ``Y ~ N(mu, sigma^2)`` restricted to ``(lo, hi)`` under ``v = a y + b``."""

    a: float
    b: float
    lo: float
    hi: float
    mu: float
    sigma: float
    log_weight: float

    @property
    def weight(self) -> float:
        return float(np.exp(self.log_weight))

    @property
    def value_range(self):
        ends = sorted((self.a * self.lo + self.b, self.a * self.hi + self.b))
        return ends[0], ends[1]

    def partial_mean(self) -> float:
        """``E[V ; Y in (lo, hi)]``."""
        if self.log_weight == -np.inf:
            return 0.0
        ey = float(truncated_mean(self.lo, self.hi, self.mu, self.sigma))
        return self.weight * (self.a * ey + self.b)

    def log_mgf(self, theta: float) -> float:
        """``log E[exp(-theta V) ; Y in (lo, hi)]``."""
        shift = self.mu - theta * self.a * self.sigma**2
        lp = log_interval_prob((self.lo - shift) / self.sigma, (self.hi - shift) / self.sigma)
        return float(-theta * (self.a * self.mu + self.b) + 0.5 * (theta * self.a * self.sigma) ** 2 + lp)

    def tilted(self, theta: float) -> "Segment":
        """Same segment under the ``exp(-theta v)`` tilt (unnormalised weight kept in log)."""
        shift = self.mu - theta * self.a * self.sigma**2
        return Segment(self.a, self.b, self.lo, self.hi, shift, self.sigma, self.log_mgf(theta))

    def cdf_mass(self, t: float) -> float:
        """``P(V < t ; Y in (lo, hi))``."""
        if self.a > 0:
            lo, hi = self.lo, min(self.hi, (t - self.b) / self.a)
        else:
            lo, hi = max(self.lo, (t - self.b) / self.a), self.hi
        return float(np.exp(log_interval_prob((lo - self.mu) / self.sigma, (hi - self.mu) / self.sigma)))


@dataclass(frozen=True)
class ScalarMixture:
    """Point masses plus Gaussian-image segments; total mass one."""

    atoms: tuple  # ((value, probability), ...)
    segments: tuple

    @property
    def total_mass(self) -> float:
        return sum(p for _, p in self.atoms) + sum(s.weight for s in self.segments)

    def mean(self) -> float:
        return sum(v * p for v, p in self.atoms) + sum(s.partial_mean() for s in self.segments)

    def cdf(self, t: float, strict: bool = True) -> float:
        """``P(V < t)`` (or ``<=`` with ``strict=False``)."""
        atoms = sum(p for v, p in self.atoms if (v < t if strict else v <= t))
        return atoms + sum(s.cdf_mass(t) for s in self.segments)

    def log_mgf(self, theta: float) -> float:
        terms = [np.log(p) - theta * v for v, p in self.atoms if p > 0]
        terms += [s.log_mgf(theta) for s in self.segments]
        return float(np.logaddexp.reduce(terms))


def smd_exact_pdf(c: Constellation, transmitted: int, competitor: int, sigma: float, h: float = 1.0) -> ScalarMixture:
    """Exact law of the bit SMD when ``transmitted`` is sent over ``Y = h x + Z``."""
    f = smd_piecewise(c, transmitted, competitor, sigma, h)
    mu = h * c.points[transmitted]
    atoms: dict = {}
    segs = []
    for lo, hi, a, b in f.pieces():
        lw = float(log_interval_prob((lo - mu) / sigma, (hi - mu) / sigma))
        scale = max(abs(b), 1.0)
        if abs(a) * sigma <= 1e-12 * scale:
            atoms[b] = atoms.get(b, 0.0) + float(np.exp(lw))
        else:
            segs.append(Segment(float(a), float(b), float(lo), float(hi), float(mu), float(sigma), lw))
    return ScalarMixture(tuple(sorted(atoms.items())), tuple(segs))
