"""SMD tables, weight profiles, normalized distances, analytic PEP and asymptotic loss."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
import math

import numpy as np

from .constellation import Constellation, error_vector, is_gray
from .gauss import qfunc

MAX_LOSS_DB = 20 * math.log10(2 / math.sqrt(3))

SDEC, BDEC = "SDEC", "BDEC"

# (mu, sigma^2) for 0-based ordered symbol pairs; both tables are symmetric.
_S_ENTRIES = {(0, 1): (1, 1), (0, 2): (4, 4), (0, 3): (9, 9), (1, 2): (1, 1), (1, 3): (4, 4), (2, 3): (1, 1)}
_B_ENTRIES = dict(_S_ENTRIES)
_B_ENTRIES[(0, 3)] = (3, 1)

SMD_TABLES = {SDEC: _S_ENTRIES, BDEC: _B_ENTRIES}

# Mean of each error-vector class away from the corners.
ERROR_CLASS_MEAN = {(0, 1): 1, (1, 0): 1, (1, 1): 4}


class AnalysisError(ValueError):
    pass


@dataclass(frozen=True)
class SmdParams:
    mu: float
    sigma2: float


def _decoder(name: str) -> str:
    key = name.upper().replace("-", "")
    if key not in SMD_TABLES:
        raise AnalysisError(f"unknown decoder {name!r}")
    return key


def smd_params(decoder: str, i: int, j: int) -> SmdParams:
    """Table entry for symbols ``i`` and ``j`` (0-based, 4-PAM)."""
    if i == j:
        raise AnalysisError("SMD parameters are undefined for equal symbols")
    if not (0 <= i < 4 and 0 <= j < 4):
        raise AnalysisError("symbol index out of range for 4-PAM")
    mu, s2 = SMD_TABLES[_decoder(decoder)][(min(i, j), max(i, j))]
    return SmdParams(mu, s2)


@dataclass(frozen=True)
class WeightProfile:
    """Per-class counts of differing positions plus the corner count.

    ``w`` maps each error vector (tuple) to its count; ``index_sets`` holds the
    positions behind each count, with the key ``"c"`` for corners.
    """

    w: dict
    wc: int
    index_sets: dict = field(default_factory=dict, compare=False)

    @property
    def beta(self) -> int:
        return beta(self)

    @property
    def is_zero(self) -> bool:
        return sum(self.w.values()) == 0


def weight_profile(c: Constellation, x, xhat) -> WeightProfile:
    x = np.asarray(x, dtype=int)
    xhat = np.asarray(xhat, dtype=int)
    if x.shape != xhat.shape:
        raise AnalysisError("codewords must have equal length")
    if c.m != 2:
        raise AnalysisError("weight profiles are defined for 4-PAM")
    if not is_gray(c):
        raise AnalysisError(f"weight profiles assume a Gray labeling, got {c.name or c.labeling}")
    w = {e: 0 for e in ERROR_CLASS_MEAN}
    sets = {e: [] for e in ERROR_CLASS_MEAN}
    sets["c"] = []
    for k, (a, b) in enumerate(zip(x, xhat)):
        if a == b:
            continue
        e = tuple(int(v) for v in error_vector(c, a, b))
        w[e] += 1
        sets[e].append(k)
        if {int(a), int(b)} == {0, 3}:
            sets["c"].append(k)
    return WeightProfile(w, len(sets["c"]), {k: tuple(v) for k, v in sets.items()})


def beta(p: WeightProfile) -> int:
    """``sum_e w_e mu_e``; corners count at the nominal single-bit mean of one."""
    return sum(p.w.get(e, 0) * mu for e, mu in ERROR_CLASS_MEAN.items())


def _check_profile(b, wc):
    if b <= 0:
        raise AnalysisError("normalized distance needs a nonzero profile")
    if wc < 0 or wc > b:
        raise AnalysisError("corner count must satisfy 0 <= w_c <= beta")


def norm_distance(decoder: str, p: WeightProfile | None = None, *, beta_value=None, wc=None) -> float:
    """Normalized distance ``a`` for either decoder.

    Give a profile, or ``beta_value`` and ``wc`` directly.
    """
    b = beta(p) if p is not None else beta_value
    wc = p.wc if p is not None else wc
    _check_profile(b, wc)
    if _decoder(decoder) == SDEC:
        return math.sqrt(b + 8 * wc)
    return (b + 2 * wc) / math.sqrt(b)


def norm_distance_sq_exact(decoder: str, beta_value: int, wc: int) -> Fraction:
    """``a^2`` as an exact rational."""
    _check_profile(beta_value, wc)
    if _decoder(decoder) == SDEC:
        return Fraction(beta_value + 8 * wc)
    return Fraction((beta_value + 2 * wc) ** 2, beta_value)


def norm_distance_from_tables(decoder: str, x, xhat) -> float:
    """``sum mu / sqrt(sum sigma^2)`` straight from the SMD tables."""
    mus, s2s = 0.0, 0.0
    for a, b in zip(x, xhat):
        if a != b:
            p = smd_params(decoder, int(a), int(b))
            mus += p.mu
            s2s += p.sigma2
    if s2s == 0:
        raise AnalysisError("codewords are identical")
    return mus / math.sqrt(s2s)


def pep_analytic(a, dsz):
    """``Q(a d / sigma_z)``; ``dsz`` is the linear ratio ``d / sigma_z``."""
    return qfunc(np.asarray(a, dtype=float) * np.asarray(dsz, dtype=float))


def loss_from(beta_value: float, wc: float) -> float:
    """Asymptotic loss in dB of the bit decoder for given ``beta`` and corner weight."""
    if beta_value <= 0:
        raise AnalysisError("loss needs beta > 0")
    return 20 * math.log10(math.sqrt(beta_value * (beta_value + 8 * wc)) / (beta_value + 2 * wc))


def pairwise_loss(p: WeightProfile) -> float:
    if p.is_zero:
        raise AnalysisError("loss is undefined for identical codewords")
    return loss_from(beta(p), p.wc)


def _fading_sums(c: Constellation, h, x, xhat):
    h = np.asarray(h, dtype=float)
    x = np.asarray(x, dtype=int)
    if h.shape != x.shape or len(x) != len(xhat):
        raise AnalysisError("gains and codewords must have equal length")
    if np.any(h <= 0):
        raise AnalysisError("channel gains must be positive")
    p = weight_profile(c, x, xhat)
    h2 = h**2
    alpha = float(sum(h2[k] for k in p.index_sets["c"]))
    b = float(sum(h2[k] * ERROR_CLASS_MEAN[e] for e in ERROR_CLASS_MEAN for k in p.index_sets[e]))
    return alpha, b


def fading_distance(decoder: str, c: Constellation, h, x, xhat) -> float:
    """Gain-weighted normalized distance for one channel realization."""
    alpha, b = _fading_sums(c, h, x, xhat)
    if b <= 0:
        raise AnalysisError("codewords are identical")
    if _decoder(decoder) == SDEC:
        return math.sqrt(b + 8 * alpha)
    return (b + 2 * alpha) / math.sqrt(b)


def fading_pairwise_loss(c: Constellation, h, x, xhat) -> float:
    alpha, b = _fading_sums(c, h, x, xhat)
    if b <= 0:
        raise AnalysisError("codewords are identical")
    return 20 * math.log10(math.sqrt(b * (b + 8 * alpha)) / (b + 2 * alpha))


def zcmod_params(c: Constellation, x: int, xhat: int) -> SmdParams:
    """Single-Gaussian parameters from the zero-crossing piece of the bit SMD.

    The affine piece of ``y -> Lambda^B`` that crosses zero nearest the
    transmitted point is extended to all ``y``; its mean and variance, scaled
    like the symbol SMD (by ``sigma_z^2 / 4d`` and ``1 / 16 d^2``), are
    returned in units of ``d`` and ``sigma_z^2``.
    """
    from .demapper import smd_piecewise

    sigma = 1.0
    f = smd_piecewise(c, x, xhat, sigma)
    s = c.points[x]
    best = None
    for lo, hi, a, b in f.pieces():
        if a == 0:
            continue
        z = -b / a
        if lo <= z <= hi:
            if best is None or abs(z - s) < abs(best[0] - s):
                best = (z, a, b)
    if best is None:
        raise AnalysisError("bit SMD never crosses zero")
    _, a, b = best
    d = c.d
    mean = (a * s + b) * sigma**2 / (4 * d)
    var = (a * sigma**2) ** 2 / (16 * d**2)
    return SmdParams(mean / d, var / sigma**2)


def pair_tables(c: Constellation):
    """``(beta, corner)`` contributions of every ordered symbol pair of Gray 4-PAM."""
    if c.m != 2 or not is_gray(c):
        raise AnalysisError("pair tables are defined for Gray-labeled 4-PAM")
    bt = np.zeros((4, 4), dtype=np.int64)
    ct = np.zeros((4, 4), dtype=np.int64)
    for i in range(4):
        for j in range(4):
            if i != j:
                bt[i, j] = ERROR_CLASS_MEAN[tuple(int(v) for v in error_vector(c, i, j))]
                ct[i, j] = int({i, j} == {0, 3})
    return bt, ct


def loss_array(b, wc):
    """Vectorized :func:`loss_from` for ``beta > 0``."""
    b = np.asarray(b, dtype=float)
    wc = np.asarray(wc, dtype=float)
    return 20 * np.log10(np.sqrt(b * (b + 8 * wc)) / (b + 2 * wc))


@dataclass(frozen=True)
class BoundSearch:
    max_loss_db: float
    beta: float
    wc: float
    evaluated: int


def loss_bound_search(n_profiles: int, n_pairs: int, max_len: int = 32, seed: int = 0, labelings=None) -> BoundSearch:
    """Largest pairwise loss over random weight profiles and random codeword pairs.

    Profiles draw ``w_[0,1], w_[1,0], w_[1,1]`` in ``0..max_len`` and
    ``w_c <= w_[1,0]``. Pairs draw a length in ``1..max_len``, two random
    symbol sequences and one of the Gray labelings.
    """
    from .constellation import make_pam

    rng = np.random.default_rng(seed)
    w = rng.integers(0, max_len + 1, size=(n_profiles, 3))
    wc = np.floor(rng.random(n_profiles) * (w[:, 1] + 1)).astype(np.int64)
    b = w[:, 0] + w[:, 1] + 4 * w[:, 2]
    ok = b > 0
    betas, wcs = [b[ok]], [wc[ok]]
    labelings = labelings or ("G1", "G2", "G3", "G4")
    tables = [pair_tables(make_pam(2, name)) for name in labelings]
    lab = rng.integers(0, len(tables), size=n_pairs)
    length = rng.integers(1, max_len + 1, size=n_pairs)
    x = rng.integers(0, 4, size=(n_pairs, max_len))
    xh = rng.integers(0, 4, size=(n_pairs, max_len))
    live = np.arange(max_len)[None, :] < length[:, None]
    bt = np.stack([t[0] for t in tables])
    ct = np.stack([t[1] for t in tables])
    pb = np.where(live, bt[lab[:, None], x, xh], 0).sum(axis=1)
    pc = np.where(live, ct[lab[:, None], x, xh], 0).sum(axis=1)
    ok = pb > 0
    betas.append(pb[ok])
    wcs.append(pc[ok])
    B = np.concatenate(betas)
    W = np.concatenate(wcs)
    L = loss_array(B, W)
    i = int(np.argmax(L))
    return BoundSearch(float(L[i]), float(B[i]), float(W[i]), int(B.size))


def fading_loss_search(n_pairs: int, max_len: int = 32, seed: int = 0) -> BoundSearch:
    """Largest gain-weighted pairwise loss over random Rayleigh gains and pairs."""
    from .constellation import make_pam

    rng = np.random.default_rng(seed)
    tables = [pair_tables(make_pam(2, name)) for name in ("G1", "G2", "G3", "G4")]
    bt = np.stack([t[0] for t in tables])
    ct = np.stack([t[1] for t in tables])
    lab = rng.integers(0, 4, size=n_pairs)
    length = rng.integers(1, max_len + 1, size=n_pairs)
    x = rng.integers(0, 4, size=(n_pairs, max_len))
    xh = rng.integers(0, 4, size=(n_pairs, max_len))
    h2 = rng.rayleigh(np.sqrt(0.5), size=(n_pairs, max_len)) ** 2
    live = np.arange(max_len)[None, :] < length[:, None]
    b = np.where(live, h2 * bt[lab[:, None], x, xh], 0).sum(axis=1)
    a = np.where(live, h2 * ct[lab[:, None], x, xh], 0).sum(axis=1)
    ok = b > 0
    L = loss_array(b[ok], a[ok])
    i = int(np.argmax(L))
    return BoundSearch(float(L[i]), float(b[ok][i]), float(a[ok][i]), int(ok.sum()))


from .exact_pep import exact_pep_bdec, zcmod_ratio_curve  # noqa: E402  (re-export)
