"""Monte Carlo harness: pairwise error probabilities and BER curves.

Both decoders always see the same channel realizations unless pairing is
switched off. Work is cut into fixed-size chunks, and each chunk draws from
its own counter-based stream keyed by ``(seed, grid point, chunk)``. Chunks
run in fixed waves and are aggregated in chunk order, so results do not
depend on how many workers execute them.

Deep-tail pairwise probabilities use importance sampling. The proposal is a
mixture of Gaussians shifted to the dominating points of both error regions,
plus an unshifted component that bounds the likelihood ratio.
"""
from __future__ import annotations

import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import lru_cache
import multiprocessing as mp

import numpy as np
from scipy import stats
from scipy.special import logsumexp

from .analysis import BDEC, SDEC, norm_distance_from_tables
from .channel import SNR_CONVENTIONS, derive_trial_rng, rayleigh_gains, sigma_from_snr
from .codebook import ConvCode, encode_conv, parse_code_spec
from .constellation import Constellation, bits_to_symbols, from_cli_name
from .decoder import bdec, sdec, smd_sdec
from .demapper import maxlog_llrs, smd_bdec, smd_piecewise
from .gauss import qfunc

CHANNELS = ("awgn", "rayleigh")
PEP_METHODS = ("auto", "mc", "is")
THREADS_ENV = "CM_DUEL_THREADS"
Z95 = stats.norm.ppf(0.975)


class SimError(ValueError):
    pass


@dataclass(frozen=True)
class SimConfig:
    """Everything that determines a simulation's output.

    ``chunk`` is trials (PEP) or frames (BER) per work unit, with 0 meaning
    an automatic size. ``wave`` chunks run between two checks of the stopping
    rule. Neither depends on the worker count.
    """

    snr_db: tuple
    snr_convention: str = "dsz"
    channel: str = "awgn"
    min_errors: int = 200
    max_trials: int = 10**8
    seed: int = 0
    frame_bits: int = 1000
    chunk: int = 0
    wave: int = 8
    method: str = "auto"
    mc_budget: int = 2 * 10**7
    paired: bool = True

    def __post_init__(self):
        object.__setattr__(self, "snr_db", tuple(float(s) for s in self.snr_db))
        self.validate()

    def validate(self) -> None:
        if not self.snr_db:
            raise SimError("empty SNR grid")
        if any(b <= a for a, b in zip(self.snr_db, self.snr_db[1:])):
            raise SimError("SNR grid must be strictly ascending")
        if self.snr_convention not in SNR_CONVENTIONS:
            raise SimError(f"unknown SNR convention {self.snr_convention!r}")
        if self.channel not in CHANNELS:
            raise SimError(f"unknown channel {self.channel!r}")
        if self.min_errors < 1 or self.max_trials < 1:
            raise SimError("min_errors and max_trials must be positive")
        if self.wave < 1 or self.chunk < 0 or self.frame_bits < 1:
            raise SimError("wave, chunk and frame_bits must be positive")
        if self.method not in PEP_METHODS:
            raise SimError(f"unknown method {self.method!r}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["snr_db"] = list(self.snr_db)
        return d


@dataclass(frozen=True)
class SimPoint:
    """One grid point. For importance sampling ``errors`` counts hits under the proposal."""

    snr_db: float
    trials: int
    errors: int
    estimate: float
    ci_low: float
    ci_high: float
    censored: bool
    method: str = "mc"
    chunk_errors: tuple = field(default=(), compare=False, repr=False)
    chunk_trials: tuple = field(default=(), compare=False, repr=False)


@dataclass(frozen=True)
class SimResult:
    decoder: str
    quantity: str  # "pep" or "ber"
    points: tuple
    runtime: float = field(default=0.0, compare=False)

    @property
    def snr_db(self) -> np.ndarray:
        return np.array([p.snr_db for p in self.points])

    @property
    def estimates(self) -> np.ndarray:
        return np.array([p.estimate for p in self.points])


def wilson_interval(errors: int, trials: int, level: float = 0.95) -> tuple:
    """Wilson score interval for a binomial proportion."""
    if trials <= 0:
        return (0.0, 1.0)
    ci = stats.binomtest(int(errors), int(trials)).proportion_ci(level, method="wilson")
    return (float(ci.low), float(ci.high))


def worker_count(workers: int | None = None) -> int:
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise SimError(f"{THREADS_ENV} must be an integer, got {env!r}") from exc
    if workers is None:
        return 1
    return max(1, int(workers))


class _Runner:
    """Maps chunk tasks in order, inline or on a process pool."""

    def __init__(self, workers: int):
        self.workers = workers
        self.pool = None
        if workers > 1:
            self.pool = ProcessPoolExecutor(max_workers=workers, mp_context=mp.get_context("fork"))

    def map(self, fn, tasks):
        if self.pool is None:
            return [fn(t) for t in tasks]
        return list(self.pool.map(fn, tasks))

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        if self.pool is not None:
            self.pool.shutdown()


def _run_point(runner, fn, make_task, chunk: int, cfg: SimConfig, done) -> list:
    """Run waves of chunks until ``done(results)`` or the trial cap."""
    results, started, j = [], 0, 0
    while started < cfg.max_trials:
        tasks = []
        for _ in range(cfg.wave):
            n = min(chunk, cfg.max_trials - started)
            if n <= 0:
                break
            tasks.append(make_task(j, n))
            started += n
            j += 1
        results.extend(runner.map(fn, tasks))
        if done(results):
            break
    return results


# -- pairwise error probability ----------------------------------------------


MAX_PIECE_COMBOS = 20000
MAX_COMPONENTS = 32


def _box_projection(x0, lo, hi, a, b):
    """Closest point to ``x0`` in the box with ``sum a y + b <= 0``, or ``None``.

    KKT: ``y = clip(x0 - lam a / 2, lo, hi)`` with the multiplier found by
    bisection, since the constraint value falls monotonically in ``lam``.
    """
    def at(lam):
        y = np.clip(x0 - lam * a / 2, lo, hi)
        return y, float(a @ y + b.sum())

    y, g = at(0.0)
    if g <= 0:
        return y
    hi_lam = 1.0
    for _ in range(200):
        y, g = at(hi_lam)
        if g <= 0:
            break
        hi_lam *= 4
    else:
        return None
    if not np.isfinite(y).all():
        return None
    lo_lam = 0.0
    for _ in range(100):
        mid = 0.5 * (lo_lam + hi_lam)
        if at(mid)[1] <= 0:
            hi_lam = mid
        else:
            lo_lam = mid
    return at(hi_lam)[0]


def bdec_dominating_points(c: Constellation, x, xhat, h=None) -> list:
    """Local minimum-norm offsets ``y - h x`` on the bit-decoder error boundary.

    Every assignment of one affine piece per position is a small projection
    problem; the distinct solutions are the candidate dominating points,
    sorted by norm. Offsets are for unit noise scale. Long pairs whose
    assignment count exceeds ``MAX_PIECE_COMBOS`` keep only the assignment
    reached by a common Lagrange multiplier.
    """
    import itertools

    x = np.asarray(x, dtype=int)
    xhat = np.asarray(xhat, dtype=int)
    gains = np.ones(len(x)) if h is None else np.asarray(h, dtype=float)
    funcs = [smd_piecewise(c, int(p), int(q), 1.0, float(g)) for p, q, g in zip(x, xhat, gains)]
    centres = gains * c.points[x]
    pieces = [list(f.pieces()) for f in funcs]
    n_combo = math.prod(len(p) for p in pieces)
    if n_combo <= MAX_PIECE_COMBOS:
        combos = itertools.product(*pieces)
    else:
        combos = [_lagrange_combo(pieces, centres)]
    found = []
    for combo in combos:
        lo, hi, a, b = (np.array(v, dtype=float) for v in zip(*combo))
        y = _box_projection(centres, lo, hi, a, b)
        if y is None:
            continue
        # Pieces are closed intervals, so y lies where the true SMD equals the affine piece.
        if sum(f(v) for f, v in zip(funcs, y)) > 1e-9 * max(1.0, np.abs(b).sum()):
            continue
        off = y - centres
        if not any(np.allclose(off, o, atol=1e-9) for o in found):
            found.append(off)
    if not found:
        raise SimError("no bit-decoder error region found")
    found.sort(key=lambda o: float(o @ o))
    return found


def _lagrange_combo(pieces, centres):
    """Per-position pieces chosen by a common multiplier that first reaches the boundary."""
    for lam in np.logspace(-6, 6, 481):
        combo, g = [], 0.0
        for ps, x0 in zip(pieces, centres):
            best = None
            for lo, hi, a, b in ps:
                y = min(max(x0 - lam * a / 2, lo), hi)
                val = (y - x0) ** 2 + lam * (a * y + b)
                if best is None or val < best[0]:
                    best = (val, (lo, hi, a, b), a * y + b)
            combo.append(best[1])
            g += best[2]
        if g <= 0:
            return tuple(combo)
    raise SimError("no bit-decoder error region found")


def bdec_dominating_point(c: Constellation, x, xhat, h=None) -> np.ndarray:
    """The minimum-norm offset among :func:`bdec_dominating_points`."""
    return bdec_dominating_points(c, x, xhat, h)[0]


@dataclass(frozen=True)
class Proposal:
    """Gaussian mixture over the noise of the differing positions (unit variance)."""

    shifts: np.ndarray  # (J, n_d)
    weights: np.ndarray  # (J,)

    def sample(self, rng, n):
        comp = rng.choice(len(self.weights), size=n, p=self.weights)
        z = rng.standard_normal((n, self.shifts.shape[1])) + self.shifts[comp]
        return z, self.likelihood_ratio(z)

    def likelihood_ratio(self, z):
        # phi(z) / sum_j w_j phi(z - mu_j)
        log_terms = np.log(self.weights) + z @ self.shifts.T - 0.5 * np.sum(self.shifts**2, axis=1)
        return np.exp(-logsumexp(log_terms, axis=1))


def make_proposal(c: Constellation, x, xhat, sigma: float) -> Proposal:
    """Mixture: the symbol-decoder dominating point, the bit-decoder candidates, no shift.

    Bit-decoder candidates share their weight in proportion to their
    Gaussian tail factor ``exp(-|mu|^2 / 2)`` at this noise level.
    """
    x = np.asarray(x, dtype=int)
    xhat = np.asarray(xhat, dtype=int)
    s_shift = (c.points[xhat] - c.points[x]) / (2.0 * sigma)
    b_shifts = [o / sigma for o in bdec_dominating_points(c, x, xhat)]
    e = np.array([float(o @ o) for o in b_shifts])
    rel = np.exp(-(e - e.min()) / 2)
    keep = np.argsort(-rel, kind="stable")[:MAX_COMPONENTS]
    keep = keep[rel[keep] >= 1e-6 * rel.max()]
    bw = rel[keep] / rel[keep].sum()
    shifts = np.stack([s_shift] + [b_shifts[i] for i in keep] + [np.zeros_like(s_shift)])
    weights = np.concatenate(([0.3], 0.6 * bw, [0.1]))
    return Proposal(shifts, weights)


def _pep_chunk(task):
    (m, labeling, d, x, xhat, sigma, channel, seed, point, j, n, method, paired, shifts, weights) = task
    c = Constellation(m, labeling, d)
    x = np.asarray(x)
    xhat = np.asarray(xhat)
    rng = derive_trial_rng(seed, point, j)
    nd = len(x)
    if method == "is":
        z, w = Proposal(np.asarray(shifts), np.asarray(weights)).sample(rng, n)
        h = np.ones(nd)
    else:
        h = rayleigh_gains((n, nd), rng) if channel == "rayleigh" else np.ones((n, nd))
        z = rng.standard_normal((n, nd))
        w = None
    xs, xh = c.points[x], c.points[xhat]
    y = h * xs + sigma * z
    err_s = np.sum(smd_sdec(h * xs, h * xh, y), axis=1) < 0
    if not paired:
        sub = derive_trial_rng(seed, point, j, 1)
        if method == "is":
            z, w2 = Proposal(np.asarray(shifts), np.asarray(weights)).sample(sub, n)
        else:
            h = rayleigh_gains((n, nd), sub) if channel == "rayleigh" else np.ones((n, nd))
            z = sub.standard_normal((n, nd))
            w2 = None
        y = h * xs + sigma * z
    else:
        w2 = w
    L = maxlog_llrs(c, y, sigma, h)
    err_b = np.sum(smd_bdec(c, x, xhat, L), axis=1) < 0
    out = [n]
    for err, ww in ((err_s, w), (err_b, w2)):
        hits = int(np.count_nonzero(err))
        if ww is None:
            out += [hits, float(hits), float(hits)]
        else:
            v = np.where(err, ww, 0.0)
            out += [hits, float(v.sum()), float(np.sum(v * v))]
    return tuple(out)


def _pep_point(results, idx, snr, method, min_errors) -> SimPoint:
    n = sum(r[0] for r in results)
    hits = sum(r[1 + 3 * idx] for r in results)
    s1 = math.fsum(r[2 + 3 * idx] for r in results)
    s2 = math.fsum(r[3 + 3 * idx] for r in results)
    est = s1 / n
    if method == "mc":
        lo, hi = wilson_interval(hits, n)
    else:
        var = max(s2 / n - est**2, 0.0) / max(n - 1, 1)
        half = Z95 * math.sqrt(var)
        lo, hi = max(est - half, 0.0), est + half
    return SimPoint(
        snr_db=snr,
        trials=n,
        errors=hits,
        estimate=est,
        ci_low=lo,
        ci_high=hi,
        censored=hits < min_errors,
        method=method,
        chunk_errors=tuple(r[1 + 3 * idx] for r in results),
        chunk_trials=tuple(r[0] for r in results),
    )


def choose_pep_method(c, x, xhat, sigma, cfg: SimConfig) -> str:
    if cfg.method != "auto":
        if cfg.method == "is" and cfg.channel != "awgn":
            raise SimError("importance sampling is implemented for AWGN only")
        return cfg.method
    if cfg.channel != "awgn":
        return "mc"
    a = max(norm_distance_from_tables(SDEC, x, xhat), norm_distance_from_tables(BDEC, x, xhat))
    p = float(qfunc(a * c.d / sigma))
    return "mc" if p > 0 and cfg.min_errors / p <= cfg.mc_budget else "is"


def simulate_pep(c: Constellation, x, xhat, cfg: SimConfig, workers: int | None = None) -> dict:
    """PEP of ``x -> xhat`` for both decoders over the SNR grid.

    Only positions where the words differ are simulated; equal positions
    contribute nothing to either metric difference. Returns
    ``{"SDEC": SimResult, "BDEC": SimResult}``.
    """
    x = np.asarray(x, dtype=int)
    xhat = np.asarray(xhat, dtype=int)
    if x.shape != xhat.shape or x.ndim != 1:
        raise SimError("x and xhat must be 1-D sequences of equal length")
    diff = x != xhat
    if not diff.any():
        raise SimError("x and xhat are identical")
    xd, xhd = x[diff], xhat[diff]
    chunk = cfg.chunk or 2**16
    t0 = time.perf_counter()
    pts = {SDEC: [], BDEC: []}
    with _Runner(worker_count(workers)) as runner:
        for pi, snr in enumerate(cfg.snr_db):
            sigma = sigma_from_snr(snr, cfg.snr_convention, c, len(x) * 1.0)
            method = choose_pep_method(c, xd, xhd, sigma, cfg)
            shifts = weights = None
            if method == "is":
                prop = make_proposal(c, xd, xhd, sigma)
                shifts, weights = prop.shifts.tolist(), prop.weights.tolist()

            def task(j, n, sigma=sigma, method=method, shifts=shifts, weights=weights, pi=pi):
                return (c.m, c.labeling, c.d, xd.tolist(), xhd.tolist(), sigma, cfg.channel, cfg.seed,
                        pi, j, n, method, cfg.paired, shifts, weights)

            def done(res):
                return min(sum(r[1] for r in res), sum(r[4] for r in res)) >= cfg.min_errors

            res = _run_point(runner, _pep_chunk, task, chunk, cfg, done)
            for i, dec in enumerate((SDEC, BDEC)):
                pts[dec].append(_pep_point(res, i, snr, method, cfg.min_errors))
    runtime = time.perf_counter() - t0
    return {dec: SimResult(dec, "pep", tuple(p), runtime) for dec, p in pts.items()}


# -- bit error rate -------------------------------------------------------------


@lru_cache(maxsize=16)
def _ber_setup(code_spec: str, labeling: str, frame_bits: int):
    cc = parse_code_spec(code_spec)
    if not isinstance(cc, ConvCode):
        raise SimError("BER simulation needs a convolutional code")
    c = from_cli_name(labeling)
    if cc.n % c.m:
        raise SimError(f"n={cc.n} output bits per stage do not fill whole {c.m}-bit symbols")
    K = frame_bits - frame_bits % cc.k
    if K <= 0:
        raise SimError("frame too short for this code")
    return cc, c, cc.frame(K, terminated=True)


def default_ber_chunk(frame) -> int:
    """Frames per chunk, sized so the Viterbi cost-to-go table stays near 32 MB."""
    cells = (frame.stages + 1) * frame.trellis.num_states
    return int(max(1, min(256, 2**22 // cells)))


def _ber_chunk(task):
    code_spec, labeling, frame_bits, channel, sigma, seed, point, j, F, paired = task
    cc, c, frame = _ber_setup(code_spec, labeling, frame_bits)
    rng = derive_trial_rng(seed, point, j)
    U = rng.integers(0, 2, size=(F, frame.K), dtype=np.uint8)
    x = c.points[bits_to_symbols(c, encode_conv(cc, U, True))]
    h = rayleigh_gains(x.shape, rng) if channel == "rayleigh" else np.ones_like(x)
    y = h * x + sigma * rng.standard_normal(x.shape)
    us = sdec(frame, c, y, h).info
    if not paired:
        sub = derive_trial_rng(seed, point, j, 1)
        h = rayleigh_gains(x.shape, sub) if channel == "rayleigh" else np.ones_like(x)
        y = h * x + sigma * sub.standard_normal(x.shape)
    L = maxlog_llrs(c, y, sigma, h).reshape(F, -1)
    ub = bdec(frame, L).info
    es = us != U
    eb = ub != U
    return (F * frame.K, int(es.sum()), int(eb.sum()), int(es.any(axis=1).sum()), int(eb.any(axis=1).sum()))


def simulate_ber(code_spec: str, labeling: str, cfg: SimConfig, workers: int | None = None) -> dict:
    """Information-bit BER of both decoders on zero-tail terminated frames.

    ``code_spec`` is a convolutional code (``cc:7,5``); ``labeling`` a CLI
    labeling name (``g1`` .. ``g4``, ``brgc8`` ...). ``max_trials`` caps the
    number of information bits per point.
    """
    cc, c, frame = _ber_setup(code_spec, labeling, cfg.frame_bits)
    F = cfg.chunk or default_ber_chunk(frame)
    n_sym = frame.length // c.m
    t0 = time.perf_counter()
    pts = {SDEC: [], BDEC: []}
    bits_per_frame = frame.K
    max_frames = max(1, -(-cfg.max_trials // bits_per_frame))
    frame_cfg = SimConfig(**{**cfg.to_dict(), "max_trials": max_frames})
    with _Runner(worker_count(workers)) as runner:
        for pi, snr in enumerate(cfg.snr_db):
            sigma = sigma_from_snr(snr, cfg.snr_convention, c, n_sym / frame.K)

            def task(j, n, sigma=sigma, pi=pi):
                return (code_spec, labeling, cfg.frame_bits, cfg.channel, sigma, cfg.seed, pi, j, n, cfg.paired)

            def done(res):
                return min(sum(r[1] for r in res), sum(r[2] for r in res)) >= cfg.min_errors

            res = _run_point(runner, _ber_chunk, task, F, frame_cfg, done)
            bits = sum(r[0] for r in res)
            for i, dec in enumerate((SDEC, BDEC)):
                errs = sum(r[1 + i] for r in res)
                lo, hi = wilson_interval(errs, bits)
                pts[dec].append(
                    SimPoint(
                        snr_db=snr,
                        trials=bits,
                        errors=errs,
                        estimate=errs / bits,
                        ci_low=lo,
                        ci_high=hi,
                        censored=errs < cfg.min_errors,
                        method="mc",
                        chunk_errors=tuple(r[1 + i] for r in res),
                        chunk_trials=tuple(r[0] for r in res),
                    )
                )
    runtime = time.perf_counter() - t0
    return {dec: SimResult(dec, "ber", tuple(p), runtime) for dec, p in pts.items()}


@dataclass(frozen=True)
class RatioPoint:
    snr_db: float
    ratio: float
    ci_low: float
    ci_high: float


def ber_ratio(result_b: SimResult, result_s: SimResult) -> list:
    """Pointwise ``BER_B / BER_S`` with a 95% interval.

    When both results come from the same chunks (paired noise) the interval
    uses the ratio-estimator variance over chunks, which captures the
    positive correlation between the decoders. Otherwise the two error
    counts are treated as independent Poisson counts.
    """
    if len(result_b.points) != len(result_s.points):
        raise SimError("grids differ")
    out = []
    for pb, ps in zip(result_b.points, result_s.points):
        if pb.snr_db != ps.snr_db:
            raise SimError("grids differ")
        if ps.errors == 0:
            out.append(RatioPoint(pb.snr_db, math.inf, 0.0, math.inf))
            continue
        r = (pb.errors / pb.trials) / (ps.errors / ps.trials)
        paired = pb.chunk_trials == ps.chunk_trials and len(pb.chunk_errors) > 1
        if paired:
            b = np.asarray(pb.chunk_errors, dtype=float)
            s = np.asarray(ps.chunk_errors, dtype=float)
            k = len(b)
            var = np.var(b - r * s, ddof=1) / (k * s.mean() ** 2)
            half = Z95 * math.sqrt(var)
            lo, hi = max(r - half, 0.0), r + half
        else:
            se = math.sqrt(1.0 / max(pb.errors, 1) + 1.0 / ps.errors)
            lo, hi = r * math.exp(-Z95 * se), r * math.exp(Z95 * se)
        out.append(RatioPoint(pb.snr_db, r, lo, hi))
    return out


def snr_at(result: SimResult, target: float) -> float:
    """SNR where the curve crosses ``target``, by linear interpolation of ``log10`` of the estimate."""
    s = result.snr_db
    v = result.estimates
    for i in range(len(s) - 1):
        a, b = v[i], v[i + 1]
        if a >= target >= b and a > 0 and b > 0:
            la, lb, lt = math.log10(a), math.log10(b), math.log10(target)
            if la == lb:
                return float(s[i])
            return float(s[i] + (s[i + 1] - s[i]) * (la - lt) / (la - lb))
    raise SimError(f"curve does not cross {target}")


def uncoded_ber_theory(dsz):
    """Gray 4-PAM bit error rate with per-bit max-log (hard) decisions."""
    return 0.75 * qfunc(dsz) + 0.5 * qfunc(3 * dsz) - 0.25 * qfunc(5 * dsz)


def simulate_uncoded_ber(c: Constellation, dsz_db: float, symbols: int, seed: int = 0) -> tuple:
    """Hard-decision BER of uncoded transmission: ``(bit_errors, bits)``."""
    rng = derive_trial_rng(seed, 0)
    sigma = sigma_from_snr(dsz_db, "dsz", c)
    idx = rng.integers(0, c.M, size=symbols)
    y = c.points[idx] + sigma * rng.standard_normal(symbols)
    hard = (maxlog_llrs(c, y, sigma) > 0).astype(np.uint8)
    return int(np.count_nonzero(hard != c.bits[idx])), symbols * c.m


__all__ = [
    "CHANNELS",
    "Proposal",
    "RatioPoint",
    "SimConfig",
    "SimError",
    "SimPoint",
    "SimResult",
    "THREADS_ENV",
    "bdec_dominating_point",
    "bdec_dominating_points",
    "ber_ratio",
    "make_proposal",
    "simulate_ber",
    "simulate_pep",
    "simulate_uncoded_ber",
    "snr_at",
    "uncoded_ber_theory",
    "wilson_interval",
    "worker_count",
]
