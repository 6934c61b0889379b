"""Symbol-wise (S-DEC) and bit-wise (B-DEC) decoders.

Both decoders maximise an additive metric over the code. S-DEC uses
``-sum (y - h x)^2`` and B-DEC the correlation ``(2b - 1) . L``. Two backends
share one interface:

* ``exhaustive`` scores every codeword (any code with small ``K``);
* ``viterbi`` runs on the trellis of a convolutional frame, batched over
  frames with numpy.

Exact ties go to the lexicographically smallest information vector. The
Viterbi backend gets this by storing backward (cost-to-go) metrics and then
walking forward, always taking the smallest input that stays optimal.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .codebook import ConvFrame, CodeError
from .constellation import Constellation, bits_to_symbols

BACKENDS = ("auto", "exhaustive", "viterbi")

# Relative slack under which two metrics count as tied.
TIE_RTOL = 1e-10


class DecoderError(ValueError):
    pass


@dataclass(frozen=True)
class DecodeResult:
    """Decoded information bits, the winner's metric and a tie flag.

    ``metric`` is ``D^S`` (a squared distance, smaller is better) for S-DEC
    and ``D^B`` (a correlation, larger is better) for B-DEC. Batched calls
    return arrays with a leading frame axis.
    """

    info: np.ndarray
    metric: np.ndarray | float
    tie: np.ndarray | bool


def smd_sdec(x, xhat, y):
    """Symbol metric difference ``2 (x - xhat) y + xhat^2 - x^2`` (elementwise)."""
    x = np.asarray(x, dtype=float)
    xhat = np.asarray(xhat, dtype=float)
    return 2.0 * (x - xhat) * np.asarray(y, dtype=float) + xhat**2 - x**2


def sdec_metric(c: Constellation, bits, y, h=None):
    """``D^S = sum_k (y_k - h_k x_k)^2`` for codeword bits (last axis)."""
    x = c.points[bits_to_symbols(c, bits)]
    hh = 1.0 if h is None else np.asarray(h, dtype=float)
    return np.sum((np.asarray(y, dtype=float) - hh * x) ** 2, axis=-1)


def bdec_metric(bits, L):
    """``D^B = (2b - 1) . L``."""
    b = np.asarray(bits, dtype=float)
    return np.sum((2.0 * b - 1.0) * np.asarray(L, dtype=float), axis=-1)


def _pick_backend(code, backend: str) -> str:
    if backend not in BACKENDS:
        raise DecoderError(f"unknown backend {backend!r}; expected one of {BACKENDS}")
    if backend == "auto":
        return "viterbi" if isinstance(code, ConvFrame) else "exhaustive"
    if backend == "viterbi" and not isinstance(code, ConvFrame):
        raise DecoderError("the viterbi backend needs a convolutional frame")
    return backend


def _first_best(scores: np.ndarray):
    """Index of the first maximum along the last axis, plus whether it was tied."""
    best = scores.max(axis=-1, keepdims=True)
    scale = np.maximum(np.abs(best), 1.0)
    near = scores >= best - TIE_RTOL * scale
    idx = np.argmax(near, axis=-1)
    return idx, near.sum(axis=-1) > 1


def sdec(code, c: Constellation, y, h=None, backend: str = "auto") -> DecodeResult:
    """Maximum-likelihood decoding on squared Euclidean distance.

    ``y`` has shape ``(N,)`` or ``(F, N)`` with ``N`` symbols per codeword;
    ``h`` (same shape, or scalar) are the known channel gains.
    """
    y = np.asarray(y, dtype=float)
    n_sym = code.length // c.m
    if code.length % c.m:
        raise DecoderError(f"code length {code.length} is not a multiple of m={c.m}")
    if y.shape[-1] != n_sym:
        raise DecoderError(f"expected {n_sym} observations, got {y.shape[-1]}")
    hh = np.ones_like(y) if h is None else np.broadcast_to(np.asarray(h, dtype=float), y.shape)
    single = y.ndim == 1
    Y, H = np.atleast_2d(y), np.atleast_2d(hh)
    if _pick_backend(code, backend) == "exhaustive":
        words = code.codewords()
        X = c.points[bits_to_symbols(c, words)]  # (W, N)
        # Maximise 2 h x y - h^2 x^2, which differs from -D^S by sum y^2.
        scores = 2.0 * (Y * H) @ X.T - (H**2) @ (X**2).T
        idx, tie = _first_best(scores)
        info = code.info_vectors()[idx]
        bits = words[idx]
    else:
        info, bits, tie = _viterbi(code, _sdec_branch_metrics(code, c, Y, H))
    metric = sdec_metric(c, bits, Y, H)
    return _result(info, metric, tie, single)


def bdec(code, L, backend: str = "auto") -> DecodeResult:
    """Bit-wise decoding: maximise ``(2b - 1) . L`` over the code.

    ``L`` holds one L-value per coded bit, shape ``(n_bits,)`` or
    ``(F, n_bits)``; a trailing ``(N, m)`` layout as returned by
    :func:`cm_duel.demapper.maxlog_llrs` is flattened.
    """
    L = np.asarray(L, dtype=float)
    if L.shape[-1] != code.length and L.ndim >= 2 and L.shape[-1] * L.shape[-2] == code.length:
        L = L.reshape(L.shape[:-2] + (code.length,))
    if L.shape[-1] != code.length:
        raise DecoderError(f"expected {code.length} L-values, got {L.shape[-1]}")
    if not np.all(np.isfinite(L)):
        raise DecoderError("L-values must be finite")
    single = L.ndim == 1
    Ls = np.atleast_2d(L)
    if _pick_backend(code, backend) == "exhaustive":
        words = code.codewords()
        scores = Ls @ (2.0 * words - 1.0).T
        idx, tie = _first_best(scores)
        info = code.info_vectors()[idx]
        bits = words[idx]
    else:
        info, bits, tie = _viterbi(code, _bdec_branch_metrics(code, Ls))
    return _result(info, bdec_metric(bits, Ls), tie, single)


def _result(info, metric, tie, single) -> DecodeResult:
    if single:
        return DecodeResult(info[0], float(metric[0]), bool(tie[0]))
    return DecodeResult(info, metric, tie)


def _patterns(n: int) -> np.ndarray:
    """All ``2**n`` output patterns, output 1 as the most significant bit."""
    p = np.arange(2**n)
    return ((p[:, None] >> np.arange(n - 1, -1, -1)) & 1).astype(np.uint8)


def _sdec_branch_metrics(frame: ConvFrame, c: Constellation, Y, H) -> np.ndarray:
    """``(F, T, 2**n)`` branch scores ``sum 2 h x y - h^2 x^2`` per output pattern."""
    n = frame.cc.n
    if n % c.m:
        raise DecoderError(f"n={n} output bits per stage do not fill whole {c.m}-bit symbols")
    q = n // c.m
    F = Y.shape[0]
    T = frame.stages
    X = c.points[bits_to_symbols(c, _patterns(n))]  # (P, q)
    Yt = Y.reshape(F, T, q)
    Ht = H.reshape(F, T, q)
    return np.einsum("ftq,pq->ftp", 2.0 * Yt * Ht, X) - np.einsum("ftq,pq->ftp", Ht**2, X**2)


def _bdec_branch_metrics(frame: ConvFrame, Ls) -> np.ndarray:
    n = frame.cc.n
    F = Ls.shape[0]
    return np.einsum("fto,po->ftp", Ls.reshape(F, frame.stages, n), 2.0 * _patterns(n) - 1.0)


def _viterbi(frame: ConvFrame, bm: np.ndarray):
    """Lexicographically-first optimal path through the frame's trellis.

    A backward pass stores the normalised cost-to-go of every state; the
    forward walk then takes the smallest input whose branch score plus
    cost-to-go matches the best one.
    """
    tr = frame.trellis
    F, T, _ = bm.shape
    S, A = tr.num_states, 2**tr.k
    nxt, out = tr.next_state, tr.output
    info_T = frame.info_stages
    beta = np.empty((T + 1, F, S))
    if frame.terminated:
        beta[T] = -np.inf
        beta[T][:, 0] = 0.0
    else:
        beta[T] = 0.0
    for t in range(T - 1, -1, -1):
        cand = bm[:, t][:, out] + beta[t + 1][:, nxt]  # (F, S, A)
        if t >= info_T:
            cand = cand[:, :, :1]
        best = cand.max(axis=2)
        # Per-stage normalisation; the argmax is unchanged.
        best -= best.max(axis=1, keepdims=True)
        beta[t] = best
    state = np.zeros(F, dtype=np.int64)
    rows = np.arange(F)
    inputs = np.zeros((F, info_T), dtype=np.int64)
    outs = np.zeros((F, T), dtype=np.int64)
    tie = np.zeros(F, dtype=bool)
    for t in range(T):
        allowed = A if t < info_T else 1
        ns = nxt[state, :allowed]
        cand = bm[rows[:, None], t, out[state, :allowed]] + beta[t + 1][rows[:, None], ns]
        a, tied = _first_best(cand)
        tie |= tied
        if t < info_T:
            inputs[:, t] = a
        outs[:, t] = out[state, a]
        state = ns[rows, a]
    k, n = tr.k, tr.n
    info = ((inputs[:, :, None] >> np.arange(k - 1, -1, -1)) & 1).reshape(F, info_T * k).astype(np.uint8)
    bits = ((outs[:, :, None] >> np.arange(n - 1, -1, -1)) & 1).reshape(F, T * n).astype(np.uint8)
    return info, bits, tie


def decode_pair(c: Constellation, x, xhat, y, L, h=None):
    """Both decoders on the two-word code ``{x, xhat}`` with ``x`` transmitted.

    Returns ``(sdec_error, bdec_error)`` boolean arrays over frames. An error
    means the competitor strictly wins; exact ties favour ``x``.
    """
    x = np.asarray(x, dtype=int)
    xhat = np.asarray(xhat, dtype=int)
    if x.shape != xhat.shape:
        raise DecoderError("codeword lengths differ")
    y = np.atleast_2d(np.asarray(y, dtype=float))
    hh = 1.0 if h is None else np.asarray(h, dtype=float)
    dS = np.sum(smd_sdec(hh * c.points[x], hh * c.points[xhat], y), axis=-1)
    bx = c.bits[x].ravel().astype(float)
    bxh = c.bits[xhat].ravel().astype(float)
    Lf = np.asarray(L, dtype=float).reshape(y.shape[0], -1)
    dB = 2.0 * Lf @ (bx - bxh)
    return dS < 0, dB < 0


__all__ = [
    "BACKENDS",
    "CodeError",
    "DecodeResult",
    "DecoderError",
    "bdec",
    "bdec_metric",
    "decode_pair",
    "sdec",
    "sdec_metric",
    "smd_sdec",
]
