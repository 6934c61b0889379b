"""Code-level asymptotic loss and checks of the zero-loss results.

The loss of a code compares the smallest normalized distances of the two
decoders over all ordered pairs of distinct codewords. For Gray 4-PAM both
distances depend on a pair only through ``beta`` and the corner count
``w_c``:

    a_X^2 = beta + 8 w_c,        a_B^2 = (beta + 2 w_c)^2 / beta.

Minima are compared as exact rationals, so "zero loss" is an equality test
and needs no tolerance.

Convolutional frames use dynamic programming over the product trellis of
(reference path, competitor path). Pass 1 keeps the smallest ``beta`` for
each state pair and corner count. Pass 2 runs only when pass 1 cannot settle
the bit-decoder minimum. It tracks the full set of reachable
``(beta, w_c)`` under bounds taken from pass 1.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
import math

import numpy as np

from .analysis import MAX_LOSS_DB, pair_tables
from .codebook import (
    ConvCode,
    ConvFrame,
    CodeError,
    ENUMERATION_LIMIT,
    has_all_ones_stripe,
)
from .constellation import Constellation, bits_to_symbols

EXHAUSTIVE_MAX_K = 12
DEFAULT_WC_CAP = 8
WITNESS_MEMORY_LIMIT = 64 * 2**20  # bytes of back-pointers

_INF = np.int64(2**40)


class CodeLossError(ValueError):
    pass


@dataclass(frozen=True)
class ParetoPoint:
    """Smallest ``beta`` reachable with ``wc`` corners, with an optional witness pair."""

    beta: int
    wc: int
    witness: tuple | None = None

    @property
    def ax2(self) -> Fraction:
        return Fraction(self.beta + 8 * self.wc)

    @property
    def ab2(self) -> Fraction:
        return Fraction((self.beta + 2 * self.wc) ** 2, self.beta)


@dataclass(frozen=True)
class CodeLossReport:
    """Exact minima of ``a^2`` for both decoders and the resulting loss."""

    min_ax2: Fraction
    min_ab2: Fraction
    wc_at_min_sdec: int
    wc_at_min_bdec: int
    witness_sdec: tuple | None
    witness_bdec: tuple | None
    method: str
    frame: str = ""
    lower_bound: bool = False
    frontier: tuple = field(default=(), compare=False)

    @property
    def min_ax(self) -> float:
        return math.sqrt(self.min_ax2)

    @property
    def min_ab(self) -> float:
        return math.sqrt(self.min_ab2)

    @property
    def loss_db(self) -> float:
        if self.min_ax2 == self.min_ab2:
            return 0.0
        return 10.0 * math.log10(self.min_ax2 / self.min_ab2)

    @property
    def zero_loss(self) -> bool:
        return self.min_ax2 == self.min_ab2

    def as_dict(self) -> dict:
        return {
            "method": self.method,
            "frame": self.frame,
            "min_ax2": str(self.min_ax2),
            "min_ab2": str(self.min_ab2),
            "min_ax": self.min_ax,
            "min_ab": self.min_ab,
            "loss_db": self.loss_db,
            "wc_at_min_sdec": self.wc_at_min_sdec,
            "wc_at_min_bdec": self.wc_at_min_bdec,
            "witness_sdec": _witness_json(self.witness_sdec),
            "witness_bdec": _witness_json(self.witness_bdec),
            "lower_bound": self.lower_bound,
            "frontier": [[p.beta, p.wc] for p in self.frontier],
        }


def _witness_json(w):
    if w is None:
        return None
    from .constellation import format_symbols

    return [format_symbols(w[0]), format_symbols(w[1])]


def frontier_of(pairs) -> tuple:
    """Non-dominated ``(beta, wc)`` points, sorted by ``wc``."""
    best = {}
    for b, w, *rest in pairs:
        if w not in best or b < best[w][0]:
            best[w] = (b, rest[0] if rest else None)
    out, floor = [], None
    for w in sorted(best):
        b, wit = best[w]
        if floor is None or b < floor:
            out.append(ParetoPoint(int(b), int(w), wit))
            floor = b
    return tuple(out)


def _minima(points):
    """Exact minima over ``(beta, wc, witness)`` triples."""
    ax = min(points, key=lambda p: (p[0] + 8 * p[1], p[1], p[0]))
    ab = min(points, key=lambda p: (Fraction((p[0] + 2 * p[1]) ** 2, p[0]), p[1], p[0]))
    return ax, ab


def _report(points, method, frame, lower_bound=False, frontier=()):
    ax, ab = _minima(points)
    return CodeLossReport(
        min_ax2=Fraction(ax[0] + 8 * ax[1]),
        min_ab2=Fraction((ab[0] + 2 * ab[1]) ** 2, ab[0]),
        wc_at_min_sdec=int(ax[1]),
        wc_at_min_bdec=int(ab[1]),
        witness_sdec=ax[2],
        witness_bdec=ab[2],
        method=method,
        frame=frame,
        lower_bound=lower_bound,
        frontier=frontier,
    )


def achievable_profiles_exhaustive(code, c: Constellation, max_k: int = EXHAUSTIVE_MAX_K) -> dict:
    """Every ``(beta, wc)`` over ordered distinct pairs, mapped to one witness pair."""
    if code.K > max_k:
        raise CodeLossError(f"K={code.K} exceeds the exhaustive limit {max_k}")
    if code.length % c.m:
        raise CodeLossError("code length must be a multiple of m")
    bt, ct = pair_tables(c)
    X = bits_to_symbols(c, code.codewords(limit=max(max_k, ENUMERATION_LIMIT)))
    W = X.shape[0]
    seen: dict = {}
    rows = max(1, 2**22 // max(1, W * X.shape[1]))
    for r0 in range(0, W, rows):
        blk = X[r0 : r0 + rows]
        B = bt[blk[:, None, :], X[None, :, :]].sum(axis=2)
        C = ct[blk[:, None, :], X[None, :, :]].sum(axis=2)
        key = B * 4096 + C
        idx_self = np.arange(blk.shape[0])
        key[idx_self, r0 + idx_self] = -1
        uniq, first = np.unique(key.ravel(), return_index=True)
        for kv, f in zip(uniq, first):
            if kv < 0:
                continue
            pair = (int(kv // 4096), int(kv % 4096))
            if pair not in seen:
                i, j = divmod(int(f), W)
                seen[pair] = (tuple(int(v) for v in X[r0 + i]), tuple(int(v) for v in X[j]))
    return seen


def code_loss_exhaustive(code, c: Constellation, max_k: int = EXHAUSTIVE_MAX_K) -> CodeLossReport:
    """Exact loss by enumerating all ordered pairs of distinct codewords."""
    seen = achievable_profiles_exhaustive(code, c, max_k)
    if not seen:
        raise CodeLossError("the code has a single codeword")
    pts = [(b, w, wit) for (b, w), wit in seen.items()]
    describe = code.describe() if hasattr(code, "describe") else ""
    return _report(pts, "exhaustive", describe, frontier=frontier_of(pts))


# -- product trellis ---------------------------------------------------------


def _patterns(n: int) -> np.ndarray:
    p = np.arange(2**n)
    return ((p[:, None] >> np.arange(n - 1, -1, -1)) & 1).astype(np.uint8)


def _pattern_tables(cc: ConvCode, c: Constellation):
    """Per-stage ``beta`` and ``wc`` increments for every pair of output patterns."""
    if cc.n % c.m:
        raise CodeLossError(f"n={cc.n} output bits per stage do not fill whole symbols")
    bt, ct = pair_tables(c)
    sym = bits_to_symbols(c, _patterns(cc.n))  # (P, q)
    db = bt[sym[:, None, :], sym[None, :, :]].sum(axis=2)
    dw = ct[sym[:, None, :], sym[None, :, :]].sum(axis=2)
    return db, dw


def default_stages(cc: ConvCode) -> int:
    """Information stages of the default search frame: ``10 (nu + 1)`` stages including the tail."""
    return max(1, 10 * (cc.nu + 1) - cc.tail_stages)


@dataclass
class TrellisSearch:
    """State of the pass-1 dynamic programme (kept for witness recovery)."""

    frame: ConvFrame
    wc_cap: int
    end: np.ndarray  # (wc_cap + 1,) min beta at the terminal condition
    truncated: bool
    witnesses: dict


def _combos(tr, allowed):
    """Predecessor combinations ``(i, i2)`` with their predecessor states and inputs."""
    A = 2**tr.k
    for i in range(A):
        for i2 in range(A):
            P, a = tr.prev_state[:, i], tr.prev_input[:, i]
            P2, a2 = tr.prev_state[:, i2], tr.prev_input[:, i2]
            ok = (a < allowed)[:, None] & (a2 < allowed)[None, :]
            yield i * A + i2, P, a, P2, a2, ok


def _pass1(frame: ConvFrame, c: Constellation, wc_cap: int, keep_witness: bool) -> TrellisSearch:
    cc, tr = frame.cc, frame.trellis
    db_pat, dw_pat = _pattern_tables(cc, c)
    S, A = tr.num_states, 2**tr.k
    W = wc_cap + 1
    val = np.full((S, S, 2, W), _INF, dtype=np.int64)
    val[0, 0, 0, 0] = 0
    T = frame.stages
    pointer_bytes = T * S * S * 2 * W
    keep_witness = keep_witness and pointer_bytes <= WITNESS_MEMORY_LIMIT
    ptrs = np.zeros((T, S, S, 2, W), dtype=np.uint16) if keep_witness else None
    truncated = False
    for t in range(T):
        allowed = A if t < frame.info_stages else 1
        new = np.full_like(val, _INF)
        choice = np.zeros(val.shape, dtype=np.uint16) if keep_witness else None
        for ci, P, a, P2, a2, ok in _combos(tr, allowed):
            db = db_pat[tr.output[P, a][:, None], tr.output[P2, a2][None, :]]
            dw = dw_pat[tr.output[P, a][:, None], tr.output[P2, a2][None, :]]
            src = val[P[:, None], P2[None, :]]  # (S, S, 2, W)
            src = np.where(ok[:, :, None, None], src, _INF)
            # Competitors that stay identical keep flag 0; any difference sets it.
            from1 = src[:, :, 1]
            from0 = np.where((db > 0)[:, :, None], src[:, :, 0], _INF)
            c1 = np.minimum(from1, from0) + db[:, :, None]
            pf = (from0 >= from1).astype(np.uint16)  # flag before this stage
            c0 = np.where((db == 0)[:, :, None], src[:, :, 0], _INF)
            for dv in np.unique(dw):
                mask = dw == dv
                if dv:
                    over = c1[:, :, W - dv :][mask]
                    if np.any(over < _INF):
                        truncated = True
                sh = np.full_like(c1, _INF)
                sh[:, :, dv:] = c1[:, :, : W - dv]
                shp = np.zeros_like(pf)
                shp[:, :, dv:] = pf[:, :, : W - dv]
                sh = np.where(mask[:, :, None], sh, _INF)
                better = sh < new[:, :, 1]
                new[:, :, 1] = np.where(better, sh, new[:, :, 1])
                if keep_witness:
                    choice[:, :, 1] = np.where(better, ci * 2 + shp, choice[:, :, 1])
            better0 = c0 < new[:, :, 0]
            new[:, :, 0] = np.where(better0, c0, new[:, :, 0])
            if keep_witness:
                choice[:, :, 0] = np.where(better0, ci * 2, choice[:, :, 0])  # stays at flag 0
        new[new >= _INF] = _INF
        val = new
        if keep_witness:
            ptrs[t] = choice
    if frame.terminated:
        end = val[0, 0, 1]
        end_states = {w: (0, 0) for w in range(W)}
    else:
        flat = val[:, :, 1].reshape(S * S, W)
        arg = flat.argmin(axis=0)
        end = flat[arg, np.arange(W)]
        end_states = {w: divmod(int(arg[w]), S) for w in range(W)}
    witnesses = {}
    if keep_witness:
        for w in range(W):
            if end[w] < _INF:
                witnesses[w] = _trace(frame, c, ptrs, end_states[w], w, db_pat, dw_pat)
    return TrellisSearch(frame, wc_cap, end, truncated, witnesses)


def _trace(frame, c, ptrs, state, w, db_pat, dw_pat):
    tr = frame.trellis
    A = 2**tr.k
    s, s2 = state
    flag = 1
    ins, ins2 = [], []
    for t in range(frame.stages - 1, -1, -1):
        ch = int(ptrs[t, s, s2, flag, w])
        ci, pf = divmod(ch, 2)
        i, i2 = divmod(ci, A)
        P, a = tr.prev_state[s, i], tr.prev_input[s, i]
        P2, a2 = tr.prev_state[s2, i2], tr.prev_input[s2, i2]
        w -= int(dw_pat[tr.output[P, a], tr.output[P2, a2]])
        flag = pf if flag == 1 else 0
        ins.append(a)
        ins2.append(a2)
        s, s2 = P, P2
    k = tr.k
    seqs = []
    for seq in (ins[::-1][: frame.info_stages], ins2[::-1][: frame.info_stages]):
        u = np.array([(a >> (k - 1 - j)) & 1 for a in seq for j in range(k)], dtype=np.uint8)
        seqs.append(tuple(int(v) for v in bits_to_symbols(c, frame.encode(u))))
    return tuple(seqs)


def _pass2(frame: ConvFrame, c: Constellation, wc_cap: int, beta_cap: int) -> set:
    """All reachable ``(beta, wc)`` with ``beta <= beta_cap`` and ``wc <= wc_cap``."""
    cc, tr = frame.cc, frame.trellis
    db_pat, dw_pat = _pattern_tables(cc, c)
    S, A = tr.num_states, 2**tr.k
    W, B = wc_cap + 1, beta_cap + 1
    reach = np.zeros((S, S, 2, W, B), dtype=bool)
    reach[0, 0, 0, 0, 0] = True
    for t in range(frame.stages):
        allowed = A if t < frame.info_stages else 1
        new = np.zeros_like(reach)
        for _, P, a, P2, a2, ok in _combos(tr, allowed):
            db = db_pat[tr.output[P, a][:, None], tr.output[P2, a2][None, :]]
            dw = dw_pat[tr.output[P, a][:, None], tr.output[P2, a2][None, :]]
            src = reach[P[:, None], P2[None, :]] & ok[:, :, None, None, None]
            same = (db == 0)[:, :, None, None]
            new[:, :, 0] |= src[:, :, 0] & same
            moved = src[:, :, 1] | (src[:, :, 0] & ~same)
            for dbv, dwv in set(zip(db.ravel().tolist(), dw.ravel().tolist())):
                if dbv >= B or dwv >= W:
                    continue
                mask = ((db == dbv) & (dw == dwv))[:, :, None, None]
                sh = np.zeros_like(moved)
                sh[:, :, dwv:, dbv:] = moved[:, :, : W - dwv, : B - dbv]
                new[:, :, 1] |= sh & mask
        reach = new
    end = reach[0, 0, 1] if frame.terminated else reach[:, :, 1].any(axis=(0, 1))
    ws, bs = np.nonzero(end)
    return {(int(b), int(w)) for w, b in zip(ws, bs) if b > 0}


def min_profiles_trellis(
    cc: ConvCode,
    c: Constellation,
    info_stages: int | None = None,
    wc_cap: int = DEFAULT_WC_CAP,
    terminated: bool = True,
    witnesses: bool = True,
) -> tuple:
    """Pareto frontier of ``(beta, wc)`` on a frame, plus the exact loss report.

    Returns ``(frontier, report)``. The corner cap doubles until no pair beyond
    it can reach either minimum.
    """
    if wc_cap < 0:
        raise CodeLossError("wc_cap must be nonnegative")
    if info_stages is None:
        info_stages = default_stages(cc)
    frame = cc.frame(info_stages * cc.k, terminated)
    cap = max(wc_cap, 1)
    while True:
        run = _pass1(frame, c, cap, witnesses)
        per_wc = [(int(b), w, run.witnesses.get(w)) for w, b in enumerate(run.end) if b < _INF]
        if not per_wc:
            raise CodeLossError("no pair of distinct codewords on this frame")
        ax, ab = _minima(per_wc)
        u_x2 = ax[0] + 8 * ax[1]
        u_b2 = Fraction((ab[0] + 2 * ab[1]) ** 2, ab[0])
        bound = max(Fraction(u_x2), u_b2)
        # a_X^2 >= 9 wc and a_B^2 >= 8 wc, so corner counts above bound / 8 never matter.
        if not run.truncated or (cap + 1) * 8 > bound:
            break
        cap *= 2
    points = per_wc
    method = "trellis-DP"
    # For a fixed wc, a_B^2 falls with beta until beta = 2 wc; only then can a
    # larger beta than the per-wc minimum win.
    if any(b < 2 * w for b, w, _ in per_wc):
        wc_max = min(cap, int(bound // 8))
        extra = _pass2(frame, c, wc_max, int(math.floor(bound)))
        known = {(b, w) for b, w, _ in per_wc}
        points = per_wc + [(b, w, None) for b, w in extra if (b, w) not in known]
        method = "trellis-DP+reach"
    front = frontier_of(per_wc)
    report = _report(points, method, frame.describe(), frontier=front)
    return front, report


def code_loss(code, c: Constellation, **kw) -> CodeLossReport:
    """Exhaustive for small codes, product trellis for convolutional codes."""
    if isinstance(code, ConvCode):
        return min_profiles_trellis(code, c, **kw)[1]
    if isinstance(code, ConvFrame) and code.K > EXHAUSTIVE_MAX_K:
        return min_profiles_trellis(code.cc, c, code.info_stages, terminated=code.terminated, **kw)[1]
    return code_loss_exhaustive(code, c)


# -- distance spectrum of error events ---------------------------------------


@dataclass(frozen=True)
class SpectrumTerm:
    ax2: int
    wcs: tuple  # corner counts of all (beta, wc) witnesses with this a_X^2


def event_profiles(cc: ConvCode, c: Constellation, ax2_max: int) -> set:
    """All ``(beta, wc)`` of simple error events with ``beta + 8 wc <= ax2_max``.

    An event starts with both paths in one (arbitrary) state, leaves it with
    different inputs and ends when the two paths first share a state again;
    no zero tail is imposed.
    """
    tr = cc.trellis
    db_pat, dw_pat = _pattern_tables(cc, c)
    S, A = tr.num_states, 2**tr.k
    s = np.repeat(np.arange(S), A * A)
    a = np.tile(np.repeat(np.arange(A), A), S)
    a2 = np.tile(np.tile(np.arange(A), A), S)
    keep = a != a2
    s, a, a2 = s[keep], a[keep], a2[keep]
    o, o2 = tr.output[s, a], tr.output[s, a2]
    cur = (tr.next_state[s, a], tr.next_state[s, a2], db_pat[o, o2], dw_pat[o, o2])
    found = set()
    for _ in range(64 * (cc.nu + 2) * (ax2_max + 1)):
        s1, s2, b, w = cur
        ok = b + 8 * w <= ax2_max
        s1, s2, b, w = s1[ok], s2[ok], b[ok], w[ok]
        merged = s1 == s2
        found |= {(int(x), int(y)) for x, y in zip(b[merged], w[merged]) if x > 0}
        s1, s2, b, w = s1[~merged], s2[~merged], b[~merged], w[~merged]
        if s1.size == 0:
            return found
        key = np.unique(((s1 * S + s2) * (ax2_max + 1) + b) * (ax2_max + 1) + w)
        w = key % (ax2_max + 1)
        rest = key // (ax2_max + 1)
        b = rest % (ax2_max + 1)
        pair = rest // (ax2_max + 1)
        s1, s2 = pair // S, pair % S
        n_act = s1.size
        s1 = np.repeat(s1, A * A)
        s2 = np.repeat(s2, A * A)
        b = np.repeat(b, A * A)
        w = np.repeat(w, A * A)
        ia = np.tile(np.repeat(np.arange(A), A), n_act)
        ib = np.tile(np.tile(np.arange(A), A), n_act)
        o, o2 = tr.output[s1, ia], tr.output[s2, ib]
        cur = (tr.next_state[s1, ia], tr.next_state[s2, ib], b + db_pat[o, o2], w + dw_pat[o, o2])
    raise CodeLossError("event search did not terminate; is the code catastrophic?")


def distance_spectrum_terms(cc: ConvCode, c: Constellation, terms: int = 8) -> list:
    """The first ``terms`` distinct ``a_X^2`` values of error events with their corner counts."""
    limit = 16
    while True:
        found = event_profiles(cc, c, limit)
        values = sorted({b + 8 * w for b, w in found})
        if len(values) >= terms or limit > 4096:
            break
        limit *= 2
    out = []
    for v in values[:terms]:
        out.append(SpectrumTerm(v, tuple(sorted(w for b, w in found if b + 8 * w == v))))
    return out


@dataclass(frozen=True)
class CheckResult:
    name: str
    applicable: bool
    passed: bool
    detail: str

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        if not self.applicable:
            status = "N/A"
        return f"{status:4s} {self.name}: {self.detail}"


def _unterminated_stripes(cc: ConvCode, m: int = 2, stages: int | None = None) -> tuple:
    stages = stages or 10 * (cc.nu + 1)
    frame = cc.frame(stages * cc.k, terminated=False)
    return tuple(has_all_ones_stripe(frame, j, m, span="unterminated") for j in range(m))


def _code_stripes(code, m: int = 2) -> tuple:
    if isinstance(code, ConvCode):
        return _unterminated_stripes(code, m)
    span = "unterminated" if isinstance(code, ConvFrame) and not code.terminated else "terminated"
    return tuple(has_all_ones_stripe(code, j, m, span=span) for j in range(m))


def spectrum_prefix_check(cc: ConvCode, c: Constellation, terms: int = 8) -> CheckResult:
    """Every witness among the first ``terms`` spectrum terms has no corners."""
    stripes = _unterminated_stripes(cc, c.m)
    name = f"spectrum prefix ({terms} terms, unterminated span)"
    if not all(stripes):
        return CheckResult(name, False, True, "code lacks an all-ones stripe; hypothesis fails")
    spec = distance_spectrum_terms(cc, c, terms)
    bad = [t for t in spec if any(w for w in t.wcs)]
    desc = ", ".join(f"{t.ax2}:wc{set(t.wcs)}" for t in spec)
    return CheckResult(name, True, not bad and len(spec) == terms, desc)


def verify_theorems(code, c: Constellation, **kw) -> list:
    """Zero-loss checks for a code under one Gray labeling.

    * linear code with an inner all-zero label (G3, G4): loss 0;
    * G1 with a codeword whose second label bits are all one, or G2 with one
      whose first label bits are all one: loss 0;
    * rate-1/2 convolutional code: both stripes exist (unterminated span)
      and the loss is 0.
    """
    report = code_loss(code, c, **kw)
    stripes = _code_stripes(code, c.m)
    name = c.name
    loss = f"L={report.loss_db:.6g} dB ({report.method}, {report.min_ax2} vs {report.min_ab2})"
    out = []
    inner_zero = c.labeling.index(0) in (1, 2)
    out.append(CheckResult("linear code, all-zero label inside", inner_zero, (not inner_zero) or report.zero_loss, loss))
    stripe_bit = {"G1": 1, "BRGC": 1, "G2": 0}.get(name)
    applies = stripe_bit is not None and stripes[stripe_bit]
    stripe_text = f"stripes b1={stripes[0]} b2={stripes[1]}; {loss}"
    out.append(CheckResult("all-ones stripe for the outer-zero labeling", applies, (not applies) or report.zero_loss, stripe_text))
    is_rate_half = isinstance(code, (ConvCode, ConvFrame)) and _cc(code).k == 1 and _cc(code).n == 2
    if is_rate_half:
        unterm = _unterminated_stripes(_cc(code), c.m)
        ok = all(unterm) and report.zero_loss
        out.append(CheckResult("rate-1/2 convolutional code", True, ok, f"unterminated stripes {unterm}; {loss}"))
    else:
        out.append(CheckResult("rate-1/2 convolutional code", False, True, "not a rate-1/2 convolutional code"))
    both = all(stripes)
    out.append(CheckResult("both stripes present", both, (not both) or report.zero_loss, stripe_text))
    return out


def _cc(code):
    return code if isinstance(code, ConvCode) else code.cc


def within_bound(report: CodeLossReport, tol: float = 1e-9) -> bool:
    return -tol <= report.loss_db <= MAX_LOSS_DB + tol


__all__ = [
    "CheckResult",
    "CodeError",
    "CodeLossError",
    "CodeLossReport",
    "ParetoPoint",
    "SpectrumTerm",
    "achievable_profiles_exhaustive",
    "code_loss",
    "code_loss_exhaustive",
    "default_stages",
    "distance_spectrum_terms",
    "event_profiles",
    "frontier_of",
    "min_profiles_trellis",
    "pair_tables",
    "spectrum_prefix_check",
    "verify_theorems",
    "within_bound",
]
