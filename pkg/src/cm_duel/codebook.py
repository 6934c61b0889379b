"""Binary linear codes: block codes, feedforward convolutional codes, trellises.

Octal generator polynomials follow the common tabulation convention in which
the most significant bit of each (row-aligned) polynomial multiplies the
current input, i.e. ``7 = 1 + D + D^2`` and, for ``[3, 2]``, ``2 = 1``.
All polynomials of one input row share a width of ``nu_i + 1`` bits.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

ENUMERATION_LIMIT = 24

# Rate-1/2 encoders, indexed by memory.
TABLE4 = {
    1: (0o3, 0o2),
    2: (0o7, 0o5),
    3: (0o13, 0o17),
    4: (0o23, 0o33),
    5: (0o55, 0o51),
    6: (0o107, 0o135),
    7: (0o313, 0o235),
    8: (0o677, 0o515),
}


class CodeError(ValueError):
    pass


def _lex_inputs(K: int) -> np.ndarray:
    """All length-``K`` binary vectors in lexicographic order (first bit most significant)."""
    ints = np.arange(2**K, dtype=np.int64)
    shifts = np.arange(K - 1, -1, -1)
    return ((ints[:, None] >> shifts) & 1).astype(np.uint8)


class _LinearFrame:
    """Shared behaviour of codes with a finite generator matrix."""

    K: int
    length: int

    @property
    def generator_matrix(self) -> np.ndarray:
        raise NotImplementedError

    def encode(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=np.int64)
        if u.shape[-1] != self.K:
            raise CodeError(f"expected {self.K} information bits, got {u.shape[-1]}")
        return ((u @ self.generator_matrix.astype(np.int64)) & 1).astype(np.uint8)

    def codewords(self, limit: int = ENUMERATION_LIMIT) -> np.ndarray:
        """All ``2**K`` codewords as rows, in lexicographic order of the input."""
        if self.K > limit:
            raise CodeError(f"K={self.K} exceeds the enumeration limit {limit}")
        return self.encode(_lex_inputs(self.K))

    def info_vectors(self, limit: int = ENUMERATION_LIMIT) -> np.ndarray:
        if self.K > limit:
            raise CodeError(f"K={self.K} exceeds the enumeration limit {limit}")
        return _lex_inputs(self.K)


@dataclass(frozen=True, eq=False)
class BlockCode(_LinearFrame):
    generator: np.ndarray

    def __post_init__(self):
        G = np.asarray(self.generator, dtype=np.uint8) & 1
        if G.ndim != 2:
            raise CodeError("generator must be a 2-D matrix")
        if gf2_rank(G) != G.shape[0]:
            raise CodeError("generator rows are linearly dependent")
        G.setflags(write=False)
        object.__setattr__(self, "generator", G)

    @property
    def K(self) -> int:
        return self.generator.shape[0]

    @property
    def length(self) -> int:
        return self.generator.shape[1]

    @property
    def generator_matrix(self) -> np.ndarray:
        return self.generator

    def describe(self) -> str:
        rows = ",".join("".join(str(int(b)) for b in r) for r in self.generator)
        return f"block:b{rows}"


def encode_block(code: BlockCode, u) -> np.ndarray:
    return code.encode(u)


def gf2_rank(G) -> int:
    A = np.array(G, dtype=np.uint8) & 1
    rank = 0
    rows, cols = A.shape
    for c in range(cols):
        pivot = next((r for r in range(rank, rows) if A[r, c]), None)
        if pivot is None:
            continue
        A[[rank, pivot]] = A[[pivot, rank]]
        for r in range(rows):
            if r != rank and A[r, c]:
                A[r] ^= A[rank]
        rank += 1
        if rank == rows:
            break
    return rank


def _poly_taps(value: int, width: int) -> np.ndarray:
    """Coefficients ``[g_0, ..., g_{width-1}]`` of a row-aligned octal polynomial."""
    return np.array([(value >> (width - 1 - t)) & 1 for t in range(width)], dtype=np.uint8)


@dataclass(frozen=True, eq=False)
class ConvCode:
    """Feedforward rate-``k/n`` convolutional encoder.

    ``gen[i][o]`` is the octal-valued polynomial from input ``i`` to output ``o``.
    """

    gen: tuple

    def __post_init__(self):
        rows = tuple(tuple(int(g) for g in row) for row in self.gen)
        if not rows or not rows[0]:
            raise CodeError("empty generator matrix")
        n = len(rows[0])
        if any(len(r) != n for r in rows):
            raise CodeError("generator rows have different lengths")
        if any(g < 0 for r in rows for g in r):
            raise CodeError("generator polynomials must be nonnegative")
        for o in range(n):
            if all(r[o] == 0 for r in rows):
                raise CodeError(f"output {o + 1} has an all-zero generator column")
        for r in rows:
            if all(g == 0 for g in r):
                raise CodeError("an input row is all zero")
        object.__setattr__(self, "gen", rows)

    @property
    def k(self) -> int:
        return len(self.gen)

    @property
    def n(self) -> int:
        return len(self.gen[0])

    @property
    def memories(self) -> tuple:
        return tuple(max(g.bit_length() for g in row) - 1 for row in self.gen)

    @property
    def nu(self) -> int:
        """Total encoder memory (number of state bits)."""
        return sum(self.memories)

    @property
    def tail_stages(self) -> int:
        return max(self.memories)

    @cached_property
    def taps(self) -> list:
        """``taps[i][o]`` coefficient arrays, index ``t`` multiplying ``u_i(t - tau)``."""
        out = []
        for row, nu_i in zip(self.gen, self.memories):
            out.append([_poly_taps(g, nu_i + 1) for g in row])
        return out

    @cached_property
    def trellis(self) -> "Trellis":
        return Trellis.from_code(self)

    def frame(self, info_bits: int, terminated: bool = True) -> "ConvFrame":
        return ConvFrame(self, info_bits, terminated)

    def describe(self) -> str:
        return "cc:" + ";".join(",".join(format(g, "o") for g in row) for row in self.gen)


def encode_conv(cc: ConvCode, u, terminated: bool = True) -> np.ndarray:
    """Shift-register encoding by polynomial multiplication over GF(2).

    ``u`` is interleaved by input (``u[..., t*k + i]``); the output is
    interleaved by output (``c[..., t*n + o]``), so for rate 1/2 the first
    generator produces the odd (1-based) positions. Leading axes are frames.
    """
    u = np.asarray(u, dtype=np.uint8)
    lead, L = u.shape[:-1], u.shape[-1]
    k, n = cc.k, cc.n
    if L % k:
        raise CodeError(f"input length {L} is not a multiple of k={k}")
    T_in = L // k
    T = T_in + (cc.tail_stages if terminated else 0)
    streams = np.zeros(lead + (k, T), dtype=np.uint8)
    streams[..., :T_in] = np.moveaxis(u.reshape(lead + (T_in, k)), -1, -2)
    out = np.zeros(lead + (n, T), dtype=np.uint8)
    for i in range(k):
        for o in range(n):
            for tau in np.flatnonzero(cc.taps[i][o]):
                out[..., o, tau:] ^= streams[..., i, : T - tau]
    return np.moveaxis(out, -2, -1).reshape(lead + (T * n,))


@dataclass(frozen=True, eq=False)
class Trellis:
    """Time-invariant trellis of a feedforward encoder.

    State bits: for each input ``i`` (in order) its last ``nu_i`` inputs, most
    recent first, packed most-significant first into one integer.
    """

    k: int
    n: int
    num_states: int
    next_state: np.ndarray  # (S, 2**k)
    output: np.ndarray  # (S, 2**k) output pattern, output 1 is the MSB
    output_bits: np.ndarray  # (S, 2**k, n)
    prev_state: np.ndarray  # (S, 2**k) predecessors of each state
    prev_input: np.ndarray  # (S, 2**k)

    @classmethod
    def from_code(cls, cc: ConvCode) -> "Trellis":
        k, n, mem = cc.k, cc.n, cc.memories
        total = sum(mem)
        S = 2**total
        nxt = np.zeros((S, 2**k), dtype=np.int64)
        outp = np.zeros((S, 2**k), dtype=np.int64)
        obits = np.zeros((S, 2**k, n), dtype=np.uint8)
        for s in range(S):
            sbits = [(s >> (total - 1 - t)) & 1 for t in range(total)]
            regs, pos = [], 0
            for nu_i in mem:
                regs.append(sbits[pos : pos + nu_i])
                pos += nu_i
            for a in range(2**k):
                ins = [(a >> (k - 1 - i)) & 1 for i in range(k)]
                bits = []
                for o in range(n):
                    v = 0
                    for i in range(k):
                        hist = [ins[i]] + regs[i]
                        v ^= int(np.dot(cc.taps[i][o], hist)) & 1
                    bits.append(v)
                new = []
                for i in range(k):
                    new += ([ins[i]] + regs[i])[: mem[i]]
                ns = 0
                for b in new:
                    ns = (ns << 1) | b
                nxt[s, a] = ns
                obits[s, a] = bits
                outp[s, a] = int("".join(map(str, bits)), 2)
        # Feedforward shift registers: every state has exactly 2**k predecessors.
        prev_s = np.zeros((S, 2**k), dtype=np.int64)
        prev_a = np.zeros((S, 2**k), dtype=np.int64)
        fill = np.zeros(S, dtype=np.int64)
        for s in range(S):
            for a in range(2**k):
                t = nxt[s, a]
                prev_s[t, fill[t]] = s
                prev_a[t, fill[t]] = a
                fill[t] += 1
        if not np.all(fill == 2**k):
            raise CodeError("trellis is not regular")
        for arr in (nxt, outp, obits, prev_s, prev_a):
            arr.setflags(write=False)
        return cls(k, n, S, nxt, outp, obits, prev_s, prev_a)


@dataclass(frozen=True, eq=False)
class ConvFrame(_LinearFrame):
    """A convolutional code used on a finite frame of ``info_bits`` inputs."""

    cc: ConvCode
    info_bits: int
    terminated: bool = True
    _G: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.info_bits <= 0 or self.info_bits % self.cc.k:
            raise CodeError(f"info_bits={self.info_bits} must be a positive multiple of k={self.cc.k}")
        eye = np.eye(self.info_bits, dtype=np.uint8)
        G = encode_conv(self.cc, eye, self.terminated)
        G.setflags(write=False)
        object.__setattr__(self, "_G", G)

    @property
    def K(self) -> int:
        return self.info_bits

    @property
    def stages(self) -> int:
        return self.info_bits // self.cc.k + (self.cc.tail_stages if self.terminated else 0)

    @property
    def info_stages(self) -> int:
        return self.info_bits // self.cc.k

    @property
    def length(self) -> int:
        return self.stages * self.cc.n

    @property
    def generator_matrix(self) -> np.ndarray:
        return self._G

    @property
    def trellis(self) -> Trellis:
        return self.cc.trellis

    def encode(self, u) -> np.ndarray:
        u = np.asarray(u)
        if u.ndim == 1:
            if u.size != self.K:
                raise CodeError(f"expected {self.K} information bits, got {u.size}")
            return encode_conv(self.cc, u, self.terminated)
        return super().encode(u)

    def describe(self) -> str:
        return f"{self.cc.describe()} K={self.info_bits} {'zero-tail' if self.terminated else 'truncated'}"


def sp_to_brgc_generator(g1: int, g2: int) -> tuple:
    """Generator pair giving the same symbol sequences with BRGC as ``[g1, g2]`` with SP."""
    return (g1, g1 ^ g2)


def table4_code(nu: int) -> ConvCode:
    if nu not in TABLE4:
        raise CodeError(f"memory {nu} not tabulated; expected 1..8")
    return ConvCode((TABLE4[nu],))


def has_all_ones_stripe(code, stripe: int, m: int = 2, span: str = "terminated") -> bool:
    """Whether some codeword has a 1 at bit ``stripe`` of every ``m``-bit symbol.

    ``stripe`` is 0 for the odd positions (first label bit) and 1 for the even
    positions. Convolutional frames use a reachability pass over the trellis;
    ``span="unterminated"`` drops the zero tail and lets the path end anywhere.
    """
    if not 0 <= stripe < m:
        raise CodeError(f"stripe must be in 0..{m - 1}")
    if isinstance(code, ConvCode):
        raise CodeError("pass a frame (ConvCode.frame) so the length is defined")
    if isinstance(code, ConvFrame):
        return _stripe_trellis(code, stripe, m, span)
    words = code.codewords()
    return bool(np.any(np.all(words[:, stripe::m] == 1, axis=1)))


def _stripe_trellis(frame: ConvFrame, stripe: int, m: int, span: str) -> bool:
    tr = frame.trellis
    n = tr.n
    if n % m:
        raise CodeError(f"n={n} output bits per stage do not fill whole {m}-bit symbols")
    cols = [o for o in range(n) if o % m == stripe]
    ok = np.all(tr.output_bits[:, :, cols] == 1, axis=2)
    reach = np.zeros(tr.num_states, dtype=bool)
    reach[0] = True
    terminated = frame.terminated and span == "terminated"
    for t in range(frame.info_stages):
        new = np.zeros_like(reach)
        src, a = np.nonzero(ok & reach[:, None])
        new[tr.next_state[src, a]] = True
        reach = new
    if terminated:
        for t in range(frame.cc.tail_stages):
            new = np.zeros_like(reach)
            src = np.flatnonzero(reach & ok[:, 0])
            new[tr.next_state[src, 0]] = True
            reach = new
        return bool(reach[0])
    return bool(reach.any())


def parse_code_spec(text: str):
    """Parse ``cc:7,5``, ``cc:1,1,0;0,23,27``, ``block:97,3c`` or ``block:b1001,0110``."""
    kind, _, body = text.partition(":")
    kind = kind.strip().lower()
    if kind == "cc":
        try:
            rows = [[int(tok, 8) for tok in row.split(",")] for row in body.split(";")]
        except ValueError as exc:
            raise CodeError(f"bad octal generator in {text!r}") from exc
        return ConvCode(tuple(tuple(r) for r in rows))
    if kind == "block":
        body = body.strip()
        if body.startswith("b"):
            rows = [[int(ch) for ch in row] for row in body[1:].split(",")]
        else:
            parts = body.split(",")
            width = 4 * len(parts[0])
            if any(len(p) != len(parts[0]) for p in parts):
                raise CodeError("hex rows must have equal length")
            try:
                rows = [[(int(p, 16) >> (width - 1 - t)) & 1 for t in range(width)] for p in parts]
            except ValueError as exc:
                raise CodeError(f"bad hex row in {text!r}") from exc
        if len({len(r) for r in rows}) != 1:
            raise CodeError("block rows must have equal length")
        return BlockCode(np.array(rows, dtype=np.uint8))
    raise CodeError(f"unknown code spec {text!r}; expected cc:... or block:...")


def extended_hamming_8_4() -> BlockCode:
    G = np.array(
        [
            [1, 0, 0, 0, 0, 1, 1, 1],
            [0, 1, 0, 0, 1, 0, 1, 1],
            [0, 0, 1, 0, 1, 1, 0, 1],
            [0, 0, 0, 1, 1, 1, 1, 0],
        ],
        dtype=np.uint8,
    )
    return BlockCode(G)


@dataclass(frozen=True, eq=False)
class ExplicitCode(_LinearFrame):
    """A codebook given by its ``2**K`` words, row ``i`` encoding input ``i`` in lexicographic order.

    Linearity is not required, which makes this the natural container for
    two-word codes built from a fixed pair of symbol sequences.
    """

    words: np.ndarray

    def __post_init__(self):
        W = np.asarray(self.words, dtype=np.uint8) & 1
        if W.ndim != 2 or W.shape[0] < 2:
            raise CodeError("need a 2-D array with at least two words")
        K = int(W.shape[0]).bit_length() - 1
        if 2**K != W.shape[0]:
            raise CodeError(f"word count {W.shape[0]} is not a power of two")
        W.setflags(write=False)
        object.__setattr__(self, "words", W)

    @classmethod
    def from_symbols(cls, c, sequences) -> "ExplicitCode":
        from .constellation import symbols_to_bits

        return cls(np.stack([symbols_to_bits(c, np.asarray(s, dtype=int)).ravel() for s in sequences]))

    @property
    def K(self) -> int:
        return int(self.words.shape[0]).bit_length() - 1

    @property
    def length(self) -> int:
        return self.words.shape[1]

    def encode(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=np.int64)
        if u.shape[-1] != self.K:
            raise CodeError(f"expected {self.K} information bits, got {u.shape[-1]}")
        idx = u @ (1 << np.arange(self.K - 1, -1, -1))
        return self.words[idx]

    def describe(self) -> str:
        return "explicit:" + ",".join("".join(str(int(b)) for b in r) for r in self.words)
