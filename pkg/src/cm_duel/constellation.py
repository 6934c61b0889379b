"""PAM constellations with binary labelings.

Symbols are stored in ascending-amplitude order, so index 0 is the most
negative point (``s1`` in the usual 1-based notation).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Labeling vectors q: q[i] is the integer label (MSB first) of the i-th point.
LABELINGS = {
    2: {
        "G1": (0, 1, 3, 2),
        "G2": (0, 2, 3, 1),
        "G3": (1, 0, 2, 3),
        "G4": (2, 0, 1, 3),
        "BRGC": (0, 1, 3, 2),
        "SP": (0, 1, 2, 3),
    },
    3: {
        "BRGC": (0, 1, 3, 2, 6, 7, 5, 4),
        "SP": (0, 1, 2, 3, 4, 5, 6, 7),
    },
}

# CLI spellings
LABELING_ALIASES = {
    "g1": (2, "G1"),
    "g2": (2, "G2"),
    "g3": (2, "G3"),
    "g4": (2, "G4"),
    "brgc": (2, "BRGC"),
    "sp": (2, "SP"),
    "brgc8": (3, "BRGC"),
    "sp8": (3, "SP"),
}

GRAY_4PAM = ("G1", "G2", "G3", "G4")


class ConstellationError(ValueError):
    pass


@dataclass(frozen=True)
class Constellation:
    """An ``M = 2**m`` point PAM constellation ``{±d, ±3d, ...}`` with labeling ``q``."""

    m: int
    labeling: tuple
    d: float = 1.0
    name: str = ""
    points: np.ndarray = field(init=False, repr=False, compare=False)
    bits: np.ndarray = field(init=False, repr=False, compare=False)
    index_of_label: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        M = 2**self.m
        q = tuple(int(v) for v in self.labeling)
        if sorted(q) != list(range(M)):
            raise ConstellationError(f"labeling {q} is not a permutation of 0..{M - 1}")
        if self.d <= 0:
            raise ConstellationError("d must be positive")
        object.__setattr__(self, "labeling", q)
        pts = self.d * (2.0 * np.arange(M) - (M - 1))
        pts.setflags(write=False)
        shifts = np.arange(self.m - 1, -1, -1)
        bits = ((np.asarray(q)[:, None] >> shifts) & 1).astype(np.int8)
        bits.setflags(write=False)
        inv = np.empty(M, dtype=np.int64)
        inv[np.asarray(q)] = np.arange(M)
        inv.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "bits", bits)
        object.__setattr__(self, "index_of_label", inv)

    @property
    def M(self) -> int:
        return 2**self.m

    def scaled(self, h: float) -> "Constellation":
        """The same labeling on amplitudes multiplied by ``h > 0``."""
        return Constellation(self.m, self.labeling, self.d * h, self.name)

    def subset(self, j: int, u: int) -> np.ndarray:
        """Indices of points whose ``j``-th label bit (0-based, MSB first) equals ``u``."""
        return np.flatnonzero(self.bits[:, j] == u)

    def map_bits(self, bits) -> int:
        return map_bits(self, bits)

    def label(self, i: int) -> np.ndarray:
        return self.bits[i]


def make_pam(m: int, labeling_name: str, d: float = 1.0) -> Constellation:
    """Build the named labeling of ``2**m``-PAM.

    ``G1``..``G4`` are the four Gray labelings of 4-PAM; ``BRGC`` and ``SP``
    exist for both ``m = 2`` and ``m = 3``.
    """
    name = labeling_name.upper()
    table = LABELINGS.get(m)
    if table is None:
        raise ConstellationError(f"unsupported m={m}; expected 2 or 3")
    if name not in table:
        raise ConstellationError(f"labeling {labeling_name!r} is not defined for m={m}")
    return Constellation(m, table[name], d, name)


def from_cli_name(name: str, d: float = 1.0) -> Constellation:
    key = name.lower()
    if key not in LABELING_ALIASES:
        raise ConstellationError(
            f"unknown labeling {name!r}; choose from {', '.join(LABELING_ALIASES)}"
        )
    m, lab = LABELING_ALIASES[key]
    return make_pam(m, lab, d)


def map_bits(c: Constellation, bits) -> int:
    """Symbol index whose label equals ``bits`` (MSB first)."""
    value = 0
    for b in bits:
        value = (value << 1) | int(b)
    return int(c.index_of_label[value])


def demap_symbol(c: Constellation, i: int) -> np.ndarray:
    return c.bits[i].copy()


def bits_to_symbols(c: Constellation, bits) -> np.ndarray:
    """Group a bit array (last axis) ``m`` at a time into symbol indices."""
    bits = np.asarray(bits, dtype=np.int64)
    if bits.shape[-1] % c.m:
        raise ConstellationError(f"bit length {bits.shape[-1]} is not a multiple of m={c.m}")
    groups = bits.reshape(bits.shape[:-1] + (-1, c.m))
    weights = 1 << np.arange(c.m - 1, -1, -1)
    return c.index_of_label[groups @ weights]


def symbols_to_bits(c: Constellation, idx) -> np.ndarray:
    idx = np.asarray(idx)
    out = c.bits[idx]
    return out.reshape(idx.shape[:-1] + (-1,)) if idx.ndim else out


def error_vector(c: Constellation, i: int, j: int) -> np.ndarray:
    """Label XOR of symbols ``i`` and ``j``."""
    return (c.bits[i] ^ c.bits[j]).astype(np.int8)


def is_corner_pair(i: int, j: int, m: int = 2) -> bool:
    """True for the outermost 4-PAM pair ``{s1, s4}`` (0-based ``{0, 3}``)."""
    if m != 2:
        raise ConstellationError("corner pairs are only defined for 4-PAM")
    return {int(i), int(j)} == {0, 3}


def is_gray(c: Constellation) -> bool:
    """Whether neighbouring points differ in exactly one label bit."""
    q = np.asarray(c.labeling)
    return bool(np.all([bin(int(a ^ b)).count("1") == 1 for a, b in zip(q[:-1], q[1:])]))


def average_symbol_energy(c: Constellation) -> float:
    return float(np.mean(c.points**2))


def parse_symbols(text: str) -> list[int]:
    """Parse ``"s1,s4,s3"`` (1-based) into 0-based indices."""
    out = []
    for tok in text.replace(" ", "").split(","):
        if not tok:
            continue
        t = tok.lower().lstrip("s")
        if not t.isdigit() or int(t) < 1:
            raise ConstellationError(f"bad symbol token {tok!r}")
        out.append(int(t) - 1)
    return out


def format_symbols(idx) -> str:
    return "[" + ",".join(f"s{int(i) + 1}" for i in idx) + "]"
