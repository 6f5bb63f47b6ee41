"""Arithmetic over GF(2) and GF(2^8), plus row reduction with provenance.

Field elements are plain integers (or uint8 numpy arrays); matrices are 2-D
uint8 arrays.  Multiplication goes through a precomputed table so that whole
rows can be scaled with one fancy-indexing lookup.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

GF256_POLY = 0x11D


class ZeroInverse(ZeroDivisionError):
    """Raised when the multiplicative inverse of zero is requested."""


def poly_mulmod(a: int, b: int, q: int, poly: int) -> int:
    """Shift-and-add multiplication of two field elements, reduced by ``poly``."""
    top = 1 << q
    r = 0
    while b:
        if b & 1:
            r ^= a
        b >>= 1
        a <<= 1
        if a & top:
            a ^= poly
    return r


def _poly_mod(a: int, m: int) -> int:
    dm = m.bit_length()
    while a and a.bit_length() >= dm:
        a ^= m << (a.bit_length() - dm)
    return a


def is_irreducible(poly: int) -> bool:
    """Exhaustive divisor check over GF(2)[x]."""
    deg = poly.bit_length() - 1
    if deg < 1:
        return False
    if deg == 1:
        return True
    for d in range(2, 1 << (deg // 2 + 1)):
        if d.bit_length() - 1 > deg // 2:
            break
        if _poly_mod(poly, d) == 0:
            return False
    return True


@dataclass(frozen=True)
class FieldSpec:
    q: int = 8
    reduction_polynomial: int = GF256_POLY
    mul_table: np.ndarray = field(init=False, repr=False, compare=False)
    inv_table: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.q not in (1, 8):
            raise ValueError(f"unsupported field exponent q={self.q}")
        if self.reduction_polynomial.bit_length() - 1 != self.q:
            raise ValueError("reduction polynomial degree must equal q")
        if not is_irreducible(self.reduction_polynomial):
            raise ValueError(f"{self.reduction_polynomial:#x} is reducible")
        mul, inv = _tables(self.q, self.reduction_polynomial)
        object.__setattr__(self, "mul_table", mul)
        object.__setattr__(self, "inv_table", inv)

    @property
    def order(self) -> int:
        return 1 << self.q

    def mul(self, a, b):
        """Element-wise product; broadcasts like numpy."""
        return self.mul_table[np.asarray(a, dtype=np.uint8), np.asarray(b, dtype=np.uint8)]

    def scale(self, c: int, row: np.ndarray) -> np.ndarray:
        return self.mul_table[c][row]

    def matmul(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Matrix product over the field, accumulated row by row."""
        a = np.atleast_2d(np.asarray(a, dtype=np.uint8))
        b = np.atleast_2d(np.asarray(b, dtype=np.uint8))
        if a.shape[1] != b.shape[0]:
            raise ValueError(f"shape mismatch {a.shape} x {b.shape}")
        out = np.zeros((a.shape[0], b.shape[1]), dtype=np.uint8)
        if a.shape[0] < a.shape[1]:
            for i in range(a.shape[0]):
                out[i] = self.combine(a[i], b)
            return out
        for k in range(a.shape[1]):
            out ^= self.mul_table[a[:, k][:, None], b[k][None, :]]
        return out

    def combine(self, coeffs: np.ndarray, rows: np.ndarray) -> np.ndarray:
        """Linear combination sum_k coeffs[k] * rows[k]."""
        coeffs = np.asarray(coeffs, dtype=np.uint8)
        rows = np.atleast_2d(np.asarray(rows, dtype=np.uint8))
        nz = np.flatnonzero(coeffs)
        if nz.size == 0:
            return np.zeros(rows.shape[1], dtype=np.uint8)
        prods = self.mul_table[coeffs[nz][:, None], rows[nz]]
        return np.bitwise_xor.reduce(prods, axis=0)

    def random(self, rng: np.random.Generator, size, nonzero: bool = False) -> np.ndarray:
        low = 1 if nonzero else 0
        return rng.integers(low, self.order, size=size, dtype=np.uint8)


@lru_cache(maxsize=None)
def _tables(q: int, poly: int):
    n = 1 << q
    mul = np.zeros((n, n), dtype=np.uint8)
    for a in range(n):
        for b in range(a, n):
            mul[a, b] = mul[b, a] = poly_mulmod(a, b, q, poly)
    mul.setflags(write=False)
    inv = np.zeros(n, dtype=np.uint8)
    for a in range(1, n):
        inv[a] = int(np.flatnonzero(mul[a] == 1)[0])
    inv.setflags(write=False)
    return mul, inv


GF2 = FieldSpec(1, 0b11)
GF256 = FieldSpec(8, GF256_POLY)


def field_for(q: int) -> FieldSpec:
    return GF2 if q == 1 else GF256 if q == 8 else FieldSpec(q)


def gf_add(a: int, b: int) -> int:
    return int(a) ^ int(b)


def gf_mul(a: int, b: int, fs: FieldSpec = GF256) -> int:
    return int(fs.mul_table[a, b])


def gf_inv(a: int, fs: FieldSpec = GF256) -> int:
    if a == 0:
        raise ZeroInverse("zero has no multiplicative inverse")
    return int(fs.inv_table[a])


@dataclass
class RrefResult:
    matrix: np.ndarray
    rank: int
    pivots: list[int]
    provenance: list[set[int]] | None = None
    transform: np.ndarray | None = None

    def zero_rows(self, ncols: int | None = None) -> list[int]:
        """Rows whose first ``ncols`` entries (default: pivot range) vanish."""
        cols = self.matrix.shape[1] if ncols is None else ncols
        block = self.matrix[:, :cols]
        return [i for i in range(block.shape[0]) if not block[i].any()]


def rref(m: np.ndarray, fs: FieldSpec = GF256, pivot_cols: int | None = None,
         track: bool = False) -> RrefResult:
    """Reduced row-echelon form with pivots taken only from the first ``pivot_cols`` columns.

    Columns beyond the pivot range are carried along by the row operations.
    With ``track=True`` the result also holds ``transform`` (T with T @ m = out)
    and ``provenance[i]`` = the original rows with a nonzero weight in output row i.
    """
    a = np.array(m, dtype=np.uint8, copy=True)
    if a.ndim != 2 or a.size == 0:
        raise ValueError("rref needs a nonempty 2-D matrix")
    nrows, ncols = a.shape
    limit = ncols if pivot_cols is None else min(pivot_cols, ncols)
    t = np.eye(nrows, dtype=np.uint8) if track else None
    mul, inv = fs.mul_table, fs.inv_table
    pivots: list[int] = []
    r = 0
    for c in range(limit):
        if r == nrows:
            break
        cand = np.flatnonzero(a[r:, c])
        if cand.size == 0:
            continue
        p = r + int(cand[0])
        if p != r:
            a[[r, p]] = a[[p, r]]
            if track:
                t[[r, p]] = t[[p, r]]
        s = int(inv[a[r, c]])
        if s != 1:
            a[r] = mul[s][a[r]]
            if track:
                t[r] = mul[s][t[r]]
        others = np.flatnonzero(a[:, c])
        others = others[others != r]
        if others.size:
            f = a[others, c]
            a[others] ^= mul[f[:, None], a[r][None, :]]
            if track:
                t[others] ^= mul[f[:, None], t[r][None, :]]
        pivots.append(c)
        r += 1
    prov = [set(np.flatnonzero(row).tolist()) for row in t] if track else None
    return RrefResult(a, len(pivots), pivots, prov, t)


def rank(m: np.ndarray, fs: FieldSpec = GF256) -> int:
    m = np.asarray(m, dtype=np.uint8)
    if m.size == 0:
        return 0
    return rref(m, fs).rank
