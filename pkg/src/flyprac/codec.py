"""Dependent-group RLNC/SNC encoding, segment framing, decoding and recoding."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from math import ceil

import numpy as np

from .crc import DEFAULT_CRC, CrcSpec, crc8_symbols, symbols_to_bits
from .galois import GF256, FieldSpec


class ConfigError(ValueError):
    pass


class RankDeficient(ValueError):
    """Fewer than g linearly independent coded packets were supplied."""


class EmptyBuffer(ValueError):
    pass


@dataclass(frozen=True)
class GenerationConfig:
    g: int
    l: int
    s: int = 1
    R: int | None = None  # None: plain RLNC/SNC, no dependent groups
    field: FieldSpec = GF256
    w: int | None = None  # SNC sparsity; None means dense coefficients
    append_dependent: bool = True
    crc: CrcSpec = DEFAULT_CRC

    def __post_init__(self):
        if self.g < 1 or self.l < 1 or self.s < 1:
            raise ConfigError("g, l and s must be positive")
        if self.l % self.s:
            raise ConfigError(f"l={self.l} is not divisible by s={self.s}")
        if self.R is not None and not 2 < self.R <= self.g + 1:
            raise ConfigError(f"R={self.R} outside 2 < R <= g+1")
        if self.w is not None and not 1 <= self.w <= self.g:
            raise ConfigError(f"w={self.w} outside 1..g")

    @property
    def q(self) -> int:
        return self.field.q

    @property
    def segment_len(self) -> int:
        return self.l // self.s

    @property
    def group_size(self) -> int:
        if self.R is None:
            return 1
        return self.R if self.append_dependent else self.R - 1

    @property
    def layout(self) -> "PacketLayout":
        return PacketLayout(self.g, self.l, self.s, self.q)

    @property
    def min_groups(self) -> int:
        per = 1 if self.R is None else self.R - 1
        return ceil(self.g / per)


@dataclass
class CodedPacket:
    group_id: int
    coefficients: np.ndarray
    symbols: np.ndarray
    inner_crcs: np.ndarray
    outer_crc: int
    q: int = 8
    seq: int = -1  # transmission index, bookkeeping only (not serialized)

    @classmethod
    def build(cls, group_id, coefficients, symbols, s, q=8, crc=DEFAULT_CRC, seq=-1):
        symbols = np.asarray(symbols, dtype=np.uint8)
        segs = symbols.reshape(s, -1)
        inner = np.array([crc8_symbols(seg, q, crc) for seg in segs], dtype=np.uint8)
        outer = crc8_symbols(symbols, q, crc)
        return cls(group_id, np.asarray(coefficients, dtype=np.uint8), symbols.copy(),
                   inner, outer, q, seq)

    @property
    def s(self) -> int:
        return len(self.inner_crcs)

    @property
    def segments(self) -> np.ndarray:
        return self.symbols.reshape(self.s, -1)

    def segment_ok(self, k: int, crc: CrcSpec = DEFAULT_CRC) -> bool:
        return crc8_symbols(self.segments[k], self.q, crc) == int(self.inner_crcs[k])

    def outer_ok(self, crc: CrcSpec = DEFAULT_CRC) -> bool:
        return crc8_symbols(self.symbols, self.q, crc) == int(self.outer_crc)

    def all_ok(self, crc: CrcSpec = DEFAULT_CRC) -> bool:
        return self.outer_ok(crc) and all(self.segment_ok(k, crc) for k in range(self.s))

    def refreshed(self, symbols=None, crc: CrcSpec = DEFAULT_CRC) -> "CodedPacket":
        """Copy with (optionally new) symbols and recomputed CRCs."""
        syms = self.symbols if symbols is None else symbols
        return CodedPacket.build(self.group_id, self.coefficients.copy(), syms, self.s,
                                 self.q, crc, self.seq)

    def copy(self) -> "CodedPacket":
        return replace(self, coefficients=self.coefficients.copy(), symbols=self.symbols.copy(),
                       inner_crcs=self.inner_crcs.copy())

    def same_content(self, other: "CodedPacket") -> bool:
        return (self.group_id == other.group_id
                and np.array_equal(self.coefficients, other.coefficients)
                and np.array_equal(self.symbols, other.symbols)
                and np.array_equal(self.inner_crcs, other.inner_crcs)
                and self.outer_crc == other.outer_crc)


@dataclass(frozen=True)
class PacketLayout:
    """Bit layout: group_id(16) | g*q coefficient bits | s*(l/s*q + 8) | OCRC(8)."""
    g: int
    l: int
    s: int
    q: int = 8

    @property
    def protected_offset(self) -> int:
        return 16 + self.g * self.q

    @property
    def protected_bits(self) -> int:
        return self.l * self.q + 8 * self.s + 8

    @property
    def total_bits(self) -> int:
        return self.protected_offset + self.protected_bits

    @property
    def total_bytes(self) -> int:
        return (self.total_bits + 7) // 8


def _int_bits(value: int, width: int) -> np.ndarray:
    return np.array([(value >> (width - 1 - i)) & 1 for i in range(width)], dtype=np.uint8)


def _bits_int(bits) -> int:
    v = 0
    for b in bits:
        v = (v << 1) | int(b)
    return v


def serialize(packet: CodedPacket) -> bytes:
    q = packet.q
    parts = [_int_bits(packet.group_id & 0xFFFF, 16), symbols_to_bits(packet.coefficients, q)]
    for k, seg in enumerate(packet.segments):
        parts.append(symbols_to_bits(seg, q))
        parts.append(_int_bits(int(packet.inner_crcs[k]), 8))
    parts.append(_int_bits(int(packet.outer_crc), 8))
    return np.packbits(np.concatenate(parts)).tobytes()


def _bits_symbols(bits: np.ndarray, q: int) -> np.ndarray:
    if q == 8:
        return np.packbits(bits)
    if q == 1:
        return bits.astype(np.uint8)
    weights = (1 << np.arange(q - 1, -1, -1)).astype(np.uint16)
    return (bits.reshape(-1, q) * weights).sum(axis=1).astype(np.uint8)


def deserialize(data: bytes, layout: PacketLayout, seq: int = -1) -> CodedPacket:
    bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8))
    if bits.size < layout.total_bits:
        raise ValueError("truncated packet")
    q, g = layout.q, layout.g
    gid = _bits_int(bits[:16])
    pos = 16
    coefs = _bits_symbols(bits[pos:pos + g * q], q)
    pos += g * q
    seg_bits = (layout.l // layout.s) * q
    syms, inner = [], []
    for _ in range(layout.s):
        syms.append(_bits_symbols(bits[pos:pos + seg_bits], q))
        pos += seg_bits
        inner.append(_bits_int(bits[pos:pos + 8]))
        pos += 8
    outer = _bits_int(bits[pos:pos + 8])
    return CodedPacket(gid, coefs, np.concatenate(syms), np.array(inner, dtype=np.uint8),
                       outer, q, seq)


@dataclass
class DependentGroup:
    group_id: int
    packets: list[CodedPacket] = field(default_factory=list)

    @property
    def coefficient_matrix(self) -> np.ndarray:
        return np.stack([p.coefficients for p in self.packets])

    @property
    def symbol_matrix(self) -> np.ndarray:
        return np.stack([p.symbols for p in self.packets])


def draw_coefficients(cfg: GenerationConfig, rng: np.random.Generator) -> np.ndarray:
    """One coefficient row: uniform dense, or w nonzeros at random positions (SNC)."""
    fs = cfg.field
    if cfg.w is None:
        while True:
            row = fs.random(rng, cfg.g)
            if row.any():
                return row
    row = np.zeros(cfg.g, dtype=np.uint8)
    pos = rng.choice(cfg.g, size=cfg.w, replace=False)
    row[pos] = fs.random(rng, cfg.w, nonzero=True)
    return row


def _draw_group_rows(cfg: GenerationConfig, rng: np.random.Generator, n: int) -> np.ndarray:
    """n mutually independent rows; a row that falls into the span of earlier ones is redrawn."""
    from .galois import rref

    rows: list[np.ndarray] = []
    while len(rows) < n:
        cand = draw_coefficients(cfg, rng)
        if rows and rref(np.vstack(rows + [cand]), cfg.field).rank <= len(rows):
            continue
        rows.append(cand)
    return np.vstack(rows)


def encode_group(originals: np.ndarray, cfg: GenerationConfig, rng: np.random.Generator,
                 group_id: int = 0, coefficients: np.ndarray | None = None) -> DependentGroup:
    """Encode one dependent group: R-1 random rows plus their GF sum, framed with CRCs.

    ``coefficients`` overrides the random draw for the first R-1 rows.
    """
    originals = np.asarray(originals, dtype=np.uint8)
    if originals.shape != (cfg.g, cfg.l):
        raise ConfigError(f"originals must be {cfg.g}x{cfg.l}, got {originals.shape}")
    n_free = 1 if cfg.R is None else cfg.R - 1
    if coefficients is None:
        c = _draw_group_rows(cfg, rng, n_free)
    else:
        c = np.atleast_2d(np.asarray(coefficients, dtype=np.uint8))
        if c.shape != (n_free, cfg.g):
            raise ConfigError(f"expected {n_free}x{cfg.g} coefficient rows")
    if cfg.R is not None and cfg.append_dependent:
        c = np.vstack([c, np.bitwise_xor.reduce(c, axis=0)])
    coded = cfg.field.matmul(c, originals)
    packets = [CodedPacket.build(group_id, c[i], coded[i], cfg.s, cfg.q, cfg.crc)
               for i in range(c.shape[0])]
    return DependentGroup(group_id, packets)


class Encoder:
    """Source-side stream of dependent groups over one generation."""

    def __init__(self, originals: np.ndarray, cfg: GenerationConfig, rng: np.random.Generator):
        self.originals = np.asarray(originals, dtype=np.uint8)
        self.cfg = cfg
        self.rng = rng
        self.next_group_id = 0
        self.sent = 0

    def next_group(self) -> DependentGroup:
        grp = encode_group(self.originals, self.cfg, self.rng, self.next_group_id)
        self.next_group_id += 1
        return grp

    def __iter__(self):
        while True:
            for pkt in self.next_group().packets:
                pkt.seq = self.sent
                self.sent += 1
                yield pkt


def random_originals(cfg: GenerationConfig, rng: np.random.Generator) -> np.ndarray:
    return cfg.field.random(rng, (cfg.g, cfg.l))


class Decoder:
    """Incremental Gauss-Jordan decoder over [coefficients | symbols].

    The basis is kept fully reduced, so a row whose coefficient part is a unit
    vector already holds a decoded original.
    """

    def __init__(self, g: int, l: int, fs: FieldSpec = GF256):
        self.g, self.l, self.fs = g, l, fs
        self.coef = np.zeros((g, g), dtype=np.uint8)
        self.sym = np.zeros((g, l), dtype=np.uint8)
        self.pivots: list[int] = []
        self._pivot_row = np.full(g, -1, dtype=np.int64)

    @property
    def rank(self) -> int:
        return len(self.pivots)

    @property
    def is_complete(self) -> bool:
        return self.rank == self.g

    def reduce(self, coef: np.ndarray, sym: np.ndarray | None = None):
        """Residual of a row after eliminating every basis pivot."""
        coef = np.array(coef, dtype=np.uint8, copy=True)
        sym = None if sym is None else np.array(sym, dtype=np.uint8, copy=True)
        if not self.pivots:
            return coef, sym
        piv = np.asarray(self.pivots)
        f = coef[piv]
        nz = np.flatnonzero(f)
        if nz.size:
            rows = self._pivot_row[piv[nz]]
            mul = self.fs.mul_table
            coef ^= np.bitwise_xor.reduce(mul[f[nz][:, None], self.coef[rows]], axis=0)
            if sym is not None:
                sym ^= np.bitwise_xor.reduce(mul[f[nz][:, None], self.sym[rows]], axis=0)
        return coef, sym

    def in_span(self, coef: np.ndarray) -> bool:
        return not self.reduce(coef)[0].any()

    def add(self, coef, sym=None) -> bool:
        """Insert a row (or a CodedPacket); returns True when it was innovative."""
        if isinstance(coef, CodedPacket):
            coef, sym = coef.coefficients, coef.symbols
        c, y = self.reduce(coef, sym)
        if y is None:
            y = np.zeros(self.l, dtype=np.uint8)
        nz = np.flatnonzero(c)
        if nz.size == 0:
            return False
        lead = int(nz[0])
        inv = int(self.fs.inv_table[c[lead]])
        if inv != 1:
            c = self.fs.scale(inv, c)
            y = self.fs.scale(inv, y)
        r = self.rank
        users = np.flatnonzero(self.coef[:r, lead])
        if users.size:
            f = self.coef[users, lead]
            mul = self.fs.mul_table
            self.coef[users] ^= mul[f[:, None], c[None, :]]
            self.sym[users] ^= mul[f[:, None], y[None, :]]
        self.coef[r] = c
        self.sym[r] = y
        self.pivots.append(lead)
        self._pivot_row[lead] = r
        return True

    def decoded(self) -> dict[int, np.ndarray]:
        """Originals already recoverable: basis rows reduced to a unit coefficient vector."""
        r = self.rank
        if r == 0:
            return {}
        single = np.flatnonzero(np.count_nonzero(self.coef[:r], axis=1) == 1)
        return {self.pivots[i]: self.sym[i].copy() for i in single}

    def decoded_indices(self) -> set[int]:
        r = self.rank
        if r == 0:
            return set()
        single = np.flatnonzero(np.count_nonzero(self.coef[:r], axis=1) == 1)
        return {self.pivots[i] for i in single}

    def originals(self) -> np.ndarray:
        if not self.is_complete:
            raise RankDeficient(f"rank {self.rank} < g={self.g}")
        out = np.zeros((self.g, self.l), dtype=np.uint8)
        for i, col in enumerate(self.pivots):
            out[col] = self.sym[i]
        return out

    def basis(self) -> tuple[np.ndarray, np.ndarray]:
        r = self.rank
        return self.coef[:r].copy(), self.sym[:r].copy()


def decode(packets, cfg: GenerationConfig) -> np.ndarray:
    dec = Decoder(cfg.g, cfg.l, cfg.field)
    for p in packets:
        dec.add(p)
        if dec.is_complete:
            break
    return dec.originals()


def partial_decode(packets, cfg: GenerationConfig) -> dict[int, np.ndarray]:
    dec = Decoder(cfg.g, cfg.l, cfg.field)
    for p in packets:
        dec.add(p)
    return dec.decoded()


def recode(valid_packets, rng: np.random.Generator | None = None, fs: FieldSpec = GF256,
           scalars=None, crc: CrcSpec = DEFAULT_CRC) -> CodedPacket:
    """Fresh random combination of held packets, with recomputed CRCs."""
    pkts = list(valid_packets)
    if not pkts:
        raise EmptyBuffer("cannot recode from an empty buffer")
    if scalars is None:
        if rng is None:
            raise ValueError("need rng or explicit scalars")
        while True:
            scalars = fs.random(rng, len(pkts))
            if scalars.any():
                break
    scalars = np.asarray(scalars, dtype=np.uint8)
    coef = fs.combine(scalars, np.stack([p.coefficients for p in pkts]))
    sym = fs.combine(scalars, np.stack([p.symbols for p in pkts]))
    first = pkts[0]
    return CodedPacket.build(first.group_id, coef, sym, first.s, first.q, crc)
