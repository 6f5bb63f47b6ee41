"""Linear CRC-8 (zero init, no final XOR, MSB first) and codeword weight spectra."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np


@dataclass(frozen=True)
class CrcSpec:
    divisor: int = 0xE7  # low 8 bits; the x^8 term is implicit
    width: int = 8
    initial_value: int = 0
    final_xor: int = 0

    def __post_init__(self):
        if self.width != 8:
            raise ValueError("only CRC-8 is supported")
        if self.initial_value or self.final_xor:
            raise ValueError("init and final XOR must be zero to keep the CRC linear")
        if not 0 < self.divisor < 256:
            raise ValueError("divisor must be an 8-bit mask")

    @property
    def generator(self) -> int:
        return 0x100 | self.divisor


DEFAULT_CRC = CrcSpec()


def crc8_bitwise(bits, spec: CrcSpec = DEFAULT_CRC) -> int:
    """Bit-at-a-time long division; the reference the table path is checked against."""
    reg = 0
    for b in bits:
        top = (reg >> 7) & 1
        reg = (reg << 1) & 0xFF
        if top ^ (int(b) & 1):
            reg ^= spec.divisor
    return reg


@lru_cache(maxsize=None)
def _table(divisor: int) -> np.ndarray:
    spec = CrcSpec(divisor)
    tab = np.zeros(256, dtype=np.uint8)
    for byte in range(256):
        tab[byte] = crc8_bitwise([(byte >> (7 - i)) & 1 for i in range(8)], spec)
    tab.setflags(write=False)
    return tab


@lru_cache(maxsize=64)
def _position_table(divisor: int, n: int) -> np.ndarray:
    """Row k: CRC contribution of each byte value placed k bytes before the end.

    With zero init and no final XOR the CRC is linear, so a message's CRC is the
    XOR of its bytes' positional contributions.
    """
    tab = _table(divisor)
    out = np.empty((n, 256), dtype=np.uint8)
    if n:
        out[0] = tab
        for k in range(1, n):
            out[k] = tab[out[k - 1]]
    out.setflags(write=False)
    return out


def crc8_bytes(data, spec: CrcSpec = DEFAULT_CRC) -> int:
    buf = np.frombuffer(bytes(data), dtype=np.uint8)
    n = buf.size
    if n == 0:
        return 0
    if n > 4096:  # long inputs: plain table walk, no big positional table
        tab = _table(spec.divisor)
        reg = 0
        for byte in buf.tolist():
            reg = int(tab[reg ^ byte])
        return reg
    pos = _position_table(spec.divisor, n)
    return int(np.bitwise_xor.reduce(pos[np.arange(n - 1, -1, -1), buf]))


def crc8(bits, spec: CrcSpec = DEFAULT_CRC) -> int:
    """CRC-8 of a bit sequence (MSB first).

    Leading zeros leave a zero-initialised register untouched, so the message
    is left-padded to whole bytes and pushed through the byte table.
    """
    bits = np.asarray(bits, dtype=np.uint8).ravel()
    if bits.size == 0:
        raise ValueError("crc8 needs a nonempty message")
    pad = (-bits.size) % 8
    if pad:
        bits = np.concatenate([np.zeros(pad, dtype=np.uint8), bits])
    return crc8_bytes(np.packbits(bits).tobytes(), spec)


def symbols_to_bits(symbols, q: int) -> np.ndarray:
    """Expand field symbols to their bits, most significant bit first."""
    symbols = np.asarray(symbols, dtype=np.uint8).ravel()
    if q == 8:
        return np.unpackbits(symbols)
    if q == 1:
        return symbols & 1
    shifts = np.arange(q - 1, -1, -1, dtype=np.uint8)
    return ((symbols[:, None] >> shifts) & 1).ravel().astype(np.uint8)


def crc8_symbols(symbols, q: int, spec: CrcSpec = DEFAULT_CRC) -> int:
    if q == 8:
        return crc8_bytes(np.asarray(symbols, dtype=np.uint8).tobytes(), spec)
    return crc8(symbols_to_bits(symbols, q), spec)


def verify(segment_bits, received_crc: int, spec: CrcSpec = DEFAULT_CRC) -> bool:
    return crc8(segment_bits, spec) == (int(received_crc) & 0xFF)


@lru_cache(maxsize=64)
def bit_syndromes(nbits: int, spec: CrcSpec = DEFAULT_CRC) -> np.ndarray:
    """CRC of the unit message with a single 1 at each of ``nbits`` positions.

    By linearity, crc(m ^ x) = crc(m) ^ XOR of syndromes over the set bits of x.
    """
    out = np.zeros(nbits, dtype=np.uint8)
    reg = spec.divisor  # x^8 mod G: the last bit of the message
    for pos in range(nbits - 1, -1, -1):
        out[pos] = reg
        top = reg & 0x80
        reg = (reg << 1) & 0xFF
        if top:
            reg ^= spec.divisor
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class WeightDistribution:
    codeword_length: int
    counts: tuple[int, ...]

    def __getitem__(self, w: int) -> int:
        return self.counts[w] if 0 <= w < len(self.counts) else 0

    @property
    def total(self) -> int:
        return sum(self.counts)

    def min_distance(self) -> int:
        return next((w for w in range(1, len(self.counts)) if self.counts[w]), 0)


_POP8 = np.array([bin(i).count("1") for i in range(256)], dtype=np.uint8)


def _popcount8(x: np.ndarray) -> np.ndarray:
    return _POP8[np.asarray(x, dtype=np.uint8)]


def weight_distribution_exhaustive(n_p: int, spec: CrcSpec = DEFAULT_CRC) -> WeightDistribution:
    """Enumerate all 2^(n_p-8) message || crc codewords."""
    k = n_p - 8
    if k < 1:
        raise ValueError("codeword must be longer than the CRC")
    if k > 24:
        raise ValueError("exhaustive enumeration limited to 24 message bits")
    syn = bit_syndromes(k, spec)
    crcs = np.zeros(1, dtype=np.uint8)
    weights = np.zeros(1, dtype=np.uint8)
    # messages are built MSB first: doubling appends one more leading position
    for pos in range(k - 1, -1, -1):
        crcs = np.concatenate([crcs, crcs ^ syn[pos]])
        weights = np.concatenate([weights, weights + 1])
    total = weights + _popcount8(crcs)  # both uint8, max 32
    counts = np.bincount(total, minlength=n_p + 1)
    return WeightDistribution(n_p, tuple(int(c) for c in counts))


def weight_distribution_dp(n_p: int, spec: CrcSpec = DEFAULT_CRC) -> WeightDistribution:
    """Weight histogram via dynamic programming over the 256 register states."""
    k = n_p - 8
    if k < 1:
        raise ValueError("codeword must be longer than the CRC")
    states = np.arange(256)
    nxt0 = np.where(states & 0x80, ((states << 1) & 0xFF) ^ spec.divisor, (states << 1) & 0xFF)
    nxt1 = np.where(states & 0x80, (states << 1) & 0xFF, ((states << 1) & 0xFF) ^ spec.divisor)
    # hist[state, w] = number of prefixes reaching `state` with message weight w
    hist = np.zeros((256, k + 1), dtype=object)
    hist[0, 0] = 1
    for _ in range(k):
        new = np.zeros_like(hist)
        for s in np.flatnonzero(hist.any(axis=1)):
            row = hist[s]
            new[nxt0[s]] += row
            new[nxt1[s], 1:] += row[:-1]
        hist = new
    counts = [0] * (n_p + 1)
    pop = _popcount8(states.astype(np.uint8))
    for s in range(256):
        for w in np.flatnonzero(hist[s] != 0):
            counts[w + int(pop[s])] += int(hist[s, w])
    return WeightDistribution(n_p, tuple(counts))


@lru_cache(maxsize=None)
def weight_distribution(n_p: int, spec: CrcSpec = DEFAULT_CRC) -> WeightDistribution:
    if n_p <= 8:
        raise ValueError("N_p must exceed the CRC width")
    if n_p <= 32 and n_p - 8 <= 24:
        return weight_distribution_exhaustive(n_p, spec)
    return weight_distribution_dp(n_p, spec)
