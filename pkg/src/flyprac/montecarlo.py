"""Monte-Carlo oracles for the closed-form probabilities in ``analysis``.

Each oracle simulates the underlying random experiment directly (independent
bit flips) instead of re-evaluating the formula it checks.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import comb, sqrt

import numpy as np

from .codec import CodedPacket
from .crc import DEFAULT_CRC, CrcSpec, bit_syndromes, crc8_symbols
from .galois import GF2
from .recovery import BrokenVector, RecoveryConfig, RecoveryError, correct_segment


@dataclass(frozen=True)
class Estimate:
    value: float
    events: int
    trials: int

    @property
    def stderr(self) -> float:
        p = self.value
        return sqrt(max(p * (1 - p), 0.0) / self.trials) if self.trials else float("inf")


def _sparse_flips(total_bits: int, eps: float, rng: np.random.Generator) -> np.ndarray:
    k = int(rng.binomial(total_bits, eps))
    return rng.choice(total_bits, size=k, replace=False) if k else np.zeros(0, np.int64)


def symbol_ok_frequency(eps: float, b: int, n: int, rng: np.random.Generator,
                        chunk: int = 1 << 22) -> Estimate:
    """Fraction of n b-bit symbols that cross the channel with no flipped bit."""
    hit = 0
    done = 0
    while done < n:
        m = min(chunk, n - done)
        flips = _sparse_flips(m * b, eps, rng)
        hit += np.unique(flips // b).size
        done += m
    return Estimate(1 - hit / n, n - hit, n)


def column_false_positive_frequency(eps: float, R: int, b: int, n: int, rng: np.random.Generator,
                                    chunk: int = 1 << 20) -> Estimate:
    """Fraction of columns whose R error patterns are not all zero yet XOR to zero.

    Bits are laid out as (column, packet, bit); every bit flips independently.
    """
    events = 0
    done = 0
    while done < n:
        m = min(chunk, n - done)
        flips = _sparse_flips(m * R * b, eps, rng)
        col = flips // (R * b)
        bit = flips % b
        xor = np.zeros(m, dtype=np.int64)
        np.bitwise_xor.at(xor, col, np.left_shift(1, bit))
        touched = np.zeros(m, dtype=bool)
        touched[col] = True
        events += int(np.count_nonzero(touched & (xor == 0)))
        done += m
    return Estimate(events / n, events, n)


def estimation_coverage_frequency(eps: float, R: int, b: int, l: int, n_groups: int,
                                  rng: np.random.Generator) -> Estimate:
    """Fraction of groups where no corrupted column cancels out under the XOR relation."""
    bad = 0
    per = l * R * b
    for _ in range(n_groups):
        flips = _sparse_flips(per, eps, rng)
        if flips.size == 0:
            continue
        col = flips // (R * b)
        xor = np.zeros(l, dtype=np.int64)
        np.bitwise_xor.at(xor, col, np.left_shift(1, flips % b))
        if np.any(xor[np.unique(col)] == 0):
            bad += 1
    return Estimate(1 - bad / n_groups, n_groups - bad, n_groups)


def _codeword_syndromes(n_p: int, crc: CrcSpec) -> np.ndarray:
    """Per-bit syndrome of a segment of n_p bits: payload bits then 8 CRC bits."""
    k = n_p - 8
    return np.concatenate([bit_syndromes(k, crc), 1 << np.arange(7, -1, -1)]).astype(np.int64)


def undetected_frequency(n_p: int, eps: float, n: int, rng: np.random.Generator,
                         crc: CrcSpec = DEFAULT_CRC, chunk: int = 1 << 20) -> Estimate:
    """Plain Monte-Carlo: fraction of n segments whose nonzero error pattern passes the CRC."""
    syn = _codeword_syndromes(n_p, crc)
    events = 0
    done = 0
    while done < n:
        m = min(chunk, n - done)
        flips = _sparse_flips(m * n_p, eps, rng)
        seg = flips // n_p
        acc = np.zeros(m, dtype=np.int64)
        np.bitwise_xor.at(acc, seg, syn[flips % n_p])
        touched = np.zeros(m, dtype=bool)
        touched[seg] = True
        events += int(np.count_nonzero(touched & (acc == 0)))
        done += m
    return Estimate(events / n, events, n)


def undetected_stratified(n_p: int, eps: float, per_weight: int, rng: np.random.Generator,
                          crc: CrcSpec = DEFAULT_CRC, min_mass: float = 1e-30) -> float:
    """Stratify by error weight: P(weight w) times a sampled P(undetected | weight w).

    Plain sampling cannot see events near 1e-11, so each weight class is
    sampled uniformly on its own and recombined with exact binomial weights.
    """
    syn = _codeword_syndromes(n_p, crc)
    total = 0.0
    for w in range(1, n_p + 1):
        mass = comb(n_p, w) * eps ** w * (1 - eps) ** (n_p - w)
        if mass < min_mass:
            continue
        keys = rng.random((per_weight, n_p))
        pos = np.argpartition(keys, w - 1, axis=1)[:, :w]
        acc = np.bitwise_xor.reduce(syn[pos], axis=1)
        total += mass * np.count_nonzero(acc == 0) / per_weight
    return total


def segment_recovery_frequency(n_p: int, eps: float, n: int, rng: np.random.Generator,
                               cfg: RecoveryConfig = RecoveryConfig(),
                               crc: CrcSpec = DEFAULT_CRC) -> Estimate:
    """Inject Binomial(n_p, eps) flips into a one-segment GF(2) packet and run the real search.

    The segment holds n_p - 8 payload bits plus its 8-bit ICRC.  The suspect set
    is the exact set of corrupted payload columns.  Success means the segment
    ends up equal to what was sent (an untouched segment counts as success).
    """
    k = n_p - 8
    if k < 1:
        raise ValueError("segment needs at least one payload bit")
    ok = 0
    coef = np.ones(1, dtype=np.uint8)
    for _ in range(n):
        flips = _sparse_flips(n_p, eps, rng)
        if flips.size == 0:
            ok += 1
            continue
        sent = rng.integers(0, 2, k, dtype=np.uint8)
        icrc = crc8_symbols(sent, 1, crc)
        recv = sent.copy()
        pay = flips[flips < k]
        recv[pay] ^= 1
        icrc ^= int(sum(1 << (7 - (int(f) - k)) for f in flips[flips >= k]))
        pkt = CodedPacket(0, coef, recv, np.array([icrc], np.uint8), 0, q=GF2.q)
        if crc8_symbols(recv, 1, crc) == icrc:
            ok += int(np.array_equal(recv, sent))
            continue
        try:
            fixed = correct_segment(pkt, 0, BrokenVector(tuple(int(c) for c in np.sort(pay))), cfg, crc)
        except RecoveryError:
            continue
        ok += int(np.array_equal(fixed, sent))
    return Estimate(ok / n, ok, n)
