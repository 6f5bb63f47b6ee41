"""Closed-form failure probabilities for estimation and correction.

Notation follows the usual FPRAC symbols: ``eps`` bit error rate, ``b`` bits
per symbol, ``R`` dependent-group size, ``l`` symbols per packet, ``n_p`` bits
of a segment including its inner CRC.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import comb, exp, floor, lgamma, log, log1p

from .crc import DEFAULT_CRC, CrcSpec, weight_distribution

# Two forms of the per-weight "no false positive" factor: one minus the
# product, or the product alone.  The product alone is the probability that
# none of the candidate patterns collides, and is the default.
PRINTED = "printed"
PRODUCT = "product"
DEFAULT_READING = PRODUCT


def _check_eps(eps: float):
    if not 0.0 <= eps <= 1.0:
        raise ValueError(f"eps={eps} outside [0, 1]")


def _log_binom_pmf(n: int, k: int, p: float) -> float:
    if p == 0.0:
        return 0.0 if k == 0 else float("-inf")
    if p == 1.0:
        return 0.0 if k == n else float("-inf")
    return (lgamma(n + 1) - lgamma(k + 1) - lgamma(n - k + 1)
            + k * log(p) + (n - k) * log1p(-p))


def p_symbol_ok(eps: float, b: int) -> float:
    _check_eps(eps)
    return (1.0 - eps) ** b


def p_column_ok(eps: float, b: int, R: int) -> float:
    return p_symbol_ok(eps, b) ** R


def expected_inconsistent_columns(eps: float, b: int, R: int, l: int) -> float:
    """Binomial-mean sum over the number of inconsistent columns, in log space."""
    p = p_column_ok(eps, b, R)
    bad = 1.0 - p
    if bad == 0.0:
        return 0.0
    return sum(i * exp(_log_binom_pmf(l, i, bad)) for i in range(1, l + 1))


def expected_inconsistent_columns_closed(eps: float, b: int, R: int, l: int) -> float:
    return l * (1.0 - p_column_ok(eps, b, R))


def p_even(eps: float, R: int) -> float:
    """A given bit position is flipped in a nonzero, even number of the R patterns."""
    _check_eps(eps)
    return sum(comb(R, 2 * i) * (1 - eps) ** (R - 2 * i) * eps ** (2 * i)
               for i in range(1, floor(R / 2) + 1))


def p_zero(eps: float, R: int) -> float:
    _check_eps(eps)
    return (1.0 - eps) ** R


def p_fpe_round(eps: float, R: int, b: int) -> float:
    """Chance that a column's error patterns are nonzero yet XOR to zero."""
    pe, p0 = p_even(eps, R), p_zero(eps, R)
    return sum(comb(b, i) * pe ** i * p0 ** (b - i) for i in range(1, b + 1))


def p_no_estimation_failure(eps: float, R: int, b: int, l: int) -> float:
    return (1.0 - p_fpe_round(eps, R, b)) ** l


def p_undetected(n_p: int, eps: float, crc: CrcSpec = DEFAULT_CRC) -> float:
    _check_eps(eps)
    if eps == 0.0:
        return 0.0
    a = weight_distribution(n_p, crc)
    return sum(a[i] * (1 - eps) ** (n_p - i) * eps ** i for i in range(1, n_p + 1))


def _j_min(a1: int, a2: int, n_p: int) -> int:
    return max(0, a1 + a2 - n_p)


def _no_fp_product(a1: int, a2: int, j_hi: int, n_p: int, a) -> float:
    """prod_j (1 - A[h]/C(n_p, h)) ** (C(a2, j) * C(n_p - a2, a2 - j)), h = a1 + a2 - 2j."""
    logp = 0.0
    for j in range(_j_min(a1, a2, n_p), j_hi + 1):
        h = a1 + a2 - 2 * j
        if h < 0 or h > n_p:
            continue
        trials = comb(a2, j) * comb(n_p - a2, a2 - j) if a2 - j <= n_p - a2 else 0
        if trials == 0:
            continue
        frac = a[h] / comb(n_p, h)
        if frac >= 1.0:
            return 0.0
        logp += trials * log1p(-frac)
    return exp(logp)


def p_nq(a1: int, a2: int, n_p: int, crc: CrcSpec = DEFAULT_CRC, reading: str = DEFAULT_READING) -> float:
    prod = _no_fp_product(a1, a2, a2, n_p, weight_distribution(n_p, crc))
    return 1.0 - prod if reading == PRINTED else prod


def p_eq(a1: int, n_p: int, crc: CrcSpec = DEFAULT_CRC, reading: str = DEFAULT_READING) -> float:
    prod = _no_fp_product(a1, a1, a1 - 1, n_p, weight_distribution(n_p, crc))
    return 1.0 - prod if reading == PRINTED else prod


def f_factor(a1: int, a2: int, n_p: int, crc: CrcSpec = DEFAULT_CRC,
             reading: str = DEFAULT_READING) -> float:
    # the case split is only meaningful for a2 <= a1 (the product runs a2 = 0..a1)
    if a1 == a2 == 0:
        return 1.0
    if a1 == a2:
        return p_eq(a1, n_p, crc, reading)
    if a2 < a1:
        return p_nq(a1, a2, n_p, crc, reading)
    raise ValueError("f is defined for a2 <= a1")


def p_no_false_positive(a1: int, n_p: int, crc: CrcSpec = DEFAULT_CRC,
                        reading: str = DEFAULT_READING) -> float:
    out = 1.0
    for a2 in range(a1 + 1):
        out *= f_factor(a1, a2, n_p, crc, reading)
        if out == 0.0:
            break
    return out


def p_successful_segment_recovery(n_p: int, eps: float, crc: CrcSpec = DEFAULT_CRC,
                                  reading: str = DEFAULT_READING, tail: float = 1e-15) -> float:
    """Sum over error weights of (1-eps)^(n_p-a1) eps^a1 times the no-false-positive product.

    The weight term deliberately carries no binomial coefficient.  The sum stops once the Binomial(n_p, eps) upper tail is below
    ``tail``.
    """
    _check_eps(eps)
    total = 0.0
    tail_mass = 1.0
    for a1 in range(n_p + 1):
        w = (1 - eps) ** (n_p - a1) * eps ** a1
        if w > 0.0:
            total += w * p_no_false_positive(a1, n_p, crc, reading)
        tail_mass -= exp(_log_binom_pmf(n_p, a1, eps))
        if tail_mass < tail:
            break
    return total


def p_fpc(n_p: int, eps: float, crc: CrcSpec = DEFAULT_CRC, reading: str = DEFAULT_READING) -> float:
    return 1.0 - p_successful_segment_recovery(n_p, eps, crc, reading)


def segment_recovery_readings(n_p: int, eps: float, crc: CrcSpec = DEFAULT_CRC) -> dict[str, float]:
    return {r: p_successful_segment_recovery(n_p, eps, crc, r) for r in (PRODUCT, PRINTED)}


@dataclass(frozen=True)
class AnalysisParams:
    epsilon: float
    b: int = 8
    R: int = 10
    l: int = 50
    s: int = 1
    g: int = 100
    n_p: int | None = None
    crc: CrcSpec = DEFAULT_CRC

    def __post_init__(self):
        _check_eps(self.epsilon)
        if min(self.b, self.R, self.l, self.s, self.g) < 1:
            raise ValueError("analysis parameters must be positive")

    @property
    def segment_bits(self) -> int:
        """Bits per segment including its inner CRC."""
        return self.n_p if self.n_p is not None else (self.l // self.s) * self.b + 8

    def evaluate(self) -> dict[str, float]:
        eps, b, R, l = self.epsilon, self.b, self.R, self.l
        n_p = self.segment_bits
        row = {
            "p_symbol_ok": p_symbol_ok(eps, b),
            "p_column_ok": p_column_ok(eps, b, R),
            "expected_inconsistent_columns": expected_inconsistent_columns(eps, b, R, l),
            "p_even": p_even(eps, R),
            "p_zero": p_zero(eps, R),
            "p_fpe_round": p_fpe_round(eps, R, b),
            "p_no_estimation_failure": p_no_estimation_failure(eps, R, b, l),
        }
        if n_p <= 64:
            readings = segment_recovery_readings(n_p, eps, self.crc)
            row["p_undetected"] = p_undetected(n_p, eps, self.crc)
            row["p_sr"] = readings[PRODUCT]
            row["p_sr_printed"] = readings[PRINTED]
            row["p_fpc"] = 1.0 - readings[PRODUCT]
        return row
