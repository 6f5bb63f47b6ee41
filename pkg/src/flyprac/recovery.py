"""Partial-packet recovery: error-location estimation, dependent-set discovery,
and correction of refuted segments by ordered bit-flip search."""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import NamedTuple

import numpy as np

from .codec import CodedPacket
from .crc import DEFAULT_CRC, CrcSpec, bit_syndromes, crc8_symbols, symbols_to_bits
from .galois import GF256, FieldSpec, rref


class RecoveryError(Exception):
    pass


class NoDependentRow(RecoveryError):
    """Elimination left no all-zero coefficient row."""


class Exhausted(RecoveryError):
    """The flip search hit its cap without an ICRC match."""


class NoSuspects(RecoveryError):
    """The ICRC refutes the segment but no flagged column falls inside it."""


@dataclass(frozen=True)
class RecoveryConfig:
    max_flip_weight: int = 3
    max_trials_per_segment: int = 1 << 20

    def __post_init__(self):
        if self.max_flip_weight < 1 or self.max_trials_per_segment < 1:
            raise ValueError("recovery caps must be positive")


@dataclass(frozen=True)
class BrokenVector:
    columns: tuple[int, ...] = ()

    @classmethod
    def from_row(cls, row) -> "BrokenVector":
        return cls(tuple(int(i) for i in np.flatnonzero(np.asarray(row))))

    def __len__(self):
        return len(self.columns)

    def __contains__(self, j):
        return j in self.columns

    def __iter__(self):
        return iter(self.columns)

    def in_segment(self, k: int, seg_len: int) -> list[int]:
        """Columns of segment k, as offsets within the segment."""
        lo, hi = k * seg_len, (k + 1) * seg_len
        return [j - lo for j in self.columns if lo <= j < hi]


@dataclass
class PacketBuffers:
    valid: list = field(default_factory=list)
    invalid: list = field(default_factory=list)

    def clear(self):
        self.valid.clear()
        self.invalid.clear()


class DependentSet(NamedTuple):
    members: list[int]  # indices into valid + invalid, in buffer order
    broken: BrokenVector
    relation: dict[int, int]  # member -> nonzero weight, sum_k w_k * row_k = 0


# ---------------------------------------------------------------- estimation

def _stack(packets):
    coef = np.stack([p.coefficients for p in packets]).astype(np.uint8)
    sym = np.stack([p.symbols for p in packets]).astype(np.uint8)
    return coef, sym


def estimate(group, fs: FieldSpec = GF256) -> BrokenVector:
    """Flag columns left nonzero in the zero-coefficient row(s) of the reduced group matrix.

    Pivots are restricted to the coefficient block.  If the group carries more
    than one dependency, the flags of every zero-coefficient row are merged.
    """
    coef, sym = _stack(group)
    g = coef.shape[1]
    res = rref(np.hstack([coef, sym]), fs, pivot_cols=g)
    zero = res.zero_rows(g)
    if not zero:
        raise NoDependentRow("no zero-coefficient row after elimination")
    flagged = np.zeros(sym.shape[1], dtype=bool)
    for i in zero:
        flagged |= res.matrix[i, g:] != 0
    return BrokenVector.from_row(flagged)


def group_relation(group, fs: FieldSpec = GF256) -> dict[int, int]:
    """Weights of one linear dependency among the group's coefficient rows."""
    coef = np.stack([p.coefficients for p in group])
    res = rref(coef, fs, track=True)
    zero = res.zero_rows()
    if not zero:
        raise NoDependentRow("group coefficient rows are independent")
    # widest support first: the appended sum row touches every member
    best = max(zero, key=lambda i: len(res.provenance[i]))
    t = res.transform[best]
    return {int(i): int(t[i]) for i in np.flatnonzero(t)}


# ---------------------------------------------------------- dependent sets

class DependencyTracker:
    """Row-by-row Gaussian elimination over coefficient vectors with provenance.

    Each stored row keeps the weights of the original members combined into it,
    so a row that reduces to zero names the dependent set that produced it.
    Members are identified by caller-supplied keys, which survive row swaps.
    """

    def __init__(self, g: int, fs: FieldSpec = GF256):
        self.g, self.fs = g, fs
        self.keys: list = []
        self._slot: dict = {}
        self.rows = np.zeros((0, g), dtype=np.uint8)
        self.trans = np.zeros((0, 0), dtype=np.uint8)
        self.pivots: list[int] = []

    def __len__(self):
        return len(self.pivots)

    def _grow(self, key):
        if key in self._slot:
            raise KeyError(f"duplicate member {key!r}")
        self._slot[key] = len(self.keys)
        self.keys.append(key)
        n = len(self.keys)
        if self.trans.shape[1] < n:
            cap = max(8, 2 * n)
            wider = np.zeros((self.trans.shape[0], cap), dtype=np.uint8)
            wider[:, :self.trans.shape[1]] = self.trans
            self.trans = wider

    def _reduce(self, coef: np.ndarray, t: np.ndarray):
        if self.pivots:
            f = coef[self.pivots]
            nz = np.flatnonzero(f)
            if nz.size:
                mul = self.fs.mul_table
                fz = f[nz][:, None]
                coef ^= np.bitwise_xor.reduce(mul[fz, self.rows[nz]], axis=0)
                t ^= np.bitwise_xor.reduce(mul[fz, self.trans[nz]], axis=0)
        return coef, t

    def probe(self, coef) -> dict | None:
        """Relation that ``coef`` would close, without inserting it."""
        c = np.array(coef, dtype=np.uint8, copy=True)
        t = np.zeros(self.trans.shape[1], dtype=np.uint8)
        c, t = self._reduce(c, t)
        if c.any():
            return None
        rel = {self.keys[i]: int(t[i]) for i in np.flatnonzero(t[:len(self.keys)])}
        return rel

    def add(self, key, coef) -> dict | None:
        """Insert a member; returns its dependency relation (key -> weight) if it reduces to zero.

        A dependent member is recorded but not kept as a pivot row.
        """
        self._grow(key)
        c = np.array(coef, dtype=np.uint8, copy=True)
        t = np.zeros(self.trans.shape[1], dtype=np.uint8)
        t[self._slot[key]] = 1
        c, t = self._reduce(c, t)
        nz = np.flatnonzero(c)
        if nz.size == 0:
            return {self.keys[i]: int(t[i]) for i in np.flatnonzero(t[:len(self.keys)])}
        lead = int(nz[0])
        inv = int(self.fs.inv_table[c[lead]])
        if inv != 1:
            c = self.fs.scale(inv, c)
            t = self.fs.scale(inv, t)
        users = np.flatnonzero(self.rows[:, lead]) if self.pivots else np.zeros(0, int)
        if users.size:
            mul = self.fs.mul_table
            fu = self.rows[users, lead][:, None]
            self.rows[users] ^= mul[fu, c[None, :]]
            self.trans[users] ^= mul[fu, t[None, :]]
        self.rows = np.vstack([self.rows, c[None, :]])
        self.trans = np.vstack([self.trans, t[None, :]])
        self.pivots.append(lead)
        return None


def _relation_broken(relation: dict, symbols_of, fs: FieldSpec) -> BrokenVector:
    keys = list(relation)
    w = np.array([relation[k] for k in keys], dtype=np.uint8)
    rows = np.stack([symbols_of(k) for k in keys])
    return BrokenVector.from_row(fs.combine(w, rows))


def find_dependent_group(buffers: PacketBuffers, fs: FieldSpec = GF256) -> DependentSet | None:
    """Provenance-tracked elimination over the rows of B_valid followed by B_invalid.

    Among the zero-coefficient rows, one whose dependent set holds the most
    invalid packets is reported (ties: the earliest), since only those sets
    can drive a repair.
    """
    rows = list(buffers.valid) + list(buffers.invalid)
    if not rows:
        return None
    n_valid = len(buffers.valid)
    tracker = DependencyTracker(len(rows[0].coefficients), fs)
    best = None
    for i, p in enumerate(rows):
        rel = tracker.add(i, p.coefficients)
        if rel is None:
            continue
        n_inv = sum(1 for k in rel if k >= n_valid)
        if best is None or n_inv > best[0]:
            best = (n_inv, rel)
    if best is None:
        return None
    rel = best[1]
    broken = _relation_broken(rel, lambda k: rows[k].symbols, fs)
    return DependentSet(sorted(rel), broken, rel)


# ---------------------------------------------------------------- correction

@dataclass
class SearchStats:
    trials: int = 0
    weight: int = 0


def _pair_table(syn: np.ndarray):
    n = syn.size
    jj, kk = np.triu_indices(n, 1)  # lexicographic (j, k), j < k
    start = np.concatenate([[0], np.cumsum(np.arange(n - 1, 0, -1))]) if n > 1 else np.zeros(1, int)
    return jj, kk, syn[jj] ^ syn[kk], start


def _search(syn: np.ndarray, target: int, max_weight: int, cap: int, stats: SearchStats):
    """First subset (lexicographic within each weight, weights ascending) whose
    syndromes XOR to ``target``; returns suspect indices or None."""
    n = syn.size
    for w in range(1, min(max_weight, n) + 1):
        if w == 1:
            hit = np.flatnonzero(syn == target)
            if hit.size and stats.trials + hit[0] + 1 <= cap:
                stats.trials += int(hit[0]) + 1
                stats.weight = 1
                return [int(hit[0])]
            stats.trials += n
            if stats.trials >= cap:
                return None
            continue
        jj, kk, ps, start = _pair_table(syn)
        for prefix in combinations(range(n), w - 2):
            first = prefix[-1] + 1 if prefix else 0
            if first >= n - 1:
                continue
            pre = 0
            for i in prefix:
                pre ^= int(syn[i])
            cand = ps[start[first]:]
            hit = np.flatnonzero(cand == (target ^ pre))
            if hit.size and stats.trials + hit[0] + 1 <= cap:
                stats.trials += int(hit[0]) + 1
                stats.weight = w
                h = start[first] + int(hit[0])
                return list(prefix) + [int(jj[h]), int(kk[h])]
            stats.trials += cand.size
            if stats.trials >= cap:
                return None
    return None


def correct_segment(packet: CodedPacket, segment_index: int, broken: BrokenVector,
                    cfg: RecoveryConfig = RecoveryConfig(), crc: CrcSpec = DEFAULT_CRC,
                    stats: SearchStats | None = None) -> np.ndarray:
    """Search bit-flip patterns over the suspect symbols of one refuted segment.

    ``broken`` holds packet-wide column indices; only those inside the segment
    are suspects.  Patterns are tried by increasing Hamming weight, in
    lexicographic order of bit positions within a weight, and the first one the
    segment's ICRC accepts is returned as the corrected segment symbols.
    """
    stats = stats if stats is not None else SearchStats()
    q = packet.q
    seg = packet.segments[segment_index]
    icrc = int(packet.inner_crcs[segment_index])
    cols = broken.in_segment(segment_index, seg.size)
    if not cols:
        raise NoSuspects(f"segment {segment_index} refuted with no flagged column")
    nbits = seg.size * q
    suspect_bits = np.array([c * q + b for c in sorted(cols) for b in range(q)], dtype=np.int64)
    syn = bit_syndromes(nbits, crc)[suspect_bits]
    target = crc8_symbols(seg, q, crc) ^ icrc
    if target == 0:
        return seg.copy()
    found = _search(syn, target, cfg.max_flip_weight, cfg.max_trials_per_segment, stats)
    if found is None:
        raise Exhausted(f"no ICRC match within weight {cfg.max_flip_weight} "
                        f"after {stats.trials} trials")
    bits = symbols_to_bits(seg, q).copy()
    bits[suspect_bits[found]] ^= 1
    fixed = _bits_to_symbols(bits, q)
    assert crc8_symbols(fixed, q, crc) == icrc
    return fixed


def _bits_to_symbols(bits: np.ndarray, q: int) -> np.ndarray:
    if q == 8:
        return np.packbits(bits)
    if q == 1:
        return bits.astype(np.uint8)
    weights = (1 << np.arange(q - 1, -1, -1)).astype(np.uint16)
    return (bits.reshape(-1, q) * weights).sum(axis=1).astype(np.uint8)


def repair_packet(packet: CodedPacket, broken: BrokenVector, cfg: RecoveryConfig,
                  crc: CrcSpec = DEFAULT_CRC) -> CodedPacket | None:
    """Correct every ICRC-refuted segment, then require the OCRC to agree."""
    segs = packet.segments.copy()
    for k in range(packet.s):
        if packet.segment_ok(k, crc):
            continue
        try:
            segs[k] = correct_segment(packet, k, broken, cfg, crc)
        except RecoveryError:
            return None
    fixed = segs.ravel()
    if crc8_symbols(fixed, packet.q, crc) != int(packet.outer_crc):
        return None
    return packet.refreshed(fixed, crc)


@dataclass
class RepairOutcome:
    recovered: dict = field(default_factory=dict)  # member -> recovered packet
    discarded: list = field(default_factory=list)
    reconstructed: list = field(default_factory=list)


def repair_dependent(members: dict, relation: dict, invalid: list, broken: BrokenVector,
                     cfg: RecoveryConfig, fs: FieldSpec = GF256,
                     crc: CrcSpec = DEFAULT_CRC) -> RepairOutcome:
    """Recover the invalid members of one dependent set.

    ``members`` maps keys to packets (valid ones are trusted); ``relation`` holds
    the nonzero weights of the dependency.  Members are searched in order until
    a single one is still unknown; that one is rebuilt from the others through
    the relation, even if its own search already failed.
    """
    out = RepairOutcome()
    pending = [k for k in invalid if k in relation]
    unknown = list(pending)
    known = {k: members[k] for k in relation if k not in unknown}
    while unknown:
        if len(unknown) == 1:
            k = unknown.pop()
            acc = np.zeros_like(members[k].symbols)
            for j, wj in relation.items():
                if j != k:
                    acc ^= fs.scale(wj, known[j].symbols)
            inv = int(fs.inv_table[relation[k]])
            out.recovered[k] = members[k].refreshed(fs.scale(inv, acc), crc)
            out.reconstructed.append(k)
            break
        if not pending:
            break
        k = pending.pop(0)
        fixed = repair_packet(members[k], broken, cfg, crc)
        if fixed is not None:
            out.recovered[k] = known[k] = fixed
            unknown.remove(k)
    out.discarded = [k for k in unknown if k not in out.recovered]
    return out


def recover_group(group, buffers: PacketBuffers | None = None,
                  cfg: RecoveryConfig = RecoveryConfig(), fs: FieldSpec = GF256,
                  crc: CrcSpec = DEFAULT_CRC) -> list[CodedPacket]:
    """Estimate, correct and (when one member remains) reconstruct a received group.

    Recovered packets move to ``buffers.valid``; every invalid member of the
    group leaves ``buffers.invalid`` whether recovered or discarded.
    """
    group = list(group)
    members = dict(enumerate(group))
    invalid = [i for i, p in members.items() if not p.outer_ok(crc)]
    if not invalid:
        return []
    try:
        relation = group_relation(group, fs)
    except NoDependentRow:
        return []
    broken = estimate(group, fs) if len(invalid) >= 2 else BrokenVector()
    outcome = repair_dependent(members, relation, invalid, broken, cfg, fs, crc)
    recovered = [outcome.recovered[k] for k in sorted(outcome.recovered)]
    if buffers is not None:
        ids = {id(group[k]) for k in invalid}
        buffers.invalid[:] = [p for p in buffers.invalid if id(p) not in ids]
        buffers.valid.extend(recovered)
    return recovered
