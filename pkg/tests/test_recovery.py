import itertools

import numpy as np
import pytest

from flyprac.codec import CodedPacket, GenerationConfig, encode_group, random_originals
from flyprac.crc import bit_syndromes
from flyprac.galois import GF256, rank
from flyprac.recovery import (BrokenVector, DependencyTracker, Exhausted, NoDependentRow,
                              NoSuspects, PacketBuffers, RecoveryConfig, SearchStats,
                              _search, correct_segment, estimate, find_dependent_group,
                              group_relation, recover_group, repair_packet)


def corrupt(pkt, col, mask):
    bad = pkt.copy()
    bad.symbols[col] ^= mask
    return bad


def make_group(rng, g=8, l=16, R=5, s=1):
    cfg = GenerationConfig(g=g, l=l, s=s, R=R)
    orig = random_originals(cfg, rng)
    return cfg, orig, encode_group(orig, cfg, rng).packets


def test_error_free_group_has_no_flags(rng):
    _, _, grp = make_group(rng)
    assert len(estimate(grp)) == 0


def test_single_corrupted_symbol(rng):
    for _ in range(200):
        _, _, grp = make_group(rng)
        k, j = rng.integers(5), rng.integers(16)
        grp[k] = corrupt(grp[k], j, int(rng.integers(1, 256)))
        assert estimate(grp).columns == (j,)


def test_constructed_cancellation(rng):
    _, _, grp = make_group(rng)
    grp[0] = corrupt(grp[0], 3, 0x10)
    grp[2] = corrupt(grp[2], 3, 0x10)
    grp[1] = corrupt(grp[1], 7, 0x01)
    assert estimate(grp).columns == (7,)


def test_flags_are_summed_error_patterns(rng):
    for _ in range(300):
        _, _, clean = make_group(rng, R=int(rng.integers(3, 7)))
        grp = [p.copy() for p in clean]
        err = np.zeros((len(grp), 16), dtype=np.uint8)
        for _ in range(int(rng.integers(1, 6))):
            k, j = rng.integers(len(grp)), rng.integers(16)
            err[k, j] ^= np.uint8(1 << int(rng.integers(8)))
        for k in range(len(grp)):
            grp[k].symbols ^= err[k]
        expect = tuple(np.flatnonzero(np.bitwise_xor.reduce(err, axis=0)))
        assert estimate(grp).columns == expect


def test_independent_rows_raise(rng):
    _, _, grp = make_group(rng)
    with pytest.raises(NoDependentRow):
        estimate(grp[:4])
    with pytest.raises(NoDependentRow):
        group_relation(grp[:4])


def test_group_relation_is_all_ones(rng):
    _, _, grp = make_group(rng, R=6)
    assert group_relation(grp) == {i: 1 for i in range(6)}


def test_broken_vector_segments():
    bv = BrokenVector((1, 4, 5, 9))
    assert bv.in_segment(0, 5) == [1, 4]
    assert bv.in_segment(1, 5) == [0, 4]
    assert 9 in bv and len(bv) == 4
    assert BrokenVector.from_row([0, 3, 0, 1]).columns == (1, 3)


def test_search_order():
    syn = np.array([5, 9, 6, 10], dtype=np.uint8)
    st = SearchStats()
    assert _search(syn, 9, 3, 1 << 10, st) == [1]  # first weight-1 hit wins
    assert st.weight == 1 and st.trials == 2
    st = SearchStats()
    assert _search(syn, 5 ^ 6, 3, 1 << 10, st) == [0, 2]
    st = SearchStats()
    assert _search(syn, 1, 4, 1 << 10, st) is None
    st = SearchStats()
    assert _search(syn, 5 ^ 6, 3, 3, st) is None  # cap stops the search


def test_search_weight_then_lexicographic(rng):
    """Brute-force oracle over all subsets in the declared order."""
    for _ in range(100):
        n = int(rng.integers(2, 9))
        syn = rng.integers(1, 256, n).astype(np.uint8)
        target = int(rng.integers(1, 256))
        expect = None
        for w in range(1, 4):
            for combo in itertools.combinations(range(n), w):
                if np.bitwise_xor.reduce(syn[list(combo)]) == target:
                    expect = list(combo)
                    break
            if expect:
                break
        assert _search(syn, target, 3, 1 << 20, SearchStats()) == expect


def test_correct_single_bit(rng):
    _, _, grp = make_group(rng, s=2)
    pkt = grp[0]
    bad = corrupt(pkt, 11, 0x04)
    fixed = correct_segment(bad, 1, BrokenVector((2, 11)))
    assert np.array_equal(fixed, pkt.segments[1])
    with pytest.raises(NoSuspects):
        correct_segment(bad, 1, BrokenVector((2,)))


def test_correct_two_bits_in_one_symbol(rng):
    pkt = CodedPacket.build(0, np.ones(1, np.uint8), np.arange(10, dtype=np.uint8), 1)
    bad = corrupt(pkt, 4, 0x21)
    fixed = correct_segment(bad, 0, BrokenVector((4,)), RecoveryConfig(max_flip_weight=2))
    assert np.array_equal(fixed, pkt.symbols)


def test_exhausted_when_truth_is_outside(rng):
    pkt = CodedPacket.build(0, np.ones(1, np.uint8), np.zeros(20, dtype=np.uint8), 1)
    bad = corrupt(pkt, 0, 0x80)
    syn = bit_syndromes(160)
    target = int(syn[0])
    # pick a suspect column none of whose single bits match the real error
    col = next(c for c in range(1, 20) if target not in syn[8 * c:8 * c + 8])
    with pytest.raises(Exhausted):
        correct_segment(bad, 0, BrokenVector((col,)), RecoveryConfig(max_flip_weight=1))


def test_recover_two_invalid(rng):
    for _ in range(30):
        _, _, clean = make_group(rng, s=2)
        grp = [p.copy() for p in clean]
        grp[1] = corrupt(grp[1], 2, 0x40)
        grp[3] = corrupt(grp[3], 13, 0x02)
        buf = PacketBuffers(valid=[p for i, p in enumerate(grp) if i not in (1, 3)],
                            invalid=[grp[1], grp[3]])
        out = recover_group(grp, buf)
        assert len(out) == 2
        assert out[0].same_content(clean[1]) and out[1].same_content(clean[3])
        assert not buf.invalid and len(buf.valid) == 5
        assert all(p.all_ok() for p in out)


def test_single_invalid_is_reconstructed(rng):
    _, _, clean = make_group(rng)
    grp = [p.copy() for p in clean]
    grp[4].symbols[:] ^= 0xFF  # hopeless damage, but the others pin it down
    out = recover_group(grp)
    assert len(out) == 1 and out[0].same_content(clean[4])


def test_cancelled_column_leads_to_discard(rng):
    _, _, clean = make_group(rng)
    grp = [p.copy() for p in clean]
    grp[0] = corrupt(grp[0], 3, 0x10)
    grp[2] = corrupt(grp[2], 3, 0x10)
    assert recover_group(grp) == []


def test_recovered_packets_pass_all_crcs(rng):
    cfg = GenerationConfig(g=10, l=40, s=4, R=6)
    orig = random_originals(cfg, rng)
    n_out = 0
    for _ in range(60):
        grp = [p.copy() for p in encode_group(orig, cfg, rng).packets]
        for k in range(6):
            if rng.random() < 0.5:
                grp[k].symbols[rng.integers(40)] ^= np.uint8(1 << int(rng.integers(8)))
        for p in recover_group(grp):
            assert p.all_ok()
            n_out += 1
    assert n_out > 0


def test_repair_packet_requires_outer_crc(rng):
    pkt = CodedPacket.build(0, np.ones(1, np.uint8), np.arange(8, dtype=np.uint8), 2)
    bad = corrupt(pkt, 1, 0x01)
    assert repair_packet(bad, BrokenVector((1,)), RecoveryConfig()).same_content(pkt)
    worse = bad.copy()
    worse.outer_crc ^= 1
    assert repair_packet(worse, BrokenVector((1,)), RecoveryConfig()) is None


def test_tracker_relation_combines_to_zero(rng):
    for _ in range(50):
        g = 6
        tr = DependencyTracker(g)
        rows = {}
        rel = None
        for key in range(g + 1):
            if key < g and rng.random() < 0.3 and rows:
                ks = list(rows)
                c = GF256.combine(GF256.random(rng, len(ks), nonzero=True), np.stack([rows[k] for k in ks]))
            else:
                c = GF256.random(rng, g)
            if not c.any():
                continue
            probe = tr.probe(c)
            rows[key] = c
            rel = tr.add(key, c)
            assert (probe is None) == (rel is None) or rel is not None
            if rel is not None:
                acc = np.zeros(g, np.uint8)
                for k, w in rel.items():
                    acc ^= GF256.scale(w, rows[k])
                assert not acc.any() and key in rel
                break
        assert rel is not None  # g+1 rows in dimension g always close a dependency


def test_tracker_rejects_duplicate_keys():
    tr = DependencyTracker(3)
    tr.add("a", np.array([1, 0, 0], np.uint8))
    with pytest.raises(KeyError):
        tr.add("a", np.array([0, 1, 0], np.uint8))


def test_find_dependent_group_on_full_group(rng):
    _, _, grp = make_group(rng)
    bad = [p.copy() for p in grp]
    bad[1] = corrupt(bad[1], 0, 1)
    bad[2] = corrupt(bad[2], 5, 2)
    buf = PacketBuffers(valid=[bad[0], bad[3], bad[4]], invalid=[bad[1], bad[2]])
    ds = find_dependent_group(buf)
    assert sorted(ds.members) == [0, 1, 2, 3, 4]
    assert ds.broken.columns == (0, 5)


def test_find_dependent_group_pigeonhole(rng):
    g = 7
    pk = [CodedPacket.build(0, GF256.random(rng, g), GF256.random(rng, 4), 1) for _ in range(g + 1)]
    assert find_dependent_group(PacketBuffers(valid=pk[:g], invalid=pk[g:])) is not None
    assert find_dependent_group(PacketBuffers(valid=pk[:3])) is None
    assert find_dependent_group(PacketBuffers()) is None


def test_algorithm1_against_subset_rank_oracle(rng):
    g, hits = 10, 0
    for _ in range(300):
        n = int(rng.integers(4, 9))
        pk = []
        for _ in range(n):
            c = np.zeros(g, np.uint8)
            c[rng.choice(g, 2, replace=False)] = GF256.random(rng, 2, nonzero=True)
            pk.append(CodedPacket.build(0, c, GF256.random(rng, 4), 1))
        split = int(rng.integers(0, n + 1))
        buf = PacketBuffers(valid=pk[:split], invalid=pk[split:])
        ds = find_dependent_group(buf)
        rows = np.stack([p.coefficients for p in pk])
        if ds is None:
            assert rank(rows) == n  # no dependency anywhere
            continue
        hits += 1
        assert len(ds.members) <= 8
        sub = rows[ds.members]
        assert rank(sub) < len(ds.members)
        acc = np.zeros(g, np.uint8)
        for k, w in ds.relation.items():
            acc ^= GF256.scale(w, rows[k])
        assert not acc.any()
    assert hits > 20
