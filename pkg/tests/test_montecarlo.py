import numpy as np
import pytest

from flyprac import analysis as an
from flyprac import montecarlo as mc


def test_symbol_ok(rng):
    est = mc.symbol_ok_frequency(1e-2, 8, 200_000, rng)
    assert abs(est.value - an.p_symbol_ok(1e-2, 8)) < 4 * est.stderr


@pytest.mark.parametrize("b", [1, 8])
def test_column_false_positive_high_noise(rng, b):
    eps, R = 5e-2, 10
    est = mc.column_false_positive_frequency(eps, R, b, 400_000, rng, chunk=1 << 16)
    assert abs(est.value - an.p_fpe_round(eps, R, b)) < 4 * est.stderr


def test_estimation_coverage(rng):
    est = mc.estimation_coverage_frequency(1e-2, 10, 8, 20, 20_000, rng)
    assert abs(est.value - an.p_no_estimation_failure(1e-2, 10, 8, 20)) < 4 * est.stderr


def test_undetected_plain_vs_formula(rng):
    # at a large error rate plain sampling sees the event often enough
    est = mc.undetected_frequency(15, 0.2, 400_000, rng)
    assert abs(est.value - an.p_undetected(15, 0.2)) < 4 * est.stderr


def test_undetected_stratified(rng):
    val = mc.undetected_stratified(15, 0.2, 100_000, rng)
    assert val == pytest.approx(an.p_undetected(15, 0.2), rel=0.05)


def test_segment_recovery_noiseless_and_small(rng):
    assert mc.segment_recovery_frequency(15, 0.0, 100, rng).value == 1.0
    with pytest.raises(ValueError):
        mc.segment_recovery_frequency(8, 1e-3, 10, rng)
    est = mc.segment_recovery_frequency(15, 1e-2, 20_000, rng)
    assert 0.8 < est.value <= 1.0


def test_estimate_stderr():
    assert mc.Estimate(0.5, 50, 100).stderr == pytest.approx(0.05)
    assert mc.Estimate(0.0, 0, 0).stderr == float("inf")
