import dataclasses
import io

import numpy as np
import pytest

from flyprac.codec import ConfigError
from flyprac.harness import (METRIC_COLUMNS, NONE, PARAM_COLUMNS, SNC, TWO_HOP, ScenarioConfig,
                             cell_seed, grid_cells, run, run_point_to_point, run_snc, run_trial,
                             run_trials, run_two_hop, sweep)

SMALL = dict(g=20, payload_bytes=40, R=5, trials=3)


def test_noiseless_counts():
    sc = ScenarioConfig(g=50, payload_bytes=40, R=10, epsilon=0.0, trials=2)
    m = run(sc)
    assert m.total_transmissions == 55  # g + floor((g-1)/(R-1))
    assert m.corrupted == 0 and m.decode_success == 1.0
    m = run(dataclasses.replace(sc, recovery=NONE))
    assert m.total_transmissions == 50
    # dense rows almost always decode at full rank; a few may resolve one packet early
    assert max(m.d_i) == 50.0 and min(m.d_i) >= 48.0 and len(m.d_i) == 50


@pytest.mark.parametrize("R", [3, 4, 7])
def test_noiseless_formula(R):
    g = 17
    m = run(ScenarioConfig(g=g, payload_bytes=16, R=R, epsilon=0.0, trials=1))
    assert m.total_transmissions == g + (g - 1) // (R - 1)


def test_determinism_and_workers():
    sc = ScenarioConfig(**SMALL, epsilon=1e-3, master_seed=7)
    a = run_trials(sc)
    b = run_trials(sc, workers=2)
    for x, y in zip(a, b):
        assert x.total_transmissions == y.total_transmissions
        assert np.array_equal(x.d, y.d)
    assert run(sc) == run(sc)


def test_invariants():
    for topo in ("point-to-point", TWO_HOP):
        sc = ScenarioConfig(**SMALL, topology=topo, epsilon=2e-3, s=2)
        for t in range(4):
            r = run_trial(sc, t)
            assert r.recovered + r.false_recoveries <= r.corrupted
            assert r.pending <= r.corrupted
            assert r.add <= r.total_transmissions
            assert r.source_transmissions <= r.total_transmissions
            assert np.all(r.d >= 1)


def test_two_hop_counts_both_links():
    sc = ScenarioConfig(**SMALL, topology=TWO_HOP, epsilon=0.0)
    m = run_two_hop(sc)
    assert m.total_transmissions > m.source_transmissions
    m = run_two_hop(dataclasses.replace(sc, relay_recovery=False))
    assert m.total_transmissions == 2 * m.source_transmissions


def test_snc_runs():
    sc = ScenarioConfig(**SMALL, mode=SNC, w=2, epsilon=1e-3)
    m = run_snc(sc)
    assert m.decode_success > 0 and m.add <= m.total_transmissions


def test_runner_mismatch():
    sc = ScenarioConfig(**SMALL)
    with pytest.raises(ConfigError):
        run_two_hop(sc)
    with pytest.raises(ConfigError):
        run_snc(sc)
    with pytest.raises(ConfigError):
        run_point_to_point(dataclasses.replace(sc, topology=TWO_HOP))


@pytest.mark.parametrize("kw", [
    dict(topology="mesh"), dict(mode="lt"), dict(recovery="maybe"), dict(mode=SNC),
    dict(trials=0), dict(data_rate=0.0), dict(payload_bytes=0), dict(epsilon=2.0),
    dict(epsilon2=-1.0), dict(R=1), dict(g=0),
])
def test_config_errors(kw):
    with pytest.raises(ConfigError):
        ScenarioConfig(**kw)


def test_cell_seeds_distinct():
    seeds = {cell_seed(3, i) for i in range(100)}
    assert len(seeds) == 100 and cell_seed(3, 5) == cell_seed(3, 5)


def test_grid_order_and_errors():
    base = ScenarioConfig(**SMALL)
    cells = grid_cells(base, {"R": [3, 5], "s": [1, 2]})
    assert [(c.R, c.s) for c in cells] == [(3, 1), (3, 2), (5, 1), (5, 2)]
    assert grid_cells(base, {}) == [] and grid_cells(base, {"R": []}) == []
    with pytest.raises(ConfigError):
        grid_cells(base, {"colour": [1]})


def test_sweep_csv():
    base = ScenarioConfig(**{**SMALL, "trials": 2}, epsilon=1e-3, master_seed=11)
    header = ",".join(PARAM_COLUMNS + METRIC_COLUMNS) + "\n"
    assert sweep(base, {}) == header
    text = sweep(base, {"R": [3, 5], "s": [1, 2]})
    assert text.startswith(header) and text.count("\n") == 5
    buf = io.StringIO()
    again = sweep(base, {"R": [3, 5], "s": [1, 2]}, stream=buf)
    assert again == text == buf.getvalue()
