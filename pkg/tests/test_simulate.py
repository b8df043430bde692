import math

import numpy as np
import pytest

from gtnb import exact, simulate
from gtnb.core import GroupTestInstance
from gtnb.simulate import EmpiricalDist, Engine, SimulationConfig

REF = GroupTestInstance(500, 10, 0.1, 100)


def test_deterministic_and_worker_independent():
    cfg = SimulationConfig(REF, 20_000, 3, Engine.MIXTURE)
    a = simulate.simulate_G(cfg)
    assert a == simulate.simulate_G(cfg, workers=4)
    assert a != simulate.simulate_G(SimulationConfig(REF, 20_000, 4))


def test_matrix_engine_worker_independent():
    inst = GroupTestInstance(60, 3, 0.3, 10)
    cfg = SimulationConfig(inst, 9000, 1, "matrix")
    assert simulate.simulate_G(cfg) == simulate.simulate_G(cfg, workers=3)


def test_prefix_blocks_are_shared():
    # the first block of a longer run is the same draw
    small = simulate.simulate_G(SimulationConfig(REF, simulate.BLOCK, 9))
    big = simulate.simulate_G(SimulationConfig(REF, 2 * simulate.BLOCK, 9))
    assert np.all(big.counts[: small.counts.size] >= small.counts)


@pytest.mark.parametrize("engine", list(Engine))
def test_engines_match_exact_pmf(engine):
    inst = GroupTestInstance(40, 3, 0.25, 12)
    d = simulate.simulate_G(SimulationConfig(inst, 40_000, 5, engine))
    pmf = exact.exact_pmf_G(inst)
    assert simulate.tv_distance(d.probs, pmf) < 0.02
    se = math.sqrt(d.variance / d.trials)
    assert abs(d.mean - exact.mean_G(inst)) < 4 * se


def test_zero_tests_matrix_engine():
    inst = GroupTestInstance(10, 2, 0.5, 0)
    d = simulate.simulate_G(SimulationConfig(inst, 100, 0, Engine.MATRIX))
    assert d.counts[-1] == 100


def test_empirical_moments():
    d = EmpiricalDist(np.array([1, 2, 3, 4]), 10)
    assert d.mean == pytest.approx(2.0)
    assert d.variance == pytest.approx(1.0)
    assert simulate.empirical_falling_moment(d, 2) == pytest.approx((2 * 3 + 6 * 4) / 10)
    assert d.to_csv().splitlines()[0] == "g,count,empirical_prob"
    with pytest.raises(ValueError):
        EmpiricalDist(np.array([1, 2]), 4)


def test_config_validation():
    with pytest.raises(ValueError):
        SimulationConfig(REF, 0, 1)
    with pytest.raises(ValueError):
        SimulationConfig(REF, 10, -1)
    with pytest.raises(ValueError):
        SimulationConfig(REF, 10, 1, "bogus")


def test_tv_distance():
    assert simulate.tv_distance([0.5, 0.5], [0.5, 0.5]) == 0.0
    assert simulate.tv_distance([1.0], [0.0, 1.0]) == 1.0
    assert simulate.tv_distance([0.2, 0.8], [0.5, 0.5]) == pytest.approx(0.3)
    with pytest.raises(ValueError):
        simulate.tv_distance([0.5, 0.6], [1.0])


def test_two_stage_error_estimate():
    inst = GroupTestInstance(500, 10, 0.1, 0)
    est = simulate.simulate_two_stage_error(inst, 80, 40, 50_000, 2)
    pmf = exact.exact_pmf_G(inst.with_tests(80))
    truth = pmf[31:].sum()
    assert abs(est.rate - truth) < 4 * max(est.se, 1e-4)


def test_failure_from_dist_edges():
    d = EmpiricalDist(np.array([5, 3, 2]), 10)
    assert simulate.failure_from_dist(d, 1, 1).failures == 5  # G > 0
    assert simulate.failure_from_dist(d, 1, 10).failures == 0


def test_chi2_detects_difference_and_accepts_same():
    a = simulate.simulate_G(SimulationConfig(REF, 30_000, 1))
    b = simulate.simulate_G(SimulationConfig(REF, 30_000, 2))
    c = simulate.simulate_G(SimulationConfig(REF.with_tests(90), 30_000, 3))
    assert simulate.chi2_two_sample(a, b).pvalue > 1e-4
    assert simulate.chi2_two_sample(a, c).pvalue < 1e-10
    one = EmpiricalDist(np.array([5]), 5)
    assert simulate.chi2_two_sample(one, one).pvalue == 1.0
