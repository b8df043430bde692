import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import nbinom

from gtnb import exact, negbin
from gtnb.core import GroupTestInstance
from gtnb.errors import DegenerateError
from gtnb.negbin import NegBinParams, Provenance

REF = GroupTestInstance(500, 10, 0.1, 100)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.05, 50.0), st.floats(0.02, 0.98))
def test_pmf_matches_scipy(r, q):
    params = NegBinParams(r, q)
    z = np.arange(60)
    np.testing.assert_allclose(negbin.nb_pmf(params, z), nbinom.pmf(z, r, q), rtol=1e-9, atol=1e-300)


@pytest.mark.parametrize("s", range(0, 6))
def test_falling_moment_matches_summation(s):
    params = NegBinParams(3.2, 0.35)
    z = np.arange(2000.0)
    w = negbin.nb_pmf(params, z)
    for j in range(s):
        w = w * (z - j)
    assert negbin.nb_falling_moment(params, s) == pytest.approx(w.sum(), rel=1e-10)


def test_params_validation():
    for r, q in [(0, 0.5), (-1, 0.5), (1, 0.0), (1, 1.0), (math.inf, 0.5)]:
        with pytest.raises(ValueError):
            NegBinParams(r, q)
    p = NegBinParams(2.0, 1.0, log1m_q=-60.0)
    assert p.mean == pytest.approx(2.0 * math.exp(-60.0))


def test_fit_reference_instance():
    params = negbin.fit_moment_matched(REF)
    assert params.provenance is Provenance.MOMENT_MATCHED
    assert params.r == pytest.approx(3.6614, abs=1e-4)
    assert params.mean == pytest.approx(exact.mean_G(REF), rel=1e-12)
    assert negbin.nb_falling_moment(params, 2) == pytest.approx(exact.falling_moment_G(REF, 2), rel=1e-12)


def test_fit_matches_two_moments_when_q_is_near_one():
    inst = GroupTestInstance(5, 1, 0.1, 1000)
    params = negbin.fit_moment_matched(inst)
    for s in (1, 2):
        assert negbin.nb_falling_moment(params, s) == pytest.approx(exact.falling_moment_G(inst, s), rel=1e-10)


def test_fit_degenerate_cases():
    with pytest.raises(DegenerateError):
        negbin.fit_moment_matched(GroupTestInstance(3, 2, 0.5, 10))
    # one test: G is binomial-like and underdispersed
    with pytest.raises(DegenerateError, match="Poisson"):
        negbin.fit_moment_matched(GroupTestInstance(50, 3, 0.2, 0))


def test_comparison_table_reference_row():
    row = negbin.comparison_table(REF, 3)[2]
    assert row.s == 3
    assert row.X == pytest.approx(6 * 14.08882**3, rel=1e-5)
    assert row.ordered()
    assert negbin.comparison_table(REF, 0) == []


def test_moment_ratio_bounds_reference():
    for s in range(1, 7):
        b = negbin.moment_ratio_bounds(REF, s)
        assert b.holds()
        assert not b.vacuous
    with pytest.raises(ValueError):
        negbin.moment_ratio_bounds(REF, 0)


def test_kl_bernoulli():
    assert negbin.kl_bernoulli(0.3, 0.3) == 0.0
    assert negbin.kl_bernoulli(0.0, 0.5) == pytest.approx(math.log(2))
    assert negbin.kl_bernoulli(0.9, 0.1) > 0
    with pytest.raises(ValueError):
        negbin.kl_bernoulli(0.2, 1.0)


def test_tail_bound_vacuous_below_mean():
    params = NegBinParams(4.0, 0.2)
    tb = negbin.nb_tail_bound(params, params.mean)
    assert tb.vacuous and tb.value == 1.0


def test_tail_bound_dominates_on_grid():
    rng = random.Random(5)
    for _ in range(300):
        params = NegBinParams(rng.uniform(0.1, 100.0), rng.uniform(0.01, 0.99))
        g = math.ceil(params.mean * rng.uniform(1.01, 3.0) + 0.5)
        assert negbin.nb_tail_bound(params, g).value >= nbinom.sf(g - 1, params.r, params.q) * (1 - 1e-10)


def test_truncation_and_sf():
    params = negbin.fit_moment_matched(REF)
    zstar = negbin.nb_truncation_point(params)
    assert nbinom.sf(zstar - 1, params.r, params.q) < 1e-12
    pmf = negbin.nb_pmf_truncated(params)
    assert pmf.sum() == pytest.approx(1.0, abs=1e-11)
    for x in (0, 10, 40, 80):
        assert negbin.nb_sf(params, x) == pytest.approx(nbinom.sf(x, params.r, params.q), rel=1e-8, abs=1e-13)
    assert negbin.nb_sf(params, -1) == 1.0


def test_second_moment_ratio_matches_moments():
    m1, m2 = exact.falling_moment_G(REF, 1), exact.falling_moment_G(REF, 2)
    assert negbin.second_moment_ratio(REF) == pytest.approx(m2 / m1**2, rel=1e-12)
