import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from orcs.bench import (BoundParams, SynthSpec, empirical_split_error, error_probability_bound,
                        generate, m0, random_spec, trial_rng)
from orcs.core import Weights

P = BoundParams(100, 50, 2.0, 2.0, 0.05)


def test_generate_deterministic():
    spec = random_spec(80, 3, 2, 11, outlier_count=4)
    a, b = generate(spec, 5), generate(spec, 5)
    np.testing.assert_array_equal(a[0], b[0])
    assert a[2] == b[2]
    assert not np.array_equal(a[0], generate(spec, 6)[0])
    assert trial_rng(1, 2).random() == trial_rng(1, 2).random()


def test_noiseless_is_piecewise_constant():
    spec = SynthSpec(((0.0,), (5.0,), (1.0,)), (3, 4, 2))
    x, truth, out = generate(spec)
    np.testing.assert_array_equal(x.ravel(), [0, 0, 0, 5, 5, 5, 5, 1, 1])
    assert truth.boundaries == [3, 7] and out == []


def test_spike_changes_exactly_the_outliers():
    base = dict(segment_means=((0.0, 0.0), (3.0, 1.0)), segment_lengths=(50, 50),
                noise="uniform", noise_scale=0.5, seed=3)
    clean, _, _ = generate(SynthSpec(**base))
    x, _, out = generate(SynthSpec(**base, outlier_model="spike", outlier_count=3,
                                   outlier_amplitude=50.0))
    diff = np.flatnonzero(np.any(x != clean, axis=1))
    assert list(diff) == out and len(out) == 3
    np.testing.assert_allclose(np.linalg.norm(x[out] - clean[out], axis=1), 50.0)


def test_spec_validation():
    with pytest.raises(ValueError):
        SynthSpec(((0.0,),), (5,), outlier_model="spike", outlier_count=5)
    with pytest.raises(ValueError):
        SynthSpec(((0.0,), (1.0,)), (5,))
    with pytest.raises(ValueError):
        SynthSpec(((0.0,),), (5,), noise="tgauss", noise_scale=1.0)


def test_bound_examples():
    assert P.C == pytest.approx(0.5)
    assert error_probability_bound(P, 1) == pytest.approx(2 * math.exp(-0.5))
    assert error_probability_bound(P, 1) == pytest.approx(1.2131, abs=1e-4)
    assert error_probability_bound(P, 20) == pytest.approx(9.08e-5, rel=1e-3)
    flat = BoundParams(100, 50, 0.0, 2.0)
    np.testing.assert_array_equal(error_probability_bound(flat, np.arange(1, 50)), 2.0)
    assert m0(flat) == math.inf
    with pytest.raises(ValueError):
        error_probability_bound(P, 50)
    with pytest.raises(ValueError):
        error_probability_bound(P, 0)
    with pytest.raises(ValueError):
        error_probability_bound(P, 3, kind="other")


def test_m0_examples():
    assert m0(P) == pytest.approx(math.log(2000) / 0.5)
    assert m0(P) == pytest.approx(15.2018, abs=1e-4)
    half = BoundParams(100, 50, 2.0, 2.0, 0.025)
    assert m0(half) - m0(P) == pytest.approx(math.log(2) / P.C)
    assert m0(BoundParams(100, 50, 2.0, 2.0, 100.0)) == pytest.approx(0.0, abs=1e-12)


def test_refined_terms_direct_evaluation():
    n, n1, dm, B, m = 100, 50, 2.0, 2.0, 7
    bm = math.exp(-2 * n1 ** 2 * m * dm ** 2 / (B ** 2 * n * (n - m)))
    bp = math.exp(-2 * n1 ** 2 * (2 * (n - n1) - m) ** 2 * dm ** 2
                  / (B ** 2 * n * (m * (n - m - 4 * n1) + 4 * n1 * (n - n1))))
    assert error_probability_bound(P, m, "minus") == pytest.approx(bm)
    assert error_probability_bound(P, m, "plus") == pytest.approx(bp)


@settings(max_examples=300, deadline=None)
@given(st.integers(4, 400), st.floats(0.05, 0.95), st.floats(0.01, 1.0),
       st.floats(0.1, 5.0), st.floats(0.5, 10.0))
def test_plus_below_minus(n, f1, fm, dm, B):
    n1 = min(max(1, int(f1 * n)), n - 2)
    m = min(max(1, int(fm * (n - n1))), n - n1 - 1)
    p = BoundParams(n, n1, dm, B)
    bp, bm = error_probability_bound(p, m, "plus"), error_probability_bound(p, m, "minus")
    assert bp < bm or bm == 0.0


def test_noiseless_monte_carlo_is_error_free():
    spec = SynthSpec(((0.0,), (2.0,)), (50, 50))
    curve = empirical_split_error(spec, trials=20)
    assert np.all(curve.m_star == 0)
    assert np.all(curve.empirical_p == 0) and curve.p_far == 0.0


def test_monte_carlo_respects_bound():
    spec = SynthSpec(((0.0,), (2.0,)), (50, 50), noise="uniform", noise_scale=1.0, seed=1)
    curve = empirical_split_error(spec, trials=2000, m_max=40)
    assert curve.m0 == pytest.approx(15.2018, abs=1e-4)
    assert curve.p_far <= 0.05
    bound = np.minimum(curve.bound_simple, 1.0)
    sigma = np.sqrt(bound * (1 - bound) / curve.trials)
    assert np.all(curve.empirical_p <= bound + 3 * sigma + 1e-12)
    header = curve.to_csv().splitlines()[0]
    assert header == "m,empirical_p,bound_simple,bound_Bminus,bound_Bplus"


def test_threads_do_not_change_monte_carlo():
    spec = SynthSpec(((0.0,), (1.0,)), (30, 30), noise="uniform", noise_scale=1.0, seed=9)
    a = empirical_split_error(spec, trials=300, chunk=100, threads=1)
    b = empirical_split_error(spec, trials=300, chunk=100, threads=3)
    np.testing.assert_array_equal(a.m_star, b.m_star)
    np.testing.assert_array_equal(a.empirical_p, b.empirical_p)


def test_multivariate_bound_with_dimension_factor():
    d = 3
    spec = SynthSpec(((0.0,) * d, (1.2, 1.2, 1.2)), (50, 50), noise="uniform",
                     noise_scale=1.0, seed=2)
    # per-coordinate gap 1.2 with B = 2; union over coordinates inflates by d
    p = BoundParams(100, 50, 1.2, 2.0)
    curve = empirical_split_error(spec, trials=1000, m_max=40, bound=p)
    bound = np.minimum(d * curve.bound_simple, 1.0)
    sigma = np.sqrt(bound * (1 - bound) / curve.trials)
    assert np.all(curve.empirical_p <= bound + 3 * sigma + 1e-12)
    assert curve.p_far <= d * p.delta


def test_weighted_split_errs_less_on_unequal_segments():
    spec = SynthSpec(((0.0,), (1.0,)), (20, 80), noise="uniform", noise_scale=1.0, seed=4)
    flat = empirical_split_error(spec, Weights("power", 0.0), trials=2000, m_max=10)
    half = empirical_split_error(spec, Weights("power", 0.5), trials=2000, m_max=10)
    assert np.all(half.empirical_p[:5] <= flat.empirical_p[:5] + 0.01)

