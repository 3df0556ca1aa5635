import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize, minimize_scalar

from orcs.bench import generate, random_spec
from orcs.core import SolverConfig
from orcs.path import (PathGrid, estimate_outlier_count, gamma_star, grid_values,
                       huber_location, lambda_star_given_gamma, sweep)
from orcs.prox import prox, prox_l2
from orcs.solver import solve_mu, solve_orcs
from orcs.split import best_split


def test_gamma_star_examples():
    assert gamma_star([0, 0, 3]) == (pytest.approx(2.0), 2)
    assert gamma_star([4.0] * 5) == (0.0, 0)
    assert gamma_star([-1, 1]) == (pytest.approx(1.0), 0)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_gamma_star_is_max_deviation(seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(int(rng.integers(1, 50)), int(rng.integers(1, 4))))
    dev = [np.sqrt(((row - x.mean(0)) ** 2).sum()) for row in x]
    g, i = gamma_star(x)
    assert g == pytest.approx(max(dev), rel=1e-12)
    assert i == int(np.argmax(dev))


def test_lambda_star_example_against_scalar_oracle():
    x = np.array([0, 0, 0, 6, 6, 6, 60], dtype=float)
    gamma = 10.0
    # one segment, scalar data: mu minimizes the Huber loss
    huber = lambda m: np.where(np.abs(x - m) <= gamma, 0.5 * (x - m) ** 2,
                               gamma * np.abs(x - m) - 0.5 * gamma ** 2).sum()
    m = minimize_scalar(huber, bounds=(x.min(), x.max()), method="bounded",
                        options={"xatol": 1e-12}).x
    z = prox_l2((x - m)[:, None], gamma)
    ref = best_split(x[:, None] - z).lambda_star
    assert lambda_star_given_gamma(x, gamma) == pytest.approx(ref, rel=1e-8)
    assert z[6, 0] > 0 and np.all(z[:6] == 0)


def test_lambda_star_limits():
    x, _, _ = generate(random_spec(60, 3, 2, 1, outlier_count=3))
    g, _ = gamma_star(x)
    assert lambda_star_given_gamma(x, 1.5 * g) == best_split(x).lambda_star
    assert lambda_star_given_gamma(x, 1e-9) < 1e-6
    with pytest.raises(ValueError):
        lambda_star_given_gamma(x, 0.0)


def test_huber_location_converges():
    mu, z, ok = huber_location([0, 1, 2, 100], 1.0)
    assert ok
    assert np.allclose(mu, np.mean(np.array([0, 1, 2, 100.0])[:, None] - z, axis=0))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.005, 1.0), st.sampled_from([1, 2]))
def test_huber_location_matches_minimizer(seed, frac, q):
    rng = np.random.default_rng(seed)
    x = rng.normal(0, 2, (int(rng.integers(2, 80)), int(rng.integers(1, 4))))
    gamma = frac * gamma_star(x)[0]
    mu, z, ok = huber_location(x, gamma, q)
    assert ok
    np.testing.assert_allclose(mu, (x - prox(x - mu, gamma, q)).mean(0), atol=1e-10 * np.abs(x).max())

    def f(m):
        r = x - m
        if q == 1:
            a = np.abs(r)
            return np.where(a > gamma, gamma * a - 0.5 * gamma ** 2, 0.5 * a * a).sum()
        a = np.linalg.norm(r, axis=1)
        return np.where(a > gamma, gamma * a - 0.5 * gamma ** 2, 0.5 * a * a).sum()
    ref = minimize(f, np.median(x, axis=0), method="Nelder-Mead",
                   options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 20000})
    assert f(mu) <= ref.fun + 1e-9 * max(1.0, ref.fun)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.05, 0.95))
def test_critical_values(seed, frac):
    x, _, _ = generate(random_spec(60, 3, 2, int(seed % 10**6), outlier_count=4))
    g, _ = gamma_star(x)
    lam = best_split(x).lambda_star
    # gamma* is the critical value of the single-segment regime
    assert len(solve_orcs(x, SolverConfig(lam=(1 + frac) * lam, gamma=1.001 * g)).outliers) == 0
    # below lambda* the threshold is the largest residual of the outlier-free fit
    r = np.linalg.norm(x - solve_mu(x, frac * lam).mu, axis=1).max()
    assert len(solve_orcs(x, SolverConfig(lam=frac * lam, gamma=1.001 * r)).outliers) == 0
    # above lambda*(gamma) a single segment remains
    gamma = frac * g
    ls = lambda_star_given_gamma(x, gamma)
    sol = solve_orcs(x, SolverConfig(lam=1.01 * ls, gamma=gamma))
    assert sol.segmentation.n_segments == 1


def test_grid_values_shape_and_order():
    x, _, _ = generate(random_spec(50, 2, 1, 0))
    gs, ls = grid_values(x, (4, 6))
    assert ls.shape == (4, 6)
    assert np.all(np.diff(gs) > 0) and gs[-1] < gamma_star(x)[0]
    assert np.all(np.diff(ls, axis=1) > 0)
    with pytest.raises(ValueError):
        grid_values(x, (0, 3))


def test_sweep_one_cell():
    x, _, _ = generate(random_spec(40, 2, 2, 3, outlier_count=2))
    grid = sweep(x, (1, 1))
    g = gamma_star(x)[0] / 2
    assert grid.gamma_values[0] == pytest.approx(g)
    assert grid.lambda_values[0, 0] == pytest.approx(lambda_star_given_gamma(x, g) / 2)
    assert grid.shape == (1, 1) and grid.converged.all()
    sol = solve_orcs(x, SolverConfig(lam=grid.lambda_values[0, 0], gamma=g))
    assert grid.segments[0, 0] == sol.segmentation.n_segments
    assert grid.outliers[0, 0] == len(sol.outliers)
    lines = grid.to_csv().splitlines()
    assert lines[0] == "gamma,lambda,segments,outliers,objective,status"
    assert len(lines) == 2 and lines[1].endswith(",ok")


def test_sweep_warm_start_agrees_with_cold():
    x, _, _ = generate(random_spec(60, 3, 2, 7, outlier_count=5))
    a, b = sweep(x, (3, 4), warm=True), sweep(x, (3, 4), warm=False)
    np.testing.assert_array_equal(a.segments, b.segments)
    np.testing.assert_array_equal(a.outliers, b.outliers)
    np.testing.assert_allclose(a.objective, b.objective, rtol=1e-7)


def _grid(counts, n=100):
    c = np.asarray(counts)
    z = np.zeros(c.shape)
    return PathGrid(n, np.arange(1, c.shape[0] + 1.0), z + 1, z.astype(int) + 1, c, z,
                    np.ones(c.shape, bool))


def test_estimate_outlier_count():
    assert estimate_outlier_count(_grid(np.full((3, 3), 7))) == 7
    assert estimate_outlier_count(_grid(np.zeros((3, 3), int))) is None
    assert estimate_outlier_count(_grid([[0, 60, 60], [60, 5, 0]])) == 5
    assert estimate_outlier_count(_grid([[4, 4, 3, 3]])) == 3
    g = _grid([[2, 2, 9], [9, 9, 0]])
    hist = g.outlier_histogram()
    assert hist == {0: 1, 2: 2, 9: 3}
    assert estimate_outlier_count(g) == 9


def test_gamma_star_is_not_a_threshold_below_lambda_star():
    # a sample at a segment edge can sit farther from its centroid than from the global mean
    x, _, _ = generate(random_spec(60, 3, 2, 214, outlier_count=4))
    g, _ = gamma_star(x)
    lam = 0.5 * best_split(x).lambda_star
    r = np.linalg.norm(x - solve_mu(x, lam).mu, axis=1)
    assert r.max() > 1.001 * g
    assert len(solve_orcs(x, SolverConfig(lam=lam, gamma=1.001 * g)).outliers) >= 1
