import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import ndtr

from modone.errors import ContractError
from modone.stattests import (TestReport, chi_square_test, grid_chi_square, histogram_tv,
                              histogram_tv_1d, integer_shift_check, ks_statistic, ks_test,
                              marginal_tv_gaussian, normal_cdf, uniform_cdf, weyl_scan, weyl_sum)


def test_report_pass_rule():
    assert TestReport("a", 0.5, 0.5, 1).passed
    assert not TestReport("a", 0.6, 0.5, 1).passed
    assert TestReport("a", 0.1, 0.5, 3).to_row() == ["a", 0.1, 0.5, 3, 1]


@pytest.mark.parametrize("samples, expected", [([0.5], 0.5), ([0.25, 0.75], 0.25)])
def test_ks_examples(samples, expected):
    assert ks_statistic(samples, uniform_cdf) == expected


@pytest.mark.parametrize("n", [1, 7, 100, 1000])
def test_ks_symmetric_grid(n):
    grid = (np.arange(1, n + 1) - 0.5) / n
    assert ks_statistic(grid, uniform_cdf) == pytest.approx(0.5 / n, abs=1e-15)


def test_ks_rejects_unsorted_and_empty():
    with pytest.raises(ContractError):
        ks_statistic([0.5, 0.2], uniform_cdf)
    with pytest.raises(ContractError):
        ks_statistic([], uniform_cdf)


def test_ks_test_default_threshold():
    r = ks_test("u", np.random.default_rng(0).random(10_000), uniform_cdf)
    assert r.threshold == pytest.approx(1.949 / 100)
    assert r.passed


@settings(max_examples=1000)
@given(st.lists(st.floats(-5, 5), min_size=1, max_size=60), st.floats(0.1, 3.0), st.floats(-2, 2))
def test_ks_invariant_under_increasing_maps(xs, a, b):
    x = np.sort(np.array(xs))
    F = normal_cdf(0.0, 1.0)
    base = ks_statistic(x, F)
    # t -> a * t^3 + b is strictly increasing; its inverse gives the transported cdf
    g = lambda t: a * t**3 + b
    Fg = lambda s: F(np.cbrt((np.asarray(s) - b) / a))
    # allow only the roundoff of pushing x through g and back
    roundoff = float(np.max(np.abs(Fg(g(x)) - F(x))))
    assert abs(ks_statistic(g(x), Fg) - base) <= roundoff + 1e-14


def test_weyl_examples():
    assert weyl_sum(np.zeros(10), np.zeros(10), [3], 0.0) == pytest.approx(1.0)
    assert weyl_sum([0.0, 0.5] * 50, None, [1], 0.0) == pytest.approx(0.0, abs=1e-15)
    N = 1000
    assert weyl_sum(np.arange(N) / N, None, [1], 0.0) <= 1e-12


def test_weyl_rejects_zero_frequency():
    with pytest.raises(ContractError):
        weyl_sum(np.zeros((4, 2)), None, [0, 0], 1.0)


@settings(max_examples=1000)
@given(st.lists(st.floats(0, 1, exclude_max=True), min_size=1, max_size=40),
       st.integers(-5, 5).filter(bool), st.floats(-3, 3))
def test_weyl_bounded_by_one(fr, k, u):
    h = np.linspace(-1, 1, len(fr))
    assert weyl_sum(fr, h, [k], u) <= 1.0 + 1e-15


def test_weyl_second_moment_is_one_over_n():
    N, batches = 500, 200
    rng = np.random.default_rng(11)
    vals = np.array([weyl_sum(rng.random(N), None, [1], 0.0) ** 2 for _ in range(batches)])
    se = vals.std(ddof=1) / math.sqrt(batches)
    assert abs(vals.mean() - 1.0 / N) <= 3 * se


@settings(max_examples=1000)
@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=30), st.integers(-3, 3).filter(bool),
       st.floats(-2, 2))
def test_weyl_integer_shift(raw, k, u):
    raw = np.array(raw)
    h = np.cos(raw)
    on_raw, on_frac = integer_shift_check(raw, h, [k], u)
    # phases agree modulo 2 pi up to the rounding of k * raw, term by term
    slack = 2 * math.pi * abs(k) * 4 * math.ulp(max(1.0, float(np.abs(raw).max())))
    assert abs(on_raw - on_frac) <= slack


def test_weyl_scan_reports_argmax():
    rng = np.random.default_rng(3)
    fr = rng.random((20_000, 2))
    r = weyl_scan(fr, rng.normal(size=20_000), k_range=2)
    assert r.details["evaluations"] == 24 * 3
    assert r.passed


def _uniform_density(pts):
    p = np.asarray(pts)[:, 0]
    return ((p >= 0) & (p <= 1)).astype(float)


def test_histogram_tv_exact_reference():
    samples = np.random.default_rng(0).random(1000)
    assert histogram_tv(samples, _uniform_density, [np.array([0.0, 1.0])]) == pytest.approx(0.0, abs=1e-12)


def test_histogram_tv_disjoint_supports():
    samples = np.full(100, 5.0)
    assert histogram_tv(samples, _uniform_density, [np.array([4.0, 6.0])]) == pytest.approx(1.0)


def test_histogram_tv_empty():
    with pytest.raises(ContractError):
        histogram_tv(np.array([]), _uniform_density, [np.array([0.0, 1.0])])


def test_histogram_tv_normal_sample():
    x = np.random.default_rng(5).standard_normal(100_000)
    dens = lambda p: np.exp(-0.5 * p[:, 0] ** 2) / math.sqrt(2 * math.pi)
    tv = histogram_tv(x, dens, [np.linspace(-5, 5, 65)])
    assert tv < 0.02


def test_histogram_tv_quadrature_matches_cdf_masses():
    x = np.random.default_rng(6).standard_normal(20_000)
    edges = np.linspace(-5, 5, 65)
    dens = lambda p: np.exp(-0.5 * p[:, 0] ** 2) / math.sqrt(2 * math.pi)
    assert histogram_tv(x, dens, [edges]) == pytest.approx(histogram_tv_1d(x, ndtr, edges), abs=1e-12)


def test_histogram_tv_2d_independent_normals():
    x = np.random.default_rng(7).standard_normal((200_000, 2))
    dens = lambda p: np.exp(-0.5 * (p**2).sum(axis=1)) / (2 * math.pi)
    edges = [np.linspace(-5, 5, 17)] * 2
    assert histogram_tv(x, dens, edges) < 0.02


@settings(max_examples=1000, deadline=None)
@given(st.integers(0, 2**32), st.floats(-1.0, 1.0), st.integers(2, 6))
def test_nested_refinement_never_decreases(seed, shift, levels):
    x = np.random.default_rng(seed).standard_normal(300) + shift
    F = normal_cdf(0.0, 1.0)
    tvs = [histogram_tv_1d(x, F, np.linspace(-6, 6, 2**j + 1)) for j in range(1, levels + 1)]
    assert all(b >= a - 1e-12 for a, b in zip(tvs, tvs[1:]))


def test_binned_tv_is_a_lower_bound():
    mu = 0.5
    true_tv = 2 * ndtr(mu / 2) - 1
    x = np.random.default_rng(8).standard_normal(1_000_000) + mu
    tv = histogram_tv_1d(x, normal_cdf(), np.linspace(-6, 7, 65))
    assert tv <= true_tv + 0.005
    assert tv >= true_tv - 0.01


def test_marginal_tv_gaussian():
    x = np.random.default_rng(9).multivariate_normal([0, 0], [[1, 0.5], [0.5, 2]], 100_000)
    tv, per_axis = marginal_tv_gaussian(x, np.array([[1, 0.5], [0.5, 2]]))
    assert len(per_axis) == 2 and tv == max(per_axis) and tv < 0.02


def test_chi_square_balanced_is_zero():
    pts = (np.arange(40) + 0.5) / 40
    stat, dof = grid_chi_square(pts, 4)
    assert stat == 0.0 and dof == 3


@pytest.mark.parametrize("N", [20, 400, 1000])
def test_chi_square_all_in_one_cell(N):
    stat, _ = grid_chi_square(np.full(N, 0.1), 4)
    assert stat == pytest.approx(3 * N, rel=1e-14)


def test_chi_square_cell_rule():
    with pytest.raises(ContractError):
        grid_chi_square(np.random.default_rng(0).random((100, 2)), 8)


def _chi2_quantile(level, dof):
    mpmath.mp.dps = 30
    cdf = lambda x: mpmath.gammainc(dof / 2.0, 0, x / 2.0, regularized=True)
    return float(mpmath.findroot(lambda x: cdf(x) - level, dof + 3 * math.sqrt(2 * dof)))


def test_chi_square_quantile_matches_independent_oracle():
    r = chi_square_test("grid", np.random.default_rng(1).random((100_000, 2)), 8, 0.999)
    assert r.threshold == pytest.approx(_chi2_quantile(0.999, 63), rel=1e-9)
    assert r.details["dof"] == 63
    assert r.passed
