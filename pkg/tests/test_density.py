import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import multivariate_normal

from modone.density import (DensityScene, find_delta, limit_density, pointwise_convergence_sweep,
                            transformed_density, transformed_density_report, xi_grid)
from modone.errors import ContractError, DegeneracyError
from modone.limit_law import GaussianLaw, build_A1, gaussian_density
from modone.model import PhiSpec

ETA = (1.0, 0.0, 2.0)


def reciprocal_scene(M):
    return DensityScene.exact(1, ETA, np.eye(3), PhiSpec.reciprocal(), M)


def test_constant_phi_matches_gaussian_marginal():
    S1 = np.array([[2.0, 0.3, 0.5], [0.3, 1.0, -0.2], [0.5, -0.2, 1.5]])
    scene = DensityScene.exact(1, (0.4, 1.1, 3.0), S1, PhiSpec.constant(1.0), 50)
    rv = multivariate_normal(np.zeros(2), S1[:2, :2])
    for xi in ([0.0, 0.0], [1.0, -0.5], [-2.0, 1.5]):
        assert transformed_density(scene, xi) == pytest.approx(rv.pdf(xi), abs=1e-8)


def test_reciprocal_scene_near_limit_at_large_M():
    scene = reciprocal_scene(10**6)
    A = build_A1(PhiSpec.reciprocal(), ETA[:2], ETA[2])
    oracle = gaussian_density(GaussianLaw.centered(A @ A.T), [0.0, 0.0])
    assert abs(transformed_density(scene, [0.0, 0.0]) - oracle) < 1e-3


@pytest.mark.parametrize("M", [100, 10**4])
def test_normalisation(M):
    scene = reciprocal_scene(M)
    sd = np.sqrt(np.diag(scene.limit_covariance()))
    axes = [np.linspace(-10 * s, 10 * s, 161) for s in sd]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 2)
    vals = transformed_density(scene, mesh).reshape(161, 161)
    total = np.trapezoid(np.trapezoid(vals, axes[1], axis=1), axes[0])
    assert total == pytest.approx(1.0, abs=1e-4)
    assert 0.999 <= total <= 1.001
    assert np.all(vals >= 0.0)


def test_refinement_stability():
    scene = reciprocal_scene(100)
    pts, _ = xi_grid(scene, 5)
    coarse = transformed_density(scene, pts, atol=1e-10)
    fine = transformed_density(scene, pts, atol=1e-12)
    assert np.max(np.abs(coarse - fine)) <= 1e-9


def test_report_trace():
    _, trace = transformed_density_report(reciprocal_scene(100), [[0.0, 0.0]])
    assert trace["delta"] > 0 and len(trace["intervals"]) == 3


def test_limit_density_constant_phi():
    c = 1.7
    scene = DensityScene.exact(1, (1.0, 1.0, 1.0), np.eye(3), PhiSpec.constant(c), 10)
    assert limit_density(scene, [0.0, 0.0]) == pytest.approx(1 / (2 * math.pi * c * c), rel=1e-14)


@settings(max_examples=1000)
@given(st.floats(-4, 4), st.floats(-4, 4))
def test_limit_density_symmetric(a, b):
    scene = reciprocal_scene(100)
    assert limit_density(scene, [a, b]) == limit_density(scene, [-a, -b])


def test_limit_density_matches_gaussian_density():
    rng = np.random.default_rng(4)
    scene = reciprocal_scene(100)
    A = build_A1(PhiSpec.reciprocal(), ETA[:2], ETA[2])
    law = GaussianLaw.centered(A @ A.T)
    for xi in rng.normal(size=(20, 2)):
        assert limit_density(scene, xi) == pytest.approx(gaussian_density(law, xi), rel=1e-12)


@settings(max_examples=200, deadline=None)
@given(st.floats(-6, 6), st.floats(-6, 6), st.sampled_from([10, 100, 1000]))
def test_transformed_density_non_negative(a, b, M):
    assert transformed_density(reciprocal_scene(M), [a, b]) >= 0.0


def test_constant_phi_sweep_is_exact():
    S1 = np.eye(3)
    sweep = pointwise_convergence_sweep(
        lambda M: DensityScene.exact(1, (0.5, 1.0, 2.0), S1, PhiSpec.constant(2.0), M), [10**2, 10**4, 10**6])
    assert all(e <= 1e-8 for e in sweep.max_err.values())


def test_reciprocal_sweep_decreases():
    sweep = pointwise_convergence_sweep(reciprocal_scene, [10**2, 10**4, 10**6])
    assert sweep.max_err[10**6] < sweep.max_err[10**2]
    assert sweep.l1_err[10**6] < 1e-2
    assert sweep.monotone
    assert sweep.header == ["M", "xi_1", "xi_2", "transformed", "limit", "abs_err"]


def test_scene_validation():
    with pytest.raises(DegeneracyError):
        DensityScene.exact(1, (1.0, 0.0, 1.0), np.eye(3), PhiSpec.polynomial([-1.0, 1.0]), 10)
    with pytest.raises(DegeneracyError):
        DensityScene.exact(1, ETA, np.ones((3, 3)), PhiSpec.reciprocal(), 10)
    with pytest.raises(ContractError):
        DensityScene(1, np.array(ETA) * 10 + 50, ETA, np.eye(3), PhiSpec.reciprocal(), 10)
    with pytest.raises(ContractError):
        transformed_density(reciprocal_scene(10), [0.0, 0.0, 0.0])


@settings(max_examples=1000)
@given(st.floats(0.2, 10.0), st.sampled_from(["reciprocal", "affine", "poly"]))
def test_find_delta_keeps_phi_away_from_zero(anchor, kind):
    phi = {"reciprocal": PhiSpec.reciprocal(), "affine": PhiSpec.affine_reciprocal(2.0, 1.0),
           "poly": PhiSpec.polynomial([-1.0, 0.0, 1.0])}[kind]
    if kind == "poly" and abs(anchor - 1.0) < 0.05:
        return
    d = find_delta(phi, anchor)
    t = anchor + np.linspace(-d, d, 1001)
    # compare 1/|phi| so that poles (where |phi| is infinite) pass
    assert np.all(np.abs(phi.inverse(t)) <= 2 / abs(phi.evaluate(anchor)) * (1 + 1e-9))
