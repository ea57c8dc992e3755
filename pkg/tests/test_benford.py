import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from modone.benford import (ProductModel, adapted_base, benford_cdf, dataset_report,
                            load_positive_values, log_mantissa, log_mantissa_array, log_mantissas,
                            mantissa, mantissa_experiment)
from modone.core import fractional_part
from modone.errors import ContractError, DomainError


@pytest.mark.parametrize("x, b, expected", [(314.0, 10, 3.14), (0.00314, 10, 3.14), (10.0, 2, 1.25)])
def test_mantissa_examples(x, b, expected):
    assert mantissa(x, b).mantissa == pytest.approx(expected, rel=2e-16)


def test_mantissa_exponent():
    assert mantissa(10.0, 2).exponent == 3
    assert mantissa(0.00314, 10).exponent == -3


@pytest.mark.parametrize("x, b", [(0.0, 10), (-1.0, 10), (5.0, 1.0), (5.0, 0.5), (math.inf, 10)])
def test_mantissa_domain(x, b):
    with pytest.raises(DomainError):
        mantissa(x, b)


@pytest.mark.parametrize("a, expected", [(1.0, 0.0), (math.sqrt(10), 0.5), (2.0, 0.30102999566398120)])
def test_benford_cdf_examples(a, expected):
    assert benford_cdf(a, 10) == pytest.approx(expected, abs=1e-15)


@pytest.mark.parametrize("a", [0.5, 10.0, 11.0])
def test_benford_cdf_range(a):
    with pytest.raises(DomainError):
        benford_cdf(a, 10)


def test_adapted_base_examples():
    e = math.e
    assert adapted_base(np.full(7, e), 1.0, 7) == pytest.approx(e, rel=1e-15)
    assert adapted_base(np.full(7, e * e), 1.0, 7) == pytest.approx(e * e, rel=1e-15)
    assert adapted_base([e, e**3], 1.0, 2) == pytest.approx(e * e, rel=1e-15)


def test_adapted_base_errors():
    with pytest.raises(DomainError):
        adapted_base([1.0, -1.0], 1.0, 2)
    with pytest.raises(ContractError):
        adapted_base([1.0, 2.0], 2.0, 2)


def test_round_trip_million_values():
    rng = np.random.default_rng(17)
    xs = 10.0 ** rng.uniform(-250, 250, 10**6) * rng.uniform(1, 10, 10**6)
    bases = (10.0, 2.0, math.e, 7.5)
    worst = 0.0
    for i, x in enumerate(xs):
        b = bases[i % 4]
        s = mantissa(x, b)
        assert 1.0 <= s.mantissa < b
        back = s.mantissa * b**s.exponent if s.exponent >= 0 else s.mantissa / b ** (-s.exponent)
        worst = max(worst, abs(back - x) / math.ulp(x))
    # powers of non-dyadic bases are themselves rounded; 2 ulp covers both roundings
    assert worst <= 2.0


@settings(max_examples=2000)
@given(st.floats(1e-300, 1e300), st.sampled_from([10.0, 2.0, math.e, 3.7, 16.0]))
def test_log_mantissa_identity(x, b):
    s = mantissa(x, b)
    expected = fractional_part(math.log(x) / math.log(b))
    d = abs(s.log_mantissa - expected)
    assert min(d, 1 - d) <= 1e-12
    assert abs(log_mantissa(x, b) - expected) == 0.0


@settings(max_examples=2000)
@given(st.floats(1e-300, 1e300), st.sampled_from([10.0, 2.0, math.e, 3.7]))
def test_scale_equivariance(x, b):
    a, c = mantissa(x, b).mantissa, mantissa(x * b, b).mantissa
    # b * x is itself rounded, so agreement is up to a few ulp of the mantissa
    assert abs(a - c) <= 4 * math.ulp(b) or abs(abs(a - c) - (b - 1)) <= 4 * math.ulp(b)


def test_scale_equivariance_exact_in_base_two():
    for x in np.random.default_rng(1).uniform(1e-5, 1e5, 1000):
        assert mantissa(2 * x, 2).mantissa == mantissa(x, 2).mantissa


def test_log_mantissa_array_matches_scalar():
    x = np.array([314.0, 0.00314, 1.0, 99.9])
    assert np.allclose(log_mantissa_array(x, 10), [log_mantissa(v, 10) for v in x], atol=0)
    with pytest.raises(DomainError):
        log_mantissa_array([1.0, 0.0], 10)


def test_fixed_base_experiment_passes():
    rep = mantissa_experiment(ProductModel("lognormal", 1.0, 1.0, base=10.0), 500, 20_000, 3)
    assert rep.passed
    assert rep.details["hypotheses"]["y_has_continuous_component"]


def test_degenerate_control_fails():
    model = ProductModel("degenerate", value=10.0, base=10.0)
    lm = log_mantissas(model, 50, 1000, 1)
    # every log-mantissa is an integer up to rounding of M ln 10 / ln 10
    assert np.all(np.minimum(lm, 1 - lm) <= 1e-9)
    rep = mantissa_experiment(model, 50, 1000, 1)
    assert not rep.passed
    assert rep.statistic >= 1 - 1e-3
    assert not rep.details["hypotheses"]["y_has_continuous_component"]


def test_log_mantissas_match_direct_products():
    # fixed base: the sampler's first component is {sum ln X_i / ln b}
    model = ProductModel("lognormal", 0.3, 0.5, base=10.0)
    lm = log_mantissas(model, 40, 50, 9)
    assert lm.shape == (50,) and np.all((lm >= 0) & (lm < 1))


def test_adapted_flags_beta():
    rep = mantissa_experiment(ProductModel(base=None, beta=0.5), 200, 2000, 4)
    assert rep.details["beta_above_one"] is False
    assert mantissa_experiment(ProductModel(base=None, beta=2.0), 200, 200, 4).details["beta_above_one"]


def test_dataset_report(tmp_path):
    rng = np.random.default_rng(2)
    vals = np.exp(rng.normal(0, 5, 20_000))
    path = tmp_path / "values.txt"
    path.write_text("# header\n" + "\n".join(repr(float(v)) for v in vals) + "\n\n")
    loaded = load_positive_values(path)
    assert np.array_equal(loaded, vals)
    assert dataset_report(loaded, 10.0).passed
    path.write_text("1.0\n-2\n")
    with pytest.raises(DomainError):
        load_positive_values(path)


def test_product_model_round_trip():
    m = ProductModel("lognormal", 0.1, 2.0, base=None, beta=3.0)
    assert ProductModel.from_dict(m.to_dict()) == m
    with pytest.raises(ContractError):
        ProductModel.from_dict({"kind": "lognormal", "shape": 1})
