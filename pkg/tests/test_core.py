import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from modone.core import (ceil_int, floor_int, fractional_part, fractional_part_array,
                         shifted_mean)
from modone.errors import DomainError, RangeError

finite = st.floats(allow_nan=False, allow_infinity=False, min_value=-1e15, max_value=1e15)


@pytest.mark.parametrize("x, expected", [(2.5, 0.5), (3.0, 0.0)])
def test_fractional_part_examples(x, expected):
    assert fractional_part(x) == expected


def test_fractional_part_negative_uses_floor():
    assert fractional_part(-1.3) == pytest.approx(0.7, abs=1e-15)
    assert math.floor(-1.3) == -2


def test_fractional_part_tiny_negative_clamped_below_one():
    r = fractional_part(-1e-300)
    assert 0.0 <= r < 1.0


@pytest.mark.parametrize("bad", [math.nan, math.inf, -math.inf])
def test_fractional_part_rejects_non_finite(bad):
    with pytest.raises(DomainError):
        fractional_part(bad)


@pytest.mark.parametrize("x, expected", [(3.5, 4), (4.0, 4), (-0.5, 0)])
def test_ceil_int_examples(x, expected):
    assert ceil_int(x) == expected


def test_ceil_and_floor_range_guard():
    with pytest.raises(RangeError):
        ceil_int(2.0**60)
    with pytest.raises(RangeError):
        floor_int(-(2.0**60))


@pytest.mark.parametrize("xs, c, expected", [([1, 3], 0, 2.0), ([1, 3], 2, 3.0), ([5], -5, 0.0)])
def test_shifted_mean_examples(xs, c, expected):
    assert shifted_mean(xs, c) == expected


def test_shifted_mean_empty():
    with pytest.raises(DomainError):
        shifted_mean([])


@settings(max_examples=2000)
@given(finite)
def test_fractional_part_range_and_integer_remainder(x):
    r = fractional_part(x)
    assert 0.0 <= r < 1.0
    exact = Fraction(x) - math.floor(Fraction(x))
    # one rounding of the exact remainder, or the clamp just below 1
    assert abs(Fraction(r) - exact) <= Fraction(math.ulp(1.0))


@settings(max_examples=2000)
@given(st.floats(min_value=-1e6, max_value=1e6, allow_nan=False), st.integers(-10**6, 10**6))
def test_fractional_part_integer_shift(x, n):
    a, b = fractional_part(x), fractional_part(x + n)
    if float(x + n) - n == x:
        # x + n exactly representable: identical fractional parts
        assert a == b or {a, b} <= {0.0, math.nextafter(1.0, 0.0)}
    else:
        diff = abs(a - b)
        assert min(diff, 1 - diff) <= math.ulp(x + n)


@settings(max_examples=2000)
@given(finite)
def test_ceil_is_minus_floor_of_minus(x):
    assert ceil_int(x) == -floor_int(-x)
    n = ceil_int(x)
    assert n - 1 < x <= n


@settings(max_examples=1000)
@given(st.lists(st.floats(min_value=-1e6, max_value=1e6), min_size=1, max_size=50))
def test_shifted_mean_zero_is_arithmetic_mean(xs):
    assert shifted_mean(xs, 0) == pytest.approx(math.fsum(xs) / len(xs), rel=1e-15, abs=1e-300)


def test_fractional_part_array_matches_scalar():
    x = np.array([2.5, -1.3, 3.0, -1e-300, 7.25])
    expected = [fractional_part(v) for v in x]
    assert fractional_part_array(x).tolist() == expected
    assert np.isnan(fractional_part_array([np.nan]))[0]
