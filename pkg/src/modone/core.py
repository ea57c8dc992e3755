"""Floor, ceiling and fractional-part arithmetic, plus shifted means."""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .errors import DomainError, RangeError

# floor/ceil of a double is exact, but the integer is only meaningful (and
# testable against the real line) while every integer up to it is representable
INTEGER_LIMIT = 2.0**53

_ONE_MINUS = math.nextafter(1.0, 0.0)


def _check_finite(x):
    if not math.isfinite(x):
        raise DomainError(f"expected a finite real, got {x!r}")


def fractional_part(x: float) -> float:
    """Return ``{x} = x - floor(x)``, always in ``[0, 1)``.

    >>> fractional_part(-1.3)
    0.7
    """
    x = float(x)
    _check_finite(x)
    r = x - math.floor(x)
    # tiny negative x gives x - (-1) == 1.0 after rounding
    return _ONE_MINUS if r >= 1.0 else r


def fractional_part_array(x) -> np.ndarray:
    """Vectorised :func:`fractional_part`; non-finite entries map to NaN."""
    x = np.asarray(x, dtype=float)
    with np.errstate(invalid="ignore"):
        r = x - np.floor(x)
    return np.where(r >= 1.0, _ONE_MINUS, r)


def floor_int(x: float) -> int:
    x = float(x)
    _check_finite(x)
    if abs(x) > INTEGER_LIMIT:
        raise RangeError(f"|{x!r}| exceeds the exact integer range 2**53")
    return math.floor(x)


def ceil_int(x: float) -> int:
    """Unique integer ``n`` with ``n - 1 < x <= n``."""
    x = float(x)
    _check_finite(x)
    if abs(x) > INTEGER_LIMIT:
        raise RangeError(f"|{x!r}| exceeds the exact integer range 2**53")
    return math.ceil(x)


def shifted_mean(xs: Sequence[float], c: float = 0.0) -> float:
    """``(x_1 + ... + x_M + c) / M`` with compensated summation."""
    xs = [float(v) for v in xs]
    if not xs:
        raise DomainError("shifted_mean of an empty sequence")
    for v in xs:
        _check_finite(v)
    _check_finite(c)
    return math.fsum(xs + [float(c)]) / len(xs)
