"""Mantissas in a fixed or data-adapted base, and Benford uniformity experiments.

The log-mantissa of a product ``X_1 ... X_M`` is a fractional sum of
``ln X_i``, so the experiments reuse the fractional-sum sampler with
``Y_i = ln X_i``:

* fixed base ``b``: ``phi = 1 / ln b`` (constant), component ``{sum_{i<=M} ln X_i / ln b}``;
* adapted base ``exp(sum_{i<=beta_M} ln X_i / (beta M))``: ``phi(t) = beta / t`` with
  proportions ``(1, beta)``, which gives ``{beta M sum_{i<=M} ln X_i / sum_{i<=beta_M} ln X_i}``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import fractional_part, fractional_part_array
from .errors import ContractError, DomainError
from .fracsum import sample_batch
from .model import JointLaw, ModelSpec, PhiSpec, ceil_index
from .rng import TAG_MODEL, substream
from .stattests import TestReport, ks_test, uniform_cdf


@dataclass(frozen=True)
class MantissaSample:
    mantissa: float
    base: float
    log_mantissa: float
    exponent: int


def _check_base(b):
    if not (math.isfinite(b) and b > 1.0):
        raise DomainError(f"base must be a finite real > 1, got {b!r}")


def mantissa(x: float, b: float) -> MantissaSample:
    """The representative of ``x`` in ``[1, b)`` modulo powers of ``b``."""
    x, b = float(x), float(b)
    _check_base(b)
    if not (math.isfinite(x) and x > 0.0):
        raise DomainError(f"mantissa needs a finite positive real, got {x!r}")
    k = math.floor(math.log(x) / math.log(b))
    for _ in range(3):
        # multiplying by b^-k is exact for the common case of small |k| in base 10
        m = x * b ** (-k) if k < 0 else x / b**k
        if m >= b:
            k += 1
        elif m < 1.0:
            k -= 1
        else:
            break
    m = min(max(m, 1.0), math.nextafter(b, 1.0))
    lm = math.log(m) / math.log(b)
    return MantissaSample(m, b, min(max(lm, 0.0), math.nextafter(1.0, 0.0)), k)


def log_mantissa_array(x, b: float) -> np.ndarray:
    """``{log_b x}`` for an array of positive values."""
    _check_base(float(b))
    x = np.asarray(x, dtype=float)
    if np.any(~(x > 0)) or not np.all(np.isfinite(x)):
        raise DomainError("log-mantissas need finite positive values")
    return fractional_part_array(np.log(x) / math.log(b))


def benford_cdf(a: float, b: float) -> float:
    """``log_b a``, the Benford mass of mantissas in ``[1, a)``."""
    a, b = float(a), float(b)
    _check_base(b)
    if not 1.0 <= a < b:
        raise DomainError(f"Benford CDF argument must lie in [1, {b}), got {a!r}")
    return math.log(a) / math.log(b)


def adapted_base(X, beta: float, M: int) -> float:
    """``exp(sum_{i <= ceil(beta M)} ln X_i / (beta M))``."""
    X = np.asarray(X, dtype=float)
    if np.any(~(X > 0)) or not np.all(np.isfinite(X)):
        raise DomainError("adapted base needs finite positive data")
    if not (beta > 0 and isinstance(M, (int, np.integer)) and M >= 1):
        raise ContractError("beta must be positive and M a positive integer")
    n = ceil_index(beta, M)
    if n > X.size:
        raise ContractError(f"need {n} observations, got {X.size}")
    return math.exp(math.fsum(np.log(X[:n])) / (beta * M))


@dataclass(frozen=True)
class ProductModel:
    """Law of the factors ``X_i`` and the base rule.

    ``kind`` is ``"lognormal"`` (``ln X ~ N(mu, sigma^2)``) or ``"degenerate"``
    (``X = value`` always).  ``base=None`` selects the data-adapted base with
    proportion ``beta``.
    """

    kind: str = "lognormal"
    mu: float = 1.0
    sigma: float = 1.0
    value: float = 10.0
    base: float | None = 10.0
    beta: float = 2.0

    def __post_init__(self):
        if self.kind not in ("lognormal", "degenerate"):
            raise ContractError(f"unknown product model kind {self.kind!r}")
        if self.base is not None:
            _check_base(float(self.base))
        if self.kind == "lognormal" and not self.sigma >= 0:
            raise ContractError("sigma must be non-negative")
        if self.kind == "degenerate" and not self.value > 0:
            raise ContractError("degenerate value must be positive")

    def log_law(self) -> JointLaw:
        """Law of ``(ln X, 0)``."""
        if self.kind == "lognormal":
            return JointLaw.gaussian2d([self.mu, 0.0], [[self.sigma**2, 0.0], [0.0, 0.0]])
        atom = [[math.log(self.value), 0.0]]
        return JointLaw.mixture(0.0, JointLaw.gaussian2d([0.0, 0.0], np.eye(2)), atom)

    def model_spec(self) -> ModelSpec:
        if self.base is None:
            if not self.beta > 0:
                raise ContractError("beta must be positive")
            return ModelSpec(1, (1.0, self.beta), self.log_law(),
                             PhiSpec.affine_reciprocal(self.beta, 0.0))
        # the second proportion only fixes how many draws are made; it does not
        # enter the first component
        return ModelSpec(1, (1.0, 2.0), self.log_law(), PhiSpec.constant(1.0 / math.log(self.base)))

    def to_dict(self) -> dict:
        return {"kind": self.kind, "mu": self.mu, "sigma": self.sigma, "value": self.value,
                "base": self.base, "beta": self.beta}

    @classmethod
    def from_dict(cls, d: dict) -> "ProductModel":
        known = {"kind", "mu", "sigma", "value", "base", "beta"}
        extra = set(d) - known
        if extra:
            raise ContractError(f"product model: unknown keys {sorted(extra)}")
        return cls(**d)


def log_mantissas(model: ProductModel, M: int, N: int, seed: int, *, threads: int = 1):
    """Log-mantissas of ``N`` independent products of ``M`` factors."""
    if model.base is None and model.beta <= 1.0:
        return _adapted_log_mantissas_direct(model, M, N, seed)
    batch = sample_batch(model.model_spec(), M, N, seed, threads=threads)
    fr, _ = batch.valid()
    return fr[:, 0]


def _adapted_log_mantissas_direct(model: ProductModel, M: int, N: int, seed: int):
    """Adapted base with ``beta <= 1``: the base uses a prefix of the product's own factors,
    which the coupled sampler cannot express, so the ratio is formed draw by draw."""
    n = ceil_index(model.beta, M)
    law = model.log_law()
    out = np.empty(N)
    for idx in range(N):
        y, _ = law.sample(substream(seed, idx, TAG_MODEL), M)
        out[idx] = model.beta * M * math.fsum(y) / math.fsum(y[:n])
    return fractional_part_array(out)


def mantissa_experiment(model: ProductModel, M: int, N: int, seed: int, *, threshold=None,
                        threads: int = 1) -> TestReport:
    """KS test of product log-mantissas against Uniform[0,1]."""
    lm = log_mantissas(model, M, N, seed, threads=threads)
    label = "adapted" if model.base is None else f"base{model.base:g}"
    rep = ks_test(f"benford_{model.kind}_{label}", lm, uniform_cdf, threshold)
    if model.base is None and model.beta <= 1.0:
        law = model.log_law()
        hyp = {"y_not_constant": bool(law.cov[0, 0] > 0),
               "y_has_continuous_component": bool(law.has_continuous_y())}
    else:
        hyp = model.model_spec().hypotheses()
    rep.details.update({"M": M, "seed": seed, "hypotheses": hyp,
                        "base": "adapted" if model.base is None else model.base})
    if model.base is None:
        rep.details["beta"] = model.beta
        # the adapted-base construction is motivated for beta > 1 only
        rep.details["beta_above_one"] = model.beta > 1.0
    return rep


def load_positive_values(path) -> np.ndarray:
    """One positive real per line; blank lines and ``#`` comments are skipped."""
    vals = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        s = line.split("#", 1)[0].strip()
        if not s:
            continue
        try:
            v = float(s)
        except ValueError:
            raise ContractError(f"{path}:{lineno}: not a number: {s!r}") from None
        if not (math.isfinite(v) and v > 0):
            raise DomainError(f"{path}:{lineno}: value must be positive, got {s!r}")
        vals.append(v)
    if not vals:
        raise ContractError(f"{path}: no values")
    return np.array(vals)


def dataset_report(values, base: float = 10.0, threshold=None) -> TestReport:
    """KS test of a dataset's base-``base`` log-mantissas against Uniform[0,1]."""
    rep = ks_test(f"benford_dataset_base{base:g}", log_mantissa_array(values, base),
                  uniform_cdf, threshold)
    rep.details["base"] = base
    return rep


def log_mantissa(x: float, b: float) -> float:
    """``{log_b x}``."""
    return fractional_part(math.log(x) / math.log(b))
