"""Stratified resampling of weighted particles and its variance decomposition.

Particles are indexed from 0 in arrays; strata keep their natural labels
``m = 1..M``, stratum ``m`` being the interval ``(m-1, m]`` of the normalised
cumulative weights ``S_0 = 0 < S_1 < ... < S_M = M``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import fractional_part_array
from .errors import ContractError
from .rng import TAG_DIRECT, TAG_PARTICLES, TAG_UNIFORMS, map_chunks, substream
from .stattests import TestReport, ks_test, uniform_cdf


def compensated_cumsum(w) -> np.ndarray:
    """Running sums with Neumaier compensation, ``out[0] = 0``."""
    out = np.empty(len(w) + 1)
    out[0] = 0.0
    s = c = 0.0
    for j, v in enumerate(w, 1):
        v = float(v)
        t = s + v
        if abs(s) >= abs(v):
            c += (s - t) + v
        else:
            c += (v - t) + s
        s = t
        out[j] = s + c
    return out


@dataclass(frozen=True)
class ParticleSystem:
    particles: np.ndarray
    weights: np.ndarray
    cum_norm: np.ndarray

    @classmethod
    def from_weights(cls, weights, particles=None) -> "ParticleSystem":
        w = np.asarray(weights, dtype=float).ravel()
        if w.size == 0:
            raise ContractError("a particle system needs at least one particle")
        if not np.all(np.isfinite(w)) or np.any(w <= 0):
            raise ContractError("weights must be finite and positive")
        x = np.arange(1, w.size + 1, dtype=float) if particles is None else np.asarray(particles)
        if len(x) != w.size:
            raise ContractError("particles and weights differ in length")
        M = w.size
        cs = compensated_cumsum(w)
        cum = M * (cs / cs[-1])
        cum[-1] = float(M)
        if np.any(np.diff(cum) <= 0):
            raise ContractError("weights too disparate: normalised cumulative sums are not increasing")
        return cls(x, w, cum)

    @property
    def M(self) -> int:
        return self.weights.size

    @property
    def normalized_weights(self) -> np.ndarray:
        """``M w_i / sum w``; these are the gaps of ``cum_norm``."""
        return np.diff(self.cum_norm)


def stratified_resample(sys: ParticleSystem, U) -> np.ndarray:
    """0-based index of the particle selected in each stratum.

    Stratum ``m`` picks the ``i`` with ``S_{i-1} < m - U_m <= S_i``.
    """
    U = np.asarray(U, dtype=float).ravel()
    if U.size != sys.M:
        raise ContractError(f"need {sys.M} uniforms, got {U.size}")
    if np.any(~((U > 0) & (U < 1))):
        raise ContractError("uniforms must lie in the open interval (0, 1)")
    points = np.arange(1, sys.M + 1) - U
    return np.searchsorted(sys.cum_norm, points, side="left") - 1


def multinomial_resample(sys: ParticleSystem, U) -> np.ndarray:
    """Reference scheme: ``M`` i.i.d. picks with probabilities proportional to the weights."""
    U = np.asarray(U, dtype=float).ravel()
    if U.size != sys.M or np.any(~((U > 0) & (U < 1))):
        raise ContractError(f"need {sys.M} uniforms in (0, 1)")
    return np.searchsorted(sys.cum_norm, sys.M * U, side="left") - 1


def offspring_counts(sys: ParticleSystem, indices) -> np.ndarray:
    return np.bincount(np.asarray(indices), minlength=sys.M)


def _overlap(a0, a1, b0, b1):
    return np.maximum(0.0, np.minimum(a1, b1) - np.maximum(a0, b0))


def conditional_expectation(sys: ParticleSystem, f_values, m: int) -> float:
    """``E(f(xi_m) | particles)``: overlap of stratum ``(m-1, m]`` with each weight interval."""
    if not (isinstance(m, (int, np.integer)) and 1 <= m <= sys.M):
        raise ContractError(f"stratum index must lie in 1..{sys.M}")
    f = np.asarray(f_values, dtype=float)
    S = sys.cum_norm
    lo = max(np.searchsorted(S, m - 1, side="right") - 1, 0)
    hi = min(np.searchsorted(S, m, side="left"), sys.M)
    seg = _overlap(S[lo:hi], S[lo + 1:hi + 1], m - 1.0, float(m))
    return math.fsum(f[lo:hi] * seg)


def conditional_expectations(sys: ParticleSystem, f_values) -> np.ndarray:
    """All ``M`` conditional expectations at once via the piecewise-linear primitive."""
    f = np.asarray(f_values, dtype=float)
    S = sys.cum_norm
    C = np.concatenate([[0.0], np.cumsum(f * np.diff(S))])
    grid = np.arange(sys.M + 1, dtype=float)
    i = np.clip(np.searchsorted(S, grid, side="left"), 1, sys.M)
    F = C[i - 1] + f[i - 1] * (grid - S[i - 1])
    F[0] = 0.0
    F[-1] = C[-1]
    return np.diff(F)


def psi_k(u0: float, w) -> float:
    """Sum over unit strata of the overlap of ``(u0, u0+w_1]`` times that of the window
    ``(u0 + w_1 + ... + w_k, u0 + w_1 + ... + w_{k+1}]``."""
    w = np.asarray(w, dtype=float).ravel()
    if not 0.0 <= u0 < 1.0:
        raise ContractError("u0 must lie in [0, 1)")
    if w.size == 0 or np.any(w <= 0):
        raise ContractError("window widths must be positive")
    a0, a1 = u0, u0 + w[0]
    b0 = u0 + float(np.sum(w[:-1]))
    b1 = b0 + w[-1]
    if b0 >= a1 and math.floor(b0) >= math.ceil(a1):
        return 0.0
    # only strata meeting the first window can contribute
    m = np.arange(1, math.ceil(a1) + 1, dtype=float)
    return float(np.sum(_overlap(a0, a1, m - 1, m) * _overlap(b0, b1, m - 1, m)))


def second_moment_identity_check(sys: ParticleSystem, f_values) -> tuple[float, float]:
    """``sum_m E(f(xi_m)|F)^2`` computed stratum by stratum and through the lag kernels."""
    f = np.asarray(f_values, dtype=float)
    M = sys.M
    direct = math.fsum(conditional_expectation(sys, f, m) ** 2 for m in range(1, M + 1))
    S = sys.cum_norm
    w = sys.normalized_weights
    u = fractional_part_array(S[:-1])
    terms = []
    for k in range(M):
        mult = 2.0 if k else 1.0
        reachable = False
        for i in range(M - k):
            # particle i + k starts beyond every stratum touched by particle i
            if S[i + k] >= math.ceil(S[i + 1]):
                continue
            reachable = True
            p = psi_k(float(u[i]), w[i:i + k + 1])
            if p:
                terms.append(mult * f[i] * f[i + k] * p)
        if not reachable:
            # larger lags start even further to the right
            break
    return direct, math.fsum(terms)


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------

FUNCTIONS = {
    "sin": np.sin,
    "cos": np.cos,
    "identity": lambda x: np.asarray(x, dtype=float),
    "square": np.square,
    "one": np.ones_like,
    "one_plus_square": lambda x: 1.0 + np.square(x),
    "exp_neg": lambda x: np.exp(-np.asarray(x)),
}


@dataclass(frozen=True)
class ResamplingModel:
    """``X ~ Exp(rate)``, ``Normal(0, 1)`` or ``Uniform(0, 1)``; ``f`` and ``g`` from :data:`FUNCTIONS`."""

    f: str = "sin"
    g: str = "one_plus_square"
    x_law: str = "exp"
    rate: float = 1.0
    f_scale: float = 1.0

    def __post_init__(self):
        for name in (self.f, self.g):
            if name not in FUNCTIONS:
                raise ContractError(f"unknown function {name!r}; choose from {sorted(FUNCTIONS)}")
        if self.x_law not in ("exp", "normal", "uniform"):
            raise ContractError(f"unknown particle law {self.x_law!r}")
        if not self.rate > 0:
            raise ContractError("rate must be positive")

    def draw(self, rng: np.random.Generator, M: int) -> np.ndarray:
        if self.x_law == "exp":
            return rng.standard_exponential(M) / self.rate
        if self.x_law == "normal":
            return rng.standard_normal(M)
        return rng.random(M)

    def fg(self, x):
        g = FUNCTIONS[self.g](x)
        if np.any(g <= 0):
            raise ContractError("g must be positive on the particles")
        return self.f_scale * FUNCTIONS[self.f](x), g

    def to_dict(self) -> dict:
        return {"f": self.f, "g": self.g, "x_law": self.x_law, "rate": self.rate,
                "f_scale": self.f_scale}


def _uniforms_open(rng, n):
    u = rng.random(n)
    # random() is in [0, 1); zero has probability 2^-53 per draw
    while np.any(u == 0.0):
        u[u == 0.0] = rng.random(int(np.sum(u == 0.0)))
    return u


@dataclass
class VarianceDecomposition:
    term_i: float
    term_ii: float
    term_iii: float
    se_i: float
    se_ii: float
    se_iii: float
    total: float
    total_se: float
    M: int
    N: int
    seed: int


def _replicate_terms(model: ResamplingModel, M: int, seed: int, start: int, stop: int):
    out = np.empty((stop - start, 3))
    sq = math.sqrt(M)
    for j, n in enumerate(range(start, stop)):
        x = model.draw(substream(seed, n, TAG_PARTICLES), M)
        f, g = model.fg(x)
        sg = math.fsum(g)
        out[j, 0] = sq * math.fsum(g * f) / sg
        out[j, 1] = math.fsum(g * f * f) / sg
        sys = ParticleSystem.from_weights(g, x)
        e = conditional_expectations(sys, f)
        out[j, 2] = math.fsum(e * e) / M
    return out


def variance_decomposition_estimate(model: ResamplingModel, M: int, N: int, seed: int, *,
                                    threads: int = 1) -> VarianceDecomposition:
    """Monte Carlo estimates of the three terms of the conditional variance decomposition.

    (i) ``Var(sqrt(M) sum g f / sum g)``, (ii) ``E(sum g f^2 / sum g)`` and
    (iii) ``E(M^-1 sum_m E(f(xi_m)|F)^2)``; ``total = (i) + (ii) - (iii)``.
    The standard error of the total comes from the joint influence function.
    """
    if N < 2 or M < 1:
        raise ContractError("need M >= 1 and N >= 2")
    chunk = max(1, (1 << 16) // M)
    t = np.concatenate(map_chunks(lambda a, b: _replicate_terms(model, M, seed, a, b), N, chunk,
                                  threads))
    a, b, c = t[:, 0], t[:, 1], t[:, 2]
    ac = a - a.mean()
    var_a = float(np.mean(ac * ac) * N / (N - 1))
    infl_i = ac * ac - var_a
    infl = infl_i + (b - b.mean()) - (c - c.mean())
    rn = math.sqrt(N)
    return VarianceDecomposition(
        var_a, float(b.mean()), float(c.mean()),
        float(infl_i.std(ddof=1) / rn), float(b.std(ddof=1) / rn), float(c.std(ddof=1) / rn),
        var_a + float(b.mean()) - float(c.mean()), float(infl.std(ddof=1) / rn), M, N, seed)


def _direct_sums(model: ResamplingModel, M: int, seed: int, start: int, stop: int):
    out = np.empty(stop - start)
    sq = math.sqrt(M)
    for j, n in enumerate(range(start, stop)):
        rng = substream(seed, n, TAG_DIRECT)
        x = model.draw(rng, M)
        f, g = model.fg(x)
        sys = ParticleSystem.from_weights(g, x)
        idx = stratified_resample(sys, _uniforms_open(rng, M))
        out[j] = math.fsum(f[idx]) / sq
    return out


def direct_variance(model: ResamplingModel, M: int, N: int, seed: int, *, threads: int = 1):
    """Sample variance of ``M^-1/2 sum_m f(xi_m)`` over ``N`` full replications, with its SE."""
    if N < 2:
        raise ContractError("need N >= 2")
    chunk = max(1, (1 << 16) // M)
    s = np.concatenate(map_chunks(lambda a, b: _direct_sums(model, M, seed, a, b), N, chunk,
                                  threads))
    d = s - s.mean()
    v = float(np.sum(d * d) / (N - 1))
    return v, float((d * d).std(ddof=1) / math.sqrt(N))


def variance_check(model: ResamplingModel, M: int, N: int, seed: int, *, threads: int = 1,
                   z: float = 3.0) -> TestReport:
    """Compare the decomposition ``(i)+(ii)-(iii)`` with the directly simulated variance."""
    dec = variance_decomposition_estimate(model, M, N, seed, threads=threads)
    v, se = direct_variance(model, M, N, seed, threads=threads)
    comb = math.hypot(dec.total_se, se)
    rep = TestReport("resample_variance", abs(dec.total - v), z * comb, N,
                     {"M": M, "seed": seed, "decomposition": dec.total, "decomposition_se": dec.total_se,
                      "direct": v, "direct_se": se, "term_i": dec.term_i, "term_ii": dec.term_ii,
                      "term_iii": dec.term_iii})
    return rep


def stratum_phase_experiment(model: ResamplingModel, alpha: float, M: int, N: int, seed: int,
                             threshold=None) -> TestReport:
    """KS test of ``{S_{ceil(alpha M) - 1}}`` against Uniform[0,1] over independent particle sets."""
    if not 0 < alpha <= 1:
        raise ContractError("alpha must lie in (0, 1]")
    j = math.ceil(alpha * M) - 1
    ph = np.empty(N)
    for n in range(N):
        x = model.draw(substream(seed, n, TAG_PARTICLES), M)
        _, g = model.fg(x)
        ph[n] = ParticleSystem.from_weights(g).cum_norm[j]
    rep = ks_test("stratum_phase", fractional_part_array(ph), uniform_cdf, threshold)
    rep.details.update({"alpha": alpha, "M": M, "seed": seed})
    return rep


def resample_replicates(sys: ParticleSystem, R: int, seed: int) -> np.ndarray:
    """``(R, M)`` selected indices, replicate ``r`` using its own uniform substream."""
    return np.stack([stratified_resample(sys, _uniforms_open(substream(seed, r, TAG_UNIFORMS), sys.M))
                     for r in range(R)])


def load_particles(path) -> ParticleSystem:
    """Read a CSV with header columns ``x`` and ``g``."""
    with open(Path(path), newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"x", "g"} <= set(reader.fieldnames):
            raise ContractError(f"{path}: expected columns x and g")
        xs, gs = [], []
        for row in reader:
            try:
                xs.append(float(row["x"]))
                gs.append(float(row["g"]))
            except ValueError as exc:
                raise ContractError(f"{path}: {exc}") from None
    return ParticleSystem.from_weights(gs, xs)
