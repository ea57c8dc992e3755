"""Declarative description of the random experiment.

A :class:`ModelSpec` bundles the law of the pairs ``(Y_i, Z_i)``, the
function ``phi`` applied to the empirical mean, the limit proportions
``beta^1 < ... < beta^{q+1}`` and the offsets ``x, z, y_1..y_q``.  Everything
here is immutable once constructed; structural invariants are enforced at
construction, while the hypotheses of the limit law (non-degenerate ``Y``,
absolutely continuous component, ``phi`` non-zero at the anchor) are only
*reported* by :meth:`ModelSpec.hypotheses` so that negative controls can still
be simulated.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
from numpy.polynomial import polynomial as P

from .core import ceil_int
from .errors import ContractError, DomainError, SingularityError
from .quadrature import integrate

EPS = np.finfo(float).eps
CBRT_EPS = EPS ** (1.0 / 3.0)


# ---------------------------------------------------------------------------
# phi
# ---------------------------------------------------------------------------

class PhiFamily(str, enum.Enum):
    RECIPROCAL = "reciprocal"
    CONSTANT = "constant"
    AFFINE_RECIPROCAL = "affine_reciprocal"
    POLYNOMIAL = "polynomial"


@dataclass(frozen=True)
class PhiSpec:
    """A member of the closed-form catalog for ``phi``.

    ``params`` is ``()`` for reciprocal ``1/t``, ``(c,)`` for a constant,
    ``(a, b)`` for ``a / (b + t)`` and the ascending coefficients for a
    polynomial.  ``derivative`` selects the analytic derivative or a central
    difference with step ``step`` (default ``cbrt(eps) * max(1, |t|)``).
    """

    family: PhiFamily
    params: tuple = ()
    derivative: str = "analytic"
    step: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "family", PhiFamily(self.family))
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        fam, p = self.family, self.params
        expected = {PhiFamily.RECIPROCAL: 0, PhiFamily.CONSTANT: 1,
                    PhiFamily.AFFINE_RECIPROCAL: 2}
        if fam in expected and len(p) != expected[fam]:
            raise ContractError(f"{fam.value} takes {expected[fam]} parameter(s), got {p}")
        if fam is PhiFamily.POLYNOMIAL and not p:
            raise ContractError("polynomial phi needs at least one coefficient")
        if fam is PhiFamily.AFFINE_RECIPROCAL and p[0] == 0.0:
            raise ContractError("affine_reciprocal needs a != 0")
        if not all(math.isfinite(v) for v in p):
            raise ContractError("phi parameters must be finite")
        if self.derivative not in ("analytic", "central"):
            raise ContractError(f"unknown derivative mode {self.derivative!r}")
        if self.step is not None and not self.step > 0:
            raise ContractError("central-difference step must be positive")

    # constructors ---------------------------------------------------------
    @classmethod
    def reciprocal(cls, **kw):
        return cls(PhiFamily.RECIPROCAL, (), **kw)

    @classmethod
    def constant(cls, c, **kw):
        return cls(PhiFamily.CONSTANT, (c,), **kw)

    @classmethod
    def affine_reciprocal(cls, a, b, **kw):
        return cls(PhiFamily.AFFINE_RECIPROCAL, (a, b), **kw)

    @classmethod
    def polynomial(cls, coefficients, **kw):
        return cls(PhiFamily.POLYNOMIAL, tuple(coefficients), **kw)

    # structure ------------------------------------------------------------
    def poles(self) -> tuple:
        if self.family is PhiFamily.RECIPROCAL:
            return (0.0,)
        if self.family is PhiFamily.AFFINE_RECIPROCAL:
            return (-self.params[1],)
        return ()

    def zeros(self) -> tuple:
        """Real zeros of phi; ``None`` when phi vanishes identically."""
        if self.family is PhiFamily.CONSTANT:
            return None if self.params[0] == 0.0 else ()
        if self.family is PhiFamily.POLYNOMIAL:
            c = np.trim_zeros(np.array(self.params), "b")
            if c.size == 0:
                return None
            if c.size == 1:
                return ()
            roots = P.polyroots(c)
            real = sorted(float(r.real) + 0.0 for r in roots if abs(r.imag) <= 1e-10 * max(1.0, abs(r)))
            return tuple(real)
        return ()

    # evaluation -----------------------------------------------------------
    def evaluate(self, t):
        """Vectorised phi; poles give ``nan`` instead of raising."""
        t = np.asarray(t, dtype=float)
        fam, p = self.family, self.params
        with np.errstate(divide="ignore", invalid="ignore"):
            if fam is PhiFamily.RECIPROCAL:
                out = np.where(t == 0.0, np.nan, 1.0 / np.where(t == 0.0, 1.0, t))
            elif fam is PhiFamily.CONSTANT:
                out = np.full_like(t, p[0])
            elif fam is PhiFamily.AFFINE_RECIPROCAL:
                d = p[1] + t
                out = np.where(d == 0.0, np.nan, p[0] / np.where(d == 0.0, 1.0, d))
            else:
                out = P.polyval(t, p)
        return out

    def inverse(self, t):
        """``1 / phi(t)``, continuous through the poles of phi (where it is 0)."""
        t = np.asarray(t, dtype=float)
        fam, p = self.family, self.params
        with np.errstate(divide="ignore"):
            if fam is PhiFamily.RECIPROCAL:
                return t.copy()
            if fam is PhiFamily.AFFINE_RECIPROCAL:
                return (p[1] + t) / p[0]
            if fam is PhiFamily.CONSTANT:
                return np.full_like(t, 1.0 / p[0] if p[0] != 0.0 else np.inf)
            return 1.0 / P.polyval(t, p)

    def analytic_derivative(self, t):
        t = np.asarray(t, dtype=float)
        fam, p = self.family, self.params
        with np.errstate(divide="ignore", invalid="ignore"):
            if fam is PhiFamily.RECIPROCAL:
                return np.where(t == 0.0, np.nan, -1.0 / (t * t))
            if fam is PhiFamily.CONSTANT:
                return np.zeros_like(t)
            if fam is PhiFamily.AFFINE_RECIPROCAL:
                d = p[1] + t
                return np.where(d == 0.0, np.nan, -p[0] / (d * d))
            return P.polyval(t, P.polyder(p))

    def to_dict(self) -> dict:
        d = {"family": self.family.value}
        fam, p = self.family, self.params
        if fam is PhiFamily.CONSTANT:
            d["c"] = p[0]
        elif fam is PhiFamily.AFFINE_RECIPROCAL:
            d["a"], d["b"] = p
        elif fam is PhiFamily.POLYNOMIAL:
            d["coefficients"] = list(p)
        if self.derivative != "analytic":
            d["derivative"] = self.derivative
        if self.step is not None:
            d["step"] = self.step
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PhiSpec":
        d = dict(d)
        try:
            fam = PhiFamily(d.pop("family"))
        except (KeyError, ValueError) as exc:
            raise ContractError(f"phi: bad or missing family ({exc})") from None
        kw = {"derivative": d.pop("derivative", "analytic"), "step": d.pop("step", None)}
        if fam is PhiFamily.RECIPROCAL:
            params = ()
        elif fam is PhiFamily.CONSTANT:
            params = (d.pop("c"),)
        elif fam is PhiFamily.AFFINE_RECIPROCAL:
            params = (d.pop("a"), d.pop("b"))
        else:
            params = tuple(d.pop("coefficients"))
        if d:
            raise ContractError(f"phi: unknown keys {sorted(d)}")
        return cls(fam, params, **kw)


def phi_eval(phi: PhiSpec, t: float) -> float:
    """phi(t); raises :class:`SingularityError` at a pole."""
    t = float(t)
    if t in phi.poles():
        raise SingularityError(t)
    return float(phi.evaluate(t))


def phi_derivative(phi: PhiSpec, t: float) -> float:
    """phi'(t), analytic or by central difference according to ``phi.derivative``."""
    t = float(t)
    if t in phi.poles():
        raise SingularityError(t)
    if phi.derivative == "analytic":
        return float(phi.analytic_derivative(t))
    h = phi.step if phi.step is not None else central_step(t)
    lo, hi = t - h, t + h
    for pole in phi.poles():
        if lo <= pole <= hi:
            raise SingularityError(pole, f"central difference straddles the pole at {pole}")
    return float((phi.evaluate(hi) - phi.evaluate(lo)) / (2.0 * h))


def central_step(t: float) -> float:
    return CBRT_EPS * max(1.0, abs(t))


# ---------------------------------------------------------------------------
# joint law of (Y, Z)
# ---------------------------------------------------------------------------

class LawKind(str, enum.Enum):
    GAUSSIAN2D = "gaussian2d"
    EXP_PAIR = "exp_pair"
    MIXTURE = "mixture"


# Z = h(Y) for Y ~ Exp(rate); moments are closed form
EXP_PAIR_MAPS = ("identity", "square", "sqrt", "zero", "exp_neg")


def _exp_pair_moments(rate, h):
    lam = rate
    my, vy = 1.0 / lam, 1.0 / lam**2
    if h == "identity":
        mz, vz, c = my, vy, vy
    elif h == "square":
        mz = 2.0 / lam**2
        vz = 24.0 / lam**4 - mz**2
        c = 6.0 / lam**3 - my * mz
    elif h == "sqrt":
        g15 = math.gamma(1.5)
        mz = g15 / math.sqrt(lam)
        vz = 1.0 / lam - mz**2
        c = math.gamma(2.5) / lam**1.5 - my * mz
    elif h == "zero":
        mz = vz = c = 0.0
    elif h == "exp_neg":
        mz = lam / (lam + 1.0)
        vz = lam / (lam + 2.0) - mz**2
        c = lam / (lam + 1.0) ** 2 - my * mz
    else:
        raise ContractError(f"unknown exp_pair map {h!r}; choose from {EXP_PAIR_MAPS}")
    return np.array([my, mz]), np.array([[vy, c], [c, vz]])


def _apply_map(h, y):
    if h == "identity":
        return y.copy()
    if h == "square":
        return y * y
    if h == "sqrt":
        return np.sqrt(y)
    if h == "zero":
        return np.zeros_like(y)
    return np.exp(-y)


def _psd_factor(cov):
    """Lower-triangular ``L`` with ``L L^T = cov`` for a 2x2 PSD matrix."""
    a, b, c = cov[0, 0], cov[0, 1], cov[1, 1]
    l11 = math.sqrt(a)
    l21 = b / l11 if l11 > 0 else 0.0
    l22 = math.sqrt(max(c - l21 * l21, 0.0))
    return np.array([[l11, 0.0], [l21, l22]])


@dataclass(frozen=True)
class JointLaw:
    """Law of one pair ``(Y, Z)``.

    Build with :meth:`gaussian2d`, :meth:`exp_pair` or :meth:`mixture`.
    ``mean`` is ``(m_Y, m_Z)`` and ``cov`` the 2x2 covariance matrix Sigma.
    """

    kind: LawKind
    params: dict
    mean: np.ndarray = field(repr=False)
    cov: np.ndarray = field(repr=False)

    @property
    def m_Y(self) -> float:
        return float(self.mean[0])

    @property
    def m_Z(self) -> float:
        return float(self.mean[1])

    @property
    def Sigma(self) -> np.ndarray:
        return self.cov.copy()

    # constructors ---------------------------------------------------------
    @classmethod
    def gaussian2d(cls, mean, cov):
        mean = np.asarray(mean, dtype=float).reshape(2)
        cov = np.asarray(cov, dtype=float).reshape(2, 2)
        _check_cov(cov)
        return cls(LawKind.GAUSSIAN2D, {"mean": mean.tolist(), "cov": cov.tolist(),
                                        "factor": _psd_factor(cov)}, mean, cov)

    @classmethod
    def exp_pair(cls, rate=1.0, h="identity"):
        rate = float(rate)
        if not rate > 0:
            raise ContractError("exp_pair rate must be positive")
        mean, cov = _exp_pair_moments(rate, h)
        return cls(LawKind.EXP_PAIR, {"rate": rate, "h": h}, mean, cov)

    @classmethod
    def mixture(cls, p, continuous: "JointLaw", atoms, atom_probs=None):
        """With probability ``p`` draw from ``continuous``, else from the atoms."""
        p = float(p)
        if not 0.0 <= p <= 1.0:
            raise ContractError("mixture weight p must lie in [0, 1]")
        if continuous.kind is LawKind.MIXTURE:
            raise ContractError("mixture continuous part must be gaussian2d or exp_pair")
        atoms = np.asarray(atoms, dtype=float).reshape(-1, 2)
        if atoms.shape[0] == 0:
            raise ContractError("mixture needs at least one atom")
        if atom_probs is None:
            atom_probs = np.full(atoms.shape[0], 1.0 / atoms.shape[0])
        atom_probs = np.asarray(atom_probs, dtype=float)
        if atom_probs.shape != (atoms.shape[0],) or np.any(atom_probs < 0) \
                or not math.isclose(atom_probs.sum(), 1.0, rel_tol=1e-12):
            raise ContractError("atom_probs must be a probability vector matching atoms")
        am = atom_probs @ atoms
        asecond = (atoms * atom_probs[:, None]).T @ atoms
        cm = continuous.mean
        csecond = continuous.cov + np.outer(cm, cm)
        mean = p * cm + (1 - p) * am
        cov = p * csecond + (1 - p) * asecond - np.outer(mean, mean)
        cov = 0.5 * (cov + cov.T)
        return cls(LawKind.MIXTURE, {"p": p, "continuous": continuous, "atoms": atoms,
                                     "atom_probs": atom_probs,
                                     "atom_cdf": np.cumsum(atom_probs)}, mean, cov)

    # properties used by hypothesis checks ---------------------------------
    def has_continuous_y(self) -> bool:
        if self.kind is LawKind.MIXTURE:
            return self.params["p"] > 0 and self.params["continuous"].has_continuous_y()
        if self.kind is LawKind.GAUSSIAN2D:
            return self.cov[0, 0] > 0
        return True

    def has_continuous_pair(self) -> bool:
        """Absolutely continuous component on R^2 (not just for Y)."""
        if self.kind is LawKind.MIXTURE:
            return self.params["p"] > 0 and self.params["continuous"].has_continuous_pair()
        if self.kind is LawKind.GAUSSIAN2D:
            return np.linalg.det(self.cov) > 1e-14 * max(1.0, np.trace(self.cov) ** 2)
        # (Y, h(Y)) lives on a curve
        return False

    # sampling -------------------------------------------------------------
    def sample(self, rng: np.random.Generator, n: int):
        """Return arrays ``(Y, Z)`` of ``n`` i.i.d. draws."""
        if self.kind is LawKind.GAUSSIAN2D:
            g = rng.standard_normal((n, 2))
            L = self.params["factor"]
            y = self.mean[0] + L[0, 0] * g[:, 0]
            z = self.mean[1] + L[1, 0] * g[:, 0] + L[1, 1] * g[:, 1]
            return y, z
        if self.kind is LawKind.EXP_PAIR:
            y = rng.standard_exponential(n) / self.params["rate"]
            return y, _apply_map(self.params["h"], y)
        switch = rng.random(n) < self.params["p"]
        cy, cz = self.params["continuous"].sample(rng, n)
        pick = np.searchsorted(self.params["atom_cdf"], rng.random(n), side="right")
        pick = np.minimum(pick, len(self.params["atom_probs"]) - 1)
        atoms = self.params["atoms"][pick]
        return np.where(switch, cy, atoms[:, 0]), np.where(switch, cz, atoms[:, 1])

    # serialisation --------------------------------------------------------
    def to_dict(self) -> dict:
        if self.kind is LawKind.GAUSSIAN2D:
            return {"kind": "gaussian2d", "mean": self.params["mean"], "cov": self.params["cov"]}
        if self.kind is LawKind.EXP_PAIR:
            return {"kind": "exp_pair", "rate": self.params["rate"], "h": self.params["h"]}
        return {"kind": "mixture", "p": self.params["p"],
                "continuous": self.params["continuous"].to_dict(),
                "atoms": self.params["atoms"].tolist(),
                "atom_probs": self.params["atom_probs"].tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "JointLaw":
        d = dict(d)
        kind = d.pop("kind", None)
        try:
            if kind == "gaussian2d":
                law = cls.gaussian2d(d.pop("mean"), d.pop("cov"))
            elif kind == "exp_pair":
                law = cls.exp_pair(d.pop("rate", 1.0), d.pop("h", "identity"))
            elif kind == "mixture":
                law = cls.mixture(d.pop("p"), cls.from_dict(d.pop("continuous")),
                                  d.pop("atoms"), d.pop("atom_probs", None))
            else:
                raise ContractError(f"law: unknown kind {kind!r}")
        except KeyError as exc:
            raise ContractError(f"law: missing key {exc}") from None
        if d:
            raise ContractError(f"law: unknown keys {sorted(d)}")
        return law


def _check_cov(cov):
    if not np.all(np.isfinite(cov)):
        raise ContractError("covariance must be finite")
    if abs(cov[0, 1] - cov[1, 0]) > 1e-12 * max(1.0, np.abs(cov).max()):
        raise ContractError("covariance must be symmetric")
    if np.linalg.eigvalsh(cov).min() < -1e-12 * max(1.0, np.trace(cov)):
        raise ContractError("covariance must be positive semidefinite")


# ---------------------------------------------------------------------------
# model and index schedule
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ModelSpec:
    q: int
    betas: tuple
    law: JointLaw
    phi: PhiSpec
    x: float = 0.0
    z: float = 0.0
    y: tuple = ()

    def __post_init__(self):
        if not (isinstance(self.q, (int, np.integer)) and self.q >= 1):
            raise ContractError(f"q must be a positive integer, got {self.q!r}")
        betas = tuple(float(b) for b in self.betas)
        y = tuple(float(v) for v in self.y) if self.y else (0.0,) * self.q
        object.__setattr__(self, "q", int(self.q))
        object.__setattr__(self, "betas", betas)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "z", float(self.z))
        if len(betas) != self.q + 1:
            raise ContractError(f"betas must have q+1={self.q + 1} entries, got {len(betas)}")
        if not all(math.isfinite(b) for b in betas) or betas[0] <= 0:
            raise ContractError("betas must be finite and positive")
        if any(b1 >= b2 for b1, b2 in zip(betas, betas[1:])):
            raise ContractError(f"betas must be strictly increasing, got {betas}")
        if len(y) != self.q:
            raise ContractError(f"y offsets must have q={self.q} entries, got {len(y)}")
        if not all(math.isfinite(v) for v in (*y, self.x, self.z)):
            raise ContractError("offsets must be finite")

    @property
    def beta_last(self) -> float:
        return self.betas[-1]

    @property
    def anchor(self) -> float:
        """``beta^{q+1} m_Y``, the point where phi and phi' are taken."""
        return self.betas[-1] * self.law.m_Y

    def hypotheses(self) -> dict:
        """Which hypotheses of the limit law hold for this model."""
        out = {
            "y_not_constant": bool(self.law.cov[0, 0] > 0),
            "y_has_continuous_component": bool(self.law.has_continuous_y()),
            "pair_has_continuous_component": bool(self.law.has_continuous_pair()),
        }
        try:
            out["phi_nonzero_at_anchor"] = bool(phi_eval(self.phi, self.anchor) != 0.0)
        except SingularityError:
            out["phi_nonzero_at_anchor"] = False
        return out

    def to_dict(self) -> dict:
        return {"q": self.q, "betas": list(self.betas), "x": self.x, "z": self.z,
                "y": list(self.y), "law": self.law.to_dict(), "phi": self.phi.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSpec":
        d = dict(d)
        try:
            spec = cls(q=d.pop("q"), betas=tuple(d.pop("betas")),
                       law=JointLaw.from_dict(d.pop("law")), phi=PhiSpec.from_dict(d.pop("phi")),
                       x=d.pop("x", 0.0), z=d.pop("z", 0.0), y=tuple(d.pop("y", ())))
        except KeyError as exc:
            raise ContractError(f"model: missing key {exc}") from None
        except TypeError as exc:
            raise ContractError(f"model: {exc}") from None
        if d:
            raise ContractError(f"model: unknown keys {sorted(d)}")
        return spec


@dataclass(frozen=True)
class IndexSchedule:
    M: int
    beta_M: tuple
    gamma: tuple
    gamma_bar: tuple
    monotone_from: int

    @property
    def n_draws(self) -> int:
        return self.beta_M[-1]

    @property
    def increments(self) -> tuple:
        """Block lengths ``beta_M^l - beta_M^{l-1}`` with ``beta_M^0 = 0``."""
        prev = (0,) + self.beta_M[:-1]
        return tuple(b - a for a, b in zip(prev, self.beta_M))


def ceil_index(beta: float, M: int) -> int:
    """``ceil(beta * M)`` in exact decimal arithmetic.

    ``beta`` is read through its shortest repr so ``0.7 * 100`` gives 70, not 71.
    """
    exact = Fraction(repr(float(beta))) * M
    if abs(exact) > 2**53:
        return ceil_int(beta * M)  # raises RangeError
    return math.ceil(exact)


COLLISION_SCAN = 10_000


def _last_collision(a: float, b: float) -> int:
    """Largest ``M`` with ``ceil(aM) == ceil(bM)`` for ``a < b`` (0 if none).

    Once ``(b - a) M >= 1`` the interval ``(aM, bM]`` holds an integer, so the
    scan runs downward from ``1 / (b - a)``.  When the gap is so small that
    the scan would exceed :data:`COLLISION_SCAN` steps without a hit, the
    conservative bound ``ceil(1 / (b - a)) - 1`` is returned instead.
    """
    fa, fb = Fraction(repr(a)), Fraction(repr(b))
    top = math.ceil(1 / (fb - fa)) - 1
    for m in range(top, max(top - COLLISION_SCAN, 0), -1):
        if math.ceil(fa * m) == math.ceil(fb * m):
            return m
    return top if top > COLLISION_SCAN else 0


def beta_indices(spec: ModelSpec | Sequence[float], M: int) -> IndexSchedule:
    """Index schedule ``beta_M^i = ceil(beta^i M)`` with ``gamma`` and ``gamma_bar``.

    ``monotone_from`` is the smallest ``M0`` such that the ``beta_M^i`` are
    strictly increasing for every ``M >= M0``.
    """
    betas = spec.betas if isinstance(spec, ModelSpec) else tuple(float(b) for b in spec)
    if not (isinstance(M, (int, np.integer)) and M >= 1):
        raise ContractError(f"M must be a positive integer, got {M!r}")
    bm = tuple(ceil_index(b, int(M)) for b in betas)
    prev = (0.0,) + betas[:-1]
    gamma_bar = tuple(b - a for a, b in zip(prev, betas))
    monotone_from = max((_last_collision(a, b) + 1 for a, b in zip(betas, betas[1:])), default=1)
    return IndexSchedule(int(M), bm, gamma_bar[:-1], gamma_bar, monotone_from)


# ---------------------------------------------------------------------------
# integrability certificate
# ---------------------------------------------------------------------------

class Verdict(str, enum.Enum):
    INTEGRABLE = "IntegrableWitness"
    DIVERGENT = "LikelyDivergent"
    INCONCLUSIVE = "Inconclusive"


@dataclass
class IntegrabilityReport:
    verdict: Verdict
    m_tilde: int | None = None
    value: float | None = None
    reason: str = ""
    trace: list = field(default_factory=list)


def integrability_integrand(phi: PhiSpec, center: float, exponent: int, m_tilde: float):
    def f(y):
        r = np.abs(phi.inverse(center + y))
        with np.errstate(over="ignore", invalid="ignore"):
            return r**exponent * np.exp(-m_tilde * y * y)
    return f


def integrability_integral(phi, center, exponent, m_tilde, *, tol=1e-10, limit=4000):
    """Adaptive quadrature of ``int |phi(center+y)|^{-exponent} exp(-m y^2) dy``."""
    zeros = phi.zeros() or ()
    points = [z - center for z in zeros] + [p - center for p in phi.poles()] + [0.0]
    return integrate(integrability_integrand(phi, center, exponent, m_tilde),
                     points=points, atol=tol, rtol=tol, limit=limit)


def local_exponent(phi: PhiSpec, zero: float, exponent: int, side: float = 1.0) -> float:
    """Slope of ``log|phi|^{-exponent}`` against ``log|t - zero|`` next to a zero."""
    d = np.logspace(-3, -8, 11)
    with np.errstate(divide="ignore"):
        vals = np.abs(phi.evaluate(zero + side * d)) ** (-float(exponent))
    ok = np.isfinite(vals) & (vals > 0)
    if ok.sum() < 3:
        return -math.inf
    slope, _ = np.polyfit(np.log(d[ok]), np.log(vals[ok]), 1)
    return float(slope)


def check_integrability(phi: PhiSpec, center: float, exponent: int, M_tilde_max: int,
                        *, tol: float = 1e-10) -> IntegrabilityReport:
    """Numerical certificate for the Gaussian-weighted integrability condition.

    Returns ``LikelyDivergent`` when phi vanishes identically or when a local
    power-law fit near a real zero of phi has slope <= -1 (non-integrable).
    Otherwise returns the smallest ``M~`` in ``1..M_tilde_max`` whose integral
    converges and is stable when the tolerance is tightened a hundredfold, or
    ``Inconclusive`` when none does.
    """
    if not (isinstance(exponent, (int, np.integer)) and exponent >= 1):
        raise ContractError("exponent must be a positive integer")
    if not (isinstance(M_tilde_max, (int, np.integer)) and M_tilde_max >= 1):
        raise ContractError("M_tilde_max must be a positive integer")
    trace = []
    zeros = phi.zeros()
    if zeros is None:
        return IntegrabilityReport(Verdict.DIVERGENT, reason="phi vanishes identically",
                                   trace=trace)
    for z in zeros:
        for side in (-1.0, 1.0):
            s = local_exponent(phi, z, exponent, side)
            trace.append(("local_exponent", z, side, s))
            if s <= -1.0 + 1e-3:
                return IntegrabilityReport(
                    Verdict.DIVERGENT,
                    reason=f"|phi|^-{exponent} ~ |t-{z:g}|^{s:.3f} near the zero {z:g}",
                    trace=trace)
    for m in range(1, int(M_tilde_max) + 1):
        coarse = integrability_integral(phi, center, exponent, m, tol=tol)
        fine = integrability_integral(phi, center, exponent, m, tol=tol / 100)
        trace.append(("refine", m, coarse.value, fine.value, coarse.converged, fine.converged))
        if coarse.converged and fine.converged and math.isfinite(fine.value) and \
                abs(coarse.value - fine.value) <= max(10 * tol, 1e-8 * abs(fine.value)):
            return IntegrabilityReport(Verdict.INTEGRABLE, m_tilde=m, value=float(fine.value),
                                       trace=trace)
    return IntegrabilityReport(Verdict.INCONCLUSIVE,
                               reason="quadrature did not settle under refinement", trace=trace)


def require_finite_positive(name, v):
    if not (math.isfinite(v) and v > 0):
        raise DomainError(f"{name} must be finite and positive, got {v!r}")
