"""Deterministic quadrature of a transformed Gaussian density and its Gaussian limit.

Given a centred normal vector ``W = (W_1, ..., W_{q+2})`` with covariance
``Sigma1``, the scene describes, for fixed ``M``, the law of

    V_i = (phi(eta_M[q+1] / M + W_{q+2} / sqrt(M)) * (sqrt(M) W_i + eta_M[i]) - M phi(eta[q+1]) eta[i]) / sqrt(M)

for ``i = 1..q+1``.  Changing variables in the first ``q+1`` coordinates
leaves a one-dimensional integral over ``x = W_{q+2}`` for the density of
``V``, computed here by adaptive quadrature.  As ``M`` grows the density
converges to the centred normal density with covariance ``A1 Sigma1 A1^T``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ContractError, DegeneracyError, QuadratureError
from .limit_law import GaussianLaw, build_A1, gaussian_density_chol, limit_etas, sigma1_matrix
from .model import ModelSpec, PhiSpec, beta_indices, phi_eval
from .quadrature import integrate

DEFAULT_RATE_BOUND = 10.0


@dataclass(frozen=True)
class DensityScene:
    q: int
    eta_M: np.ndarray
    eta: np.ndarray
    Sigma1: np.ndarray
    phi: PhiSpec
    M: int
    rate_bound: float = DEFAULT_RATE_BOUND

    def __post_init__(self):
        eta_M = np.asarray(self.eta_M, dtype=float).ravel()
        eta = np.asarray(self.eta, dtype=float).ravel()
        S1 = np.asarray(self.Sigma1, dtype=float)
        q = int(self.q)
        if eta.shape != (q + 2,) or eta_M.shape != (q + 2,) or S1.shape != (q + 2, q + 2):
            raise ContractError(f"scene sizes do not match q={q}")
        if not (isinstance(self.M, (int, np.integer)) and self.M >= 1):
            raise ContractError("M must be a positive integer")
        object.__setattr__(self, "eta_M", eta_M)
        object.__setattr__(self, "eta", eta)
        object.__setattr__(self, "Sigma1", S1)
        if phi_eval(self.phi, eta[-1]) == 0.0:
            raise DegeneracyError(f"phi vanishes at the anchor {eta[-1]}")
        try:
            object.__setattr__(self, "_chol", np.linalg.cholesky(S1))
        except np.linalg.LinAlgError:
            raise DegeneracyError("Sigma1 is not positive definite") from None
        if self.rate > self.rate_bound:
            raise ContractError(f"sqrt(M)|eta_M/M - eta| = {self.rate:g} exceeds {self.rate_bound:g}")

    @property
    def rate(self) -> float:
        """``max_i sqrt(M) |eta_M[i]/M - eta[i]|``."""
        return float(math.sqrt(self.M) * np.max(np.abs(self.eta_M / self.M - self.eta)))

    @classmethod
    def exact(cls, q, eta, Sigma1, phi, M, **kw):
        """Scene with ``eta_M = M * eta`` exactly."""
        eta = np.asarray(eta, dtype=float)
        return cls(q, M * eta, eta, Sigma1, phi, M, **kw)

    @classmethod
    def from_model(cls, spec: ModelSpec, M: int, **kw):
        """Scene built from a model with the finite-M proportions of its index schedule."""
        sched = beta_indices(spec, M)
        my, mz = spec.law.m_Y, spec.law.m_Z
        n = sched.beta_M[-1]
        eta_M = np.array([my * d for d in sched.increments[:-1]] + [mz * n, my * n])
        return cls(spec.q, eta_M, limit_etas(spec), sigma1_matrix(spec.law.cov, sched.gamma_bar),
                   spec.phi, M, **kw)

    def limit_covariance(self) -> np.ndarray:
        A = build_A1(self.phi, self.eta[:-1], self.eta[-1])
        G = A @ self.Sigma1 @ A.T
        return 0.5 * (G + G.T)

    def with_M(self, M: int, eta_M=None) -> "DensityScene":
        return DensityScene(self.q, M * self.eta if eta_M is None else eta_M, self.eta,
                          self.Sigma1, self.phi, M, self.rate_bound)


def find_delta(phi: PhiSpec, anchor: float, cap: float | None = None, grid: int = 256) -> float:
    """A radius ``delta`` with ``|phi(anchor + t)| >= |phi(anchor)| / 2`` for ``|t| <= delta``.

    The condition is checked on a grid and the boundary refined by bisection.
    """
    bound = 2.0 / abs(phi_eval(phi, anchor))
    cap = max(1.0, abs(anchor)) if cap is None else cap

    def holds(d):
        t = np.linspace(-d, d, grid)
        r = np.abs(phi.inverse(anchor + t))
        return bool(np.all(r <= bound))

    if holds(cap):
        return cap
    lo, hi = 0.0, cap
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if holds(mid):
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-12 * cap:
            break
    if lo <= 0.0:
        raise DegeneracyError("phi is not bounded away from zero near the anchor")
    return lo


def _integrand(scene: DensityScene, xi: np.ndarray, tail: bool):
    """Integrand in ``x`` (core) or in ``z = x / sqrt(M)`` (tail), vector-valued over ``xi`` rows."""
    M = scene.M
    sq = math.sqrt(M)
    q1 = scene.q + 1
    f_anchor = phi_eval(scene.phi, scene.eta[-1])
    shift = sq * xi + M * f_anchor * scene.eta[None, :q1]          # (n_xi, q+1)
    L = scene._chol
    base = scene.eta_M[-1] / M

    def f(s):
        x = sq * s if tail else s
        t = base + x / sq
        r = scene.phi.inverse(t)                                    # (n,)
        xm = (shift[None, :, :] * r[:, None, None] - scene.eta_M[None, None, :q1]) / sq
        pts = np.concatenate([xm, np.broadcast_to(x[:, None, None], xm.shape[:2] + (1,))], axis=2)
        dens = gaussian_density_chol(L, pts.reshape(-1, q1 + 1)).reshape(xm.shape[:2])
        with np.errstate(over="ignore", invalid="ignore"):
            w = np.abs(r) ** q1
            val = w[:, None] * dens
        # zeros of phi form a null set; drop the non-finite products there
        val = np.where(np.isfinite(val), val, 0.0)
        return val * sq if tail else val

    return f


def _breakpoints(scene: DensityScene, lo: float, hi: float, in_z: bool):
    M = scene.M
    sq = math.sqrt(M)
    base = scene.eta_M[-1] / M
    s = math.sqrt(scene.Sigma1[-1, -1])
    pts = [0.0]
    reach = max(abs(v) for v in (lo, hi) if math.isfinite(v))
    # dyadic cuts at multiples of the sd of x keep the Gaussian bump resolved
    for k in range(64):
        v = s * 2.0**k
        v = v / sq if in_z else v
        if v >= 2.0 * reach:
            break
        pts += [v, -v]
    for z in (scene.phi.zeros() or ()):
        pts.append(z - base if in_z else sq * (z - base))
    return [p for p in pts if lo < p < hi]


def transformed_density_report(scene: DensityScene, xi, *, atol=1e-10, limit=4000):
    """Transformed density at each row of ``xi`` plus the quadrature diagnostics."""
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    if xi.shape[1] != scene.q + 1:
        raise ContractError(f"xi must have {scene.q + 1} coordinates")
    delta = find_delta(scene.phi, scene.eta[-1])
    half = 0.5 * delta * math.sqrt(scene.M)
    core = integrate(_integrand(scene, xi, False), -half, half,
                     points=_breakpoints(scene, -half, half, False), atol=atol, rtol=0.0, limit=limit)
    zc = 0.5 * delta
    tails = [integrate(_integrand(scene, xi, True), a, b,
                       points=_breakpoints(scene, a, b, True), atol=atol, rtol=0.0, limit=limit)
             for a, b in ((-math.inf, -zc), (zc, math.inf))]
    parts = [core, *tails]
    trace = {"delta": delta, "core_half_width": half,
             "intervals": [p.intervals for p in parts], "errors": [p.error for p in parts]}
    if not all(p.converged for p in parts):
        raise QuadratureError("density quadrature did not converge", trace)
    value = np.atleast_1d(core.value) + np.atleast_1d(tails[0].value) + np.atleast_1d(tails[1].value)
    return np.maximum(value, 0.0), trace


def transformed_density(scene: DensityScene, xi, *, atol=1e-10):
    """Density of the transformed vector at ``xi`` (one point or an array of points)."""
    xi_arr = np.asarray(xi, dtype=float)
    vals, _ = transformed_density_report(scene, xi_arr, atol=atol)
    return float(vals[0]) if xi_arr.ndim == 1 else vals


def limit_density(scene: DensityScene, xi):
    law = GaussianLaw.centered(scene.limit_covariance())
    L = law.cholesky()
    xi_arr = np.asarray(xi, dtype=float)
    vals = gaussian_density_chol(L, np.atleast_2d(xi_arr))
    return float(vals[0]) if xi_arr.ndim == 1 else vals


def xi_grid(scene: DensityScene, points_per_axis=11, width_sd=3.0) -> np.ndarray:
    """Tensor grid over ``+-width_sd`` limit standard deviations per axis."""
    sd = np.sqrt(np.diag(scene.limit_covariance()))
    axes = [np.linspace(-width_sd * s, width_sd * s, points_per_axis) for s in sd]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1), axes


@dataclass
class SweepResult:
    rows: list
    header: list
    max_err: dict
    l1_err: dict
    monotone: bool


def pointwise_convergence_sweep(scene_for_M, Ms, grid=None, *, slack=0.10) -> SweepResult:
    """Compare transformed and limit densities on a grid for each ``M``.

    ``scene_for_M`` maps ``M`` to a :class:`DensityScene`.  The grid-L1 error is
    the Riemann sum of ``|transformed - limit|`` over the tensor grid.
    """
    rows, max_err, l1_err = [], {}, {}
    header = None
    for M in Ms:
        scene = scene_for_M(M)
        if grid is None:
            pts, axes = xi_grid(scene)
        else:
            pts, axes = grid
        cell = float(np.prod([a[1] - a[0] for a in axes])) if all(len(a) > 1 for a in axes) else 1.0
        tr = np.atleast_1d(transformed_density(scene, pts))
        lim = np.atleast_1d(limit_density(scene, pts))
        err = np.abs(tr - lim)
        max_err[M] = float(err.max())
        l1_err[M] = float(err.sum() * cell)
        header = ["M"] + [f"xi_{i + 1}" for i in range(pts.shape[1])] + ["transformed", "limit", "abs_err"]
        rows += [[M, *p.tolist(), float(a), float(b), float(e)] for p, a, b, e in zip(pts, tr, lim, err)]
    errs = [max_err[M] for M in Ms]
    monotone = all(b <= a * (1.0 + slack) for a, b in zip(errs, errs[1:]))
    return SweepResult(rows, header, max_err, l1_err, monotone)
