"""Closed-form limit objects: theta, the delta-method variance, the matrix A1 and Gamma."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .errors import ContractError, DegeneracyError
from .model import ModelSpec, PhiSpec, beta_indices, phi_derivative, phi_eval


@dataclass(frozen=True)
class LimitLaw:
    theta: float
    sigma_T_sq: float
    Gamma: np.ndarray
    q: int


@dataclass(frozen=True)
class GaussianLaw:
    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        cov = np.atleast_2d(np.asarray(self.covariance, dtype=float))
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        if cov.shape != (mean.size, mean.size):
            raise ContractError(f"covariance shape {cov.shape} does not match mean of size {mean.size}")
        scale = max(1.0, float(np.abs(cov).max()))
        if np.abs(cov - cov.T).max() > 1e-12 * scale:
            raise ContractError("covariance must be symmetric")
        if np.linalg.eigvalsh(cov).min() < -1e-12 * max(1.0, np.trace(cov)):
            raise ContractError("covariance must be positive semidefinite")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", 0.5 * (cov + cov.T))

    @classmethod
    def centered(cls, covariance):
        cov = np.atleast_2d(np.asarray(covariance, dtype=float))
        return cls(np.zeros(cov.shape[0]), cov)

    def cholesky(self) -> np.ndarray:
        try:
            return np.linalg.cholesky(self.covariance)
        except np.linalg.LinAlgError:
            raise DegeneracyError("covariance is not positive definite") from None


def theta(spec: ModelSpec) -> float:
    return phi_eval(spec.phi, spec.anchor) * spec.beta_last * spec.law.m_Z


def delta_vector(spec: ModelSpec) -> np.ndarray:
    a = spec.anchor
    return np.array([phi_derivative(spec.phi, a) * spec.beta_last * spec.law.m_Z,
                     phi_eval(spec.phi, a)])


def sigma_T_sq(spec: ModelSpec) -> float:
    """Delta-method variance ``beta^{q+1} v^T Sigma v`` of the coupled component."""
    v = delta_vector(spec)
    return float(max(spec.beta_last * (v @ spec.law.cov @ v), 0.0))


def build_A1(spec_or_phi: ModelSpec | PhiSpec, etas, eta_anchor: float) -> np.ndarray:
    """The (q+1)x(q+2) matrix with ``phi(anchor)`` on the diagonal and last column ``eta_i phi'(anchor)``."""
    phi = spec_or_phi.phi if isinstance(spec_or_phi, ModelSpec) else spec_or_phi
    etas = np.asarray(etas, dtype=float).ravel()
    f = phi_eval(phi, eta_anchor)
    if f == 0.0:
        raise DegeneracyError(f"phi vanishes at {eta_anchor}; A1 loses rank")
    d = phi_derivative(phi, eta_anchor)
    n = etas.size
    A = np.zeros((n, n + 1))
    A[np.arange(n), np.arange(n)] = f
    A[:, n] = etas * d
    return A


def sigma1_matrix(Sigma, gamma_bar) -> np.ndarray:
    """Covariance of ``(sqrt(g_l) G_l^1 for l<=q, sum_j sqrt(g_j) G_j^2, sum_j sqrt(g_j) G_j^1)``.

    The ``G_j = (G_j^1, G_j^2)`` are independent N(0, Sigma) blocks and
    ``gamma_bar`` holds the q+1 block proportions.
    """
    Sigma = np.asarray(Sigma, dtype=float)
    a, b, c = Sigma[0, 0], Sigma[0, 1], Sigma[1, 1]
    g = np.asarray(gamma_bar, dtype=float)
    q = g.size - 1
    total = g.sum()
    S = np.zeros((q + 2, q + 2))
    S[np.arange(q), np.arange(q)] = g[:q] * a
    S[:q, q] = S[q, :q] = g[:q] * b
    S[:q, q + 1] = S[q + 1, :q] = g[:q] * a
    S[q, q] = total * c
    S[q, q + 1] = S[q + 1, q] = total * b
    S[q + 1, q + 1] = total * a
    return S


def limit_etas(spec: ModelSpec) -> np.ndarray:
    """``(m_Y gbar_1, ..., m_Y gbar_q, m_Z beta^{q+1}, m_Y beta^{q+1})``."""
    gbar = beta_indices(spec, 1).gamma_bar
    my, mz, bl = spec.law.m_Y, spec.law.m_Z, spec.beta_last
    return np.array([my * g for g in gbar[:-1]] + [mz * bl, my * bl])


def limit_covariance_gamma(spec: ModelSpec) -> LimitLaw:
    try:
        np.linalg.cholesky(spec.law.cov)
    except np.linalg.LinAlgError:
        raise DegeneracyError("Sigma of (Y, Z) is not positive definite") from None
    gbar = beta_indices(spec, 1).gamma_bar
    S1 = sigma1_matrix(spec.law.cov, gbar)
    eta = limit_etas(spec)
    A = build_A1(spec, eta[:-1], eta[-1])
    G = A @ S1 @ A.T
    G = 0.5 * (G + G.T)
    return LimitLaw(theta(spec), sigma_T_sq(spec), G, spec.q)


def gaussian_density(law: GaussianLaw, point) -> float:
    L = law.cholesky()
    x = np.atleast_1d(np.asarray(point, dtype=float)) - law.mean
    return float(gaussian_density_chol(L, x[None, :])[0])


def gaussian_density_chol(L: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Centered normal density with covariance ``L L^T`` at each row of ``points``."""
    d = L.shape[0]
    sol = solve_triangular(L, np.atleast_2d(points).T, lower=True)
    quad = np.einsum("ij,ij->j", sol, sol)
    logdet = 2.0 * np.sum(np.log(np.diag(L)))
    return np.exp(-0.5 * quad - 0.5 * logdet - 0.5 * d * math.log(2.0 * math.pi))
