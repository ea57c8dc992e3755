"""Monte Carlo generator for coupled fractional sums.

For one realisation, ``n = beta_M^{q+1}`` pairs ``(Y_i, Z_i)`` are drawn and

    c    = phi((Y_1 + ... + Y_n + x) / M)
    R^i  = c * (Y_1 + ... + Y_{beta_M^i} + y_i)          i = 1..q
    K_M  = sqrt(M) * (c * (Z_1 + ... + Z_n + z) / M - theta)

The sampled vector is ``({R^1}, ..., {R^q}, K_M)``.  A pole of phi at the
argument marks the sample exceptional instead of aborting the batch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import fractional_part_array
from .errors import BatchFailure, ContractError
from .limit_law import theta as limit_theta
from .model import IndexSchedule, ModelSpec, beta_indices, phi_eval
from .rng import TAG_MODEL, TAG_SUM, map_chunks, substream

# floats drawn per chunk; chunk boundaries never depend on the thread count
CHUNK_FLOATS = 1 << 21
DEFAULT_TOLERANCE = 1e-6


@dataclass(frozen=True)
class FracVectorSample:
    fracs: tuple
    k_value: float
    raw_R: tuple
    exceptional: bool


@dataclass
class BatchResult:
    """Column storage for ``N`` samples; ``sample(i)`` gives one row."""

    fracs: np.ndarray       # (N, q)
    k: np.ndarray           # (N,)
    raw: np.ndarray         # (N, q)
    exceptional: np.ndarray  # (N,) bool
    M: int
    N: int
    seed: int

    @property
    def exceptional_count(self) -> int:
        return int(self.exceptional.sum())

    @property
    def samples(self):
        return [self.sample(i) for i in range(self.N)]

    def sample(self, i: int) -> FracVectorSample:
        return FracVectorSample(tuple(self.fracs[i].tolist()), float(self.k[i]),
                                tuple(self.raw[i].tolist()), bool(self.exceptional[i]))

    def valid(self):
        """``(fracs, k)`` restricted to non-exceptional samples."""
        ok = ~self.exceptional
        return self.fracs[ok], self.k[ok]

    def __eq__(self, other):
        if not isinstance(other, BatchResult):
            return NotImplemented
        return (self.M, self.N, self.seed) == (other.M, other.N, other.seed) and all(
            np.array_equal(a, b, equal_nan=True)
            for a, b in ((self.fracs, other.fracs), (self.k, other.k), (self.raw, other.raw),
                         (self.exceptional, other.exceptional)))


def _check_draws(schedule: IndexSchedule, Y, Z):
    Y = np.asarray(Y, dtype=float)
    Z = np.asarray(Z, dtype=float)
    n = schedule.n_draws
    if Y.shape != (n,) or Z.shape != (n,):
        raise ContractError(f"expected {n} pairs (Y_i, Z_i), got shapes {Y.shape} and {Z.shape}")
    return Y, Z


def _coupling(spec: ModelSpec, M: int, y_total: np.ndarray) -> np.ndarray:
    """phi((sum Y + x) / M), NaN where the argument is a pole."""
    return spec.phi.evaluate((y_total + spec.x) / M)


def _block_sums(Y: np.ndarray, schedule: IndexSchedule) -> np.ndarray:
    """Sums of ``Y`` over the index blocks; blocks may be empty at small ``M``."""
    bounds = (0,) + schedule.beta_M
    return np.array([Y[a:b].sum() for a, b in zip(bounds, bounds[1:])])


def sample_vector(spec: ModelSpec, schedule: IndexSchedule, Y, Z) -> FracVectorSample:
    Y, Z = _check_draws(schedule, Y, Z)
    blocks = _block_sums(Y, schedule)
    fr, k, raw, exc = _assemble(spec, schedule, blocks[None, :], np.array([Z.sum()]))
    return FracVectorSample(tuple(fr[0].tolist()), float(k[0]), tuple(raw[0].tolist()),
                            bool(exc[0]))


def _assemble(spec: ModelSpec, schedule: IndexSchedule, blocks: np.ndarray, z_total: np.ndarray):
    """Vector map from per-sample block sums of Y and total Z to the sampled vector."""
    M = schedule.M
    partial = np.cumsum(blocks, axis=1)
    c = _coupling(spec, M, partial[:, -1])
    exc = ~np.isfinite(c)
    raw = c[:, None] * (partial[:, :-1] + np.array(spec.y)[None, :])
    with np.errstate(invalid="ignore"):
        k = math.sqrt(M) * (c * (z_total + spec.z) / M - limit_theta(spec))
    raw[exc] = np.nan
    k[exc] = np.nan
    return fractional_part_array(raw), k, raw, exc


def _chunk_size(n_draws: int) -> int:
    return max(1, CHUNK_FLOATS // (2 * n_draws))


def _draw_block_sums(spec, schedule, seed, start, stop, tag=TAG_MODEL):
    q1 = spec.q + 1
    blocks = np.empty((stop - start, q1))
    z_total = np.empty(stop - start)
    n = schedule.n_draws
    for j, idx in enumerate(range(start, stop)):
        Y, Z = spec.law.sample(substream(seed, idx, tag), n)
        blocks[j] = _block_sums(Y, schedule)
        z_total[j] = Z.sum()
    return blocks, z_total


def _validate_run(M, N, seed):
    for name, v in (("M", M), ("N", N)):
        if not (isinstance(v, (int, np.integer)) and v >= 1):
            raise ContractError(f"{name} must be a positive integer, got {v!r}")
    if not (isinstance(seed, (int, np.integer)) and 0 <= seed < 2**64):
        raise ContractError(f"seed must be a 64-bit unsigned integer, got {seed!r}")


def sample_batch(spec: ModelSpec, M: int, N: int, seed: int, *, threads: int = 1,
                 tolerance: float = DEFAULT_TOLERANCE) -> BatchResult:
    """``N`` independent realisations; the result depends only on ``(spec, M, N, seed)``."""
    _validate_run(M, N, seed)
    schedule = beta_indices(spec, M)
    # fail fast on a pole at the anchor before spending time on sampling
    phi_eval(spec.phi, spec.anchor)

    def work(a, b):
        blocks, zt = _draw_block_sums(spec, schedule, seed, a, b)
        return _assemble(spec, schedule, blocks, zt)

    parts = map_chunks(work, N, _chunk_size(schedule.n_draws), threads)
    fr, k, raw, exc = (np.concatenate(x) for x in zip(*parts))
    result = BatchResult(fr, k, raw, exc, int(M), int(N), int(seed))
    if result.exceptional_count > tolerance * N:
        raise BatchFailure(
            f"{result.exceptional_count} of {N} samples hit a pole of phi "
            f"(tolerance {tolerance:g})", result)
    return result


# ---------------------------------------------------------------------------
# standardized vector
# ---------------------------------------------------------------------------

def _standardize(spec: ModelSpec, schedule: IndexSchedule, blocks, z_total):
    M = schedule.M
    sq = math.sqrt(M)
    c = _coupling(spec, M, blocks.sum(axis=1))
    centre = spec.law.m_Y * phi_eval(spec.phi, spec.anchor) * np.array(schedule.gamma_bar[:-1]) * M
    incr = c[:, None] * blocks[:, :-1]
    out = np.empty((blocks.shape[0], spec.q + 1))
    out[:, :-1] = (incr - centre[None, :]) / sq
    out[:, -1] = sq * (c * z_total / M - limit_theta(spec))
    return out


def sample_standardized(spec: ModelSpec, schedule: IndexSchedule, Y, Z) -> np.ndarray:
    """Centred and scaled block increments of R with the K component, offsets y and z set to 0.

    Returns ``((R^{l-1:l} - m_Y phi(anchor) gbar_l M) / sqrt(M) for l <= q, K_M)``
    where ``R^{l-1:l} = c * (Y_{beta_M^{l-1}+1} + ... + Y_{beta_M^l})``.
    """
    Y, Z = _check_draws(schedule, Y, Z)
    return _standardize(spec, schedule, _block_sums(Y, schedule)[None, :], np.array([Z.sum()]))[0]


def reconstruct_R(spec: ModelSpec, schedule: IndexSchedule, standardized) -> np.ndarray:
    """Invert the centring of :func:`sample_standardized` back to the increments ``R^{l-1:l}``."""
    M = schedule.M
    centre = spec.law.m_Y * phi_eval(spec.phi, spec.anchor) * np.array(schedule.gamma_bar[:-1]) * M
    return np.asarray(standardized)[..., :-1] * math.sqrt(M) + centre


def standardized_batch(spec: ModelSpec, M: int, N: int, seed: int, *, threads: int = 1) -> np.ndarray:
    """``(N, q+1)`` array of standardized vectors; rows with a pole are NaN."""
    _validate_run(M, N, seed)
    schedule = beta_indices(spec, M)
    phi_eval(spec.phi, spec.anchor)

    def work(a, b):
        blocks, zt = _draw_block_sums(spec, schedule, seed, a, b)
        with np.errstate(invalid="ignore"):
            return _standardize(spec, schedule, blocks, zt)

    return np.concatenate(map_chunks(work, N, _chunk_size(schedule.n_draws), threads))


def iid_standardized_sums(law, M: int, N: int, seed: int, *, threads: int = 1) -> np.ndarray:
    """``(N, 2)`` array of ``sum_{i<=M} ((Y_i, Z_i) - mean) / sqrt(M)``."""
    _validate_run(M, N, seed)
    sq = math.sqrt(M)

    def work(a, b):
        out = np.empty((b - a, 2))
        for j, idx in enumerate(range(a, b)):
            Y, Z = law.sample(substream(seed, idx, TAG_SUM), M)
            out[j, 0] = (Y.sum() - M * law.m_Y) / sq
            out[j, 1] = (Z.sum() - M * law.m_Z) / sq
        return out

    return np.concatenate(map_chunks(work, N, _chunk_size(M), threads))


def batch_rows(batch: BatchResult):
    """Header and rows for the flat per-sample CSV."""
    q = batch.fracs.shape[1]
    header = [f"frac_{i + 1}" for i in range(q)] + ["k_value", "exceptional"]
    rows = [[*batch.fracs[i].tolist(), float(batch.k[i]), int(batch.exceptional[i])]
            for i in range(batch.N)]
    return header, rows
