"""Uniformity, Gaussianity and total-variation checks for simulated samples."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats
from scipy.special import ndtr

from .core import fractional_part_array
from .errors import ContractError

KOLMOGOROV_C_001 = 1.949
HIST_BINS = 64
HIST_PAD_SD = 3.0


@dataclass
class TestReport:
    name: str
    statistic: float
    threshold: float
    n: int
    details: dict = field(default_factory=dict)

    __test__ = False  # keep pytest from collecting this class

    @property
    def passed(self) -> bool:
        return bool(self.statistic <= self.threshold)

    def to_dict(self) -> dict:
        return {"name": self.name, "statistic": float(self.statistic),
                "threshold": float(self.threshold), "n": int(self.n), "pass": self.passed,
                "details": self.details}

    ROW_HEADER = ("name", "statistic", "threshold", "n", "pass")

    def to_row(self) -> list:
        return [self.name, float(self.statistic), float(self.threshold), int(self.n),
                int(self.passed)]


# ---------------------------------------------------------------------------
# Kolmogorov-Smirnov
# ---------------------------------------------------------------------------

def uniform_cdf(x):
    return np.clip(np.asarray(x, dtype=float), 0.0, 1.0)


def normal_cdf(mean=0.0, sd=1.0):
    def F(x):
        return ndtr((np.asarray(x, dtype=float) - mean) / sd)
    return F


def ks_statistic(samples, cdf) -> float:
    """``max_i max(i/n - F(x_(i)), F(x_(i)) - (i-1)/n)`` for sorted ``samples``."""
    x = np.asarray(samples, dtype=float)
    if x.ndim != 1 or x.size == 0:
        raise ContractError("ks_statistic needs a non-empty 1-D sample")
    if np.any(np.diff(x) < 0):
        raise ContractError("ks_statistic expects sorted samples")
    n = x.size
    F = np.asarray(cdf(x), dtype=float)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - F), np.max(F - (i - 1) / n)))


def ks_test(name, samples, cdf, threshold=None) -> TestReport:
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.size
    if threshold is None:
        threshold = KOLMOGOROV_C_001 / math.sqrt(n)
    return TestReport(name, ks_statistic(x, cdf), threshold, n)


# ---------------------------------------------------------------------------
# Weyl sums
# ---------------------------------------------------------------------------

def weyl_sum(fracs, h, k, u: float) -> float:
    """``|N^-1 sum_n exp(i (2 pi k.frac_n + u h_n))|``."""
    f = np.asarray(fracs, dtype=float)
    if f.ndim == 1:
        f = f[:, None]
    k = np.atleast_1d(np.asarray(k, dtype=float))
    if k.shape != (f.shape[1],):
        raise ContractError(f"frequency vector has {k.size} entries for {f.shape[1]} components")
    if not np.any(k):
        raise ContractError("the zero frequency is excluded")
    h = np.zeros(f.shape[0]) if h is None else np.asarray(h, dtype=float)
    phase = 2.0 * np.pi * (f @ k) + u * h
    return float(abs(np.mean(np.exp(1j * phase))))


def weyl_threshold(n: int) -> float:
    return 4.0 / math.sqrt(n)


def weyl_scan(fracs, h, k_range=3, us=(0.0, 1.0, 2.5), name="weyl") -> TestReport:
    """Largest Weyl-sum magnitude over ``k in {-K..K}^q minus 0`` and the given ``u``."""
    f = np.asarray(fracs, dtype=float)
    if f.ndim == 1:
        f = f[:, None]
    q = f.shape[1]
    worst, where, count = 0.0, None, 0
    for k in itertools.product(range(-k_range, k_range + 1), repeat=q):
        if not any(k):
            continue
        for u in us:
            w = weyl_sum(f, h, k, u)
            count += 1
            if w > worst:
                worst, where = w, {"k": list(k), "u": u}
    return TestReport(name, worst, weyl_threshold(f.shape[0]), f.shape[0],
                      {"argmax": where, "evaluations": count})


# ---------------------------------------------------------------------------
# histogram total variation
# ---------------------------------------------------------------------------

def histogram_edges(samples, ref_sd, bins=HIST_BINS):
    """``bins`` equal cells per axis over ``[min - 3 sd, max + 3 sd]``."""
    x = np.atleast_2d(np.asarray(samples, dtype=float).T).T
    sd = np.broadcast_to(np.asarray(ref_sd, dtype=float), (x.shape[1],))
    lo = x.min(axis=0) - HIST_PAD_SD * sd
    hi = x.max(axis=0) + HIST_PAD_SD * sd
    return [np.linspace(lo[j], hi[j], bins + 1) for j in range(x.shape[1])]


def _tv_from_masses(counts, ref_mass, n):
    emp = counts / n
    inside = float(ref_mass.sum())
    return 0.5 * float(np.abs(emp - ref_mass).sum()) + 0.5 * max(0.0, 1.0 - inside)


def histogram_tv_1d(samples, cdf, edges) -> float:
    """Binned TV against a 1-D law given by its CDF (exact cell masses)."""
    x = np.asarray(samples, dtype=float).ravel()
    if x.size == 0:
        raise ContractError("histogram_tv needs samples")
    counts, _ = np.histogram(x, bins=edges)
    F = np.asarray(cdf(edges), dtype=float)
    return _tv_from_masses(counts, np.diff(F), x.size)


def histogram_tv(samples, reference_density, edges=None, *, ref_sd=1.0, bins=HIST_BINS,
                 nodes=8) -> float:
    """Binned TV: half the L1 gap between cell frequencies and reference cell masses,
    plus half the reference mass falling outside the binned box.

    ``reference_density`` maps an ``(m, d)`` array of points to densities; the
    cell masses use a tensor Gauss-Legendre rule with ``nodes`` points per axis.
    """
    x = np.asarray(samples, dtype=float)
    if x.size == 0:
        raise ContractError("histogram_tv needs samples")
    if x.ndim == 1:
        x = x[:, None]
    d = x.shape[1]
    if edges is None:
        edges = histogram_edges(x, ref_sd, bins)
    counts, _ = np.histogramdd(x, bins=edges)
    t, w = np.polynomial.legendre.leggauss(nodes)
    # cell-local nodes per axis: (cells, nodes)
    ax_pts, ax_w = [], []
    for e in edges:
        half = 0.5 * np.diff(e)
        mid = 0.5 * (e[1:] + e[:-1])
        ax_pts.append(mid[:, None] + half[:, None] * t[None, :])
        ax_w.append(half[:, None] * w[None, :])
    grids = np.meshgrid(*[p.ravel() for p in ax_pts], indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)
    dens = np.asarray(reference_density(pts), dtype=float).reshape([p.size for p in ax_pts])
    for j in range(d):
        wj = ax_w[j].ravel()
        shape = [1] * d
        shape[j] = wj.size
        dens = dens * wj.reshape(shape)
    # sum the nodes inside each cell, axis by axis
    for j in range(d):
        cells = ax_pts[j].shape[0]
        new_shape = dens.shape[:j] + (cells, nodes) + dens.shape[j + 1:]
        dens = dens.reshape(new_shape).sum(axis=j + 1)
    return _tv_from_masses(counts, dens, x.shape[0])


def marginal_tv_gaussian(samples, cov, bins=HIST_BINS) -> tuple[float, list]:
    """Largest per-axis binned TV of ``samples`` against the centred normal marginals of ``cov``."""
    x = np.asarray(samples, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    cov = np.atleast_2d(cov)
    per_axis = []
    for j in range(x.shape[1]):
        sd = math.sqrt(cov[j, j])
        edges = histogram_edges(x[:, j], sd, bins)[0]
        per_axis.append(histogram_tv_1d(x[:, j], normal_cdf(0.0, sd), edges))
    return max(per_axis), per_axis


# ---------------------------------------------------------------------------
# grid chi-square
# ---------------------------------------------------------------------------

def grid_counts(fracs, cells_per_axis: int) -> np.ndarray:
    f = np.asarray(fracs, dtype=float)
    if f.ndim == 1:
        f = f[:, None]
    idx = np.minimum((f * cells_per_axis).astype(np.int64), cells_per_axis - 1)
    flat = np.ravel_multi_index(idx.T, (cells_per_axis,) * f.shape[1])
    return np.bincount(flat, minlength=cells_per_axis ** f.shape[1])


def grid_chi_square(fracs, cells_per_axis: int) -> tuple[float, int]:
    """Pearson statistic against the uniform cell law and its degrees of freedom."""
    f = np.asarray(fracs, dtype=float)
    if f.ndim == 1:
        f = f[:, None]
    n, q = f.shape
    cells = cells_per_axis ** q
    if cells_per_axis < 1 or 5 * cells > n:
        raise ContractError(f"{cells} cells for {n} samples leaves fewer than 5 expected per cell")
    if np.any((f < 0) | (f >= 1)):
        raise ContractError("grid_chi_square expects points in [0,1)^q")
    counts = grid_counts(f, cells_per_axis)
    expected = n / cells
    return float(((counts - expected) ** 2).sum() / expected), cells - 1


def chi_square_test(name, fracs, cells_per_axis=8, level=0.999) -> TestReport:
    stat, dof = grid_chi_square(fracs, cells_per_axis)
    thr = float(stats.chi2.ppf(level, dof))
    return TestReport(name, stat, thr, int(np.shape(fracs)[0]), {"dof": dof, "level": level})


def integer_shift_check(raw, h, k, u) -> tuple[float, float]:
    """Weyl sums on raw values and on their fractional parts (should coincide)."""
    raw = np.asarray(raw, dtype=float)
    return weyl_sum(raw, h, k, u), weyl_sum(fractional_part_array(raw), h, k, u)
