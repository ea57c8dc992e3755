"""Experiment runners shared by the CLI and the acceptance tests.

Each runner takes a validated :class:`~modone.config.ExperimentConfig` and
returns an :class:`Outcome`: test reports tagged with the ``M`` they belong to,
plus plot-ready tables keyed by file name.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .benford import dataset_report, load_positive_values, mantissa_experiment
from .config import ConfigError, ExperimentConfig
from .density import DensityScene, pointwise_convergence_sweep, xi_grid
from .fracsum import batch_rows, sample_batch, standardized_batch, iid_standardized_sums
from .limit_law import limit_covariance_gamma, sigma_T_sq
from .model import check_integrability, Verdict
from .resampling import stratum_phase_experiment, variance_check
from .stattests import (TestReport, chi_square_test, ks_test, marginal_tv_gaussian, normal_cdf,
                        uniform_cdf, weyl_scan)


@dataclass
class Outcome:
    reports: list = field(default_factory=list)   # (M, TestReport)
    tables: dict = field(default_factory=dict)    # file name -> (header, rows)

    @property
    def passed(self) -> bool:
        return all(r.passed for _, r in self.reports)


def covariance_zscores(X: np.ndarray, target: np.ndarray) -> np.ndarray:
    """``(cov(X) - target) / se`` entrywise, ``se`` from the centred product variances."""
    Xc = X - X.mean(axis=0)
    n = X.shape[0]
    prods = Xc[:, :, None] * Xc[:, None, :]
    cov = prods.sum(axis=0) / (n - 1)
    se = prods.std(axis=0, ddof=1) / math.sqrt(n)
    return (cov - target) / se


def trend_excess(values, slack) -> float:
    """``max_k (v_{k+1} - (1 + slack) v_k)``; non-positive means non-increasing within slack."""
    v = list(values)
    if len(v) < 2:
        return 0.0
    return float(max(b - (1.0 + slack) * a for a, b in zip(v, v[1:])))


def _uniformity_reports(fr, N, p, prefix=""):
    out = []
    for i in range(fr.shape[1]):
        out.append(ks_test(f"{prefix}ks_frac_{i + 1}", fr[:, i], uniform_cdf, p["ks_threshold"]))
    cells = p["cells_per_axis"]
    if 5 * cells ** fr.shape[1] <= fr.shape[0]:
        out.append(chi_square_test(f"{prefix}chi_square_grid", fr, cells, p["chi_level"]))
    return out


def run_simulate(cfg: ExperimentConfig, threads=1) -> Outcome:
    out = Outcome()
    for M in cfg.M_list:
        batch = sample_batch(cfg.params["model"], M, cfg.N, cfg.seed, threads=threads)
        out.tables[f"samples_M{M}.csv"] = batch_rows(batch)
    return out


def run_uniformity(cfg: ExperimentConfig, threads=1) -> Outcome:
    out = Outcome()
    for M in cfg.M_list:
        batch = sample_batch(cfg.params["model"], M, cfg.N, cfg.seed, threads=threads)
        fr, _ = batch.valid()
        out.reports += [(M, r) for r in _uniformity_reports(fr, cfg.N, cfg.params)]
    return out


def run_joint_limit(cfg: ExperimentConfig, threads=1) -> Outcome:
    p = cfg.params
    spec = p["model"]
    out = Outcome()
    s2 = sigma_T_sq(spec)
    for M in cfg.M_list:
        batch = sample_batch(spec, M, cfg.N, cfg.seed, threads=threads)
        fr, k = batch.valid()
        reps = _uniformity_reports(fr, cfg.N, p)
        reps.append(weyl_scan(fr, k, p["weyl_k"], tuple(p["weyl_u"]), name="weyl_max"))
        if s2 > 0:
            reps.append(ks_test("ks_k_gaussian", k, normal_cdf(0.0, math.sqrt(s2)), p["ks_threshold"]))
        var = float(np.var(k, ddof=1))
        rel = abs(var / s2 - 1.0) if s2 > 0 else abs(var)
        reps.append(TestReport("k_variance_rel_err", rel, p["variance_rtol"], k.size,
                               {"empirical": var, "sigma_T_sq": s2}))
        if p["standardized"]:
            G = limit_covariance_gamma(spec).Gamma
            X = standardized_batch(spec, M, cfg.N, cfg.seed, threads=threads)
            X = X[np.all(np.isfinite(X), axis=1)]
            z = covariance_zscores(X, G)
            reps.append(TestReport("gamma_cov_max_z", float(np.abs(z).max()), p["cov_z"], X.shape[0],
                                   {"zscores": z.tolist(), "Gamma": G.tolist()}))
            tv, per_axis = marginal_tv_gaussian(X, G)
            reps.append(TestReport("gamma_marginal_tv", tv, p["tv_threshold"], X.shape[0],
                                   {"per_axis": per_axis}))
        out.reports += [(M, r) for r in reps]
    return out


def run_tv_clt(cfg: ExperimentConfig, threads=1) -> Outcome:
    p = cfg.params
    law = p["law"]
    out = Outcome()
    rows, tvs = [], []
    for M in cfg.M_list:
        s = iid_standardized_sums(law, M, cfg.N, cfg.seed, threads=threads)
        keep = [j for j in range(2) if law.cov[j, j] > 0]
        tv, per_axis = marginal_tv_gaussian(s[:, keep], law.cov[np.ix_(keep, keep)])
        tvs.append(tv)
        rows.append([M, tv, *per_axis, cfg.seed, cfg.N])
    header = ["M", "tv_max"] + [f"tv_axis_{j + 1}" for j in range(len(rows[0]) - 4)] + ["seed", "N"]
    out.tables["tv_clt.csv"] = (header, rows)
    last = cfg.M_list[-1]
    out.reports.append((last, TestReport("tv_clt_trend_excess", trend_excess(tvs, p["slack"]), 0.0,
                                         cfg.N, {"tv": tvs, "M_list": cfg.M_list})))
    out.reports.append((last, TestReport("tv_clt_final", tvs[-1], p["tv_threshold"], cfg.N)))
    return out


def _scene_factory(scene_cfg):
    if "model" in scene_cfg:
        spec = scene_cfg["model"]
        return lambda M: DensityScene.from_model(spec, M)
    kw = {"rate_bound": scene_cfg["rate_bound"]} if "rate_bound" in scene_cfg else {}
    return lambda M: DensityScene.exact(scene_cfg["q"], scene_cfg["eta"], scene_cfg["Sigma1"],
                                      scene_cfg["phi"], M, **kw)


def run_density_sweep(cfg: ExperimentConfig, threads=1) -> Outcome:
    p = cfg.params
    factory = _scene_factory(p["scene"])
    grid = xi_grid(factory(cfg.M_list[0]), p["grid_points"], p["width_sd"])
    sweep = pointwise_convergence_sweep(factory, cfg.M_list, grid, slack=p["slack"])
    out = Outcome()
    out.tables["density_sweep.csv"] = (sweep.header, sweep.rows)
    out.tables["density_sweep_summary.csv"] = (
        ["M", "max_abs_err", "grid_l1_err"],
        [[M, sweep.max_err[M], sweep.l1_err[M]] for M in cfg.M_list])
    errs = [sweep.max_err[M] for M in cfg.M_list]
    last = cfg.M_list[-1]
    npts = grid[0].shape[0]
    out.reports.append((last, TestReport("density_trend_excess", trend_excess(errs, p["slack"]), 1e-12,
                                         npts, {"max_err": errs, "l1_err": [sweep.l1_err[M] for M in cfg.M_list]})))
    out.reports.append((last, TestReport("density_final_max_err", errs[-1], p["threshold"], npts)))
    return out


def run_benford(cfg: ExperimentConfig, threads=1) -> Outcome:
    p = cfg.params
    out = Outcome()
    for M in cfg.M_list:
        for variant in p["variants"]:
            model = replace(p["product"], base=None if variant == "adapted" else float(p["base"]),
                            beta=float(p["beta"]))
            out.reports.append((M, mantissa_experiment(model, M, cfg.N, cfg.seed,
                                                       threshold=p["ks_threshold"], threads=threads)))
    if p["dataset"]:
        values = load_positive_values(p["dataset"])
        out.reports.append((values.size, dataset_report(values, float(p["base"]), p["ks_threshold"])))
    return out


def run_resample_variance(cfg: ExperimentConfig, threads=1) -> Outcome:
    p = cfg.params
    out = Outcome()
    for M in cfg.M_list:
        out.reports.append((M, variance_check(p["resampling"], M, cfg.N, cfg.seed, threads=threads,
                                              z=p["z"])))
        if p["phase_alpha"] is not None:
            out.reports.append((M, stratum_phase_experiment(p["resampling"], float(p["phase_alpha"]),
                                                            M, cfg.N, cfg.seed)))
    return out


def run_integrability(cfg: ExperimentConfig, threads=1) -> Outcome:
    p = cfg.params
    rep = check_integrability(p["phi"], float(p["center"]), p["exponent"], p["M_tilde_max"])
    ok = rep.verdict is Verdict.INTEGRABLE
    tr = TestReport("integrability", 0.0 if ok else 1.0, 0.0, p["M_tilde_max"],
                    {"verdict": rep.verdict.value, "m_tilde": rep.m_tilde, "value": rep.value,
                     "reason": rep.reason})
    out = Outcome([(1, tr)])
    out.tables["integrability_trace.csv"] = (
        ["step", "detail"], [[t[0], " ".join(repr(v) for v in t[1:])] for t in rep.trace])
    return out


RUNNERS = {
    "simulate": run_simulate,
    "uniformity": run_uniformity,
    "joint-limit": run_joint_limit,
    "tv-clt": run_tv_clt,
    "density-sweep": run_density_sweep,
    "benford": run_benford,
    "resample-variance": run_resample_variance,
    "integrability": run_integrability,
}


def run_experiment(cfg: ExperimentConfig, threads: int = 1) -> Outcome:
    if cfg.experiment not in RUNNERS:
        raise ConfigError(f"unknown experiment {cfg.experiment!r}")
    return RUNNERS[cfg.experiment](cfg, threads)
