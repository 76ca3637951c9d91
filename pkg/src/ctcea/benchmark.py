"""Replication harness: repeated cohort simulation, estimation by each
strategy, and aggregation of bias / SE / RMSE / interval width / coverage
against the Monte Carlo benchmark truth.

Strategies: the proposed piecewise Bayesian joint model, a correctly
specified parametric Bayesian model (Weibull hazards, Gompertz mean
cost), correctly specified parametric maximum likelihood with bootstrap
intervals, a misspecified Bayesian model (exponential hazards,
Weibull-shape mean cost), and the discrete-time ML comparator.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .data import Cohort
from .discrete import discrete_time_estimate
from .gcomp import GCompConfig, always, evaluate_draws
from .mcmc import SamplerConfig, run_mcmc
from .mle import fit_ml
from .model import DgpConfig
from .params import default_grids, misspecified_spec, parametric_spec, piecewise_spec, vector_to_model
from .simgen import benchmark_truth, simulate_cohort

logger = logging.getLogger(__name__)

METHODS = ("piecewise-bayes", "parametric-bayes", "parametric-ml",
           "misspecified-bayes", "discrete-ml")


@dataclass(frozen=True)
class BenchConfig:
    dgp: DgpConfig = field(default_factory=DgpConfig)
    replications: int = 100
    methods: tuple[str, ...] = METHODS
    kappa: float = 1.0
    tau: float = 3.0
    m_draws: int = 500  # posterior draws per Bayesian fit
    warmup: int = 400
    b_traj: int = 5000  # trajectories per draw for point estimation
    b_ci: int = 1000  # trajectories per bootstrap draw (CI only)
    q: int = 10  # piecewise intervals
    ml_bootstrap: int = 150
    disc_bins: int = 25
    disc_bootstrap: int = 60
    truth_n: int = 1_000_000
    seed: int = 0

    def __post_init__(self):
        if self.replications < 0:
            raise ValueError("replications must be >= 0")
        unknown = set(self.methods) - set(METHODS)
        if unknown:
            raise ValueError(f"unknown methods: {sorted(unknown)}")


@dataclass
class BenchReport:
    truth: float
    truth_se: float
    rows: dict  # method -> metrics dict
    estimates: list  # per-replication records
    failures: dict

    def to_json(self) -> str:
        return json.dumps({
            "truth": self.truth, "truth_se": self.truth_se,
            "methods": self.rows, "failures": self.failures,
        }, indent=2)

    def to_csv(self, path) -> None:
        cols = ("pct_bias", "se", "rmse", "width", "coverage", "n_ok")
        with open(path, "w") as fh:
            fh.write("method," + ",".join(cols) + "\n")
            for method, r in self.rows.items():
                fh.write(method + "," + ",".join(f"{r[c]:.6g}" for c in cols) + "\n")

    def estimates_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("replication,method,psi,lo,hi\n")
            for rec in self.estimates:
                fh.write("{replication},{method},{psi!r},{lo!r},{hi!r}\n".format(**rec))


def _bayes_estimate(cohort: Cohort, spec, bc: BenchConfig, seed: int) -> dict:
    sampler = SamplerConfig(warmup=bc.warmup, draws=bc.m_draws, seed=seed)
    draws = run_mcmc(cohort, spec, sampler)
    models = (vector_to_model(draws.layout, draws.draws[i]) for i in range(draws.m))
    cfg = GCompConfig(b=bc.b_traj, tau=bc.tau, kappas=(bc.kappa,), seed=seed)
    ed = evaluate_draws(models, [always(1), always(0)], cfg)
    s = ed.summary("always-1", "always-0", f"mv@{bc.kappa:g}")
    return {"psi": s["mean"], "lo": s["lo"], "hi": s["hi"]}


def _ml_estimate(cohort: Cohort, spec, bc: BenchConfig, seed: int) -> dict:
    fit = fit_ml(cohort, spec, bootstrap=bc.ml_bootstrap, seed=seed,
                 n_starts=3, compute_se=False)
    cfg = GCompConfig(b=bc.b_traj, tau=bc.tau, kappas=(bc.kappa,), seed=seed)
    ed = evaluate_draws([vector_to_model(fit.layout, fit.x)], [always(1), always(0)], cfg)
    key = f"mv@{bc.kappa:g}"
    psi = float(ed.contrast("always-1", "always-0", key)[0])
    out = {"psi": psi, "lo": psi, "hi": psi}
    if fit.bootstrap is not None and len(fit.bootstrap) >= 2:
        cfg_ci = replace(cfg, b=bc.b_ci)
        models = (vector_to_model(fit.layout, x) for x in fit.bootstrap)
        ed_b = evaluate_draws(models, [always(1), always(0)], cfg_ci)
        d = ed_b.contrast("always-1", "always-0", key)
        se = float(d.std(ddof=1))
        out["lo"], out["hi"] = psi - 1.96 * se, psi + 1.96 * se
    return out


def _discrete_estimate(cohort: Cohort, bc: BenchConfig, seed: int) -> dict:
    res = discrete_time_estimate(cohort, bc.disc_bins, 1, 0, bc.kappa, bc.tau,
                                 b=bc.b_ci, bootstrap=bc.disc_bootstrap, seed=seed)
    psi = res["psi"]
    if "se" in res:
        return {"psi": psi, "lo": psi - 1.96 * res["se"], "hi": psi + 1.96 * res["se"]}
    return {"psi": psi, "lo": psi, "hi": psi}


def estimate_once(method: str, cohort: Cohort, bc: BenchConfig, seed: int) -> dict:
    schema = cohort.schema
    if method == "piecewise-bayes":
        grid = default_grids(cohort, bc.q)
        return _bayes_estimate(cohort, piecewise_spec(schema, grid), bc, seed)
    if method == "parametric-bayes":
        return _bayes_estimate(cohort, parametric_spec(schema), bc, seed)
    if method == "misspecified-bayes":
        upper = cohort.max_gap
        return _bayes_estimate(cohort, misspecified_spec(schema, upper), bc, seed)
    if method == "parametric-ml":
        return _ml_estimate(cohort, parametric_spec(schema), bc, seed)
    if method == "discrete-ml":
        return _discrete_estimate(cohort, bc, seed)
    raise ValueError(f"unknown method {method!r}")


def run_benchmark(bc: BenchConfig, progress: bool = False) -> BenchReport:
    truth, truth_se = benchmark_truth(bc.dgp, always(1), always(0), bc.kappa, bc.tau,
                                      n=bc.truth_n, seed=bc.seed)
    estimates = []
    failures: dict = {m: 0 for m in bc.methods}
    for r in range(bc.replications):
        cohort = simulate_cohort(bc.dgp, seed=(bc.seed, r, 101))
        for method in bc.methods:
            t0 = time.time()
            try:
                rec = estimate_once(method, cohort, bc, seed=r + 1)
            except Exception as exc:
                failures[method] += 1
                logger.warning("replication %d, %s failed: %s", r, method, exc)
                continue
            rec.update(replication=r, method=method)
            estimates.append(rec)
            if progress:
                logger.info("rep %d %s psi %.3f [%0.3f, %0.3f] (%.0fs)",
                            r, method, rec["psi"], rec["lo"], rec["hi"], time.time() - t0)

    rows = {}
    for method in bc.methods:
        psis = np.array([e["psi"] for e in estimates if e["method"] == method])
        los = np.array([e["lo"] for e in estimates if e["method"] == method])
        his = np.array([e["hi"] for e in estimates if e["method"] == method])
        if len(psis) == 0:
            continue
        bias = psis.mean() - truth
        se = psis.std(ddof=1) if len(psis) > 1 else 0.0
        rows[method] = {
            "pct_bias": 100.0 * bias / truth,
            "se": float(se),
            "rmse": float(np.sqrt(se ** 2 + bias ** 2)),
            "width": float(np.mean(his - los)),
            "coverage": float(np.mean((los <= truth) & (truth <= his)) * 100.0),
            "n_ok": int(len(psis)),
        }
    return BenchReport(truth=truth, truth_se=truth_se, rows=rows,
                       estimates=estimates, failures=failures)
