"""Benchmark data generation and large-N truth computation.

The shipped DgpConfig reproduces the simulation-study setting: Weibull
cause-specific hazards with a distinct first-encounter block, Gaussian /
logistic covariate transitions, logistic treatment with monotone
persistence, Gompertz-mean gamma costs, and fresh exponential censoring
competing with every gap.
"""

from __future__ import annotations

import numpy as np

from .data import Cohort
from .gcomp import GCompConfig, Regime, estimate, mv_functional
from .model import DgpConfig
from .simulate import simulate_batch, simulate_cohort_rows


def simulate_cohort(cfg: DgpConfig, seed: int | None = None) -> Cohort:
    """One observational cohort of cfg.n patients."""
    rng = np.random.default_rng(cfg.seed if seed is None else seed)
    return simulate_cohort_rows(cfg.model(), cfg.n, rng)


def benchmark_truth(cfg: DgpConfig, regime1: Regime, regime0: Regime,
                    kappa: float, tau: float, n: int = 1_000_000,
                    seed: int = 0, chunk: int = 250_000) -> tuple[float, float]:
    """Monte Carlo truth of the regime contrast at the generating
    parameters; returns (estimate, MC standard error).

    Counterfactual simulation is uncensored; chunks share random numbers
    across regimes, so the difference is a paired mean.
    """
    if n < 1:
        raise ValueError("need at least one trajectory")
    model = cfg.model(with_censoring=False)
    g = mv_functional(kappa)
    total = 0.0
    total_sq = 0.0
    done = 0
    part = 0
    while done < n:
        b = min(chunk, n - done)
        diff = None
        for regime in (regime1, regime0):
            rng = np.random.default_rng((seed, part))
            res = simulate_batch(model, b, rng, regime=regime, tau=tau)
            vals = g(res.total_cost, res.followup)
            diff = vals if diff is None else diff - vals
        total += float(diff.sum())
        total_sq += float((diff * diff).sum())
        done += b
        part += 1
    mean = total / n
    var = total_sq / n - mean * mean
    se = float(np.sqrt(max(var, 0.0) / n))
    return mean, se
