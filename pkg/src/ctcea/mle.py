"""Maximum likelihood: multi-start quasi-Newton fit, patient-resampling
bootstrap with warm starts, and asymptotic standard errors.

Bootstrap refits reuse the prepared design matrices: resampling patients
with replacement is equivalent to refitting with multinomial patient
weights, so each refit is a warm-started optimization of the same
compiled objective.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .data import Cohort
from .likelihood import LikelihoodData, make_loglik, prepare_data
from .params import ModelSpec, ParamLayout

logger = logging.getLogger(__name__)


@dataclass
class MLFit:
    """Point estimate on the unconstrained scale with uncertainty."""

    x: np.ndarray
    layout: ParamLayout
    loglik: float
    se: np.ndarray | None
    bootstrap: np.ndarray | None  # (B_boot, dim)
    converged: bool

    def constrained(self) -> dict:
        return self.layout.constrain(self.x)

    def bootstrap_se(self) -> np.ndarray:
        if self.bootstrap is None or len(self.bootstrap) < 2:
            raise ValueError("no bootstrap draws")
        return self.bootstrap.std(axis=0, ddof=1)


def _optimize(neg, grad, x0, pw, maxiter=2000):
    return minimize(neg, x0, args=(pw,), jac=grad, method="L-BFGS-B",
                    options={"maxiter": maxiter, "ftol": 1e-12, "gtol": 1e-8})


def fit_ml(cohort: Cohort | None, spec: ModelSpec, bootstrap: int = 0, seed: int = 0,
           n_starts: int = 5, data: LikelihoodData | None = None,
           x_init: np.ndarray | None = None, compute_se: bool = True) -> MLFit:
    """Maximize the joint log-likelihood; optionally bootstrap patients.

    Multi-start guards against local optima in the baseline-rate /
    coefficient landscape; pass x_init to add a known-good start (it
    counts as one of the starts).
    """
    import jax

    if bootstrap < 0 or n_starts < 1:
        raise ValueError("need bootstrap >= 0 and n_starts >= 1")
    layout = ParamLayout(spec, with_hyper=False)
    if data is None:
        if cohort is None:
            raise ValueError("need a cohort or prepared data")
        data = prepare_data(cohort, spec)
    fval, fgrad = make_loglik(layout, data)

    def neg_ll(x, pw):
        v = float(fval(x, pw))
        return -v if np.isfinite(v) else 1e100

    def grad(x, pw):
        g = np.asarray(fgrad(x, pw), dtype=float)
        return -np.where(np.isfinite(g), g, 0.0)

    rng = np.random.default_rng(seed)
    pw_full = np.ones(data.n_patients)
    starts = []
    if x_init is not None:
        starts.append(np.asarray(x_init, dtype=float))
    while len(starts) < n_starts:
        starts.append(layout.init_vector(rng))

    best = None
    n_ok = 0
    for x0 in starts:
        res = _optimize(neg_ll, grad, x0, pw_full)
        if np.isfinite(res.fun):
            n_ok += res.success
            if best is None or res.fun < best.fun:
                best = res
    if best is None:
        raise RuntimeError("all optimizer starts diverged")
    if n_ok == 0:
        logger.warning("no start reported clean convergence; using the best point found")

    se = None
    if compute_se:
        # one hessian column per JVP; jax.hessian would hold all tangents
        # at once, which exhausts memory on large cohorts
        grad_full = lambda x: fgrad(x, pw_full)
        eye = np.eye(layout.n)
        hess = np.stack([np.asarray(jax.jvp(grad_full, (best.x,), (eye[i],))[1])
                         for i in range(layout.n)])
        cov = _robust_inverse(-hess)
        se = np.sqrt(np.maximum(np.diag(cov), 0.0))

    boots = None
    if bootstrap:
        boots = np.empty((bootstrap, layout.n))
        for b in range(bootstrap):
            counts = rng.multinomial(data.n_patients, np.full(data.n_patients, 1.0 / data.n_patients))
            res_b = _optimize(neg_ll, grad, best.x, counts.astype(float))
            boots[b] = res_b.x

    return MLFit(x=best.x, layout=layout, loglik=-best.fun, se=se,
                 bootstrap=boots, converged=bool(best.success))


def _robust_inverse(a: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.inv(a)
    except np.linalg.LinAlgError:
        return np.linalg.pinv(a)


def fit_propensity(cohort: Cohort, spec: ModelSpec, first: bool) -> tuple[np.ndarray, np.ndarray]:
    """Logistic MLE of treatment initiation for one encounter block.

    Only encounters where treatment has not yet started contribute
    (monotone persistence makes later rows deterministic).  Returns
    (coefficients, standard errors) on the history design.
    """
    import statsmodels.api as sm

    data = prepare_data(cohort, spec)
    d = data.first if first else data.subs
    block_a = _block_actions(cohort, first)
    at_risk = _block_prev_actions(cohort, first) == 0
    h = d.h[at_risk]
    # at-risk rows have a_prev = 0 by construction, so the lagged-action
    # column is constant and its coefficient structurally unidentified;
    # drop zero-variance columns and report NaN in their place
    keep = np.ptp(h, axis=0) > 0
    model = sm.GLM(block_a[at_risk], h[:, keep], family=sm.families.Binomial())
    res = model.fit()
    params = np.full(h.shape[1], np.nan)
    se = np.full(h.shape[1], np.nan)
    params[keep] = np.asarray(res.params)
    se[keep] = np.asarray(res.bse)
    return params, se


def _block_actions(cohort: Cohort, first: bool) -> np.ndarray:
    out = []
    for traj in cohort.trajectories:
        for j, enc in enumerate(traj.encounters, start=1):
            if (j == 1) == first:
                out.append(enc.a)
    return np.asarray(out, dtype=float)


def _block_prev_actions(cohort: Cohort, first: bool) -> np.ndarray:
    out = []
    for traj in cohort.trajectories:
        prev = 0
        for j, enc in enumerate(traj.encounters, start=1):
            if (j == 1) == first:
                out.append(prev)
            prev = enc.a
    return np.asarray(out, dtype=int)


def fit_censor_rate(cohort: Cohort) -> tuple[float, float]:
    """Exponential censoring-rate MLE with its asymptotic SE.

    Each gap exposes a fresh Exp(rate) censoring clock; the clock is
    observed (event) when the gap ends in censoring and right-censored by
    the encounter or death otherwise, giving the closed form
    events / total exposure.
    """
    events = 0
    exposure = 0.0
    for traj in cohort.trajectories:
        for enc in traj.encounters:
            exposure += enc.w
            events += int(enc.delta) == 0
    if events == 0:
        return 0.0, 0.0
    rate = events / exposure
    return rate, rate / np.sqrt(events)
