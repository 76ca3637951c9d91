"""Joint log-likelihood of a cohort under a fittable model.

Data preparation happens once in numpy (design matrices, exposure
matrices, row-to-patient maps); the likelihood itself is a pure function
of the flat unconstrained parameter vector, written against jax.numpy so
gradients come from automatic differentiation.

Per patient the log-likelihood sums: gamma cost log-densities at every
encounter (censored terminals included, with the non-death intercept),
covariate-transition and baseline-marginal log-densities, readiness terms
up to and including the first Z=1, cause-1 log-subdensities at
non-terminal encounters, and at the terminal encounter the log-survival
term always plus the death log-hazard only when the trajectory ends in
death.
"""

from __future__ import annotations

from dataclasses import dataclass

import jax
import jax.numpy as jnp
import numpy as np

from .data import Cohort
from .model import one_hot_actions
from .params import ModelSpec, ParamLayout
from .simulate import stack_features

jax.config.update("jax_enable_x64", True)

COMPONENTS = ("hazard", "cost", "transition", "baseline", "readiness")


@dataclass
class BlockData:
    """Row-wise arrays for one encounter block (first or subsequent)."""

    w: np.ndarray
    log_w: np.ndarray
    delta: np.ndarray  # event type per row
    terminal: np.ndarray  # bool, last observed encounter of its patient
    y: np.ndarray
    a_onehot: np.ndarray
    s: np.ndarray
    h: np.ndarray
    q: np.ndarray
    ltv: np.ndarray
    z: np.ndarray
    z_prev: np.ndarray
    pat: np.ndarray  # row -> patient index
    j: np.ndarray
    exposure_h: np.ndarray | None = None  # (rows, Q) interval exposures
    idx_h: np.ndarray | None = None  # interval containing w
    exposure_c: np.ndarray | None = None
    idx_c: np.ndarray | None = None

    @property
    def n(self) -> int:
        return len(self.w)


@dataclass
class LikelihoodData:
    spec: ModelSpec
    first: BlockData
    subs: BlockData
    l0: np.ndarray  # (n_patients, p0)
    n_patients: int


def _collect_block(rows: dict, spec: ModelSpec, first: bool) -> BlockData:
    feats = spec.features
    state_feats = feats.state_first if first else feats.state_subs
    arr = {k: np.asarray(v) for k, v in rows.items()}
    n_rows = len(rows["w"])
    p0, p1 = spec.p0, spec.p1
    for key, width in (("ltv_prev", p1), ("ltv", p1), ("l0", p0)):
        arr[key] = arr[key].reshape(n_rows, width) if n_rows else np.zeros((0, width))
    s = stack_features(state_feats, arr, spec.n_actions)
    h = stack_features(feats.hist_extra + state_feats, arr, spec.n_actions)
    q = stack_features(feats.trans_extra + state_feats, arr, spec.n_actions)
    if spec.transition_intercepts:
        q_design = np.concatenate([np.ones((len(s), 1)), q], axis=1)
    else:
        q_design = q
    w = arr["w"].astype(float)
    data = BlockData(
        w=w,
        log_w=np.log(w),
        delta=arr["delta"].astype(int),
        terminal=arr["terminal"].astype(bool),
        y=arr["y"].astype(float),
        a_onehot=one_hot_actions(arr["a"].astype(int), spec.n_actions),
        s=s,
        h=h,
        q=q_design,
        ltv=arr["ltv"].astype(float),
        z=arr["z"].astype(int),
        z_prev=arr["z_prev"].astype(int),
        pat=arr["pat"].astype(int),
        j=arr["j"].astype(int),
    )
    if spec.hazard_family == "piecewise":
        data.exposure_h = spec.hazard_grid.exposure(w)
        data.idx_h = spec.hazard_grid.interval_index(w)
    if spec.cost_family == "piecewise":
        data.exposure_c = spec.cost_grid.exposure(w)
        data.idx_c = spec.cost_grid.interval_index(w)
    return data


def prepare_data(cohort: Cohort, spec: ModelSpec) -> LikelihoodData:
    """Flatten a cohort into block-wise design matrices."""
    if cohort.schema.names != spec.schema.names:
        raise ValueError("cohort schema does not match model spec")
    tv_idx = cohort.schema.timevarying_idx
    keys = ("w", "delta", "terminal", "y", "a", "ltv", "ltv_prev", "l0",
            "a_prev", "y_prev", "w_prev", "z_prev", "z", "pat", "j")
    blocks = {True: {k: [] for k in keys}, False: {k: [] for k in keys}}
    l0_rows = []
    for i, traj in enumerate(cohort.trajectories):
        l0_rows.append(traj.l0)
        n_enc = len(traj.encounters)
        prev_cov = None
        prev_a = 0
        prev_y = 0.0
        prev_w = 0.0
        prev_z = 0
        for j, enc in enumerate(traj.encounters, start=1):
            b = blocks[j == 1]
            b["w"].append(enc.w)
            b["delta"].append(int(enc.delta))
            b["terminal"].append(j == n_enc)
            b["y"].append(enc.y)
            b["a"].append(enc.a)
            b["ltv"].append(enc.covariates[tv_idx])
            b["ltv_prev"].append(prev_cov[tv_idx] if prev_cov is not None else np.zeros(len(tv_idx)))
            b["l0"].append(traj.l0)
            b["a_prev"].append(prev_a)
            b["y_prev"].append(prev_y)
            b["w_prev"].append(prev_w)
            b["z_prev"].append(prev_z)
            b["z"].append(enc.z)
            b["pat"].append(i)
            b["j"].append(j)
            prev_cov, prev_a, prev_y, prev_w, prev_z = enc.covariates, enc.a, enc.y, enc.w, enc.z
    return LikelihoodData(
        spec=spec,
        first=_collect_block(blocks[True], spec, first=True),
        subs=_collect_block(blocks[False], spec, first=False),
        l0=np.asarray(l0_rows, dtype=float),
        n_patients=len(cohort.trajectories),
    )


def _gamma_logpdf(y, mu, zeta):
    shape = mu * mu / zeta
    rate = mu / zeta
    return shape * jnp.log(rate) - jax.scipy.special.gammaln(shape) + (shape - 1.0) * jnp.log(y) - rate * y


def _block_hazard_ll(spec: ModelSpec, c: dict, block: str, d: BlockData, wt):
    """Survival term at every row, cause-1 hazard at non-terminal rows,
    death hazard at delta=2 rows."""
    cum = 0.0
    log_h = {}
    for k in (1, 2):
        base = c[f"{block}.h0{k}"]
        lp = d.s @ c[f"{block}.phi{k}"]
        if spec.hazard_family == "piecewise":
            log_rates = jnp.log(base)
            cum = cum + (d.exposure_h @ base) * jnp.exp(lp)
            log_h[k] = log_rates[d.idx_h] + lp
        else:
            lam, nu = base[0], base[1]
            cum = cum + lam * jnp.exp(nu * d.log_w + lp)
            log_h[k] = jnp.log(lam) + jnp.log(nu) + (nu - 1.0) * d.log_w + lp
    ll = -cum
    ll = ll + jnp.where(~d.terminal, log_h[1], 0.0)
    ll = ll + jnp.where(d.delta == 2, log_h[2], 0.0)
    return jnp.sum(wt * ll)


def _block_cost_ll(spec: ModelSpec, c: dict, block: str, d: BlockData, wt):
    if spec.cost_family == "piecewise":
        log_m0 = jnp.log(c[f"{block}.m0"])[d.idx_c]
    elif spec.cost_family == "gompertz":
        log_m0 = jnp.log(c[f"{block}.m0.eta"][0]) + c[f"{block}.m0.alpha"][0] * d.w
    elif spec.cost_family == "weibullshape":
        log_m0 = jnp.log(c[f"{block}.m0.a"][0]) + (c[f"{block}.m0.b"][0] - 1.0) * d.log_w
    else:
        log_m0 = jnp.log(c[f"{block}.m0.c"][0]) * jnp.ones_like(d.w)
    log_mu = log_m0 + jnp.where(d.delta == 2, c[f"{block}.beta_event"][0], 0.0)
    if spec.n_actions > 1:
        log_mu = log_mu + d.a_onehot @ c[f"{block}.beta_a"]
    log_mu = log_mu + d.h @ c[f"{block}.beta_h"]
    mu = jnp.exp(log_mu)
    zeta = c[f"{block}.zeta"][0]
    if spec.include_hurdle:
        death = d.delta == 2
        zero = d.y == 0.0
        x = jnp.concatenate([jnp.ones((d.n, 1)), d.h], axis=1)
        logit_p = x @ c[f"{block}.hurdle"]
        log_p = -jnp.log1p(jnp.exp(-logit_p))
        log_1mp = -jnp.log1p(jnp.exp(logit_p))
        dens = _gamma_logpdf(jnp.where(zero, 1.0, d.y), mu, zeta)
        ll = jnp.where(death & zero, log_1mp,
                       jnp.where(death, log_p + dens, dens))
    else:
        ll = _gamma_logpdf(d.y, mu, zeta)
    return jnp.sum(wt * ll)


def _block_transition_ll(spec: ModelSpec, c: dict, block: str, d: BlockData, wt):
    total = 0.0
    tv_kinds = [spec.schema.covariates[i].kind for i in spec.schema.timevarying_idx]
    for p, kind in enumerate(tv_kinds):
        lp = d.q @ c[f"{block}.om{p}"]
        x = d.ltv[:, p]
        if kind == "continuous":
            sd = c[f"{block}.sd{p}"][0]
            ll = -0.5 * jnp.log(2.0 * jnp.pi) - jnp.log(sd) - 0.5 * ((x - lp) / sd) ** 2
        else:
            ll = x * lp - jnp.log1p(jnp.exp(lp))
        total = total + jnp.sum(wt * ll)
    return total


def _baseline_ll(spec: ModelSpec, c: dict, l0, patient_wt):
    total = 0.0
    for col, i in enumerate(spec.schema.baseline_idx):
        cov = spec.schema.covariates[i]
        x = l0[:, col]
        if cov.kind == "continuous":
            mu = c[f"base{i}.mu"][0]
            sd = c[f"base{i}.sd"][0]
            ll = -0.5 * jnp.log(2.0 * jnp.pi) - jnp.log(sd) - 0.5 * ((x - mu) / sd) ** 2
        else:
            p = c[f"base{i}.p"][0]
            ll = x * jnp.log(p) + (1.0 - x) * jnp.log1p(-p)
        total = total + jnp.sum(patient_wt * ll)
    return total


def _block_readiness_ll(spec: ModelSpec, c: dict, d: BlockData, wt):
    # rows at risk: previous readiness 0 (includes the first Z=1 row)
    at_risk = d.z_prev == 0
    idx = np.minimum(d.j, spec.max_encounters) - 1
    logit = c["ready.logits"][idx] + d.ltv @ c["ready.phi_l"] + d.q[:, -spec.dims(False)[2]:] @ c["ready.phi_q"]
    ll = d.z * logit - jnp.log1p(jnp.exp(logit))
    return jnp.sum(wt * jnp.where(at_risk, ll, 0.0))


def log_likelihood(x, layout: ParamLayout, data: LikelihoodData,
                   patient_weights=None, component_weights: dict | None = None):
    """Cohort log-likelihood at an unconstrained parameter vector.

    patient_weights (length n_patients) scale whole-patient contributions,
    which makes bootstrap refits a reweighting; component_weights maps
    names in COMPONENTS to multipliers (useful for isolating terms).
    """
    spec = layout.spec
    c = layout.constrain(x, xp=jnp)
    cw = {k: 1.0 for k in COMPONENTS}
    if component_weights:
        unknown = set(component_weights) - set(COMPONENTS)
        if unknown:
            raise ValueError(f"unknown likelihood components: {sorted(unknown)}")
        cw.update(component_weights)
    if patient_weights is None:
        pw = jnp.ones(data.n_patients)
    else:
        pw = jnp.asarray(patient_weights, dtype=float)
    total = 0.0
    for block, d in (("first", data.first), ("subs", data.subs)):
        if d.n == 0:
            continue
        wt = pw[d.pat]
        total = total + cw["hazard"] * _block_hazard_ll(spec, c, block, d, wt)
        total = total + cw["cost"] * _block_cost_ll(spec, c, block, d, wt)
        total = total + cw["transition"] * _block_transition_ll(spec, c, block, d, wt)
        if spec.include_readiness:
            total = total + cw["readiness"] * _block_readiness_ll(spec, c, d, wt)
    total = total + cw["baseline"] * _baseline_ll(spec, c, data.l0, pw)
    return total


def make_loglik(layout: ParamLayout, data: LikelihoodData, component_weights: dict | None = None):
    """JIT-compiled (value, gradient) closures over (x, patient_weights)."""
    def f(x, pw):
        return log_likelihood(x, layout, data, patient_weights=pw, component_weights=component_weights)

    fval = jax.jit(f)
    fgrad = jax.jit(jax.grad(f))
    return fval, fgrad
