"""Vectorized forward simulation of encounter trajectories.

One engine serves two purposes: counterfactual rollouts under a treatment
regime (Monte Carlo g-computation, optionally horizon-truncated) and
observational data generation (propensity-driven treatment with
independent exponential censoring competing against each gap).

All B trajectories advance encounter by encounter as compacted numpy
arrays; the draw order within a step is fixed (hazards, censoring,
covariates, readiness, treatment, cost) so a seed fully determines the
output.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .data import Cohort, Encounter, EventType, Trajectory
from .model import GenerativeModel, one_hot_actions

logger = logging.getLogger(__name__)


@dataclass
class StepContext:
    """Arrays visible to a treatment rule at one encounter step."""

    j: int
    v: np.ndarray  # calendar time at this encounter
    w: np.ndarray
    delta: np.ndarray
    z: np.ndarray
    ltv: np.ndarray
    l0: np.ndarray
    a_prev: np.ndarray
    y_prev: np.ndarray


@dataclass
class SimResult:
    total_cost: np.ndarray  # U per trajectory
    followup: np.ndarray  # T per trajectory
    n_encounters: np.ndarray
    l0: np.ndarray
    records: list | None = None


def _feature_block(name: str, arrays: dict, n_actions: int) -> np.ndarray:
    if name == "a_prev":
        return one_hot_actions(arrays["a_prev"], n_actions)
    if name in ("ltv_prev", "l0", "ltv"):
        return arrays[name]
    return np.asarray(arrays[name], dtype=float)[:, None]


def stack_features(names: tuple[str, ...], arrays: dict, n_actions: int) -> np.ndarray:
    n = len(arrays["l0"])
    if not names:
        return np.empty((n, 0))
    return np.concatenate([_feature_block(f, arrays, n_actions) for f in names], axis=1)


def simulate_batch(
    model: GenerativeModel,
    b: int,
    rng: np.random.Generator,
    regime=None,
    tau: float | None = None,
    use_propensity: bool = False,
    collect: bool = False,
    hard_cap: int = 10_000,
) -> SimResult:
    """Roll B trajectories forward; returns totals (and rows if collect).

    Exactly one of regime / use_propensity selects the treatment
    mechanism.  Censoring competes with event gaps only when the model
    carries a censor rate and use_propensity is set (observational mode);
    counterfactual mode truncates at the horizon tau instead.
    """
    if (regime is None) == (not use_propensity):
        raise ValueError("provide either a regime or use_propensity=True")
    if use_propensity and (model.propensity_first is None or model.propensity_subs is None):
        raise ValueError("model carries no propensity logits")

    feats = model.features
    n_act = model.n_actions
    l0 = model.baseline.sample(b, rng)
    p1 = model.p1

    # lagged state, full length B
    ltv_prev = np.zeros((b, p1))
    a_prev = np.zeros(b, dtype=int)
    y_prev = np.zeros(b)
    w_prev = np.zeros(b)
    z_prev = np.zeros(b, dtype=int)
    v = np.zeros(b)
    total_u = np.zeros(b)
    total_t = np.zeros(b)
    n_enc = np.zeros(b, dtype=int)

    records: list | None = [] if collect else None
    active = np.arange(b)
    clamped = 0
    j = 1
    while active.size:
        if j > hard_cap:
            raise RuntimeError(
                f"trajectory exceeded {hard_cap} encounters; "
                "parameter draw implies a near-zero terminal hazard"
            )
        first = j == 1
        haz = model.haz_first if first else model.haz_subs
        trans = model.trans_first if first else model.trans_subs
        cost = model.cost_first if first else model.cost_subs
        prop = model.propensity_first if first else model.propensity_subs
        state_feats = feats.state_first if first else feats.state_subs

        arr = {
            "l0": l0[active],
            "ltv_prev": ltv_prev[active],
            "a_prev": a_prev[active],
            "y_prev": y_prev[active],
            "w_prev": w_prev[active],
            "z_prev": z_prev[active].astype(float),
        }
        s = stack_features(state_feats, arr, n_act)

        w, cause = haz.sample_gaps(s, rng)
        delta = cause.astype(int)
        if use_propensity and model.censor_rate:
            wc = rng.exponential(1.0 / model.censor_rate, size=active.size)
            censored = wc < w
            w = np.where(censored, wc, w)
            delta = np.where(censored, 0, delta)
        if tau is not None:
            over = v[active] + w > tau
            w = np.where(over, tau - v[active], w)
            delta = np.where(over, 0, delta)
        v_now = v[active] + w

        arr["w"] = w
        arr["death"] = (delta == 2).astype(float)
        q = np.concatenate(
            [np.asarray(arr[f], dtype=float)[:, None] for f in feats.trans_extra] + [s], axis=1
        ) if feats.trans_extra else s
        ltv_now = trans.sample(q, rng) if p1 else np.empty((active.size, 0))
        arr["ltv"] = ltv_now

        if model.readiness is not None:
            z = model.readiness.sample(j, z_prev[active], ltv_now, q, rng)
        else:
            z = np.ones(active.size, dtype=int)
        arr["z"] = z.astype(float)

        h = stack_features(feats.hist_extra + state_feats, arr, n_act)

        if use_propensity:
            p = 1.0 / (1.0 + np.exp(-(h @ prop)))
            a_new = (rng.random(active.size) < p).astype(int)
            a = np.where(a_prev[active] > 0, a_prev[active], a_new)
        else:
            ctx = StepContext(
                j=j, v=v_now, w=w, delta=delta, z=z, ltv=ltv_now,
                l0=l0[active], a_prev=a_prev[active], y_prev=y_prev[active],
            )
            a = np.asarray(regime(ctx), dtype=int)
            infeasible = (z == 0) & (a != 0)
            if np.any(infeasible):
                clamped += int(infeasible.sum())
                a = np.where(z == 0, 0, a)

        mu = cost.mean_cost(w, delta, a, h)
        if model.hurdle is not None:
            y = np.where(
                delta == 2,
                model.hurdle.sample(mu, h, rng),
                cost.sample_cost(mu, rng),
            )
        else:
            y = cost.sample_cost(mu, rng)
        if tau is not None:
            # horizon truncation is not a care encounter: cumulative cost
            # jumps only at actual visits and deaths before tau
            y = np.where(over, 0.0, y)

        total_u[active] += y
        total_t[active] += w
        n_enc[active] += 1
        if records is not None:
            records.append((active.copy(), j, w, delta, z, a, y, ltv_now.copy()))

        ltv_prev[active] = ltv_now
        a_prev[active] = a
        y_prev[active] = y
        w_prev[active] = w
        z_prev[active] = z
        v[active] = v_now
        active = active[delta == 1]
        j += 1

    if clamped:
        logger.warning("regime requested treatment before readiness %d times; clamped to 0", clamped)
    return SimResult(total_cost=total_u, followup=total_t, n_encounters=n_enc, l0=l0, records=records)


def simulate_cohort_rows(model: GenerativeModel, n: int, rng: np.random.Generator) -> Cohort:
    """Observational-mode simulation returning a validated Cohort."""
    res = simulate_batch(model, n, rng, use_propensity=True, collect=True)
    schema = model.schema
    p = len(schema.covariates)
    tv_idx = schema.timevarying_idx
    base_idx = schema.baseline_idx
    per_patient: list[list[Encounter]] = [[] for _ in range(n)]
    for active, j, w, delta, z, a, y, ltv in res.records:
        for row, i in enumerate(active):
            cov = np.zeros(p)
            if tv_idx.size:
                cov[tv_idx] = ltv[row]
            if base_idx.size:
                cov[base_idx] = res.l0[i]
            per_patient[i].append(
                Encounter(j=j, w=float(w[row]), delta=EventType(int(delta[row])),
                          covariates=cov, z=int(z[row]), a=int(a[row]), y=float(y[row]))
            )
    width = max(1, len(str(n - 1)))
    trajectories = tuple(
        Trajectory(patient_id=f"p{i:0{width}d}", l0=res.l0[i], encounters=tuple(encs))
        for i, encs in enumerate(per_patient)
    )
    return Cohort(trajectories=trajectories, schema=schema)
