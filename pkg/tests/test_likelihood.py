import numpy as np
import pytest
from scipy import stats

from ctcea.data import parse_cohort
from ctcea.likelihood import log_likelihood, make_loglik, prepare_data
from ctcea.model import DgpConfig, dgp_schema
from ctcea.params import ParamLayout, default_grids, dgp_param_dict, parametric_spec, piecewise_spec

SCHEMA = dgp_schema()
HEADER = "id,j,W,delta,Z,A,Y," + ",".join(SCHEMA.names)


def _cohort(*rows):
    return parse_cohort("\n".join((HEADER,) + rows), SCHEMA)


# three toy cohorts: a censored singleton; visits then a death with
# treatment switched on; two patients mixing terminal types
TOY_SINGLETON = ("a,1,0.8,0,1,0,2.3,0.4,1,0.2,-0.5,1",)
TOY_DEATH = (
    "a,1,0.5,1,1,0,1.1,0.6,0,0.2,-0.5,1",
    "a,2,0.9,1,1,1,2.8,-0.4,1,0.2,-0.5,1",
    "a,3,0.3,2,1,1,5.0,0.1,1,0.2,-0.5,1",
)
TOY_MIXED = (
    "a,1,1.2,1,1,1,0.9,1.5,0,-0.3,0.8,0",
    "a,2,0.6,0,1,1,1.7,0.2,1,-0.3,0.8,0",
    "b,1,0.4,2,1,0,3.2,0.0,0,1.1,0.0,1",
)


def _oracle_weibull(cohort, c):
    """Independent per-encounter assembly of the joint log-likelihood."""
    total = 0.0
    for traj in cohort.trajectories:
        l0 = traj.l0
        prev = None
        for e in traj.encounters:
            first = e.j == 1
            block = "first" if first else "subs"
            ltv = e.covariates[SCHEMA.timevarying_idx]
            if first:
                s = l0
            else:
                ltv_prev = prev.covariates[SCHEMA.timevarying_idx]
                s = np.concatenate([[float(prev.a == 1)], ltv_prev, l0])
            h = np.concatenate([ltv, s])
            # cause-specific Weibull hazards
            for k in (1, 2):
                lam, nu = c[f"{block}.h0{k}"]
                phi = c[f"{block}.phi{k}"]
                cum = lam * e.w ** nu * np.exp(s @ phi)
                total -= cum
                rate = lam * nu * e.w ** (nu - 1.0) * np.exp(s @ phi)
                if (k == 1 and e.delta == 1) or (k == 2 and e.delta == 2):
                    total += np.log(rate)
            # gamma cost at every encounter, censored terminals included
            eta = c[f"{block}.m0.eta"][0]
            alpha = c[f"{block}.m0.alpha"][0]
            mu = eta * np.exp(alpha * e.w) * np.exp(
                c[f"{block}.beta_event"][0] * (e.delta == 2)
                + c[f"{block}.beta_a"][0] * (e.a == 1)
                + h @ c[f"{block}.beta_h"]
            )
            zeta = c[f"{block}.zeta"][0]
            total += stats.gamma.logpdf(e.y, a=mu ** 2 / zeta, scale=zeta / mu)
            # time-varying covariate transitions
            q = s
            om0, om1 = c[f"{block}.om0"], c[f"{block}.om1"]
            sd0 = c[f"{block}.sd0"][0]
            total += stats.norm.logpdf(ltv[0], q @ om0, sd0)
            p = 1.0 / (1.0 + np.exp(-(q @ om1)))
            total += stats.bernoulli.logpmf(int(ltv[1]), p)
            prev = e
        # baseline covariates once per patient
        total += stats.norm.logpdf(l0[0], c["base2.mu"][0], c["base2.sd"][0])
        total += stats.norm.logpdf(l0[1], c["base3.mu"][0], c["base3.sd"][0])
        total += stats.bernoulli.logpmf(int(l0[2]), c["base4.p"][0])
    return total


@pytest.fixture(scope="module")
def pm_layout():
    return ParamLayout(parametric_spec(SCHEMA), with_hyper=False)


@pytest.fixture(scope="module")
def x_truth(pm_layout):
    return pm_layout.pack(dgp_param_dict(DgpConfig(n=1)))


@pytest.mark.parametrize("rows", [TOY_SINGLETON, TOY_DEATH, TOY_MIXED],
                         ids=["censored-singleton", "treated-death", "mixed-terminals"])
def test_loglik_matches_manual_assembly(rows, pm_layout, x_truth):
    cohort = _cohort(*rows)
    data = prepare_data(cohort, pm_layout.spec)
    got = float(log_likelihood(x_truth, pm_layout, data))
    want = _oracle_weibull(cohort, pm_layout.constrain(x_truth))
    assert got == pytest.approx(want, abs=1e-10)


def test_loglik_oracle_at_random_parameters(pm_layout):
    cohort = _cohort(*TOY_DEATH)
    data = prepare_data(cohort, pm_layout.spec)
    for seed in range(3):
        x = 0.4 * np.random.default_rng(seed).standard_normal(pm_layout.n)
        got = float(log_likelihood(x, pm_layout, data))
        want = _oracle_weibull(cohort, pm_layout.constrain(x))
        assert got == pytest.approx(want, abs=1e-10)


def test_censored_terminal_contributes_one_survival_factor(pm_layout, x_truth):
    cohort = _cohort(*TOY_SINGLETON)
    data = prepare_data(cohort, pm_layout.spec)
    zeros = {"cost": 0.0, "transition": 0.0, "baseline": 0.0, "readiness": 0.0}
    got = float(log_likelihood(x_truth, pm_layout, data, component_weights=zeros))
    c = pm_layout.constrain(x_truth)
    e = cohort.trajectories[0].encounters[0]
    s = cohort.trajectories[0].l0
    log_s = 0.0
    for k in (1, 2):
        lam, nu = c[f"first.h0{k}"]
        log_s -= lam * e.w ** nu * np.exp(s @ c[f"first.phi{k}"])
    assert got == pytest.approx(log_s, abs=1e-12)


def test_unknown_component_rejected(pm_layout, x_truth):
    cohort = _cohort(*TOY_SINGLETON)
    data = prepare_data(cohort, pm_layout.spec)
    with pytest.raises(ValueError, match="unknown likelihood components"):
        log_likelihood(x_truth, pm_layout, data, component_weights={"propensity": 1.0})


def test_components_sum_to_total(pm_layout, x_truth):
    cohort = _cohort(*TOY_MIXED)
    data = prepare_data(cohort, pm_layout.spec)
    total = float(log_likelihood(x_truth, pm_layout, data))
    parts = 0.0
    for name in ("hazard", "cost", "transition", "baseline"):
        weights = {k: 0.0 for k in ("hazard", "cost", "transition", "baseline", "readiness")}
        weights[name] = 1.0
        parts += float(log_likelihood(x_truth, pm_layout, data, component_weights=weights))
    assert parts == pytest.approx(total, abs=1e-10)


def test_patient_weights_scale_contributions(pm_layout, x_truth):
    cohort = _cohort(*TOY_MIXED)
    data = prepare_data(cohort, pm_layout.spec)
    base = float(log_likelihood(x_truth, pm_layout, data))
    only_a = float(log_likelihood(x_truth, pm_layout, data, patient_weights=np.array([1.0, 0.0])))
    only_b = float(log_likelihood(x_truth, pm_layout, data, patient_weights=np.array([0.0, 1.0])))
    assert only_a + only_b == pytest.approx(base, abs=1e-10)
    doubled = float(log_likelihood(x_truth, pm_layout, data, patient_weights=np.array([2.0, 1.0])))
    assert doubled == pytest.approx(base + only_a, abs=1e-10)


def test_additivity_over_patients(pm_layout, x_truth, small_cohort):
    data = prepare_data(small_cohort, pm_layout.spec)
    total = float(log_likelihood(x_truth, pm_layout, data))
    parts = 0.0
    from ctcea.data import Cohort

    for traj in small_cohort.trajectories:
        sub = Cohort(trajectories=(traj,), schema=small_cohort.schema)
        parts += float(log_likelihood(x_truth, pm_layout, prepare_data(sub, pm_layout.spec)))
    assert parts == pytest.approx(total, rel=1e-12)


def test_piecewise_loglik_finite_and_additive(small_cohort):
    spec = piecewise_spec(SCHEMA, default_grids(small_cohort, 4))
    layout = ParamLayout(spec, with_hyper=False)
    data = prepare_data(small_cohort, spec)
    x = 0.2 * np.random.default_rng(2).standard_normal(layout.n)
    val = float(log_likelihood(x, layout, data))
    assert np.isfinite(val)
    fval, fgrad = make_loglik(layout, data)
    pw = np.ones(data.n_patients)
    assert float(fval(x, pw)) == pytest.approx(val, rel=1e-12)
    g = np.asarray(fgrad(x, pw))
    assert g.shape == (layout.n,) and np.all(np.isfinite(g))


def test_gradient_matches_finite_differences(pm_layout, x_truth):
    cohort = _cohort(*TOY_DEATH, )
    data = prepare_data(cohort, pm_layout.spec)
    fval, fgrad = make_loglik(pm_layout, data)
    pw = np.ones(data.n_patients)
    x = x_truth + 0.05 * np.random.default_rng(0).standard_normal(pm_layout.n)
    g = np.asarray(fgrad(x, pw))
    eps = 1e-5
    for i in np.random.default_rng(1).choice(pm_layout.n, size=12, replace=False):
        xp, xm = x.copy(), x.copy()
        xp[i] += eps
        xm[i] -= eps
        fd = (float(fval(xp, pw)) - float(fval(xm, pw))) / (2 * eps)
        assert g[i] == pytest.approx(fd, rel=2e-5, abs=1e-7)
