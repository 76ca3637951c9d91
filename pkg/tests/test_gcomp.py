import numpy as np
import pytest

from ctcea.costs import ConstantMean, CostModel
from ctcea.gcomp import (
    EstimandDraws,
    GCompConfig,
    always,
    estimate,
    evaluate_draws,
    mv_functional,
    simulate_trajectory,
    threshold,
)
from ctcea.hazards import HazardModel, exponential_hazard
from ctcea.model import DgpConfig, FeatureConfig, GenerativeModel, dgp_schema
from ctcea.nuisance import BaselineMarginal, BaselineModel, ComponentTransition, TransitionModel


def _death_only_model(rate=1.0):
    """Degenerate single-cause model: every gap ends in death at Exp(rate)."""
    schema = dgp_schema()
    haz = HazardModel(
        baselines=(exponential_hazard(1e-12), exponential_hazard(rate)),
        coefs=(np.zeros(3), np.zeros(3)),
    )
    haz_subs = HazardModel(
        baselines=(exponential_hazard(1e-12), exponential_hazard(rate)),
        coefs=(np.zeros(6), np.zeros(6)),
    )
    cost = CostModel(baseline=ConstantMean(1.0), beta_event=0.0,
                     beta_a=np.zeros(1), beta_h=np.zeros(5), zeta=0.1)
    cost_subs = CostModel(baseline=ConstantMean(1.0), beta_event=0.0,
                          beta_a=np.zeros(1), beta_h=np.zeros(8), zeta=0.1)
    trans = TransitionModel(components=(
        ComponentTransition("identity", np.zeros(3), sd=1.0),
        ComponentTransition("logit", np.zeros(3)),
    ))
    trans_subs = TransitionModel(components=(
        ComponentTransition("identity", np.zeros(6), sd=1.0),
        ComponentTransition("logit", np.zeros(6)),
    ))
    baseline = BaselineModel(marginals=(
        BaselineMarginal("normal", (0.0, 1.0)),
        BaselineMarginal("normal", (0.0, 1.0)),
        BaselineMarginal("bernoulli", (0.5,)),
    ))
    return GenerativeModel(
        schema=schema, features=FeatureConfig(), n_actions=2, baseline=baseline,
        haz_first=haz, haz_subs=haz_subs, cost_first=cost, cost_subs=cost_subs,
        trans_first=trans, trans_subs=trans_subs,
    )


def test_config_validation():
    with pytest.raises(ValueError):
        GCompConfig(b=0)
    with pytest.raises(ValueError):
        GCompConfig(tau=-1.0)
    with pytest.raises(ValueError):
        GCompConfig(kappas=(-0.5,))
    with pytest.raises(ValueError):
        mv_functional(-1.0)


def test_restricted_mean_survival_closed_form():
    # E[min(T, tau)] = (1 - exp(-tau)) for Exp(1) deaths
    model = _death_only_model(rate=1.0)
    cfg = GCompConfig(b=100_000, tau=3.0, seed=0)
    res = estimate(model, always(0), cfg.functionals(), cfg, np.random.default_rng(0))
    expect = 1.0 - np.exp(-3.0)
    mc_se = 1.0 / np.sqrt(cfg.b)  # Exp(1) truncated sd < 1
    assert abs(res["rmst"] - expect) < 3 * mc_se


def test_identical_regimes_contrast_exactly_zero():
    model = DgpConfig(n=1).model(with_censoring=False)
    cfg = GCompConfig(b=500, tau=3.0, kappas=(1.0,), seed=4)
    ed = evaluate_draws([model], [always(1), threshold(1, months=1e9)], cfg)
    # always-treat and an immediate-initiation threshold are the same rule here
    for functional in ed.functionals:
        d = ed.contrast("always-1", "within-1e+09mo-1", functional)
        assert np.all(d == 0.0)


def test_mv_linearity_exact_per_draw():
    model = DgpConfig(n=1).model(with_censoring=False)
    cfg = GCompConfig(b=400, tau=3.0, kappas=(0.0, 0.7, 2.5), seed=1)
    ed = evaluate_draws([model, model], [always(1), always(0)], cfg)
    for regime in ed.regimes:
        rmst = ed.psi(regime, "rmst")
        mc = ed.psi(regime, "mc")
        for k in (0.0, 0.7, 2.5):
            assert np.allclose(ed.psi(regime, f"mv@{k:g}"), k * rmst - mc, rtol=0, atol=1e-12)


def test_kappa_zero_is_negative_cost():
    model = _death_only_model()
    cfg = GCompConfig(b=2000, tau=2.0, kappas=(0.0,), seed=2)
    ed = evaluate_draws([model], [always(0)], cfg)
    assert np.allclose(ed.psi("always-0", "mv@0"), -ed.psi("always-0", "mc"))


def test_common_random_numbers_reproducible():
    model = DgpConfig(n=1).model(with_censoring=False)
    cfg = GCompConfig(b=300, tau=3.0, seed=11)
    e1 = evaluate_draws([model], [always(1)], cfg)
    e2 = evaluate_draws([model], [always(1)], cfg)
    for key in e1.values:
        assert np.array_equal(e1.values[key], e2.values[key])


def test_simulate_trajectory_scalar():
    model = _death_only_model()
    u, t = simulate_trajectory(model, always(0), 3.0, np.random.default_rng(0))
    assert 0 < t <= 3.0 and u >= 0


def test_summary_and_csv(tmp_path):
    model = DgpConfig(n=1).model(with_censoring=False)
    cfg = GCompConfig(b=200, tau=3.0, seed=0)
    ed = evaluate_draws([model] * 5, [always(1), always(0)], cfg)
    assert ed.m == 5
    s = ed.summary("always-1", "always-0", "mv@1")
    assert s["lo"] <= s["mean"] <= s["hi"]
    path = tmp_path / "est.csv"
    ed.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "draw,regime,functional,value"
    assert len(lines) == 1 + 5 * 2 * len(ed.functionals)


def test_contrast_requires_matching_draws():
    ed = EstimandDraws(regimes=("a", "b"), functionals=("rmst",),
                       values={("a", "rmst"): np.ones(3), ("b", "rmst"): np.ones(2)})
    with pytest.raises(ValueError):
        ed.contrast("a", "b", "rmst")
