import numpy as np
import pytest
from scipy import stats

from ctcea.nuisance import (
    BaselineMarginal,
    BaselineModel,
    ComponentTransition,
    ReadinessModel,
    TransitionModel,
    bernoulli_log_density,
    normal_log_density,
)


def test_log_densities_match_scipy():
    x = np.array([-1.2, 0.0, 2.7])
    assert np.allclose(normal_log_density(x, 0.4, 1.3), stats.norm.logpdf(x, 0.4, 1.3))
    z = np.array([0.0, 1.0, 1.0])
    assert np.allclose(bernoulli_log_density(z, 0.3), stats.bernoulli.logpmf(z.astype(int), 0.3))


def test_marginal_validation():
    with pytest.raises(ValueError):
        BaselineMarginal("normal", (0.0, -1.0))
    with pytest.raises(ValueError):
        BaselineMarginal("bernoulli", (1.5,))
    with pytest.raises(ValueError):
        BaselineMarginal("poisson", (1.0,))


def test_baseline_model_sampling_and_density():
    model = BaselineModel(marginals=(
        BaselineMarginal("normal", (0.5, 2.0)),
        BaselineMarginal("bernoulli", (0.3,)),
    ))
    rng = np.random.default_rng(1)
    l0 = model.sample(100_000, rng)
    assert l0.shape == (100_000, 2)
    assert l0[:, 0].mean() == pytest.approx(0.5, abs=0.03)
    assert l0[:, 1].mean() == pytest.approx(0.3, abs=0.01)
    x = np.array([[1.0, 1.0]])
    expect = stats.norm.logpdf(1.0, 0.5, 2.0) + np.log(0.3)
    assert model.log_density(x)[0] == pytest.approx(expect)


def test_component_transition_identity():
    ct = ComponentTransition("identity", coefs=np.array([0.5, -0.2]), sd=0.7)
    q = np.array([[1.0, 2.0]])
    assert ct.linpred(q)[0] == pytest.approx(0.1)
    assert ct.log_density(np.array([0.6]), q)[0] == pytest.approx(stats.norm.logpdf(0.6, 0.1, 0.7))
    # intercept shifts the linear predictor
    ct2 = ComponentTransition("identity", coefs=np.array([0.5, -0.2]), intercept=1.0, sd=0.7)
    assert ct2.linpred(q)[0] == pytest.approx(1.1)


def test_component_transition_logit():
    ct = ComponentTransition("logit", coefs=np.array([2.0]))
    q = np.array([[0.5]])
    p = 1.0 / (1.0 + np.exp(-1.0))
    assert ct.log_density(np.array([1.0]), q)[0] == pytest.approx(np.log(p))
    rng = np.random.default_rng(0)
    draws = ct.sample(np.tile(q, (50_000, 1)), rng)
    assert draws.mean() == pytest.approx(p, abs=0.01)


def test_component_transition_validation():
    with pytest.raises(ValueError):
        ComponentTransition("identity", coefs=np.array([1.0]))
    with pytest.raises(ValueError):
        ComponentTransition("cloglog", coefs=np.array([1.0]))


def test_transition_model_stacks_components():
    tm = TransitionModel(components=(
        ComponentTransition("identity", coefs=np.array([1.0]), sd=0.5),
        ComponentTransition("logit", coefs=np.array([0.0])),
    ))
    q = np.array([[2.0]])
    rng = np.random.default_rng(4)
    l = tm.sample(q, rng)
    assert l.shape == (1, 2) and l[0, 1] in (0.0, 1.0)
    expect = stats.norm.logpdf(1.8, 2.0, 0.5) + np.log(0.5)
    assert tm.log_density(np.array([[1.8, 1.0]]), q)[0] == pytest.approx(expect)


def _readiness():
    return ReadinessModel(logits=np.array([-1.0, 0.0, 1.0]),
                          phi_l=np.array([0.5]), phi_q=np.array([-0.3]))


def test_readiness_prob_indexing():
    rm = _readiness()
    l = np.array([[1.0]])
    q = np.array([[2.0]])
    lp = 0.5 - 0.6
    assert rm.prob(1, l, q)[0] == pytest.approx(1 / (1 + np.exp(1.0 - lp)))
    # encounter indices past the logit vector reuse the last logit
    assert rm.prob(3, l, q)[0] == rm.prob(10, l, q)[0]
    with pytest.raises(IndexError):
        rm.prob(0, l, q)


def test_readiness_monotone_absorption():
    rm = _readiness()
    rng = np.random.default_rng(9)
    z = rm.sample(2, np.ones(1000, dtype=int), np.zeros((1000, 1)), np.zeros((1000, 1)), rng)
    assert np.all(z == 1)


def test_readiness_log_density_zero_after_onset():
    rm = _readiness()
    l = np.zeros((2, 1))
    q = np.zeros((2, 1))
    ld = rm.log_density(2, np.array([1, 1]), np.array([1, 0]), l, q)
    assert ld[0] == 0.0
    assert ld[1] == pytest.approx(np.log(0.5))


def test_round_trips():
    tm = TransitionModel(components=(
        ComponentTransition("identity", coefs=np.array([1.0, 0.5]), intercept=0.2, sd=0.5),
        ComponentTransition("logit", coefs=np.array([0.1, -0.1])),
    ))
    back = TransitionModel.from_dict(tm.to_dict())
    q = np.array([[0.3, -0.7]])
    assert np.allclose(back.log_density(np.array([[0.5, 1.0]]), q),
                       tm.log_density(np.array([[0.5, 1.0]]), q))
    rm = _readiness()
    back = ReadinessModel.from_dict(rm.to_dict())
    assert np.allclose(back.prob(2, np.array([[1.0]]), np.array([[1.0]])),
                       rm.prob(2, np.array([[1.0]]), np.array([[1.0]])))
