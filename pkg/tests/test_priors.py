import numpy as np
import pytest
from scipy import stats

from ctcea.model import dgp_schema
from ctcea.params import P_AR1, P_BETA22, P_COEF, P_HALFNORMAL, P_NARROW, P_UNIFORM, ParamLayout
from ctcea.params import parametric_spec, piecewise_spec, default_grids
from ctcea.hazards import TimeGrid
from ctcea.priors import PriorConfig, ar1_log_density, log_prior, rho_from_raw, sample_ar1


def test_prior_config_validation():
    with pytest.raises(ValueError):
        PriorConfig(coef_sd=0.0)


def test_ar1_log_density_matches_term_product():
    x = np.array([0.4, -0.2, 0.9, 0.3])
    mu, rho, sigma = 0.1, 0.3, 0.8
    want = stats.norm.logpdf(x[0], mu, sigma)
    for t in range(1, len(x)):
        want += stats.norm.logpdf(x[t], mu * (1 - rho) + rho * x[t - 1], sigma)
    assert float(ar1_log_density(x, mu, rho, sigma)) == pytest.approx(want, rel=1e-12)


def test_ar1_log_density_singleton():
    got = float(ar1_log_density(np.array([0.7]), 0.2, 0.9, 1.1))
    assert got == pytest.approx(stats.norm.logpdf(0.7, 0.2, 1.1), rel=1e-12)


def test_ar1_rho_zero_is_iid():
    x = np.array([0.3, -0.8, 1.2])
    got = float(ar1_log_density(x, 0.5, 0.0, 0.7))
    assert got == pytest.approx(stats.norm.logpdf(x, 0.5, 0.7).sum(), rel=1e-12)


def test_sample_ar1_matches_density_moments():
    rng = np.random.default_rng(0)
    mu, rho, sigma = 0.4, 0.35, 0.9
    paths = sample_ar1(50, mu, rho, sigma, rng, size=20_000)
    # burned-in positions follow the stationary law
    tail = paths[:, 30:]
    sd_st = sigma / np.sqrt(1 - rho ** 2)
    assert tail.mean() == pytest.approx(mu, abs=4 * sd_st / np.sqrt(tail.size / 10))
    assert tail.var() == pytest.approx(sd_st ** 2, rel=0.05)
    lag1 = np.corrcoef(paths[:, 40], paths[:, 41])[0, 1]
    assert lag1 == pytest.approx(rho, abs=0.03)


def test_rho_from_raw_variants():
    assert float(rho_from_raw(0.5, affine=True)) == pytest.approx(0.0)
    assert float(rho_from_raw(0.0, affine=False)) == pytest.approx(0.0)
    # the logistic map keeps rho in (0, 2*invlogit(1) - 1) for rho_tilde in (0,1)
    hi = float(rho_from_raw(1.0, affine=False))
    assert 0.46 < hi < 0.47


def _prior_oracle(layout, x, pc):
    c = layout.constrain(x)
    total = 0.0
    for s in layout.segments:
        v = np.atleast_1d(c[s.name])
        if s.prior == P_COEF:
            if s.transform == "log":
                total += stats.norm.logpdf(np.log(v), 0, pc.coef_sd).sum() - np.log(v).sum()
            else:
                total += stats.norm.logpdf(v, 0, pc.coef_sd).sum()
        elif s.prior == P_NARROW:
            total += stats.norm.logpdf(v, 0, pc.level_sd).sum()
        elif s.prior == P_HALFNORMAL:
            total += stats.halfnorm.logpdf(v, scale=pc.scale_sd).sum()
        elif s.prior == P_UNIFORM:
            pass
        elif s.prior == P_BETA22:
            total += stats.beta.logpdf(v, 2, 2).sum()
        elif s.prior == P_AR1:
            from ctcea.priors import rho_from_raw as rfr

            mu = c[f"hyper.{s.name}.mu"][0]
            rho = float(rfr(c[f"hyper.{s.name}.rho"][0], affine=layout.spec.rho_affine, xp=np))
            sigma = c[f"hyper.{s.name}.sigma"][0]
            path = np.log(v) if s.transform == "log" else v
            want = stats.norm.logpdf(path[0], mu, sigma)
            for t in range(1, len(path)):
                want += stats.norm.logpdf(path[t], mu * (1 - rho) + rho * path[t - 1], sigma)
            total += want
            if s.transform == "log":
                total -= np.log(v).sum()
    return total


def test_log_prior_matches_oracle_parametric():
    layout = ParamLayout(parametric_spec(dgp_schema()), with_hyper=False)
    pc = PriorConfig()
    for seed in range(3):
        x = 0.6 * np.random.default_rng(seed).standard_normal(layout.n)
        assert float(log_prior(x, layout, pc)) == pytest.approx(
            _prior_oracle(layout, x, pc), rel=1e-10)


def test_log_prior_matches_oracle_piecewise():
    spec = piecewise_spec(dgp_schema(), TimeGrid.even(4, 2.0))
    layout = ParamLayout(spec, with_hyper=True)
    pc = PriorConfig(coef_sd=2.0)
    x = 0.5 * np.random.default_rng(5).standard_normal(layout.n)
    assert float(log_prior(x, layout, pc)) == pytest.approx(
        _prior_oracle(layout, x, pc), rel=1e-10)


def test_ar1_blocks_require_hyper_layout():
    spec = piecewise_spec(dgp_schema(), TimeGrid.even(3, 2.0))
    layout = ParamLayout(spec, with_hyper=False)
    with pytest.raises(ValueError, match="with_hyper"):
        log_prior(np.zeros(layout.n), layout)


def test_prior_penalizes_large_coefficients():
    layout = ParamLayout(parametric_spec(dgp_schema()), with_hyper=False)
    seg = layout.segment("first.phi1")
    x = np.zeros(layout.n)
    base = float(log_prior(x, layout))
    x[seg.lo] = 10.0
    assert float(log_prior(x, layout)) < base
