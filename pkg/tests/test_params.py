import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ctcea.model import DgpConfig, dgp_schema
from ctcea.params import (
    ModelSpec,
    ParamLayout,
    build_model,
    default_grids,
    dgp_param_dict,
    misspecified_spec,
    parametric_spec,
    piecewise_spec,
    vector_to_model,
)


@pytest.fixture(scope="module")
def pw_spec(small_cohort):
    return piecewise_spec(dgp_schema(), default_grids(small_cohort, 5))


@pytest.fixture(scope="module")
def pm_spec():
    return parametric_spec(dgp_schema())


def test_spec_validation():
    with pytest.raises(ValueError):
        ModelSpec(schema=dgp_schema(), hazard_family="loglogistic")
    with pytest.raises(ValueError):
        ModelSpec(schema=dgp_schema(), hazard_family="piecewise", hazard_grid=None)
    with pytest.raises(ValueError):
        ModelSpec(schema=dgp_schema(), hazard_family="weibull", cost_family="spline")


def test_spec_json_round_trip(pw_spec, pm_spec, small_cohort):
    for sp in (pw_spec, pm_spec, misspecified_spec(dgp_schema(), upper=small_cohort.max_gap)):
        back = ModelSpec.from_json(sp.to_json())
        assert back.to_json() == sp.to_json()
        assert ParamLayout(back).n == ParamLayout(sp).n


def test_layout_shapes(pm_spec):
    layout = ParamLayout(pm_spec, with_hyper=False)
    assert layout.n == sum(s.size for s in layout.segments)
    assert len(layout.coordinate_names()) == layout.n
    assert layout.segments[-1].hi == layout.n
    # hyper coordinates only appear for AR(1) blocks
    assert ParamLayout(pm_spec, with_hyper=True).n == layout.n


def test_piecewise_layout_has_hyperparams(pw_spec):
    lo = ParamLayout(pw_spec, with_hyper=False)
    hi = ParamLayout(pw_spec, with_hyper=True)
    # 6 AR(1) segments (h01, h02, m0 per block) x 3 hyperparams
    assert hi.n == lo.n + 18
    assert any(name.startswith("hyper.first.h01") for name in hi.names())


def test_pack_unpack_round_trip(pm_spec):
    layout = ParamLayout(pm_spec)
    rng = np.random.default_rng(0)
    x = layout.init_vector(rng, scale=0.5)
    c = layout.constrain(x)
    assert np.allclose(layout.pack(c), x)
    u = layout.unpack(x)
    assert sum(len(v) for v in u.values()) == layout.n


def test_pack_validates(pm_spec):
    layout = ParamLayout(pm_spec)
    c = layout.constrain(layout.init_vector(np.random.default_rng(1)))
    c["first.zeta"] = np.array([-1.0])
    with pytest.raises(ValueError, match="positive"):
        layout.pack(c)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_constrain_respects_supports(seed):
    layout = ParamLayout(parametric_spec(dgp_schema()))
    x = 2.0 * np.random.default_rng(seed).standard_normal(layout.n)
    c = layout.constrain(x)
    for s in layout.segments:
        if s.transform == "log":
            assert np.all(c[s.name] > 0)
        elif s.transform == "logit":
            assert np.all((c[s.name] > 0) & (c[s.name] < 1))


def test_log_jacobian_matches_autodiff(pm_spec):
    import jax
    import jax.numpy as jnp

    layout = ParamLayout(pm_spec)
    x = np.random.default_rng(3).standard_normal(layout.n) * 0.7

    def flat_constrain(xv):
        c = layout.constrain(xv, xp=jnp)
        return jnp.concatenate([jnp.atleast_1d(c[s.name]) for s in layout.segments])

    jac = jax.jacobian(flat_constrain)(jnp.asarray(x))
    expect = float(np.sum(np.log(np.abs(np.diag(np.asarray(jac))))))
    assert float(layout.log_jacobian(x)) == pytest.approx(expect, rel=1e-10)


def test_dgp_param_dict_reproduces_generator():
    cfg = DgpConfig(n=1)
    spec = parametric_spec(dgp_schema())
    layout = ParamLayout(spec)
    model = build_model(spec, layout.constrain(layout.pack(dgp_param_dict(cfg))))
    truth = cfg.model(with_censoring=False)
    w = np.array([0.4, 1.1])
    s1 = np.array([[0.2, -0.3, 1.0], [0.0, 0.5, 0.0]])
    for k in (1, 2):
        assert np.allclose(model.haz_first.cumulative_hazard(k, w, s1),
                           truth.haz_first.cumulative_hazard(k, w, s1))
    h1 = np.array([[0.1, 1.0, 0.2, -0.3, 1.0]])
    for delta in (1, 2):
        assert np.allclose(
            model.cost_first.mean_cost(w[:1], np.array([delta]), np.array([1]), h1),
            truth.cost_first.mean_cost(w[:1], np.array([delta]), np.array([1]), h1))
    q = np.array([[0.3, -0.2, 0.4, 0.2, -0.3, 1.0]])
    assert np.allclose(model.trans_subs.log_density(np.array([[0.5, 1.0]]), q),
                       truth.trans_subs.log_density(np.array([[0.5, 1.0]]), q))
    l0 = np.array([[0.2, -0.4, 1.0]])
    assert np.allclose(model.baseline.log_density(l0), truth.baseline.log_density(l0))


def test_vector_to_model_simulates(pw_spec):
    layout = ParamLayout(pw_spec, with_hyper=True)
    x = layout.init_vector(np.random.default_rng(5), scale=0.3)
    model = vector_to_model(layout, x)
    from ctcea.gcomp import always
    from ctcea.simulate import simulate_batch

    res = simulate_batch(model, 50, np.random.default_rng(1), regime=always(0), tau=2.0)
    assert np.all(res.followup > 0) and np.all(res.followup <= 2.0 + 1e-12)


def test_default_grids_cover_observed_gaps(small_cohort):
    grid = default_grids(small_cohort, 7)
    assert grid.q == 7
    assert grid.cuts[0] == 0.0
    # last cut sits below the maximum gap: the open last interval covers it
    assert grid.cuts[-1] < small_cohort.max_gap
