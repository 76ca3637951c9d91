"""Fittable model families and their flat parameter layout.

A ModelSpec names the baseline families (piecewise, Weibull, Gompertz,
Weibull-shape, constant) and structural choices of a joint model; a
ParamLayout maps a flat unconstrained real vector to named, constrained
segments (positive parameters on the log scale, unit-interval parameters
through a logistic).  Gradient-based samplers and optimizers work on the
flat vector; g-computation consumes the assembled GenerativeModel.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .costs import ConstantMean, CostModel, GompertzMean, HurdleModel, PiecewiseMean, WeibullShapeMean
from .data import Cohort, CovariateSchema
from .hazards import HazardModel, PiecewiseHazard, TimeGrid, WeibullHazard
from .model import DgpConfig, FeatureConfig, GenerativeModel
from .nuisance import BaselineMarginal, BaselineModel, ComponentTransition, ReadinessModel, TransitionModel

HAZARD_FAMILIES = ("piecewise", "weibull")
COST_FAMILIES = ("piecewise", "gompertz", "weibullshape", "constant")

# prior tags consumed by priors.log_prior
P_COEF = "coef"  # Normal(0, coef_sd^2)
P_NARROW = "narrow"  # Normal(0, 1); baseline means and AR(1) level hyperparams
P_HALFNORMAL = "halfnormal"  # HalfNormal(1) on the constrained value
P_UNIFORM = "uniform01"  # flat on (0, 1)
P_BETA22 = "beta22"  # Beta(2, 2) on the constrained value in (0, 1)
P_AR1 = "ar1"  # AR(1) smoothing; hyperparams live in hyper.<name>.*


def rho_from_raw(rho_tilde, affine: bool = False, xp=np):
    """Map rho_tilde in (0,1) to the AR(1) correlation."""
    if affine:
        return 2.0 * rho_tilde - 1.0
    return 2.0 / (1.0 + xp.exp(-rho_tilde)) - 1.0


@dataclass(frozen=True)
class ModelSpec:
    """Structural description of a fittable joint model."""

    schema: CovariateSchema
    features: FeatureConfig = field(default_factory=FeatureConfig)
    n_actions: int = 2
    hazard_family: str = "piecewise"
    cost_family: str = "piecewise"
    hazard_grid: TimeGrid | None = None
    cost_grid: TimeGrid | None = None
    transition_intercepts: bool = False
    include_readiness: bool = False
    max_encounters: int = 0  # N logits in the readiness model
    include_hurdle: bool = False
    rho_affine: bool = False  # rho = 2*rho_tilde - 1 instead of 2*invlogit(rho_tilde) - 1

    def __post_init__(self):
        if self.hazard_family not in HAZARD_FAMILIES:
            raise ValueError(f"unknown hazard family {self.hazard_family!r}")
        if self.cost_family not in COST_FAMILIES:
            raise ValueError(f"unknown cost family {self.cost_family!r}")
        if self.hazard_family == "piecewise" and self.hazard_grid is None:
            raise ValueError("piecewise hazards need a hazard_grid")
        if self.cost_family == "piecewise" and self.cost_grid is None:
            raise ValueError("piecewise costs need a cost_grid")
        if self.include_readiness:
            f = self.features
            if f.state_first != f.state_subs:
                raise ValueError("readiness model requires matching state designs across blocks")
            if self.max_encounters < 1:
                raise ValueError("readiness model needs max_encounters >= 1")

    def to_json(self) -> str:
        import json

        obj = {
            "schema": json.loads(self.schema.to_json()),
            "features": {
                "state_first": list(self.features.state_first),
                "state_subs": list(self.features.state_subs),
                "hist_extra": list(self.features.hist_extra),
                "trans_extra": list(self.features.trans_extra),
            },
            "n_actions": self.n_actions,
            "hazard_family": self.hazard_family,
            "cost_family": self.cost_family,
            "hazard_grid": list(self.hazard_grid.cuts) if self.hazard_grid else None,
            "cost_grid": list(self.cost_grid.cuts) if self.cost_grid else None,
            "transition_intercepts": self.transition_intercepts,
            "include_readiness": self.include_readiness,
            "max_encounters": self.max_encounters,
            "include_hurdle": self.include_hurdle,
            "rho_affine": self.rho_affine,
        }
        return json.dumps(obj, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "ModelSpec":
        import json

        obj = json.loads(text)
        f = obj["features"]
        return cls(
            schema=CovariateSchema.from_json(json.dumps(obj["schema"])),
            features=FeatureConfig(
                state_first=tuple(f["state_first"]),
                state_subs=tuple(f["state_subs"]),
                hist_extra=tuple(f["hist_extra"]),
                trans_extra=tuple(f["trans_extra"]),
            ),
            n_actions=obj["n_actions"],
            hazard_family=obj["hazard_family"],
            cost_family=obj["cost_family"],
            hazard_grid=TimeGrid(np.asarray(obj["hazard_grid"])) if obj["hazard_grid"] else None,
            cost_grid=TimeGrid(np.asarray(obj["cost_grid"])) if obj["cost_grid"] else None,
            transition_intercepts=obj["transition_intercepts"],
            include_readiness=obj["include_readiness"],
            max_encounters=obj["max_encounters"],
            include_hurdle=obj["include_hurdle"],
            rho_affine=obj.get("rho_affine", False),
        )

    @property
    def p0(self) -> int:
        return len(self.schema.baseline_idx)

    @property
    def p1(self) -> int:
        return len(self.schema.timevarying_idx)

    def dims(self, first: bool) -> tuple[int, int, int]:
        """(state, history, transition) design dimensions for a block."""
        f = self.features
        return (
            f.state_dim(first, self.n_actions, self.p0, self.p1),
            f.hist_dim(first, self.n_actions, self.p0, self.p1),
            f.trans_dim(first, self.n_actions, self.p0, self.p1),
        )


@dataclass(frozen=True)
class Segment:
    name: str
    size: int
    transform: str  # "id" | "log" | "logit"
    prior: str  # one of the P_* tags
    lo: int = 0  # filled by ParamLayout
    hi: int = 0

    def __post_init__(self):
        if self.transform not in ("id", "log", "logit"):
            raise ValueError(f"unknown transform {self.transform!r}")
        if self.size < 1:
            raise ValueError("empty segment")


def _tv_kinds(schema: CovariateSchema) -> list[str]:
    return [schema.covariates[i].kind for i in schema.timevarying_idx]


def _block_segments(spec: ModelSpec, block: str, first: bool) -> list[Segment]:
    ps, ph, pq = spec.dims(first)
    segs = []
    if spec.hazard_family == "piecewise":
        q = spec.hazard_grid.q
        segs += [Segment(f"{block}.h0{k}", q, "log", P_AR1) for k in (1, 2)]
    else:
        # (lambda, nu) scale and shape, both positive
        segs += [Segment(f"{block}.h0{k}", 2, "log", P_COEF) for k in (1, 2)]
    segs += [Segment(f"{block}.phi{k}", ps, "id", P_COEF) for k in (1, 2)]
    if spec.cost_family == "piecewise":
        segs.append(Segment(f"{block}.m0", spec.cost_grid.q, "log", P_AR1))
    elif spec.cost_family == "gompertz":
        segs.append(Segment(f"{block}.m0.eta", 1, "log", P_COEF))
        segs.append(Segment(f"{block}.m0.alpha", 1, "id", P_COEF))
    elif spec.cost_family == "weibullshape":
        segs.append(Segment(f"{block}.m0.a", 1, "log", P_COEF))
        segs.append(Segment(f"{block}.m0.b", 1, "log", P_COEF))
    else:
        segs.append(Segment(f"{block}.m0.c", 1, "log", P_COEF))
    segs.append(Segment(f"{block}.beta_event", 1, "id", P_COEF))
    if spec.n_actions > 1:
        segs.append(Segment(f"{block}.beta_a", spec.n_actions - 1, "id", P_COEF))
    segs.append(Segment(f"{block}.beta_h", ph, "id", P_COEF))
    segs.append(Segment(f"{block}.zeta", 1, "log", P_HALFNORMAL))
    n_om = pq + (1 if spec.transition_intercepts else 0)
    for p, kind in enumerate(_tv_kinds(spec.schema)):
        segs.append(Segment(f"{block}.om{p}", n_om, "id", P_COEF))
        if kind == "continuous":
            segs.append(Segment(f"{block}.sd{p}", 1, "log", P_HALFNORMAL))
    if spec.include_hurdle:
        segs.append(Segment(f"{block}.hurdle", 1 + ph, "id", P_COEF))
    return segs


def _shared_segments(spec: ModelSpec) -> list[Segment]:
    segs = []
    for i in spec.schema.baseline_idx:
        cov = spec.schema.covariates[i]
        if cov.kind == "continuous":
            segs.append(Segment(f"base{i}.mu", 1, "id", P_NARROW))
            segs.append(Segment(f"base{i}.sd", 1, "log", P_HALFNORMAL))
        else:
            segs.append(Segment(f"base{i}.p", 1, "logit", P_UNIFORM))
    if spec.include_readiness:
        _, _, pq = spec.dims(first=False)
        segs.append(Segment("ready.logits", spec.max_encounters, "id", P_AR1))
        segs.append(Segment("ready.phi_l", spec.p1, "id", P_COEF))
        segs.append(Segment("ready.phi_q", pq, "id", P_COEF))
    return segs


def _hyper_segments(core: list[Segment]) -> list[Segment]:
    segs = []
    for s in core:
        if s.prior == P_AR1:
            segs.append(Segment(f"hyper.{s.name}.mu", 1, "id", P_NARROW))
            segs.append(Segment(f"hyper.{s.name}.rho", 1, "logit", P_BETA22))
            segs.append(Segment(f"hyper.{s.name}.sigma", 1, "log", P_HALFNORMAL))
    return segs


class ParamLayout:
    """Flat unconstrained vector <-> named constrained segments.

    with_hyper adds AR(1) hyperparameter coordinates (needed for MCMC on
    piecewise models; maximum likelihood omits them).
    """

    def __init__(self, spec: ModelSpec, with_hyper: bool = False):
        self.spec = spec
        self.with_hyper = with_hyper
        core = _block_segments(spec, "first", True) + _block_segments(spec, "subs", False)
        core += _shared_segments(spec)
        if with_hyper:
            core += _hyper_segments(core)
        placed = []
        lo = 0
        for s in core:
            placed.append(replace(s, lo=lo, hi=lo + s.size))
            lo += s.size
        self.segments: tuple[Segment, ...] = tuple(placed)
        self.n = lo
        self._by_name = {s.name: s for s in self.segments}

    def segment(self, name: str) -> Segment:
        return self._by_name[name]

    def names(self) -> list[str]:
        return [s.name for s in self.segments]

    def coordinate_names(self) -> list[str]:
        return [f"{s.name}[{i}]" if s.size > 1 else s.name for s in self.segments for i in range(s.size)]

    def unpack(self, x) -> dict:
        return {s.name: x[s.lo:s.hi] for s in self.segments}

    def _is_noncentered(self, s) -> bool:
        return self.with_hyper and s.prior == P_AR1

    def _ar1_hypers(self, c: dict, name: str, xp=np):
        mu = c[f"hyper.{name}.mu"][0]
        rho = rho_from_raw(c[f"hyper.{name}.rho"][0], affine=self.spec.rho_affine, xp=xp)
        sigma = c[f"hyper.{name}.sigma"][0]
        return mu, rho, sigma

    def constrain(self, x, xp=np) -> dict:
        """AR(1) blocks under with_hyper are non-centered: the raw
        coordinates are standardized innovations z, and the constrained
        path follows the AR(1) recursion given the hyperparameters.
        This keeps the unconstrained posterior free of the scale funnel."""
        out = {}
        deferred = []
        for s in self.segments:
            v = x[s.lo:s.hi]
            if self._is_noncentered(s):
                deferred.append(s)
                continue
            if s.transform == "log":
                v = xp.exp(v)
            elif s.transform == "logit":
                v = 1.0 / (1.0 + xp.exp(-v))
            out[s.name] = v
        for s in deferred:
            z = x[s.lo:s.hi]
            mu, rho, sigma = self._ar1_hypers(out, s.name, xp=xp)
            path = [mu + sigma * z[0]]
            for t in range(1, s.size):
                path.append(mu * (1.0 - rho) + rho * path[-1] + sigma * z[t])
            v = xp.stack(path)
            out[s.name] = xp.exp(v) if s.transform == "log" else v
        return out

    def log_jacobian(self, x, xp=np):
        """log |d constrained / d unconstrained| summed over coordinates.

        Non-centered AR(1) blocks have a triangular innovation map with
        |det| = sigma^q, times the usual exp factor for log transforms."""
        total = 0.0
        c = None
        for s in self.segments:
            v = x[s.lo:s.hi]
            if self._is_noncentered(s):
                log_sigma = x[self._by_name[f"hyper.{s.name}.sigma"].lo]
                total = total + s.size * log_sigma
                if s.transform == "log":
                    if c is None:
                        c = self.constrain(x, xp=xp)
                    total = total + xp.sum(xp.log(c[s.name]))
            elif s.transform == "log":
                total = total + xp.sum(v)
            elif s.transform == "logit":
                total = total + xp.sum(-v - 2.0 * xp.log1p(xp.exp(-v)))
        return total

    def pack(self, values: dict) -> np.ndarray:
        """Inverse map: constrained segment dict -> unconstrained vector."""
        x = np.zeros(self.n)
        for s in self.segments:
            v = np.atleast_1d(np.asarray(values[s.name], dtype=float))
            if v.shape != (s.size,):
                raise ValueError(f"segment {s.name} expects length {s.size}, got {v.shape}")
            if s.transform == "log":
                if np.any(v <= 0):
                    raise ValueError(f"segment {s.name} must be positive")
                v = np.log(v)
            elif s.transform == "logit":
                if np.any((v <= 0) | (v >= 1)):
                    raise ValueError(f"segment {s.name} must lie in (0, 1)")
                v = np.log(v) - np.log1p(-v)
            if self._is_noncentered(s):
                hyper = {f"hyper.{s.name}.{h}":
                         np.atleast_1d(np.asarray(values[f"hyper.{s.name}.{h}"], float))
                         for h in ("mu", "rho", "sigma")}
                mu, rho, sigma = self._ar1_hypers(hyper, s.name, xp=np)
                z = np.empty(s.size)
                z[0] = (v[0] - mu) / sigma
                z[1:] = (v[1:] - mu * (1.0 - rho) - rho * v[:-1]) / sigma
                v = z
            x[s.lo:s.hi] = v
        return x

    def init_vector(self, rng: np.random.Generator, scale: float = 0.1) -> np.ndarray:
        return scale * rng.standard_normal(self.n)


def _build_hazard(spec: ModelSpec, c: dict, block: str) -> HazardModel:
    bases = []
    for k in (1, 2):
        v = np.asarray(c[f"{block}.h0{k}"], dtype=float)
        if spec.hazard_family == "piecewise":
            bases.append(PiecewiseHazard(spec.hazard_grid, v))
        else:
            bases.append(WeibullHazard(float(v[0]), float(v[1])))
    coefs = (np.asarray(c[f"{block}.phi1"], float), np.asarray(c[f"{block}.phi2"], float))
    return HazardModel(baselines=tuple(bases), coefs=coefs)


def _build_cost(spec: ModelSpec, c: dict, block: str) -> CostModel:
    if spec.cost_family == "piecewise":
        base = PiecewiseMean(spec.cost_grid, np.asarray(c[f"{block}.m0"], float))
    elif spec.cost_family == "gompertz":
        base = GompertzMean(float(c[f"{block}.m0.eta"][0]), float(c[f"{block}.m0.alpha"][0]))
    elif spec.cost_family == "weibullshape":
        base = WeibullShapeMean(float(c[f"{block}.m0.a"][0]), float(c[f"{block}.m0.b"][0]))
    else:
        base = ConstantMean(float(c[f"{block}.m0.c"][0]))
    return CostModel(
        baseline=base,
        beta_event=float(c[f"{block}.beta_event"][0]),
        beta_a=np.asarray(c[f"{block}.beta_a"], float) if spec.n_actions > 1 else np.zeros(0),
        beta_h=np.asarray(c[f"{block}.beta_h"], float),
        zeta=float(c[f"{block}.zeta"][0]),
    )


def _build_transitions(spec: ModelSpec, c: dict, block: str) -> TransitionModel:
    comps = []
    for p, kind in enumerate(_tv_kinds(spec.schema)):
        om = np.asarray(c[f"{block}.om{p}"], float)
        if spec.transition_intercepts:
            intercept, coefs = float(om[0]), om[1:]
        else:
            intercept, coefs = None, om
        if kind == "continuous":
            comps.append(ComponentTransition("identity", coefs, intercept, float(c[f"{block}.sd{p}"][0])))
        else:
            comps.append(ComponentTransition("logit", coefs, intercept))
    return TransitionModel(components=tuple(comps))


def build_model(spec: ModelSpec, c: dict) -> GenerativeModel:
    """Assemble a GenerativeModel from a constrained segment dict.

    Propensity and censoring are not part of the fitted likelihood and are
    left unset; g-computation does not use them.
    """
    marginals = []
    for i in spec.schema.baseline_idx:
        cov = spec.schema.covariates[i]
        if cov.kind == "continuous":
            marginals.append(BaselineMarginal("normal", (float(c[f"base{i}.mu"][0]), float(c[f"base{i}.sd"][0]))))
        else:
            marginals.append(BaselineMarginal("bernoulli", (float(c[f"base{i}.p"][0]),)))
    readiness = None
    if spec.include_readiness:
        readiness = ReadinessModel(
            logits=np.asarray(c["ready.logits"], float),
            phi_l=np.asarray(c["ready.phi_l"], float),
            phi_q=np.asarray(c["ready.phi_q"], float),
        )
    hurdle = None
    if spec.include_hurdle:
        # the simulation engine applies one hurdle at death encounters; use
        # the subsequent-encounter block (first-block deaths are rare)
        hurdle = HurdleModel(zero_coefs=np.asarray(c["subs.hurdle"], float),
                             positive=_build_cost(spec, c, "subs"))
    return GenerativeModel(
        schema=spec.schema,
        features=spec.features,
        n_actions=spec.n_actions,
        baseline=BaselineModel(marginals=tuple(marginals)),
        haz_first=_build_hazard(spec, c, "first"),
        haz_subs=_build_hazard(spec, c, "subs"),
        cost_first=_build_cost(spec, c, "first"),
        cost_subs=_build_cost(spec, c, "subs"),
        trans_first=_build_transitions(spec, c, "first"),
        trans_subs=_build_transitions(spec, c, "subs"),
        readiness=readiness,
        hurdle=hurdle,
    )


def vector_to_model(layout: ParamLayout, x: np.ndarray) -> GenerativeModel:
    return build_model(layout.spec, layout.constrain(np.asarray(x, float)))


def default_grids(cohort: Cohort, q: int) -> TimeGrid:
    """Even grid to the largest observed gap (last interval stays open)."""
    upper = max(enc.w for traj in cohort.trajectories for enc in traj.encounters)
    return TimeGrid.even(q, upper)


def parametric_spec(schema: CovariateSchema, **kw) -> ModelSpec:
    """Weibull hazards and Gompertz mean cost (the generating families)."""
    return ModelSpec(schema=schema, hazard_family="weibull", cost_family="gompertz", **kw)


def piecewise_spec(schema: CovariateSchema, hazard_grid: TimeGrid, cost_grid: TimeGrid | None = None, **kw) -> ModelSpec:
    return ModelSpec(schema=schema, hazard_family="piecewise", cost_family="piecewise",
                     hazard_grid=hazard_grid, cost_grid=cost_grid or hazard_grid, **kw)


def misspecified_spec(schema: CovariateSchema, upper: float, **kw) -> ModelSpec:
    """Exponential hazards (one open interval) and Weibull-shape mean cost."""
    return ModelSpec(schema=schema, hazard_family="piecewise", cost_family="weibullshape",
                     hazard_grid=TimeGrid.even(1, upper), **kw)


def dgp_param_dict(cfg: DgpConfig) -> dict:
    """Constrained segment values of the generating process, keyed for the
    parametric spec over the benchmark schema."""
    return {
        "first.h01": np.array([cfg.lam11, cfg.nu11]),
        "first.h02": np.array([cfg.lam12, cfg.nu12]),
        "first.phi1": np.asarray(cfg.phi11, float),
        "first.phi2": np.asarray(cfg.phi12, float),
        "first.m0.eta": np.array([cfg.eta1]),
        "first.m0.alpha": np.array([cfg.alpha1]),
        "first.beta_event": np.array([0.0]),
        "first.beta_a": np.array([cfg.beta_a1]),
        "first.beta_h": np.asarray(cfg.beta_h1, float),
        "first.zeta": np.array([cfg.zeta1]),
        "first.om0": np.asarray(cfg.omega_l11, float),
        "first.sd0": np.array([cfg.sigma_l11]),
        "first.om1": np.asarray(cfg.omega_l12, float),
        "subs.h01": np.array([cfg.lam1, cfg.nu1]),
        "subs.h02": np.array([cfg.lam2, cfg.nu2]),
        "subs.phi1": np.asarray(cfg.phi1, float),
        "subs.phi2": np.asarray(cfg.phi2, float),
        "subs.m0.eta": np.array([cfg.eta]),
        "subs.m0.alpha": np.array([cfg.alpha]),
        "subs.beta_event": np.array([0.0]),
        "subs.beta_a": np.array([cfg.beta_a]),
        "subs.beta_h": np.asarray(cfg.beta_h, float),
        "subs.zeta": np.array([cfg.zeta]),
        "subs.om0": np.asarray(cfg.omega_l1, float),
        "subs.sd0": np.array([cfg.sigma_l1]),
        "subs.om1": np.asarray(cfg.omega_l2, float),
        "base2.mu": np.array([0.0]),
        "base2.sd": np.array([1.0]),
        "base3.mu": np.array([0.0]),
        "base3.sd": np.array([1.0]),
        "base4.p": np.array([0.5]),
    }
