"""Generative model bundle: everything g-computation needs to roll a cohort.

A GenerativeModel couples the cause-specific hazard engine, the cost
model, and the nuisance models under one feature configuration.  Models
are block-structured: the first post-surgery encounter conditions only on
baseline covariates, while subsequent encounters condition on the one-lag
state.  A single-block (time-homogeneous) variant shares one set of
components across the two slots with zero-filled lagged features at j=1.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .costs import CostModel, GompertzMean, HurdleModel
from .data import Covariate, CovariateSchema
from .hazards import HazardModel, WeibullHazard
from .nuisance import BaselineMarginal, BaselineModel, ComponentTransition, ReadinessModel, TransitionModel

STATE_FEATURES = ("a_prev", "ltv_prev", "l0", "y_prev", "w_prev", "z_prev")
HIST_FEATURES = ("ltv", "w", "z")
TRANS_FEATURES = ("w", "death")


@dataclass(frozen=True)
class FeatureConfig:
    """Which features compose the state S, history H, and transition designs.

    The history design is hist_extra followed by the state design; the
    transition design is trans_extra followed by the state design.
    """

    state_first: tuple[str, ...] = ("l0",)
    state_subs: tuple[str, ...] = ("a_prev", "ltv_prev", "l0")
    hist_extra: tuple[str, ...] = ("ltv",)
    trans_extra: tuple[str, ...] = ()

    def __post_init__(self):
        for f in self.state_first + self.state_subs:
            if f not in STATE_FEATURES:
                raise ValueError(f"unknown state feature {f!r}")
        for f in self.hist_extra:
            if f not in HIST_FEATURES:
                raise ValueError(f"unknown history feature {f!r}")
        for f in self.trans_extra:
            if f not in TRANS_FEATURES:
                raise ValueError(f"unknown transition feature {f!r}")

    def feature_dim(self, name: str, n_actions: int, p0: int, p1: int) -> int:
        if name == "a_prev":
            return n_actions - 1
        if name in ("ltv_prev", "ltv"):
            return p1
        if name == "l0":
            return p0
        return 1

    def state_dim(self, first: bool, n_actions: int, p0: int, p1: int) -> int:
        feats = self.state_first if first else self.state_subs
        return sum(self.feature_dim(f, n_actions, p0, p1) for f in feats)

    def hist_dim(self, first: bool, n_actions: int, p0: int, p1: int) -> int:
        return self.state_dim(first, n_actions, p0, p1) + sum(
            self.feature_dim(f, n_actions, p0, p1) for f in self.hist_extra
        )

    def trans_dim(self, first: bool, n_actions: int, p0: int, p1: int) -> int:
        return self.state_dim(first, n_actions, p0, p1) + len(self.trans_extra)

    def to_dict(self) -> dict:
        return {
            "state_first": list(self.state_first),
            "state_subs": list(self.state_subs),
            "hist_extra": list(self.hist_extra),
            "trans_extra": list(self.trans_extra),
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "FeatureConfig":
        return cls(
            tuple(obj["state_first"]), tuple(obj["state_subs"]),
            tuple(obj["hist_extra"]), tuple(obj["trans_extra"]),
        )


def one_hot_actions(a: np.ndarray, n_actions: int) -> np.ndarray:
    """One-hot encoding with the no-treatment reference column dropped."""
    a = np.asarray(a, dtype=int)
    out = np.zeros(a.shape + (n_actions - 1,))
    for k in range(1, n_actions):
        out[..., k - 1] = a == k
    return out


@dataclass(frozen=True)
class GenerativeModel:
    """Complete joint model over encounters, sufficient for g-computation."""

    schema: CovariateSchema
    features: FeatureConfig
    n_actions: int
    baseline: BaselineModel
    haz_first: HazardModel
    haz_subs: HazardModel
    cost_first: CostModel
    cost_subs: CostModel
    trans_first: TransitionModel
    trans_subs: TransitionModel
    readiness: ReadinessModel | None = None
    hurdle: HurdleModel | None = None
    propensity_first: np.ndarray | None = None  # logits over the history design
    propensity_subs: np.ndarray | None = None
    censor_rate: float | None = None

    @property
    def p0(self) -> int:
        return len(self.schema.baseline_idx)

    @property
    def p1(self) -> int:
        return len(self.schema.timevarying_idx)

    def to_json(self) -> str:
        obj = {
            "schema": json.loads(self.schema.to_json()),
            "features": self.features.to_dict(),
            "n_actions": self.n_actions,
            "baseline": self.baseline.to_dict(),
            "haz_first": self.haz_first.to_dict(),
            "haz_subs": self.haz_subs.to_dict(),
            "cost_first": self.cost_first.to_dict(),
            "cost_subs": self.cost_subs.to_dict(),
            "trans_first": self.trans_first.to_dict(),
            "trans_subs": self.trans_subs.to_dict(),
            "readiness": self.readiness.to_dict() if self.readiness else None,
            "hurdle": self.hurdle.to_dict() if self.hurdle else None,
            "propensity_first": None if self.propensity_first is None else self.propensity_first.tolist(),
            "propensity_subs": None if self.propensity_subs is None else self.propensity_subs.tolist(),
            "censor_rate": self.censor_rate,
        }
        return json.dumps(obj, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "GenerativeModel":
        obj = json.loads(text)
        return cls(
            schema=CovariateSchema.from_json(json.dumps(obj["schema"])),
            features=FeatureConfig.from_dict(obj["features"]),
            n_actions=obj["n_actions"],
            baseline=BaselineModel.from_dict(obj["baseline"]),
            haz_first=HazardModel.from_dict(obj["haz_first"]),
            haz_subs=HazardModel.from_dict(obj["haz_subs"]),
            cost_first=CostModel.from_dict(obj["cost_first"]),
            cost_subs=CostModel.from_dict(obj["cost_subs"]),
            trans_first=TransitionModel.from_dict(obj["trans_first"]),
            trans_subs=TransitionModel.from_dict(obj["trans_subs"]),
            readiness=ReadinessModel.from_dict(obj["readiness"]) if obj.get("readiness") else None,
            hurdle=HurdleModel.from_dict(obj["hurdle"]) if obj.get("hurdle") else None,
            propensity_first=None if obj.get("propensity_first") is None else np.asarray(obj["propensity_first"]),
            propensity_subs=None if obj.get("propensity_subs") is None else np.asarray(obj["propensity_subs"]),
            censor_rate=obj.get("censor_rate"),
        )


def dgp_schema() -> CovariateSchema:
    """Simulation-study covariate layout: two time-varying, three baseline."""
    return CovariateSchema(
        covariates=(
            Covariate("L1", "continuous", False),
            Covariate("L2", "binary", False),
            Covariate("L3", "continuous", True),
            Covariate("L4", "continuous", True),
            Covariate("L5", "binary", True),
        )
    )


@dataclass(frozen=True)
class DgpConfig:
    """Benchmark data-generating process parameters.

    Defaults reproduce the shipped simulation-study setting (see
    assets/dgp_default.json for the versioned copy).
    """

    n: int = 1000
    censor_rate: float = 0.1
    # first post-surgery encounter
    lam11: float = 1.3
    lam12: float = 0.4
    nu11: float = 3.0
    nu12: float = 2.3
    phi11: tuple[float, ...] = (0.7, 0.25, -0.1)
    phi12: tuple[float, ...] = (-0.2, 0.1, 0.35)
    # subsequent encounters
    lam1: float = 1.2
    lam2: float = 0.8
    nu1: float = 2.8
    nu2: float = 2.3
    phi1: tuple[float, ...] = (-0.1, 0.15, 0.45, -0.2, 0.1, 0.35)
    phi2: tuple[float, ...] = (-0.1, 0.25, -0.45, 0.7, 0.25, -0.1)
    # covariate transitions
    omega_l11: tuple[float, ...] = (-0.35, 0.1, 0.1)
    omega_l12: tuple[float, ...] = (0.15, -0.25, 0.4)
    omega_l1: tuple[float, ...] = (-0.15, 0.2, 0.1, -0.35, 0.1, 0.1)
    omega_l2: tuple[float, ...] = (-0.2, 0.1, 0.1, 0.15, -0.25, 0.4)
    sigma_l11: float = 1.0
    sigma_l1: float = 1.0
    # treatment assignment logits
    xi1: tuple[float, ...] = (0.15, -0.6, 0.2, 0.15, -0.4)
    xi: tuple[float, ...] = (0.1, 0.25, 0.15, -0.6, 0.35, 0.2, 0.15, -0.4)
    # gamma cost model with Gompertz baseline mean
    eta1: float = 0.8
    alpha1: float = 0.12
    eta: float = 0.8
    alpha: float = 0.12
    beta_a1: float = 0.15
    beta_a: float = 0.15
    beta_h1: tuple[float, ...] = (0.1, 0.45, -0.15, 0.30, -0.05)
    beta_h: tuple[float, ...] = (0.05, 0.15, 0.1, 0.45, 0.1, -0.15, 0.30, -0.05)
    zeta1: float = 0.4
    zeta: float = 0.4
    seed: int = 0

    def __post_init__(self):
        for name in ("lam11", "lam12", "nu11", "nu12", "lam1", "lam2", "nu1", "nu2",
                     "sigma_l11", "sigma_l1", "eta1", "eta", "zeta1", "zeta"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.censor_rate < 0:
            raise ValueError("censor_rate must be >= 0")

    def to_json(self) -> str:
        obj = {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.__dict__.items()}
        return json.dumps(obj, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "DgpConfig":
        obj = json.loads(text)
        kwargs = {k: (tuple(v) if isinstance(v, list) else v) for k, v in obj.items()}
        return cls(**kwargs)

    def model(self, with_censoring: bool = True) -> GenerativeModel:
        """Assemble the true generative model (Weibull hazards, Gompertz cost)."""
        return GenerativeModel(
            schema=dgp_schema(),
            features=FeatureConfig(),
            n_actions=2,
            baseline=BaselineModel(
                marginals=(
                    BaselineMarginal("normal", (0.0, 1.0)),
                    BaselineMarginal("normal", (0.0, 1.0)),
                    BaselineMarginal("bernoulli", (0.5,)),
                )
            ),
            haz_first=HazardModel(
                baselines=(WeibullHazard(self.lam11, self.nu11), WeibullHazard(self.lam12, self.nu12)),
                coefs=(np.asarray(self.phi11), np.asarray(self.phi12)),
            ),
            haz_subs=HazardModel(
                baselines=(WeibullHazard(self.lam1, self.nu1), WeibullHazard(self.lam2, self.nu2)),
                coefs=(np.asarray(self.phi1), np.asarray(self.phi2)),
            ),
            cost_first=CostModel(
                baseline=GompertzMean(self.eta1, self.alpha1),
                beta_event=0.0,
                beta_a=np.asarray([self.beta_a1]),
                beta_h=np.asarray(self.beta_h1),
                zeta=self.zeta1,
            ),
            cost_subs=CostModel(
                baseline=GompertzMean(self.eta, self.alpha),
                beta_event=0.0,
                beta_a=np.asarray([self.beta_a]),
                beta_h=np.asarray(self.beta_h),
                zeta=self.zeta,
            ),
            trans_first=TransitionModel(
                components=(
                    ComponentTransition("identity", np.asarray(self.omega_l11), None, self.sigma_l11),
                    ComponentTransition("logit", np.asarray(self.omega_l12)),
                )
            ),
            trans_subs=TransitionModel(
                components=(
                    ComponentTransition("identity", np.asarray(self.omega_l1), None, self.sigma_l1),
                    ComponentTransition("logit", np.asarray(self.omega_l2)),
                )
            ),
            readiness=None,
            hurdle=None,
            propensity_first=np.asarray(self.xi1),
            propensity_subs=np.asarray(self.xi),
            censor_rate=self.censor_rate if with_censoring else None,
        )
