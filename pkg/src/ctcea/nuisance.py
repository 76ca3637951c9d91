"""Covariate-process and treatment-readiness nuisance models.

Baseline covariates get simple parametric marginals (normal / Bernoulli).
Time-varying covariates follow per-component generalized linear
transitions conditional on the recent state; components are conditionally
independent.  Readiness is a discrete-time continuation-ratio hazard with
monotone absorption at Z = 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def _logistic(x):
    return 1.0 / (1.0 + np.exp(-np.asarray(x, dtype=float)))


def normal_log_density(x, mean, sd):
    x = np.asarray(x, dtype=float)
    return -0.5 * np.log(2.0 * np.pi) - np.log(sd) - 0.5 * ((x - mean) / sd) ** 2


def bernoulli_log_density(x, p):
    x = np.asarray(x, dtype=float)
    p = np.clip(np.asarray(p, dtype=float), 1e-300, 1.0 - 1e-16)
    return x * np.log(p) + (1.0 - x) * np.log1p(-p)


@dataclass(frozen=True)
class BaselineMarginal:
    """Marginal for one baseline covariate: ('normal', mu, sd) or ('bernoulli', p)."""

    kind: str
    params: tuple[float, ...]

    def __post_init__(self):
        if self.kind == "normal":
            if self.params[1] <= 0:
                raise ValueError("normal marginal needs sd > 0")
        elif self.kind == "bernoulli":
            if not 0.0 <= self.params[0] <= 1.0:
                raise ValueError("bernoulli marginal needs p in [0, 1]")
        else:
            raise ValueError(f"unknown marginal kind {self.kind!r}")

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        if self.kind == "normal":
            return rng.normal(self.params[0], self.params[1], size=n)
        return (rng.random(n) < self.params[0]).astype(float)

    def log_density(self, x) -> np.ndarray:
        if self.kind == "normal":
            return normal_log_density(x, self.params[0], self.params[1])
        return bernoulli_log_density(x, self.params[0])


@dataclass(frozen=True)
class BaselineModel:
    """Independent marginals for the baseline covariates L0."""

    marginals: tuple[BaselineMarginal, ...]

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return np.column_stack([m.sample(n, rng) for m in self.marginals])

    def log_density(self, l0: np.ndarray) -> np.ndarray:
        l0 = np.atleast_2d(np.asarray(l0, dtype=float))
        return sum(m.log_density(l0[:, i]) for i, m in enumerate(self.marginals))

    def to_dict(self) -> dict:
        return {"marginals": [{"kind": m.kind, "params": list(m.params)} for m in self.marginals]}

    @classmethod
    def from_dict(cls, obj: dict) -> "BaselineModel":
        return cls(tuple(BaselineMarginal(m["kind"], tuple(m["params"])) for m in obj["marginals"]))


@dataclass(frozen=True)
class ComponentTransition:
    """GLM transition for one time-varying covariate component.

    link 'identity' pairs with a gaussian draw (sd required); 'logit'
    pairs with a Bernoulli draw.  intercept may be None to pin it at zero.
    """

    link: str
    coefs: np.ndarray
    intercept: float | None = None
    sd: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "coefs", np.asarray(self.coefs, dtype=float))
        if self.link not in ("identity", "logit"):
            raise ValueError(f"unknown link {self.link!r}")
        if self.link == "identity" and (self.sd is None or self.sd <= 0):
            raise ValueError("identity link needs sd > 0")

    def linpred(self, q: np.ndarray) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        lp = q @ self.coefs
        if self.intercept is not None:
            lp = lp + self.intercept
        return lp

    def sample(self, q: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        q = np.atleast_2d(np.asarray(q, dtype=float))
        lp = self.linpred(q)
        if self.link == "identity":
            return rng.normal(lp, self.sd)
        return (rng.random(lp.shape) < _logistic(lp)).astype(float)

    def log_density(self, x, q) -> np.ndarray:
        lp = self.linpred(np.atleast_2d(np.asarray(q, dtype=float)))
        if self.link == "identity":
            return normal_log_density(x, lp, self.sd)
        return bernoulli_log_density(x, _logistic(lp))

    def to_dict(self) -> dict:
        return {
            "link": self.link,
            "coefs": self.coefs.tolist(),
            "intercept": self.intercept,
            "sd": self.sd,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "ComponentTransition":
        return cls(obj["link"], np.asarray(obj["coefs"]), obj.get("intercept"), obj.get("sd"))


@dataclass(frozen=True)
class TransitionModel:
    """Per-component transitions, one per time-varying covariate."""

    components: tuple[ComponentTransition, ...]

    def sample(self, q: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        q = np.atleast_2d(np.asarray(q, dtype=float))
        return np.column_stack([c.sample(q, rng) for c in self.components])

    def log_density(self, l: np.ndarray, q: np.ndarray) -> np.ndarray:
        l = np.atleast_2d(np.asarray(l, dtype=float))
        return sum(c.log_density(l[:, i], q) for i, c in enumerate(self.components))

    def to_dict(self) -> dict:
        return {"components": [c.to_dict() for c in self.components]}

    @classmethod
    def from_dict(cls, obj: dict) -> "TransitionModel":
        return cls(tuple(ComponentTransition.from_dict(c) for c in obj["components"]))


@dataclass(frozen=True)
class ReadinessModel:
    """Discrete-time continuation-ratio hazard for treatment readiness.

    P(Z_j = 1 | Z_{j-1} = 0, L_j, Q_j) = invlogit(logit_j + L'phi_L + Q'phi_Q).
    Encounter indices beyond the observed maximum reuse the last logit
    (g-computation can generate longer trajectories than any observed one).
    Z_0 = 0 by convention: nobody is treatment-ready at surgery.
    """

    logits: np.ndarray  # encounter-specific baseline logits, length N
    phi_l: np.ndarray
    phi_q: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "logits", np.asarray(self.logits, dtype=float))
        object.__setattr__(self, "phi_l", np.asarray(self.phi_l, dtype=float))
        object.__setattr__(self, "phi_q", np.asarray(self.phi_q, dtype=float))

    def prob(self, j: int, l: np.ndarray, q: np.ndarray) -> np.ndarray:
        """Readiness-onset probability at encounter j (1-based) given Z_{j-1} = 0."""
        if j < 1:
            raise IndexError("encounter index must be >= 1")
        base = self.logits[min(j, len(self.logits)) - 1]
        l = np.atleast_2d(np.asarray(l, dtype=float))
        q = np.atleast_2d(np.asarray(q, dtype=float))
        return _logistic(base + l @ self.phi_l + q @ self.phi_q)

    def sample(self, j: int, z_prev, l, q, rng: np.random.Generator) -> np.ndarray:
        """Draw Z_j with monotone absorption: Z stays 1 once reached."""
        z_prev = np.asarray(z_prev)
        p = self.prob(j, l, q)
        onset = (rng.random(p.shape) < p).astype(int)
        return np.where(z_prev == 1, 1, onset)

    def log_density(self, j: int, z, z_prev, l, q) -> np.ndarray:
        """Per-row log-likelihood; rows already absorbed (z_prev = 1) contribute 0."""
        z = np.asarray(z, dtype=float)
        p = self.prob(j, l, q)
        term = bernoulli_log_density(z, p)
        return np.where(np.asarray(z_prev) == 1, 0.0, term)

    def to_dict(self) -> dict:
        return {
            "logits": self.logits.tolist(),
            "phi_l": self.phi_l.tolist(),
            "phi_q": self.phi_q.tolist(),
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "ReadinessModel":
        return cls(np.asarray(obj["logits"]), np.asarray(obj["phi_l"]), np.asarray(obj["phi_q"]))
