"""Proportional-means gamma cost model and the at-death hurdle variant.

The conditional mean is mu = m0(w) * exp(beta_k + a'beta_A + h'beta_H)
with m0 a baseline modifier of the gap time; costs follow a gamma with
mean-variance parameterization Gamma(mu^2/zeta, mu/zeta) so E[Y] = mu and
Var[Y] = zeta.  The visit intercept is the fixed reference (beta_1 = 0);
only the death shift beta_2 is free.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

from .hazards import TimeGrid


class CostBaseline:
    """Baseline mean-cost modifier m0(w)."""

    def value(self, w):
        raise NotImplementedError

    def log_value(self, w):
        return np.log(self.value(w))

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class PiecewiseMean(CostBaseline):
    grid: TimeGrid  # shared with the hazard model by construction
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", values)
        if len(values) != self.grid.q:
            raise ValueError("m0 length must match grid")
        if np.any(values <= 0):
            raise ValueError("m0 entries must be positive")

    def value(self, w):
        return self.values[self.grid.interval_index(w)]

    def to_dict(self) -> dict:
        return {"family": "piecewise", "cuts": self.grid.cuts.tolist(), "values": self.values.tolist()}


@dataclass(frozen=True)
class GompertzMean(CostBaseline):
    """m0(w) = eta * exp(alpha * w)."""

    eta: float
    alpha: float

    def value(self, w):
        return self.eta * np.exp(self.alpha * np.asarray(w, dtype=float))

    def log_value(self, w):
        return np.log(self.eta) + self.alpha * np.asarray(w, dtype=float)

    def to_dict(self) -> dict:
        return {"family": "gompertz", "eta": self.eta, "alpha": self.alpha}


@dataclass(frozen=True)
class WeibullShapeMean(CostBaseline):
    """m0(w) = a * w^(b-1); the deliberately misspecified parametric curve."""

    a: float
    b: float

    def value(self, w):
        return self.a * np.asarray(w, dtype=float) ** (self.b - 1.0)

    def log_value(self, w):
        w = np.asarray(w, dtype=float)
        return np.log(self.a) + (self.b - 1.0) * np.log(w)

    def to_dict(self) -> dict:
        return {"family": "weibull_shape", "a": self.a, "b": self.b}


@dataclass(frozen=True)
class ConstantMean(CostBaseline):
    """m0 = c with no gap-time dependence (the m0 = 1 reduction)."""

    c: float = 1.0

    def value(self, w):
        return np.full_like(np.asarray(w, dtype=float), self.c)

    def to_dict(self) -> dict:
        return {"family": "constant", "c": self.c}


def cost_baseline_from_dict(obj: dict) -> CostBaseline:
    fam = obj["family"]
    if fam == "piecewise":
        return PiecewiseMean(TimeGrid(np.asarray(obj["cuts"])), np.asarray(obj["values"]))
    if fam == "gompertz":
        return GompertzMean(obj["eta"], obj["alpha"])
    if fam == "weibull_shape":
        return WeibullShapeMean(obj["a"], obj["b"])
    if fam == "constant":
        return ConstantMean(obj["c"])
    raise ValueError(f"unknown cost baseline family {fam!r}")


def gamma_log_density(y, mu, zeta):
    """Gamma log-density at y > 0 under the (mean, variance) parameterization."""
    y = np.asarray(y, dtype=float)
    mu = np.asarray(mu, dtype=float)
    if np.any(y <= 0):
        raise ValueError("gamma cost density requires y > 0 (route zeros to the hurdle)")
    shape = mu**2 / zeta
    rate = mu / zeta
    return shape * np.log(rate) - special.gammaln(shape) + (shape - 1.0) * np.log(y) - rate * y


def sample_gamma_costs(mu, zeta, rng: np.random.Generator):
    mu = np.asarray(mu, dtype=float)
    return rng.gamma(shape=mu**2 / zeta, scale=zeta / mu)


@dataclass(frozen=True)
class CostModel:
    """Proportional means for encounter costs.

    beta_event is the multiplicative death shift (applied when delta = 2;
    visits and censored encounters take the fixed zero reference).
    beta_a is indexed by one-hot action with action 0 dropped.
    """

    baseline: CostBaseline
    beta_event: float
    beta_a: np.ndarray
    beta_h: np.ndarray
    zeta: float

    def __post_init__(self):
        if self.zeta <= 0:
            raise ValueError("zeta must be positive")
        object.__setattr__(self, "beta_a", np.asarray(self.beta_a, dtype=float))
        object.__setattr__(self, "beta_h", np.asarray(self.beta_h, dtype=float))

    def log_mean(self, w, delta, a, h) -> np.ndarray:
        """log mu for gap w, event type delta, action a (integer), history h."""
        a = np.asarray(a, dtype=int)
        delta = np.asarray(delta, dtype=int)
        h = np.asarray(h, dtype=float)
        lp = np.where(delta == 2, self.beta_event, 0.0)
        treated = a > 0
        a_effect = np.where(treated, self.beta_a[np.maximum(a - 1, 0)], 0.0)
        return self.baseline.log_value(w) + lp + a_effect + h @ self.beta_h

    def mean_cost(self, w, delta, a, h) -> np.ndarray:
        return np.exp(self.log_mean(w, delta, a, h))

    def sample_cost(self, mu, rng: np.random.Generator):
        return sample_gamma_costs(mu, self.zeta, rng)

    def log_density(self, y, mu) -> np.ndarray:
        return gamma_log_density(y, mu, self.zeta)

    def to_dict(self) -> dict:
        return {
            "baseline": self.baseline.to_dict(),
            "beta_event": self.beta_event,
            "beta_a": self.beta_a.tolist(),
            "beta_h": self.beta_h.tolist(),
            "zeta": self.zeta,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "CostModel":
        return cls(
            baseline=cost_baseline_from_dict(obj["baseline"]),
            beta_event=obj["beta_event"],
            beta_a=np.asarray(obj["beta_a"]),
            beta_h=np.asarray(obj["beta_h"]),
            zeta=obj["zeta"],
        )


@dataclass(frozen=True)
class HurdleModel:
    """Mixture of a point mass at zero and a gamma positive part.

    Applies only to death encounters: P(Y > 0) is logistic in the
    confounder vector; positive costs follow the wrapped CostModel.
    """

    zero_coefs: np.ndarray  # logistic coefficients incl. intercept slot 0
    positive: CostModel

    def __post_init__(self):
        object.__setattr__(self, "zero_coefs", np.asarray(self.zero_coefs, dtype=float))

    def prob_nonzero(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        lp = self.zero_coefs[0] + x @ self.zero_coefs[1:]
        return 1.0 / (1.0 + np.exp(-lp))

    def log_density(self, y, mu, x) -> np.ndarray:
        """log f(y); y may be exactly 0 (the hurdle atom)."""
        y = np.asarray(y, dtype=float)
        p = self.prob_nonzero(x)
        out = np.where(y > 0, 0.0, np.log1p(-p))
        pos = y > 0
        if np.any(pos):
            ypos = np.where(pos, y, 1.0)
            dens = np.log(p) + gamma_log_density(ypos, mu, self.positive.zeta)
            out = np.where(pos, dens, out)
        return out

    def sample(self, mu, x, rng: np.random.Generator) -> np.ndarray:
        p = self.prob_nonzero(x)
        nonzero = rng.random(size=np.shape(p)) < p
        draws = sample_gamma_costs(np.asarray(mu, dtype=float), self.positive.zeta, rng)
        return np.where(nonzero, draws, 0.0)

    def to_dict(self) -> dict:
        return {"zero_coefs": self.zero_coefs.tolist(), "positive": self.positive.to_dict()}

    @classmethod
    def from_dict(cls, obj: dict) -> "HurdleModel":
        return cls(np.asarray(obj["zero_coefs"]), CostModel.from_dict(obj["positive"]))
