"""Weakly informative priors with AR(1) smoothing of piecewise baselines.

All regression coefficients get Normal(0, sd^2) priors (default sd 3);
positive scale-type parameters get HalfNormal(1); binary baseline
probabilities are uniform on (0, 1).  Piecewise baseline log-rates and
log mean costs (and readiness logits, on the original scale) share a
first-order autoregressive prior across adjacent intervals whose level,
correlation, and innovation-scale hyperparameters carry Normal(0,1),
Beta(2,2) (through rho = 2*invlogit(rho_tilde) - 1), and HalfNormal(1)
hyperpriors.

The prior density is evaluated on constrained values; samplers add the
transform Jacobian separately (ParamLayout.log_jacobian).
"""

from __future__ import annotations

from dataclasses import dataclass

import jax.numpy as jnp
import numpy as np

from .params import (P_AR1, P_BETA22, P_COEF, P_HALFNORMAL, P_NARROW, P_UNIFORM,
                     ParamLayout, rho_from_raw as _rho_from_raw_np)

_LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)
_LOG_HALF_NORMAL_CONST = 0.5 * np.log(2.0 / np.pi)
_LOG_BETA22_CONST = np.log(6.0)


@dataclass(frozen=True)
class PriorConfig:
    coef_sd: float = 3.0
    scale_sd: float = 1.0  # half-normal scale for sigma-type parameters
    level_sd: float = 1.0  # normal sd for baseline means and AR(1) levels

    def __post_init__(self):
        if min(self.coef_sd, self.scale_sd, self.level_sd) <= 0:
            raise ValueError("prior scales must be positive")


def _normal(x, sd, xp=jnp):
    return xp.sum(-_LOG_SQRT_2PI - xp.log(sd) - 0.5 * (x / sd) ** 2)


def ar1_log_density(x, mu, rho, sigma, xp=jnp):
    """Log-density of x_1 = mu + sigma*eps, x_q = mu(1-rho) + rho*x_{q-1} + sigma*eps."""
    x = xp.asarray(x)
    lead = _normal(x[0] - mu, sigma, xp)
    if x.shape[0] == 1:
        return lead
    resid = x[1:] - (mu * (1.0 - rho) + rho * x[:-1])
    return lead + _normal(resid, sigma, xp)


def sample_ar1(q: int, mu: float, rho: float, sigma: float, rng: np.random.Generator,
               size: int = 1) -> np.ndarray:
    """Draw paths from the AR(1) recursion; shape (size, q)."""
    eps = rng.standard_normal((size, q))
    x = np.empty((size, q))
    x[:, 0] = mu + sigma * eps[:, 0]
    for t in range(1, q):
        x[:, t] = mu * (1.0 - rho) + rho * x[:, t - 1] + sigma * eps[:, t]
    return x


def rho_from_raw(rho_tilde, affine: bool = False, xp=jnp):
    """Map rho_tilde in (0,1) to the AR(1) correlation."""
    return _rho_from_raw_np(rho_tilde, affine=affine, xp=xp)


def log_prior(x, layout: ParamLayout, pc: PriorConfig | None = None):
    """Joint log-prior at an unconstrained vector, evaluated on the
    constrained values (add layout.log_jacobian for posterior work)."""
    pc = pc or PriorConfig()
    spec = layout.spec
    if not layout.with_hyper and any(s.prior == P_AR1 for s in layout.segments):
        raise ValueError("AR(1) blocks need a layout built with with_hyper=True")
    c = layout.constrain(x, xp=jnp)
    total = 0.0
    for s in layout.segments:
        v = c[s.name]
        if s.prior == P_COEF:
            if s.transform == "log":
                # positive structural parameters: Normal prior on log(v);
                # stated as a density over v, hence the 1/v factor
                lv = jnp.log(v)
                total = total + _normal(lv, pc.coef_sd) - jnp.sum(lv)
            else:
                total = total + _normal(v, pc.coef_sd)
        elif s.prior == P_NARROW:
            total = total + _normal(v, pc.level_sd)
        elif s.prior == P_HALFNORMAL:
            total = total + jnp.sum(_LOG_HALF_NORMAL_CONST - jnp.log(pc.scale_sd)
                                    - 0.5 * (v / pc.scale_sd) ** 2)
        elif s.prior == P_UNIFORM:
            pass  # flat on (0, 1); support enforced by the logistic transform
        elif s.prior == P_BETA22:
            total = total + jnp.sum(_LOG_BETA22_CONST + jnp.log(v) + jnp.log1p(-v))
        elif s.prior == P_AR1:
            mu = c[f"hyper.{s.name}.mu"][0]
            rho = rho_from_raw(c[f"hyper.{s.name}.rho"][0], affine=spec.rho_affine)
            sigma = c[f"hyper.{s.name}.sigma"][0]
            if s.transform == "log":
                path = jnp.log(v)
                total = total + ar1_log_density(path, mu, rho, sigma) - jnp.sum(path)
            else:
                total = total + ar1_log_density(v, mu, rho, sigma)
        else:
            raise ValueError(f"unknown prior tag {s.prior!r}")
    return total
