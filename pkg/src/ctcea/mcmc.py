"""Posterior sampling: Hamiltonian Monte Carlo with dual-averaging step
size and diagonal mass adaptation, plus an adaptive random-walk fallback.

The samplers operate on a generic (log-density, gradient) pair over an
unconstrained vector, so they are testable against analytic targets; the
cohort-facing entry point run_mcmc wires in the joint log-posterior
(likelihood + priors + transform Jacobian) and initializes at the
posterior mode found by L-BFGS.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .data import Cohort
from .likelihood import LikelihoodData, make_loglik, prepare_data
from .params import ModelSpec, ParamLayout
from .priors import PriorConfig, log_prior

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SamplerConfig:
    chains: int = 1
    warmup: int = 500
    draws: int = 500
    algorithm: str = "hmc"  # "hmc" | "rwm"
    target_accept: float = 0.8
    max_leapfrog: int = 64
    seed: int = 0

    def __post_init__(self):
        if self.warmup < 0 or self.draws < 1 or self.chains < 1:
            raise ValueError("need warmup >= 0, draws >= 1, chains >= 1")
        if self.algorithm not in ("hmc", "rwm"):
            raise ValueError(f"unknown algorithm {self.algorithm!r}")

    @classmethod
    def from_json(cls, text: str) -> "SamplerConfig":
        return cls(**json.loads(text))


@dataclass
class PosteriorDraws:
    """Retained unconstrained draws (chains*draws, dim) plus diagnostics."""

    draws: np.ndarray
    layout: ParamLayout
    accept_rate: float
    ess: np.ndarray
    rhat: np.ndarray
    n_chains: int = 1
    meta: dict = field(default_factory=dict)

    @property
    def m(self) -> int:
        return len(self.draws)

    def constrained(self, i: int) -> dict:
        return self.layout.constrain(self.draws[i])

    def to_csv(self, path) -> None:
        names = self.layout.coordinate_names()
        header = ",".join(["draw"] + names)
        rows = np.column_stack([np.arange(self.m), self.draws])
        np.savetxt(path, rows, delimiter=",", header=header, comments="",
                   fmt=["%d"] + ["%.17g"] * self.draws.shape[1])

    def diagnostics_json(self) -> str:
        return json.dumps({
            "accept_rate": self.accept_rate,
            "n_chains": self.n_chains,
            "n_draws": self.m,
            "min_ess": float(np.min(self.ess)),
            "max_rhat": float(np.max(self.rhat)),
            "ess": self.ess.tolist(),
            "rhat": self.rhat.tolist(),
            **self.meta,
        }, indent=2)


def effective_sample_size(x: np.ndarray) -> float:
    """Initial-positive-sequence autocorrelation estimator, one chain."""
    n = len(x)
    x = x - x.mean()
    var = x.var()
    if var == 0 or n < 4:
        return float(n)
    acf = np.correlate(x, x, mode="full")[n - 1:] / (var * n)
    s = 0.0
    t = 1
    while t + 1 < n:
        pair = acf[t] + acf[t + 1]
        if pair < 0:
            break
        s += pair
        t += 2
    return float(n / (1.0 + 2.0 * s))


def split_rhat(chains: np.ndarray) -> float:
    """Potential scale reduction over split half-chains; chains (c, n)."""
    c, n = chains.shape
    half = n // 2
    if half < 2:
        return 1.0
    parts = np.concatenate([chains[:, :half], chains[:, half:2 * half]], axis=0)
    m, n2 = parts.shape
    means = parts.mean(axis=1)
    w = parts.var(axis=1, ddof=1).mean()
    b = n2 * means.var(ddof=1)
    if w == 0:
        return 1.0
    return float(np.sqrt((n2 - 1) / n2 + b / (w * n2)))


def _leapfrog(x, p, eps, n_steps, grad, inv_mass):
    g = grad(x)
    for _ in range(n_steps):
        p = p + 0.5 * eps * g
        x = x + eps * inv_mass * p
        g = grad(x)
        p = p + 0.5 * eps * g
    return x, p, g


def hmc(logpost, grad, x0, warmup, draws, rng, target_accept=0.8,
        max_leapfrog=64, mass0=None):
    """Hamiltonian Monte Carlo over a generic unconstrained target.

    Dual averaging adapts the step size during warmup; the diagonal mass
    matrix is re-estimated from warmup draws at doubling checkpoints.
    Returns (draws, acceptance rate during sampling).
    """
    x = np.asarray(x0, dtype=float).copy()
    dim = len(x)
    inv_mass = np.ones(dim) if mass0 is None else np.asarray(mass0, float)
    lp = float(logpost(x))
    if not np.isfinite(lp):
        raise ValueError("non-finite log-density at the initial point")

    eps = 0.1
    mu = np.log(10.0 * eps)
    log_eps_bar = 0.0
    h_bar = 0.0
    gamma, t0, kappa = 0.05, 10.0, 0.75

    history = []
    checkpoints = {int(warmup * f) for f in (0.4, 0.7, 0.9)}
    out = np.empty((draws, dim))
    accepted = 0
    total = 0
    n_div = 0

    for it in range(warmup + draws):
        in_warmup = it < warmup
        p = rng.standard_normal(dim) / np.sqrt(inv_mass)
        n_steps = int(rng.integers(max(1, max_leapfrog // 2), max_leapfrog + 1))
        # log-uniform step-size jitter: occasional small-step proposals keep
        # the chain mobile in funnel necks where the adapted step diverges
        eps_it = eps * 4.0 ** -rng.random()
        x_new, p_new, _ = _leapfrog(x, p, eps_it, n_steps, grad, inv_mass)
        lp_new = float(logpost(x_new))
        h0 = lp - 0.5 * np.sum(inv_mass * p * p)
        h1 = lp_new - 0.5 * np.sum(inv_mass * p_new * p_new)
        log_alpha = h1 - h0
        if not np.isfinite(log_alpha):
            log_alpha = -np.inf
            n_div += 1
        alpha = min(1.0, np.exp(log_alpha))
        if rng.random() < alpha:
            x, lp = x_new, lp_new
        if in_warmup:
            m = it + 1
            h_bar = (1.0 - 1.0 / (m + t0)) * h_bar + (target_accept - alpha) / (m + t0)
            log_eps = mu - np.sqrt(m) / gamma * h_bar
            w = m ** (-kappa)
            log_eps_bar = w * log_eps + (1.0 - w) * log_eps_bar
            eps = float(np.exp(log_eps))
            history.append(x.copy())
            if m in checkpoints and len(history) > 10:
                recent = np.asarray(history[len(history) // 2:])
                var = recent.var(axis=0)
                inv_mass = np.where(var > 1e-12, var, inv_mass)
        else:
            if it == warmup:
                eps = float(np.exp(log_eps_bar)) if warmup else eps
            out[it - warmup] = x
            accepted += alpha
            total += 1
    if n_div:
        logger.warning("HMC saw %d non-finite proposals", n_div)
    return out, (accepted / max(total, 1))


def rwm(logpost, x0, warmup, draws, rng, target_accept=0.234, scale0=0.1):
    """Adaptive random-walk Metropolis with a global scale tuned during
    warmup and a diagonal proposal covariance from warmup draws."""
    x = np.asarray(x0, dtype=float).copy()
    dim = len(x)
    lp = float(logpost(x))
    if not np.isfinite(lp):
        raise ValueError("non-finite log-density at the initial point")
    scale = scale0
    sd = np.ones(dim)
    history = []
    out = np.empty((draws, dim))
    accepted = 0

    for it in range(warmup + draws):
        prop = x + scale * sd * rng.standard_normal(dim)
        lp_prop = float(logpost(prop))
        alpha = min(1.0, np.exp(min(lp_prop - lp, 0.0))) if np.isfinite(lp_prop) else 0.0
        if rng.random() < alpha:
            x, lp = prop, lp_prop
        if it < warmup:
            scale *= np.exp((alpha - target_accept) / (1.0 + 0.01 * it))
            history.append(x.copy())
            if it == warmup // 2 and len(history) > 10:
                var = np.asarray(history[len(history) // 2:]).var(axis=0)
                sd = np.where(var > 1e-12, np.sqrt(var), sd)
        else:
            out[it - warmup] = x
            accepted += alpha
    return out, accepted / draws


def make_logpost(layout: ParamLayout, data: LikelihoodData | None,
                 pc: PriorConfig | None = None):
    """(value, gradient) closures of the unconstrained log-posterior.

    With data=None the target is the prior (plus Jacobian), which turns
    the sampler into a prior sampler for calibration checks.
    """
    import jax
    import jax.numpy as jnp

    pc = pc or PriorConfig()
    if data is not None:
        fval, fgrad = make_loglik(layout, data)
        pw = np.ones(data.n_patients)

    def full(x):
        return log_prior(x, layout, pc) + layout.log_jacobian(x, xp=jnp)

    prior_val = jax.jit(full)
    prior_grad = jax.jit(jax.grad(full))

    if data is None:
        return (lambda x: float(prior_val(x)),
                lambda x: np.asarray(prior_grad(x)))

    def value(x):
        return float(fval(x, pw)) + float(prior_val(x))

    def gradient(x):
        return np.asarray(fgrad(x, pw)) + np.asarray(prior_grad(x))

    return value, gradient


def find_map(logpost, grad, x0, maxiter=500):
    res = minimize(lambda x: -logpost(x), x0, jac=lambda x: -grad(x),
                   method="L-BFGS-B", options={"maxiter": maxiter})
    return res.x


def run_mcmc(cohort: Cohort | None, spec: ModelSpec, config: SamplerConfig,
             pc: PriorConfig | None = None, data: LikelihoodData | None = None) -> PosteriorDraws:
    """Sample the joint posterior (or the prior when cohort is None)."""
    layout = ParamLayout(spec, with_hyper=True)
    if data is None and cohort is not None:
        data = prepare_data(cohort, spec)
    logpost, grad = make_logpost(layout, data, pc)

    all_draws = []
    rates = []
    for chain in range(config.chains):
        rng = np.random.default_rng((config.seed, chain))
        x0 = 0.1 * rng.standard_normal(layout.n)
        try:
            x0 = find_map(logpost, grad, x0)
        except Exception:
            logger.warning("MAP initialization failed; starting from the random point")
        if not np.isfinite(logpost(x0)):
            raise RuntimeError(f"non-finite log-posterior at chain {chain} start: {x0!r}")
        if config.algorithm == "hmc":
            draws, rate = hmc(logpost, grad, x0, config.warmup, config.draws, rng,
                              target_accept=config.target_accept,
                              max_leapfrog=config.max_leapfrog)
        else:
            draws, rate = rwm(logpost, x0, config.warmup, config.draws, rng)
        all_draws.append(draws)
        rates.append(rate)

    stacked = np.concatenate(all_draws, axis=0)
    ess = np.array([sum(effective_sample_size(d[:, k]) for d in all_draws)
                    for k in range(layout.n)])
    if config.chains > 1:
        rhat = np.array([split_rhat(np.stack([d[:, k] for d in all_draws]))
                         for k in range(layout.n)])
    else:
        rhat = np.array([split_rhat(all_draws[0][:, k][None, :]) for k in range(layout.n)])
    return PosteriorDraws(
        draws=stacked, layout=layout, accept_rate=float(np.mean(rates)),
        ess=ess, rhat=rhat, n_chains=config.chains,
        meta={"algorithm": config.algorithm, "warmup": config.warmup, "seed": config.seed},
    )
