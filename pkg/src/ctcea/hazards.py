"""Cause-specific proportional hazards in continuous time.

Baseline hazard families: piecewise-constant on a shared time grid (the
semiparametric workhorse), Weibull, and the exponential special case
(a one-interval piecewise baseline behaves identically).  All operations
are closed form, including exact inverse-CDF gap sampling via latent
per-cause event times.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

CAUSES = (1, 2)  # 1 = new encounter (visit), 2 = death


@dataclass(frozen=True)
class TimeGrid:
    """Q-interval partition 0 = c_0 < c_1 < ... < c_{Q-1} < inf.

    cuts holds (c_0, ..., c_{Q-1}); the final interval is open-ended.
    """

    cuts: np.ndarray

    def __post_init__(self):
        cuts = np.asarray(self.cuts, dtype=float)
        object.__setattr__(self, "cuts", cuts)
        if cuts[0] != 0.0 or np.any(np.diff(cuts) <= 0):
            raise ValueError("grid cuts must start at 0 and be strictly increasing")

    @property
    def q(self) -> int:
        return len(self.cuts)

    @classmethod
    def even(cls, q: int, upper: float) -> "TimeGrid":
        """Q evenly spaced intervals over [0, upper], last one open-ended."""
        if q < 1:
            raise ValueError("need q >= 1")
        if not upper > 0:
            raise ValueError("need upper > 0")
        return cls(cuts=np.arange(q) * (upper / q))

    def interval_index(self, w) -> np.ndarray:
        """0-based interval containing each elapsed time w."""
        return np.clip(np.searchsorted(self.cuts, w, side="right") - 1, 0, self.q - 1)

    def exposure(self, w) -> np.ndarray:
        """|I_q intersect [0, w]| for each interval; shape (..., Q)."""
        w = np.asarray(w, dtype=float)
        lo = self.cuts
        hi = np.append(self.cuts[1:], np.inf)
        return np.clip(w[..., None] - lo, 0.0, hi - lo)


class BaselineHazard:
    """Interface for a baseline hazard h0(w) with closed-form integral."""

    def rate(self, w):
        raise NotImplementedError

    def log_rate(self, w):
        return np.log(self.rate(w))

    def cum(self, w):
        """Integral of h0 over [0, w]."""
        raise NotImplementedError

    def inv_cum(self, target):
        """Inverse of cum(): smallest w with cum(w) = target."""
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class PiecewiseHazard(BaselineHazard):
    grid: TimeGrid
    rates: np.ndarray  # Q positive step values

    def __post_init__(self):
        rates = np.asarray(self.rates, dtype=float)
        object.__setattr__(self, "rates", rates)
        if len(rates) != self.grid.q:
            raise ValueError("rate vector length must match grid")
        if np.any(rates <= 0):
            raise ValueError("baseline rates must be positive")

    def rate(self, w):
        return self.rates[self.grid.interval_index(w)]

    def cum(self, w):
        return self.grid.exposure(w) @ self.rates

    def inv_cum(self, target):
        target = np.asarray(target, dtype=float)
        widths = np.diff(np.append(self.grid.cuts, np.inf))
        masses = np.cumsum(self.rates * widths)  # cum at each upper cut; last inf
        q = np.searchsorted(masses, target, side="right")
        q = np.clip(q, 0, self.grid.q - 1)
        below = np.where(q > 0, masses[np.maximum(q - 1, 0)], 0.0)
        return self.grid.cuts[q] + (target - below) / self.rates[q]

    def to_dict(self) -> dict:
        return {"family": "piecewise", "cuts": self.grid.cuts.tolist(), "rates": self.rates.tolist()}


@dataclass(frozen=True)
class WeibullHazard(BaselineHazard):
    """h0(w) = lam * nu * w^(nu-1), so cum = lam * w^nu."""

    lam: float
    nu: float

    def __post_init__(self):
        if self.lam <= 0 or self.nu <= 0:
            raise ValueError("Weibull parameters must be positive")

    def rate(self, w):
        w = np.asarray(w, dtype=float)
        return self.lam * self.nu * w ** (self.nu - 1.0)

    def log_rate(self, w):
        w = np.asarray(w, dtype=float)
        return np.log(self.lam) + np.log(self.nu) + (self.nu - 1.0) * np.log(w)

    def cum(self, w):
        w = np.asarray(w, dtype=float)
        return self.lam * w**self.nu

    def inv_cum(self, target):
        target = np.asarray(target, dtype=float)
        return (target / self.lam) ** (1.0 / self.nu)

    def to_dict(self) -> dict:
        return {"family": "weibull", "lam": self.lam, "nu": self.nu}


def exponential_hazard(lam: float) -> PiecewiseHazard:
    """Constant-rate baseline: the Q=1 piecewise special case."""
    return PiecewiseHazard(grid=TimeGrid(cuts=np.zeros(1)), rates=np.array([lam]))


def baseline_from_dict(obj: dict) -> BaselineHazard:
    if obj["family"] == "piecewise":
        return PiecewiseHazard(TimeGrid(np.asarray(obj["cuts"])), np.asarray(obj["rates"]))
    if obj["family"] == "weibull":
        return WeibullHazard(obj["lam"], obj["nu"])
    raise ValueError(f"unknown baseline family {obj['family']!r}")


@dataclass(frozen=True)
class HazardModel:
    """Two-cause proportional hazards: h_k(w|s) = h0k(w) * exp(s'phi_k)."""

    baselines: tuple[BaselineHazard, BaselineHazard]
    coefs: tuple[np.ndarray, np.ndarray]

    def _check_cause(self, k: int) -> int:
        if k not in CAUSES:
            raise ValueError(f"unknown cause {k}; expected 1 (visit) or 2 (death)")
        return k - 1

    def linpred(self, k: int, s: np.ndarray) -> np.ndarray:
        i = self._check_cause(k)
        return np.asarray(s, dtype=float) @ self.coefs[i]

    def hazard_eval(self, k: int, w, s) -> np.ndarray:
        """h0k(w) * exp(s'phi_k) at elapsed time w > 0."""
        i = self._check_cause(k)
        return self.baselines[i].rate(w) * np.exp(self.linpred(k, s))

    def cumulative_hazard(self, k: int, w, s) -> np.ndarray:
        i = self._check_cause(k)
        return self.baselines[i].cum(w) * np.exp(self.linpred(k, s))

    def survival(self, w, s) -> np.ndarray:
        """Overall survival exp(-sum_k H_k(w|s))."""
        return np.exp(-sum(self.cumulative_hazard(k, w, s) for k in CAUSES))

    def log_subdensity(self, w, k: int, s) -> np.ndarray:
        """log f(w, delta=k | s) = log h_k(w|s) + log S(w|s)."""
        i = self._check_cause(k)
        log_h = self.baselines[i].log_rate(w) + self.linpred(k, s)
        return log_h - sum(self.cumulative_hazard(kk, w, s) for kk in CAUSES)

    def sample_gaps(self, s: np.ndarray, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        """Vectorized draw of (gap, cause) for each row of the state matrix s.

        Latent per-cause times via inverse-CDF of each cause-specific
        cumulative hazard; the joint law of the minimum and its cause is
        the subdensity f(w, delta=k | s) = h_k(w) S(w).
        """
        s = np.atleast_2d(np.asarray(s, dtype=float))
        n = s.shape[0]
        latent = np.empty((2, n))
        for k in CAUSES:
            i = k - 1
            e = rng.exponential(size=n)
            latent[i] = self.baselines[i].inv_cum(e * np.exp(-self.linpred(k, s)))
        cause = np.where(latent[0] < latent[1], 1, 2)
        return latent.min(axis=0), cause

    def sample_gap(self, s: np.ndarray, rng: np.random.Generator) -> tuple[float, int]:
        w, k = self.sample_gaps(np.asarray(s, dtype=float)[None, :], rng)
        return float(w[0]), int(k[0])

    def to_dict(self) -> dict:
        return {
            "baselines": [b.to_dict() for b in self.baselines],
            "coefs": [c.tolist() for c in self.coefs],
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "HazardModel":
        return cls(
            baselines=tuple(baseline_from_dict(b) for b in obj["baselines"]),
            coefs=tuple(np.asarray(c, dtype=float) for c in obj["coefs"]),
        )
