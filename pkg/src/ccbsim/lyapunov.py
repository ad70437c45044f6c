"""Lyapunov potentials over cost queues and per-regime parameter builders.

Two shapes are supported, both twice differentiable and convex with a
monotone second derivative:

* quadratic ``x**2 / scale`` on all reals (queues may go negative under
  signed costs; no projection is applied to the queue recursion), and
* exponential ``exp(rate * x)`` on ``x >= 0`` (used only in regimes that
  guarantee non-decreasing, non-negative queues).

:func:`build_lyapunov` maps a benchmark regime and the run parameters
(number of actions K, horizon T, oracle error budget U, total budget B)
to the concrete potential the constrained policy uses.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Protocol, runtime_checkable

import numpy as np

from .core import ValidationError


@runtime_checkable
class LyapunovFunction(Protocol):
    requires_nonneg_queue: bool

    def value(self, x): ...

    def deriv(self, x): ...

    def second(self, x): ...


@dataclass(frozen=True)
class QuadraticLyapunov:
    """phi(x) = x**2 / scale with phi'' constant; valid on all reals."""

    scale: float
    requires_nonneg_queue: bool = False

    def __post_init__(self):
        if not self.scale > 0.0:
            raise ValidationError(f"quadratic scale must be positive, got {self.scale}")

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return x * x / self.scale

    def deriv(self, x):
        return 2.0 * np.asarray(x, dtype=float) / self.scale

    def second(self, x):
        return np.full_like(np.asarray(x, dtype=float), 2.0 / self.scale)


@dataclass(frozen=True)
class ExponentialLyapunov:
    """phi(x) = exp(rate * x) on x >= 0; phi'' = rate * phi' exactly."""

    rate: float
    requires_nonneg_queue: bool = True

    def __post_init__(self):
        if not self.rate > 0.0:
            raise ValidationError(f"exponential rate must be positive, got {self.rate}")

    def value(self, x):
        return np.exp(self.rate * np.asarray(x, dtype=float))

    def deriv(self, x):
        return self.rate * np.exp(self.rate * np.asarray(x, dtype=float))

    def second(self, x):
        return self.rate * self.rate * np.exp(self.rate * np.asarray(x, dtype=float))


class Regime(str, enum.Enum):
    """Benchmark feasibility regimes, each with its own potential recipe."""

    FEASIBLE_EXPECTATION = "feasible_expectation"
    SLATER = "slater"
    ALMOST_SURE = "almost_sure"
    CBWK = "cbwk"
    NON_NEG_REGRET = "non_neg_regret"
    CBWLC = "cbwlc"


# Regimes whose analysis relies on a long-term budget B and therefore
# require one; exponential regimes additionally require non-negative
# (or positive-part transformed) realised costs.
BUDGET_REGIMES = frozenset({Regime.CBWK, Regime.CBWLC})
EXPONENTIAL_REGIMES = frozenset({Regime.ALMOST_SURE, Regime.CBWK})


@dataclass(frozen=True)
class RegimeParams:
    """Everything needed to instantiate the potential for one run."""

    regime: Regime
    n_actions: int          # K
    horizon: int            # T
    error_budget: float     # U, the oracle's cumulative squared error allowance
    budget: float | None = None       # B, total cost budget (budget regimes)
    slater_eps: float | None = None   # diagnostic only; the policy never reads it

    def __post_init__(self):
        if self.n_actions < 1 or self.horizon < 0:
            raise ValidationError("n_actions must be >= 1 and horizon >= 0")
        if not self.error_budget > 0.0:
            raise ValidationError(f"error budget must be positive, got {self.error_budget}")
        if self.regime in BUDGET_REGIMES and self.budget is None:
            raise ValidationError(f"regime {self.regime.value} requires a budget")
        if self.budget is not None:
            if self.budget < 0.0:
                raise ValidationError(f"budget must be non-negative, got {self.budget}")
            if self.horizon > 0 and self.budget > self.horizon:
                raise ValidationError(f"budget {self.budget} exceeds horizon {self.horizon}")
        if self.slater_eps is not None and not self.slater_eps > 0.0:
            raise ValidationError(f"slater_eps must be positive, got {self.slater_eps}")
        if self.regime is Regime.SLATER and self.slater_eps is None:
            raise ValidationError("slater regime requires slater_eps")


def build_lyapunov(params: RegimeParams) -> LyapunovFunction:
    """Instantiate the potential prescribed for the given regime.

    * feasible-expectation, slater: quadratic with scale sqrt(K*T*U)
    * almost-sure:                  exponential, rate 1/(8*sqrt(K*U*T))
    * knapsack (non-negative cost): exponential, rate 1/(8*sqrt(K*U*T) + 2B)
    * non-negative regret, signed-cost budget: quadratic, scale sqrt(K*T*U) + B
    """
    k, t, u = params.n_actions, max(1, params.horizon), params.error_budget
    root = math.sqrt(k * t * u)
    regime = params.regime
    if regime in (Regime.FEASIBLE_EXPECTATION, Regime.SLATER):
        return QuadraticLyapunov(scale=root)
    if regime is Regime.ALMOST_SURE:
        return ExponentialLyapunov(rate=1.0 / (8.0 * root))
    if regime is Regime.CBWK:
        return ExponentialLyapunov(rate=1.0 / (8.0 * root + 2.0 * params.budget))
    if regime in (Regime.NON_NEG_REGRET, Regime.CBWLC):
        budget = params.budget if params.budget is not None else 0.0
        return QuadraticLyapunov(scale=root + budget)
    raise ValidationError(f"unknown regime {regime}")


def z_of(phi: LyapunovFunction, q_prev) -> float:
    """Exploration-rate weight ``max(1, sum_i phi'(q_i)**2)``.

    Scalar queues reduce to ``max(1, phi'(q)**2)``; with multiple
    resources the squared derivatives add, matching the Cauchy-Schwarz
    step that couples the per-resource estimation errors.
    """
    d = np.atleast_1d(phi.deriv(q_prev))
    return max(1.0, float(d @ d))
