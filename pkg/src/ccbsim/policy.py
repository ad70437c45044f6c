"""SquareCB and its constrained extension via Lyapunov cost queues.

The unconstrained policy feeds oracle loss estimates straight into
inverse gap weighting at a fixed exploration parameter.  The constrained
policy maintains one virtual queue per resource (the running sum of
realised, possibly positive-part transformed, costs), penalises each
action's reward estimate by the queue potential's derivative times its
cost estimates, and plays IGW on the resulting surrogate with an
adaptive parameter

    gamma_t = (1 / (2 z_t)) * sqrt((K / U) * sum_{tau <= t} z_tau),

where ``z_t = max(1, sum_i phi'(Q_i(t-1))^2)`` and ``U`` is the oracle
error budget.  The helper :func:`surrogate_check_slack` evaluates the
deterministic per-round inequality that the surrogate regret obeys; it
must be non-negative on every round of every run.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Outcome, SequencingError, ValidationError, sample_action
from .igw import IGWResult, igw
from .lyapunov import LyapunovFunction, QuadraticLyapunov, ExponentialLyapunov, RegimeParams, z_of
from .oracles import RegressionOracle


class QueueInvariantError(RuntimeError):
    """An exponential potential met a negative queue."""


class SquareCB:
    """Loss-oracle contextual bandit with a fixed exploration parameter."""

    def __init__(self, oracle: RegressionOracle, gamma: float, n_actions: int):
        if not gamma > 0.0:
            raise ValidationError(f"gamma must be positive, got {gamma}")
        self.oracle = oracle
        self.gamma = float(gamma)
        self.n_actions = int(n_actions)
        self.round = 0
        self._pending: tuple[int, int] | None = None  # (context, action)

    def step(self, x: int, rng: np.random.Generator) -> tuple[int, np.ndarray]:
        """Predict losses, play IGW, sample; caller must feed the loss back."""
        if self._pending is not None:
            raise SequencingError("step called before feedback for the previous round")
        losses = self.oracle.predict(x)
        result = igw(losses, self.gamma)
        action = sample_action(result.dist, rng)
        self._pending = (x, action)
        return action, result.dist

    def feedback(self, x: int, a: int, loss: float) -> None:
        if self._pending != (x, a):
            raise SequencingError(f"feedback for {(x, a)} does not match pending {self._pending}")
        self.oracle.update(x, a, loss)
        self.round += 1
        self._pending = None


@dataclass(frozen=True)
class RoundDecision:
    """Everything the constrained policy committed to in one round."""

    round_index: int
    context: int
    reward_estimate: np.ndarray      # (K,)
    cost_estimates: np.ndarray       # (m, K)
    cost_multipliers: np.ndarray     # (m,), phi'(Q_i(t-1))
    surrogate: np.ndarray            # (K,), reward estimate minus penalties
    z: float
    gamma: float
    igw: IGWResult
    action: int


class ConstrainedSquareCB:
    """Queue-penalised SquareCB for long-term cost constraints.

    Drive it with strictly alternating ``select``/``update`` calls; the
    queues always equal the exact running sum of effective costs (pure
    additions, no projection or rescaling).
    """

    def __init__(
        self,
        reward_oracle: RegressionOracle,
        cost_oracles: list[RegressionOracle],
        phi: LyapunovFunction,
        params: RegimeParams,
        positive_part_costs: bool = False,
    ):
        if not cost_oracles:
            raise ValidationError("need at least one cost oracle")
        self.reward_oracle = reward_oracle
        self.cost_oracles = list(cost_oracles)
        self.phi = phi
        self.params = params
        self.positive_part_costs = bool(positive_part_costs)
        self.n_resources = len(cost_oracles)
        self.queues = np.zeros(self.n_resources)
        self.z_sum = 0.0
        self.round = 0
        self._gamma_scale = math.sqrt(params.n_actions / params.error_budget)
        self._pending: RoundDecision | None = None

    def select(self, x: int, rng: np.random.Generator) -> RoundDecision:
        """Build the surrogate, choose gamma_t, play IGW, sample an action."""
        if self._pending is not None:
            raise SequencingError("select called before update for the previous round")
        if self.phi.requires_nonneg_queue and self.queues.min() < 0.0:
            raise QueueInvariantError(f"negative queue {self.queues} under exponential potential")

        fhat = self.reward_oracle.predict(x)
        if self.n_resources == 1:
            ghat = self.cost_oracles[0].predict(x)[None, :]
        else:
            ghat = np.stack([oracle.predict(x) for oracle in self.cost_oracles])
        multipliers = np.atleast_1d(self.phi.deriv(self.queues))
        surrogate = fhat - multipliers @ ghat

        # Same quantity as lyapunov.z_of, reusing the derivatives above.
        z = max(1.0, float(multipliers @ multipliers))
        self.z_sum += z  # gamma_t includes the current round under the root
        gamma = (0.5 / z) * self._gamma_scale * math.sqrt(self.z_sum)

        losses = surrogate.max() - surrogate  # IGW consumes losses; gaps unchanged
        result = igw(losses, gamma)
        action = sample_action(result.dist, rng)
        decision = RoundDecision(
            round_index=self.round,
            context=x,
            reward_estimate=fhat,
            cost_estimates=ghat,
            cost_multipliers=multipliers,
            surrogate=surrogate,
            z=z,
            gamma=gamma,
            igw=result,
            action=action,
        )
        self._pending = decision
        return decision

    def update(self, x: int, decision: RoundDecision, outcome: Outcome) -> None:
        """Fold the realised outcome into the queues and both oracles."""
        if self._pending is not decision or decision.context != x:
            raise SequencingError("update does not match the pending decision")
        if outcome.costs.size != self.n_resources:
            raise ValidationError(
                f"outcome has {outcome.costs.size} costs, expected {self.n_resources}"
            )
        effective = np.maximum(outcome.costs, 0.0) if self.positive_part_costs else outcome.costs
        self.queues += effective
        self.reward_oracle.update(x, decision.action, outcome.reward)
        for i, oracle in enumerate(self.cost_oracles):
            oracle.update(x, decision.action, float(effective[i]))
        self.round += 1
        self._pending = None


def surrogate_check_slack(
    decision: RoundDecision,
    comparison_dist: np.ndarray,
    truth_rewards: np.ndarray,
    truth_costs: np.ndarray,
) -> float:
    """Slack of the per-round surrogate regret bound (must be >= 0).

    With the true surrogate ``L*(a) = f*(a) - sum_i phi'(Q_i) g_i*(a)``
    and the played distribution ``p``, the bound is

        <L*, pi*> - <L*, p>
          <= K/(2 gamma) + 2 gamma (E_p (f*-fhat)^2 + z sum_i E_p (g_i*-ghat_i)^2).

    It follows from the IGW one-step bound plus (u+v)^2 <= 2u^2 + 2v^2,
    so it holds for every realisation, not just in expectation.  Truth
    tables must match what the oracles are trained on (positive-part
    transformed means when the policy transforms costs).
    """
    truth_rewards = np.asarray(truth_rewards, dtype=float)
    truth_costs = np.atleast_2d(np.asarray(truth_costs, dtype=float))
    p = decision.igw.dist
    n_actions = p.size
    target = truth_rewards - decision.cost_multipliers @ truth_costs
    lhs = float(target @ np.asarray(comparison_dist, dtype=float)) - float(target @ p)
    err_f = truth_rewards - decision.reward_estimate
    err_g = truth_costs - decision.cost_estimates
    expected_sq_f = float(p @ (err_f * err_f))
    expected_sq_g = float(((err_g * err_g) @ p).sum())
    rhs = n_actions / (2.0 * decision.gamma) + 2.0 * decision.gamma * (
        expected_sq_f + decision.z * expected_sq_g
    )
    return rhs - lhs


def surrogate_inequality_fuzz(trials: int, seed: int = 0, max_actions: int = 8) -> float:
    """Randomised single-round stress of the surrogate bound; returns min slack.

    Draws random instances (K in {1..max_actions}, one or two resources,
    quadratic or exponential potential, random queues and estimate
    vectors in [-1, 1]) with a synthetic z-history, and evaluates the
    bound against a random comparison distribution.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    worst = math.inf
    for _ in range(trials):
        k = int(rng.integers(1, max_actions + 1))
        m = int(rng.integers(1, 3))
        if rng.random() < 0.5:
            phi: LyapunovFunction = QuadraticLyapunov(scale=float(rng.uniform(0.5, 50.0)))
            queues = rng.uniform(-5.0, 5.0, size=m)
        else:
            phi = ExponentialLyapunov(rate=float(rng.uniform(0.01, 0.5)))
            queues = rng.uniform(0.0, 5.0, size=m)
        fhat = rng.uniform(-1.0, 1.0, size=k)
        f_true = rng.uniform(-1.0, 1.0, size=k)
        ghat = rng.uniform(-1.0, 1.0, size=(m, k))
        g_true = rng.uniform(-1.0, 1.0, size=(m, k))
        multipliers = np.atleast_1d(phi.deriv(queues))
        surrogate = fhat - multipliers @ ghat
        z = z_of(phi, queues)
        z_hist = float(rng.uniform(0.0, 10.0 * k)) + z
        gamma = (0.5 / z) * math.sqrt(k * z_hist / float(rng.uniform(0.5, 40.0)))
        result = igw(surrogate.max() - surrogate, gamma)
        decision = RoundDecision(
            round_index=0,
            context=0,
            reward_estimate=fhat,
            cost_estimates=ghat,
            cost_multipliers=multipliers,
            surrogate=surrogate,
            z=z,
            gamma=gamma,
            igw=result,
            action=result.greedy,
        )
        comparison = rng.dirichlet(np.ones(k))
        slack = surrogate_check_slack(decision, comparison, f_true, g_true)
        if slack < worst:
            worst = slack
    return worst
