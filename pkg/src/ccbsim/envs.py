"""Simulation environments, feasibility certification and benchmark solvers.

A :class:`ProblemSpec` fixes the ground truth: mean reward/cost tables
over a finite context set, the context process and the noise model.
Noise models are mean-exact by construction - the conditional mean of
every sampled outcome equals the table entry, so realizability holds
with no approximation.

Benchmark solvers produce the best stationary comparison policy for each
feasibility notion: a per-context LP with one cost constraint (solved by
exact vertex enumeration for a single resource, dense grid fallback for
several), a support-restricted maximiser for almost-sure feasibility,
and an aggregate budget LP solved by bisection on the dual multiplier.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass

import numpy as np

from .core import Outcome, ValidationError, validate_mean_table, validate_simplex

FEAS_TOL = 1e-12          # per-context expectation tolerance
BUDGET_FEAS_TOL = 1e-9    # aggregate budget tolerance
THETA_TOL = 1e-10         # dual bisection tolerance


class InfeasibleBenchmarkError(ValidationError):
    """No stationary policy satisfies the requested feasibility notion."""


class NoiseModel(str, enum.Enum):
    """How realised rewards/costs are drawn around their means.

    * deterministic: the outcome equals the mean table entry, no draws.
    * two_point_symmetric: every channel is +/-1 with the exact mean.
    * two_point_nonpositive: costs are -1 with probability -mean (so the
      support is {-1, 0}; requires all cost means <= 0), rewards stay
      symmetric two-point.
    """

    DETERMINISTIC = "deterministic"
    TWO_POINT_SYMMETRIC = "two_point_symmetric"
    TWO_POINT_NONPOSITIVE = "two_point_nonpositive"


@dataclass(frozen=True)
class IIDContexts:
    dist: np.ndarray  # simplex over contexts

    def __post_init__(self):
        object.__setattr__(self, "dist", validate_simplex(self.dist))


@dataclass(frozen=True)
class CyclicContexts:
    sequence: tuple[int, ...]

    def __post_init__(self):
        seq = tuple(int(s) for s in self.sequence)
        if not seq:
            raise ValidationError("cyclic context sequence must be non-empty")
        object.__setattr__(self, "sequence", seq)


@dataclass(frozen=True)
class AdaptiveAdversary:
    """Stress generator: a deterministic function of the learner's actions.

    The shipped ``max_gap`` strategy serves the context whose
    feasible-optimal reward gap to the learner's empirical action
    frequencies is largest (uniform frequencies before the first action,
    lowest context index on ties).  A testbed construction, not a
    canonical strategy.
    """

    strategy: str = "max_gap"

    def __post_init__(self):
        if self.strategy != "max_gap":
            raise ValidationError(f"unknown adversary strategy {self.strategy!r}")


ContextProcess = IIDContexts | CyclicContexts | AdaptiveAdversary


@dataclass(frozen=True)
class ProblemSpec:
    """Ground-truth environment for a simulated constrained bandit."""

    n_contexts: int
    n_actions: int
    n_resources: int
    reward_means: np.ndarray    # (n_contexts, n_actions)
    cost_means: np.ndarray      # (n_resources, n_contexts, n_actions)
    context_process: ContextProcess
    noise: NoiseModel
    budget: float | None = None  # optional total budget for standalone solver use

    def __post_init__(self):
        n, k, m = self.n_contexts, self.n_actions, self.n_resources
        if min(n, k, m) < 1:
            raise ValidationError("n_contexts, n_actions, n_resources must all be >= 1")
        f = validate_mean_table(self.reward_means, n, k, "reward_means")
        g = np.asarray(self.cost_means, dtype=float)
        if g.shape != (m, n, k):
            raise ValidationError(f"cost_means has shape {g.shape}, expected {(m, n, k)}")
        for i in range(m):
            validate_mean_table(g[i], n, k, f"cost_means[{i}]")
        object.__setattr__(self, "reward_means", f)
        object.__setattr__(self, "cost_means", g)
        if isinstance(self.context_process, IIDContexts) and self.context_process.dist.size != n:
            raise ValidationError("iid context distribution length != n_contexts")
        if isinstance(self.context_process, CyclicContexts):
            if max(self.context_process.sequence) >= n or min(self.context_process.sequence) < 0:
                raise ValidationError("cyclic sequence references an unknown context")
        if self.noise is NoiseModel.TWO_POINT_NONPOSITIVE and np.any(g > 0.0):
            raise ValidationError("two_point_nonpositive noise requires all cost means <= 0")
        if self.budget is not None and self.budget < 0.0:
            raise ValidationError(f"budget must be non-negative, got {self.budget}")


class ContextSequencer:
    """Stateless-per-round context generation for one run."""

    def __init__(self, spec: ProblemSpec, rng: np.random.Generator):
        self.spec = spec
        self.rng = rng
        self._adversary_values: np.ndarray | None = None
        if isinstance(spec.context_process, AdaptiveAdversary):
            # The adversary plays against the feasible optimum of each context.
            policy = benchmark_in_expectation(spec, slack=0.0)
            self._adversary_values = policy.value_per_context

    def next(self, t: int, action_counts: np.ndarray) -> int:
        proc = self.spec.context_process
        if isinstance(proc, CyclicContexts):
            return proc.sequence[t % len(proc.sequence)]
        if isinstance(proc, IIDContexts):
            u = self.rng.random()
            acc = 0.0
            dist = proc.dist
            for x in range(dist.size - 1):
                acc += dist[x]
                if acc > u:
                    return x
            return dist.size - 1
        total = action_counts.sum()
        if total > 0:
            freq = action_counts / total
        else:
            freq = np.full(self.spec.n_actions, 1.0 / self.spec.n_actions)
        gaps = self._adversary_values - self.spec.reward_means @ freq
        return int(np.argmax(gaps))


def _two_point(mean: float, u: float, lo: float, hi: float) -> float:
    """Draw from {lo, hi} with the exact requested mean, using uniform u."""
    p_hi = (mean - lo) / (hi - lo)
    return hi if u < p_hi else lo


def sample_outcome(
    spec: ProblemSpec,
    x: int,
    a: int,
    reward_rng: np.random.Generator,
    cost_rngs: list[np.random.Generator],
) -> Outcome:
    """Sample one round of feedback; conditional means equal the tables.

    Each channel draws from its own stream (at most one uniform per
    channel per call), so adding a resource never perturbs the noise
    realised by the existing channels under the same seed.
    """
    f = float(spec.reward_means[x, a])
    g = spec.cost_means[:, x, a]
    if spec.noise is NoiseModel.DETERMINISTIC:
        return Outcome(reward=f, costs=g.copy())
    reward = _two_point(f, reward_rng.random(), -1.0, 1.0)
    costs = np.empty(spec.n_resources)
    if spec.noise is NoiseModel.TWO_POINT_SYMMETRIC:
        for i in range(spec.n_resources):
            costs[i] = _two_point(g[i], cost_rngs[i].random(), -1.0, 1.0)
    else:  # TWO_POINT_NONPOSITIVE: support {-1, 0}, P(-1) = -mean
        for i in range(spec.n_resources):
            costs[i] = -1.0 if cost_rngs[i].random() < -g[i] else 0.0
    return Outcome(reward=reward, costs=costs)


def positive_part_means(spec: ProblemSpec) -> np.ndarray:
    """Mean tables of the positive-part transformed costs, ``max(0, cost)``.

    Exact for deterministic and nonpositive-two-point noise (where the
    transform acts on supports {mean} and {-1, 0} respectively); with
    symmetric two-point noise the transformed mean would not stay inside
    the declared function class, so that combination is rejected.
    """
    if spec.noise is NoiseModel.TWO_POINT_SYMMETRIC:
        raise ValidationError(
            "positive-part cost transform is not mean-exact under symmetric two-point noise"
        )
    return np.maximum(spec.cost_means, 0.0)


# ---------------------------------------------------------------------------
# Benchmark solvers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BenchmarkPolicy:
    """A stationary comparison policy with its per-context expected reward."""

    per_context: np.ndarray       # (n_contexts, n_actions), rows are simplexes
    value_per_context: np.ndarray  # (n_contexts,)


def benchmark_per_context(f_row, g_rows, slack: float = 0.0) -> tuple[np.ndarray, float]:
    """Best distribution for one context under ``<g_i, pi> <= slack`` for all i.

    Single resource: exact vertex enumeration.  The optimum of a linear
    objective over the simplex with one extra inequality sits either on
    a feasible point mass or on a two-action mixture that makes the
    constraint tight, so enumerating those candidates is exhaustive.
    Ties keep the earliest candidate (point masses by action index, then
    pairs in lexicographic order), which makes solutions reproducible.

    Several resources fall back to a dense simplex grid (step 0.01).
    """
    f = np.asarray(f_row, dtype=float)
    g = np.atleast_2d(np.asarray(g_rows, dtype=float))
    if g.shape[1] != f.size:
        raise ValidationError(f"cost rows have {g.shape[1]} actions, rewards have {f.size}")
    if slack > 0.0:
        raise ValidationError(f"constraint slack must be <= 0, got {slack}")
    if g.shape[0] > 1:
        return _grid_per_context(f, g, slack)

    costs = g[0]
    k = f.size
    best_pi: np.ndarray | None = None
    best_value = -math.inf
    for a in range(k):
        if costs[a] <= slack and f[a] > best_value:
            pi = np.zeros(k)
            pi[a] = 1.0
            best_pi, best_value = pi, float(f[a])
    for a in range(k):
        for b in range(a + 1, k):
            if (costs[a] - slack) * (costs[b] - slack) >= 0.0 or costs[a] == costs[b]:
                continue
            w = (slack - costs[b]) / (costs[a] - costs[b])  # tight mixture weight on a
            if not (0.0 < w < 1.0):
                continue
            value = w * f[a] + (1.0 - w) * f[b]
            if value > best_value:
                pi = np.zeros(k)
                pi[a], pi[b] = w, 1.0 - w
                best_pi, best_value = pi, float(value)
    if best_pi is None:
        raise InfeasibleBenchmarkError(
            f"no distribution meets <cost, pi> <= {slack}: min cost is {costs.min()}"
        )
    return best_pi, best_value


def _grid_per_context(f: np.ndarray, g: np.ndarray, slack: float, step: float = 0.01):
    """Dense-grid fallback for the per-context problem with m > 1 resources."""
    k = f.size
    steps = round(1.0 / step)
    if math.comb(steps + k - 1, k - 1) > 5_000_000:
        raise ValidationError(f"grid fallback infeasible for {k} actions at step {step}")
    if k == 1:
        pis = np.ones((1, 1))
    else:
        bars = np.fromiter(
            itertools.chain.from_iterable(itertools.combinations(range(steps + k - 1), k - 1)),
            dtype=np.int64,
        ).reshape(-1, k - 1)
        padded = np.hstack([
            np.full((bars.shape[0], 1), -1, dtype=np.int64),
            bars,
            np.full((bars.shape[0], 1), steps + k - 1, dtype=np.int64),
        ])
        pis = (np.diff(padded, axis=1) - 1) / steps
    feasible = np.all(g @ pis.T <= slack + FEAS_TOL, axis=0)
    if not feasible.any():
        raise InfeasibleBenchmarkError(f"grid found no point meeting slack {slack}")
    values = pis @ f
    values[~feasible] = -np.inf
    best = int(np.argmax(values))  # first maximiser, matching enumeration order
    return pis[best].copy(), float(values[best])


def benchmark_in_expectation(spec: ProblemSpec, slack: float = 0.0) -> BenchmarkPolicy:
    """Per-context constrained optimum: feasible in expectation every round.

    ``slack=0`` is plain expected feasibility; ``slack=-eps`` produces a
    benchmark with a strict margin.
    """
    rows = np.zeros((spec.n_contexts, spec.n_actions))
    values = np.zeros(spec.n_contexts)
    for x in range(spec.n_contexts):
        rows[x], values[x] = benchmark_per_context(
            spec.reward_means[x], spec.cost_means[:, x, :], slack
        )
    return BenchmarkPolicy(per_context=rows, value_per_context=values)


def _support_cost_ceiling(spec: ProblemSpec, x: int, a: int) -> float:
    """Largest realisable cost at (x, a) across resources, given the noise."""
    means = spec.cost_means[:, x, a]
    if spec.noise is NoiseModel.DETERMINISTIC:
        return float(means.max())
    if spec.noise is NoiseModel.TWO_POINT_NONPOSITIVE:
        return 0.0
    # Symmetric two-point has +1 in the support unless the mean is exactly -1.
    return float(max(1.0 if mu > -1.0 else -1.0 for mu in means))


def benchmark_almost_sure(spec: ProblemSpec) -> BenchmarkPolicy:
    """Best policy supported only on actions whose realised cost is never > 0."""
    rows = np.zeros((spec.n_contexts, spec.n_actions))
    values = np.zeros(spec.n_contexts)
    for x in range(spec.n_contexts):
        allowed = [
            a for a in range(spec.n_actions) if _support_cost_ceiling(spec, x, a) <= 0.0
        ]
        if not allowed:
            raise InfeasibleBenchmarkError(f"context {x} has no almost-surely feasible action")
        best = max(allowed, key=lambda a: (spec.reward_means[x, a], -a))
        rows[x, best] = 1.0
        values[x] = spec.reward_means[x, best]
    return BenchmarkPolicy(per_context=rows, value_per_context=values)


def benchmark_budget(
    spec: ProblemSpec, context_weights, per_round_budget: float
) -> BenchmarkPolicy:
    """Aggregate budget LP, single resource, solved by dual bisection.

    Maximises ``sum_x w(x) <f(x), pi(x)>`` subject to
    ``sum_x w(x) <g(x), pi(x)> <= b``.  The dual policy at multiplier
    ``theta >= 0`` plays ``argmax_a f - theta*g`` per context (lowest
    index on ties); aggregate consumption is non-increasing in theta, so
    bisection brackets the crossing and a final two-action mixture in at
    most one context makes the budget tight.
    """
    if spec.n_resources != 1:
        raise ValidationError("budget benchmark supports a single resource")
    w = validate_simplex(context_weights)
    if w.size != spec.n_contexts:
        raise ValidationError("context weights length != n_contexts")
    f, g = spec.reward_means, spec.cost_means[0]
    b = float(per_round_budget)

    def greedy(theta: float) -> np.ndarray:
        return np.argmax(f - theta * g, axis=1)

    def consumption(actions: np.ndarray) -> float:
        return float(w @ g[np.arange(spec.n_contexts), actions])

    def as_policy(actions: np.ndarray) -> BenchmarkPolicy:
        rows = np.zeros((spec.n_contexts, spec.n_actions))
        rows[np.arange(spec.n_contexts), actions] = 1.0
        values = f[np.arange(spec.n_contexts), actions].astype(float)
        return BenchmarkPolicy(per_context=rows, value_per_context=values)

    unconstrained = greedy(0.0)
    if consumption(unconstrained) <= b:
        return as_policy(unconstrained)

    min_consumption = float(w @ g.min(axis=1))
    if min_consumption > b:
        raise InfeasibleBenchmarkError(
            f"even the cheapest policy consumes {min_consumption} > budget {b}"
        )
    theta_hi = 2.0 / max(1e-9, b - min_consumption)
    while consumption(greedy(theta_hi)) > b:  # guards 1e-9-scale budget gaps
        theta_hi *= 2.0
    theta_lo = 0.0
    while theta_hi - theta_lo > THETA_TOL:
        mid = 0.5 * (theta_lo + theta_hi)
        if consumption(greedy(mid)) > b:
            theta_lo = mid
        else:
            theta_hi = mid

    acts_hi = greedy(theta_hi)   # feasible side of the crossing
    acts_lo = greedy(theta_lo)   # infeasible side, higher reward
    rows = np.zeros((spec.n_contexts, spec.n_actions))
    rows[np.arange(spec.n_contexts), acts_hi] = 1.0
    remaining = b - consumption(acts_hi)
    for x in range(spec.n_contexts):
        if acts_lo[x] == acts_hi[x]:
            continue
        delta = w[x] * (g[x, acts_lo[x]] - g[x, acts_hi[x]])  # > 0 at a crossing
        if delta <= remaining:
            rows[x, acts_hi[x]] = 0.0
            rows[x, acts_lo[x]] = 1.0
            remaining -= delta
        else:
            mix = remaining / delta
            rows[x, acts_hi[x]] = 1.0 - mix
            rows[x, acts_lo[x]] = mix
            remaining = 0.0
            break
    values = np.array([float(f[x] @ rows[x]) for x in range(spec.n_contexts)])
    return BenchmarkPolicy(per_context=rows, value_per_context=values)


def opt_value(benchmark: BenchmarkPolicy, realized_contexts) -> float:
    """Cumulative expected benchmark reward over the realised context sequence."""
    xs = np.asarray(realized_contexts, dtype=np.int64)
    if xs.size == 0:
        return 0.0
    return float(benchmark.value_per_context[xs].sum())


# ---------------------------------------------------------------------------
# Feasibility certification
# ---------------------------------------------------------------------------


class FeasibilityKind(str, enum.Enum):
    IN_EXPECTATION = "in_expectation"
    SLATER = "slater"
    ALMOST_SURE = "almost_sure"
    BUDGET = "budget"


@dataclass(frozen=True)
class FeasibilityDefinition:
    kind: FeasibilityKind
    slater_eps: float | None = None
    budget: float | None = None            # total budget over the horizon
    horizon: int | None = None
    context_weights: np.ndarray | None = None

    def __post_init__(self):
        if self.kind is FeasibilityKind.SLATER and not (self.slater_eps or 0) > 0:
            raise ValidationError("slater definition requires a positive eps")
        if self.kind is FeasibilityKind.BUDGET:
            if self.budget is None or self.horizon is None or self.context_weights is None:
                raise ValidationError("budget definition requires budget, horizon and weights")
            object.__setattr__(self, "context_weights", validate_simplex(self.context_weights))


@dataclass(frozen=True)
class FeasibilityCertificate:
    definition: FeasibilityDefinition
    verified: bool
    worst_slack: float  # largest violation margin found; <= tolerance when verified


def feasibility_check(
    spec: ProblemSpec, benchmark: BenchmarkPolicy, definition: FeasibilityDefinition
) -> FeasibilityCertificate:
    """Certify a benchmark against one of the feasibility notions.

    Per-context notions check every context (and every resource); the
    budget notion checks the aggregate over the declared weights.  The
    certificate never raises - an infeasible benchmark simply comes back
    with ``verified=False`` and the offending margin.
    """
    rows = benchmark.per_context
    kind = definition.kind
    if kind in (FeasibilityKind.IN_EXPECTATION, FeasibilityKind.SLATER):
        threshold = 0.0 if kind is FeasibilityKind.IN_EXPECTATION else -definition.slater_eps
        expected = np.einsum("inK,nK->in", spec.cost_means, rows)  # (m, n)
        worst = float((expected - threshold).max())
        return FeasibilityCertificate(definition, worst <= FEAS_TOL, worst)
    if kind is FeasibilityKind.ALMOST_SURE:
        worst = -math.inf
        for x in range(spec.n_contexts):
            for a in range(spec.n_actions):
                if rows[x, a] > 0.0:
                    worst = max(worst, _support_cost_ceiling(spec, x, a))
        return FeasibilityCertificate(definition, worst <= FEAS_TOL, worst)
    # BUDGET: aggregate expected consumption over the horizon.
    w = definition.context_weights
    per_round = float(np.einsum("inK,nK,n->", spec.cost_means, rows, w))
    slack = definition.horizon * per_round - definition.budget
    return FeasibilityCertificate(definition, slack <= BUDGET_FEAS_TOL, slack)
