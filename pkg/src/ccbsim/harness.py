"""Experiment runner: configs, single runs, sweeps, metrics and log emission.

A single JSON config document describes everything needed to reproduce a
figure: the environment spec, the benchmark regime, the oracle family
and hyperparameters, the horizons and the seeds.  ``run_single`` executes
one seeded run and returns per-round logs plus a summary; ``run_sweep``
executes the full (horizon, seed) grid, aggregates per-horizon means and
fits log-log slopes of the floored metrics against the horizon.

Runs are strictly sequential inside (online protocol) and embarrassingly
parallel across (horizon, seed) pairs; results are always joined in grid
order so output never depends on the worker count.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .core import ValidationError, spawn_streams
from .envs import (
    AdaptiveAdversary,
    BenchmarkPolicy,
    ContextSequencer,
    CyclicContexts,
    FeasibilityCertificate,
    FeasibilityDefinition,
    FeasibilityKind,
    IIDContexts,
    NoiseModel,
    ProblemSpec,
    benchmark_almost_sure,
    benchmark_budget,
    benchmark_in_expectation,
    feasibility_check,
    opt_value,
    positive_part_means,
    sample_outcome,
)
from .lyapunov import (
    BUDGET_REGIMES,
    Regime,
    RegimeParams,
    build_lyapunov,
)
from .oracles import FiniteClassOracle, LinearOracle, DEFAULT_ETA
from .policy import ConstrainedSquareCB, surrogate_check_slack

SCHEMA_VERSION = 1


class ConfigError(ValidationError):
    """The experiment configuration is inconsistent or incomplete."""


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BudgetRule:
    """Total budget as a function of the horizon: fixed, or coef * T**exp."""

    kind: str  # "fixed" | "power"
    value: float = 0.0
    coefficient: float = 1.0
    exponent: float = 0.5

    def resolve(self, horizon: int) -> float:
        if self.kind == "fixed":
            return float(self.value)
        if self.kind == "power":
            return float(self.coefficient) * float(horizon) ** float(self.exponent)
        raise ConfigError(f"unknown budget rule {self.kind}")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "value": self.value,
                "coefficient": self.coefficient, "exponent": self.exponent}

    @staticmethod
    def from_dict(d: dict) -> "BudgetRule":
        return BudgetRule(
            kind=d["kind"],
            value=float(d.get("value", 0.0)),
            coefficient=float(d.get("coefficient", 1.0)),
            exponent=float(d.get("exponent", 0.5)),
        )


@dataclass(frozen=True)
class OracleSettings:
    """Oracle family plus hyperparameters; one independent instance per
    target function (the reward and each resource's cost)."""

    kind: str  # "finite" | "linear"
    reward_tables: np.ndarray | None = None   # (F, n, K)
    cost_tables: tuple[np.ndarray, ...] = ()  # one (G_i, n, K) per resource
    eta: float = DEFAULT_ETA
    features: np.ndarray | None = None        # (n, K, d), shared by all targets
    regularizer: float = 1.0
    error_budget: float | None = None          # overrides the theoretical default

    def build(self, n_resources: int):
        if self.kind == "finite":
            if self.reward_tables is None or len(self.cost_tables) != n_resources:
                raise ConfigError("finite oracle needs reward tables and one cost table set per resource")
            reward = FiniteClassOracle(self.reward_tables, eta=self.eta)
            costs = [FiniteClassOracle(t, eta=self.eta) for t in self.cost_tables]
            return reward, costs
        if self.kind == "linear":
            if self.features is None:
                raise ConfigError("linear oracle needs a feature map")
            reward = LinearOracle(self.features, regularizer=self.regularizer)
            costs = [LinearOracle(self.features, regularizer=self.regularizer)
                     for _ in range(n_resources)]
            return reward, costs
        raise ConfigError(f"unknown oracle kind {self.kind}")

    def resolve_error_budget(self, horizon: int, n_resources: int) -> float:
        if self.error_budget is not None:
            return float(self.error_budget)
        reward, costs = self.build(n_resources)
        return max(o.default_error_budget(horizon) for o in [reward, *costs])


@dataclass(frozen=True)
class ExperimentConfig:
    spec: ProblemSpec
    regime: Regime
    oracle: OracleSettings
    horizons: tuple[int, ...]
    seeds: tuple[int, ...]
    slater_eps: float | None = None
    budget_rule: BudgetRule | None = None
    record_per_round_checks: bool = False
    out_dir: str | None = None  # default output directory for the CLI
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        if self.regime in BUDGET_REGIMES and self.budget_rule is None:
            raise ConfigError(f"regime {self.regime.value} requires a budget rule")
        if self.regime is Regime.SLATER and not (self.slater_eps or 0) > 0:
            raise ConfigError("slater regime requires a positive slater_eps")
        if any(t < 0 for t in self.horizons):
            raise ConfigError("horizons must be non-negative")

    def to_dict(self) -> dict:
        spec = self.spec
        proc = spec.context_process
        if isinstance(proc, IIDContexts):
            proc_d = {"kind": "iid", "dist": proc.dist.tolist()}
        elif isinstance(proc, CyclicContexts):
            proc_d = {"kind": "cyclic", "sequence": list(proc.sequence)}
        else:
            proc_d = {"kind": "adaptive_adversary", "strategy": proc.strategy}
        oracle = self.oracle
        oracle_d: dict = {"kind": oracle.kind, "error_budget": oracle.error_budget}
        if oracle.kind == "finite":
            oracle_d["eta"] = oracle.eta
            oracle_d["reward_tables"] = oracle.reward_tables.tolist()
            oracle_d["cost_tables"] = [t.tolist() for t in oracle.cost_tables]
        else:
            oracle_d["regularizer"] = oracle.regularizer
            oracle_d["features"] = oracle.features.tolist()
        return {
            "schema_version": self.schema_version,
            "spec": {
                "n_contexts": spec.n_contexts,
                "n_actions": spec.n_actions,
                "n_resources": spec.n_resources,
                "reward_means": spec.reward_means.tolist(),
                "cost_means": spec.cost_means.tolist(),
                "context_process": proc_d,
                "noise": spec.noise.value,
            },
            "regime": {
                "kind": self.regime.value,
                "slater_eps": self.slater_eps,
                "budget": self.budget_rule.to_dict() if self.budget_rule else None,
            },
            "oracle": oracle_d,
            "horizons": list(self.horizons),
            "seeds": list(self.seeds),
            "record_per_round_checks": self.record_per_round_checks,
            "out_dir": self.out_dir,
        }

    @staticmethod
    def from_dict(d: dict) -> "ExperimentConfig":
        try:
            spec_d = d["spec"]
            proc_d = spec_d["context_process"]
            if proc_d["kind"] == "iid":
                proc = IIDContexts(dist=np.asarray(proc_d["dist"], dtype=float))
            elif proc_d["kind"] == "cyclic":
                proc = CyclicContexts(sequence=tuple(proc_d["sequence"]))
            elif proc_d["kind"] == "adaptive_adversary":
                proc = AdaptiveAdversary(strategy=proc_d.get("strategy", "max_gap"))
            else:
                raise ConfigError(f"unknown context process {proc_d['kind']}")
            spec = ProblemSpec(
                n_contexts=int(spec_d["n_contexts"]),
                n_actions=int(spec_d["n_actions"]),
                n_resources=int(spec_d["n_resources"]),
                reward_means=np.asarray(spec_d["reward_means"], dtype=float),
                cost_means=np.asarray(spec_d["cost_means"], dtype=float),
                context_process=proc,
                noise=NoiseModel(spec_d["noise"]),
            )
            oracle_d = d["oracle"]
            if oracle_d["kind"] == "finite":
                oracle = OracleSettings(
                    kind="finite",
                    reward_tables=np.asarray(oracle_d["reward_tables"], dtype=float),
                    cost_tables=tuple(np.asarray(t, dtype=float) for t in oracle_d["cost_tables"]),
                    eta=float(oracle_d.get("eta", DEFAULT_ETA)),
                    error_budget=oracle_d.get("error_budget"),
                )
            elif oracle_d["kind"] == "linear":
                oracle = OracleSettings(
                    kind="linear",
                    features=np.asarray(oracle_d["features"], dtype=float),
                    regularizer=float(oracle_d.get("regularizer", 1.0)),
                    error_budget=oracle_d.get("error_budget"),
                )
            else:
                raise ConfigError(f"unknown oracle kind {oracle_d['kind']}")
            regime_d = d["regime"]
            budget = regime_d.get("budget")
            return ExperimentConfig(
                spec=spec,
                regime=Regime(regime_d["kind"]),
                oracle=oracle,
                horizons=tuple(int(t) for t in d["horizons"]),
                seeds=tuple(int(s) for s in d["seeds"]),
                slater_eps=regime_d.get("slater_eps"),
                budget_rule=BudgetRule.from_dict(budget) if budget else None,
                record_per_round_checks=bool(d.get("record_per_round_checks", False)),
                out_dir=d.get("out_dir"),
            )
        except KeyError as missing:
            raise ConfigError(f"config missing field {missing}") from missing

    @staticmethod
    def from_json(path) -> "ExperimentConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return ExperimentConfig.from_dict(json.load(fh))


# ---------------------------------------------------------------------------
# Run preparation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PreparedRun:
    """Everything immutable shared by all seeds at one horizon."""

    config: ExperimentConfig
    horizon: int
    params: RegimeParams
    positive_part_costs: bool
    benchmark: BenchmarkPolicy
    certificate: FeasibilityCertificate
    truth_rewards: np.ndarray  # (n, K)
    truth_costs: np.ndarray    # (m, n, K); transformed when costs are


def _context_weights(spec: ProblemSpec, horizon: int) -> np.ndarray:
    proc = spec.context_process
    if isinstance(proc, IIDContexts):
        return proc.dist
    if isinstance(proc, CyclicContexts):
        counts = np.zeros(spec.n_contexts)
        seq = proc.sequence
        for t in range(horizon):
            counts[seq[t % len(seq)]] += 1
        return counts / counts.sum()
    raise ConfigError(
        "budget regimes need declarable context weights (iid or cyclic contexts)"
    )


def _support_floor(spec: ProblemSpec) -> float:
    """Smallest realisable cost across all (resource, context, action)."""
    g = spec.cost_means
    if spec.noise is NoiseModel.DETERMINISTIC:
        return float(g.min())
    # Both two-point models place mass on -1 unless the mean is at the edge.
    if spec.noise is NoiseModel.TWO_POINT_SYMMETRIC:
        return -1.0 if np.any(g < 1.0) else 1.0
    return -1.0 if np.any(g < 0.0) else 0.0


def prepare_run(config: ExperimentConfig, horizon: int) -> PreparedRun:
    """Resolve the potential, benchmark and certificate for one horizon.

    Fails fast on incompatible combinations: infeasible benchmarks,
    exponential potentials over environments that can realise negative
    effective costs, or positive-part transforms whose transformed means
    would leave the declared function class.
    """
    if horizon < 1:
        raise ConfigError("prepare_run needs a positive horizon")
    spec = config.spec
    regime = config.regime
    budget = config.budget_rule.resolve(horizon) if config.budget_rule else None

    positive_part = regime is Regime.ALMOST_SURE
    truth_rewards = spec.reward_means
    truth_costs = positive_part_means(spec) if positive_part else spec.cost_means

    if regime is Regime.CBWK:
        if spec.n_resources != 1:
            raise ConfigError("knapsack regime is single-resource")
        if _support_floor(spec) < 0.0:
            raise ConfigError("knapsack regime requires non-negative realised costs")

    if regime in (Regime.FEASIBLE_EXPECTATION, Regime.NON_NEG_REGRET):
        benchmark = benchmark_in_expectation(spec, slack=0.0)
        definition = FeasibilityDefinition(kind=FeasibilityKind.IN_EXPECTATION)
    elif regime is Regime.SLATER:
        benchmark = benchmark_in_expectation(spec, slack=-config.slater_eps)
        definition = FeasibilityDefinition(
            kind=FeasibilityKind.SLATER, slater_eps=config.slater_eps
        )
    elif regime is Regime.ALMOST_SURE:
        benchmark = benchmark_almost_sure(spec)
        definition = FeasibilityDefinition(kind=FeasibilityKind.ALMOST_SURE)
    else:  # CBWK, CBWLC
        if spec.n_resources != 1:
            raise ConfigError("budget regimes are single-resource")
        weights = _context_weights(spec, horizon)
        benchmark = benchmark_budget(spec, weights, budget / horizon)
        definition = FeasibilityDefinition(
            kind=FeasibilityKind.BUDGET,
            budget=budget,
            horizon=horizon,
            context_weights=weights,
        )
    certificate = feasibility_check(spec, benchmark, definition)
    if not certificate.verified:
        raise ConfigError(
            f"benchmark failed {definition.kind.value} certification "
            f"(worst slack {certificate.worst_slack})"
        )

    error_budget = config.oracle.resolve_error_budget(horizon, spec.n_resources)
    params = RegimeParams(
        regime=regime,
        n_actions=spec.n_actions,
        horizon=horizon,
        error_budget=error_budget,
        budget=budget,
        slater_eps=config.slater_eps,
    )
    return PreparedRun(
        config=config,
        horizon=horizon,
        params=params,
        positive_part_costs=positive_part,
        benchmark=benchmark,
        certificate=certificate,
        truth_rewards=truth_rewards,
        truth_costs=truth_costs,
    )


# ---------------------------------------------------------------------------
# Single run
# ---------------------------------------------------------------------------


@dataclass
class RoundLogs:
    """Per-round trace of one run, column-oriented."""

    t: np.ndarray             # 1-based round index
    context: np.ndarray
    action: np.ndarray
    reward: np.ndarray
    costs: np.ndarray         # (m, T), raw realised costs
    queues: np.ndarray        # (m, T), Q_i(t) after the round's update
    z: np.ndarray
    gamma: np.ndarray
    sqerr_f: np.ndarray
    sqerr_g: np.ndarray       # (m, T)
    surrogate_slack: np.ndarray  # nan when checks were not recorded

    @property
    def n_resources(self) -> int:
        return self.costs.shape[0]

    def csv_header(self) -> list[str]:
        m = self.n_resources
        return (
            ["t", "context", "action", "reward"]
            + [f"cost_{i + 1}" for i in range(m)]
            + [f"Q_{i + 1}" for i in range(m)]
            + ["z_t", "gamma_t", "sqerr_f"]
            + [f"sqerr_g_{i + 1}" for i in range(m)]
            + ["surrogate_slack"]
        )

    def write_csv(self, path) -> None:
        """UTF-8, ``\\n`` line endings, floats via shortest round-trip repr."""
        m = self.n_resources
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(",".join(self.csv_header()) + "\n")
            for j in range(self.t.size):
                row = [str(int(self.t[j])), str(int(self.context[j])), str(int(self.action[j])),
                       repr(float(self.reward[j]))]
                row += [repr(float(self.costs[i, j])) for i in range(m)]
                row += [repr(float(self.queues[i, j])) for i in range(m)]
                row += [repr(float(self.z[j])), repr(float(self.gamma[j])),
                        repr(float(self.sqerr_f[j]))]
                row += [repr(float(self.sqerr_g[i, j])) for i in range(m)]
                row.append(repr(float(self.surrogate_slack[j])))
                fh.write(",".join(row) + "\n")


@dataclass
class RunSummary:
    horizon: int
    seed: int
    opt: float
    total_reward: float
    regret: float
    ccv: np.ndarray            # (m,), raw sum of realised costs
    ccv_pos: np.ndarray        # (m,), max(0, ccv)
    final_queues: np.ndarray   # (m,), sum of effective costs
    avg_queue: np.ndarray      # (m,), mean of Q_i(t) over rounds
    queue_quantiles: dict[str, list[float]]  # per-resource quantiles of Q(t)
    r_empirical: np.ndarray    # (m,), sqrt(sum_t Q_i(t)^2)
    realized_sqerr_f: float
    realized_sqerr_g: np.ndarray  # (m,)
    error_budget: float
    min_surrogate_slack: float    # nan when checks were not recorded

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "horizon": self.horizon,
            "seed": self.seed,
            "opt": self.opt,
            "total_reward": self.total_reward,
            "regret": self.regret,
            "ccv": self.ccv.tolist(),
            "ccv_pos": self.ccv_pos.tolist(),
            "final_queues": self.final_queues.tolist(),
            "avg_queue": self.avg_queue.tolist(),
            "queue_quantiles": self.queue_quantiles,
            "r_empirical": self.r_empirical.tolist(),
            "realized_sqerr_f": self.realized_sqerr_f,
            "realized_sqerr_g": self.realized_sqerr_g.tolist(),
            "error_budget": self.error_budget,
            "min_surrogate_slack": self.min_surrogate_slack,
        }


QUEUE_QUANTILES = (0.5, 0.9, 0.95, 0.99)

# Stream layout per run seed: policy sampling, context process, reward
# noise, then one stream per cost channel (so adding channels never
# perturbs the earlier ones).
_STREAM_POLICY, _STREAM_CONTEXT, _STREAM_REWARD, _STREAM_COSTS = 0, 1, 2, 3


def _empty_run(prepared_horizon: int, seed: int, m: int, error_budget: float):
    logs = RoundLogs(
        t=np.zeros(0, dtype=np.int64),
        context=np.zeros(0, dtype=np.int64),
        action=np.zeros(0, dtype=np.int64),
        reward=np.zeros(0),
        costs=np.zeros((m, 0)),
        queues=np.zeros((m, 0)),
        z=np.zeros(0),
        gamma=np.zeros(0),
        sqerr_f=np.zeros(0),
        sqerr_g=np.zeros((m, 0)),
        surrogate_slack=np.zeros(0),
    )
    zeros = np.zeros(m)
    summary = RunSummary(
        horizon=prepared_horizon, seed=seed, opt=0.0, total_reward=0.0, regret=0.0,
        ccv=zeros.copy(), ccv_pos=zeros.copy(), final_queues=zeros.copy(),
        avg_queue=zeros.copy(),
        queue_quantiles={f"q{int(q * 100)}": [0.0] * m for q in QUEUE_QUANTILES},
        r_empirical=zeros.copy(), realized_sqerr_f=0.0, realized_sqerr_g=zeros.copy(),
        error_budget=error_budget, min_surrogate_slack=float("nan"),
    )
    return logs, summary


def run_prepared(prepared: PreparedRun, seed: int) -> tuple[RoundLogs, RunSummary]:
    """Execute one seeded run against a prepared horizon."""
    config = prepared.config
    spec = config.spec
    horizon = prepared.horizon
    m = spec.n_resources

    streams = spawn_streams(seed, _STREAM_COSTS + m)
    policy_rng = streams[_STREAM_POLICY]
    sequencer = ContextSequencer(spec, streams[_STREAM_CONTEXT])
    reward_rng = streams[_STREAM_REWARD]
    cost_rngs = streams[_STREAM_COSTS:]

    reward_oracle, cost_oracles = config.oracle.build(m)
    policy = ConstrainedSquareCB(
        reward_oracle=reward_oracle,
        cost_oracles=cost_oracles,
        phi=build_lyapunov(prepared.params),
        params=prepared.params,
        positive_part_costs=prepared.positive_part_costs,
    )

    contexts = np.zeros(horizon, dtype=np.int64)
    actions = np.zeros(horizon, dtype=np.int64)
    rewards = np.zeros(horizon)
    costs = np.zeros((m, horizon))
    queues = np.zeros((m, horizon))
    zs = np.zeros(horizon)
    gammas = np.zeros(horizon)
    sqerr_f = np.zeros(horizon)
    sqerr_g = np.zeros((m, horizon))
    slacks = np.full(horizon, np.nan)

    record_checks = config.record_per_round_checks
    bench_rows = prepared.benchmark.per_context
    truth_f = prepared.truth_rewards
    truth_g = prepared.truth_costs
    action_counts = np.zeros(spec.n_actions)

    for t in range(horizon):
        x = sequencer.next(t, action_counts)
        decision = policy.select(x, policy_rng)
        a = decision.action
        if record_checks:
            slacks[t] = surrogate_check_slack(
                decision, bench_rows[x], truth_f[x], truth_g[:, x, :]
            )
        outcome = sample_outcome(spec, x, a, reward_rng, cost_rngs)
        policy.update(x, decision, outcome)
        action_counts[a] += 1.0

        contexts[t] = x
        actions[t] = a
        rewards[t] = outcome.reward
        costs[:, t] = outcome.costs
        queues[:, t] = policy.queues
        zs[t] = decision.z
        gammas[t] = decision.gamma
        df = decision.reward_estimate[a] - truth_f[x, a]
        sqerr_f[t] = df * df
        dg = decision.cost_estimates[:, a] - truth_g[:, x, a]
        sqerr_g[:, t] = dg * dg

    logs = RoundLogs(
        t=np.arange(1, horizon + 1, dtype=np.int64),
        context=contexts, action=actions, reward=rewards, costs=costs,
        queues=queues, z=zs, gamma=gammas, sqerr_f=sqerr_f, sqerr_g=sqerr_g,
        surrogate_slack=slacks,
    )
    opt = opt_value(prepared.benchmark, contexts)
    ccv = costs.sum(axis=1)
    quantiles = {
        f"q{int(q * 100)}": [float(np.quantile(queues[i], q)) for i in range(m)]
        for q in QUEUE_QUANTILES
    }
    summary = RunSummary(
        horizon=horizon,
        seed=seed,
        opt=opt,
        total_reward=float(rewards.sum()),
        regret=opt - float(rewards.sum()),
        ccv=ccv,
        ccv_pos=np.maximum(ccv, 0.0),
        final_queues=policy.queues.copy(),
        avg_queue=queues.mean(axis=1),
        queue_quantiles=quantiles,
        r_empirical=np.sqrt((queues * queues).sum(axis=1)),
        realized_sqerr_f=float(sqerr_f.sum()),
        realized_sqerr_g=sqerr_g.sum(axis=1),
        error_budget=prepared.params.error_budget,
        min_surrogate_slack=float(np.min(slacks)) if record_checks and horizon else float("nan"),
    )
    return logs, summary


def run_single(config: ExperimentConfig, horizon: int, seed: int) -> tuple[RoundLogs, RunSummary]:
    """Prepare and execute one run; horizon 0 short-circuits to zeros."""
    if horizon == 0:
        budget = 1.0
        try:
            budget = config.oracle.resolve_error_budget(1, config.spec.n_resources)
        except ConfigError:
            pass
        return _empty_run(0, seed, config.spec.n_resources, budget)
    return run_prepared(prepare_run(config, horizon), seed)


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    r2: float


def fit_slope(points) -> SlopeFit:
    """OLS of ``ln(max(value, 1))`` on ``ln T``.

    Values are floored at one before the log: the scaling laws being
    checked bound the positive part of the metrics, and negative values
    mean "better than the benchmark", which the floor records without
    distorting growth rates.
    """
    pts = [(float(t), float(v)) for t, v in points]
    ts = {t for t, _ in pts}
    if len(ts) < 2:
        raise ValidationError("slope fit needs at least 2 distinct horizons")
    x = np.log([t for t, _ in pts])
    y = np.log([max(v, 1.0) for _, v in pts])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_res = float(resid @ resid)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    if ss_tot <= 1e-300:
        r2 = 1.0
    else:
        r2 = 1.0 - ss_res / ss_tot
    return SlopeFit(slope=float(slope), intercept=float(intercept), r2=float(r2))


def check_quadratic_lemma(a: float, b: float, x: float) -> bool:
    """For a, b >= 0 and x with x**2 <= a*x + b, confirm x <= a + sqrt(b)."""
    if a < 0.0 or b < 0.0:
        raise ValidationError("a and b must be non-negative")
    if x * x > a * x + b:
        raise ValidationError("precondition x**2 <= a*x + b does not hold")
    bound = a + math.sqrt(b)
    return x <= bound + 1e-12 * max(1.0, bound)


@dataclass
class SweepSummary:
    horizons: tuple[int, ...]
    seeds: tuple[int, ...]
    regret_mean: np.ndarray
    regret_std: np.ndarray
    ccv_mean: np.ndarray        # raw CCV, worst resource
    ccv_std: np.ndarray
    regret_fit: SlopeFit
    ccv_fit: SlopeFit
    min_surrogate_slack: float

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "horizons": list(self.horizons),
            "seeds": list(self.seeds),
            "regret_mean": self.regret_mean.tolist(),
            "regret_std": self.regret_std.tolist(),
            "ccv_mean": self.ccv_mean.tolist(),
            "ccv_std": self.ccv_std.tolist(),
            "regret_fit": vars(self.regret_fit),
            "ccv_fit": vars(self.ccv_fit),
            "min_surrogate_slack": self.min_surrogate_slack,
        }


def _sweep_worker(args) -> dict:
    prepared, seed = args
    _, summary = run_prepared(prepared, seed)
    return summary.to_dict()


def run_sweep(config: ExperimentConfig, threads: int = 1):
    """Run the full (horizon, seed) grid and fit the scaling slopes.

    Returns ``(rows, SweepSummary)`` where ``rows`` is one summary dict
    per (horizon, seed) pair in grid order.  Execution may be parallel;
    aggregation order is fixed, so the output is thread-count invariant.
    """
    if len(set(config.horizons)) < 3:
        raise ConfigError("a sweep needs at least 3 distinct horizons")
    if len(config.seeds) < 5:
        raise ConfigError("a sweep needs at least 5 seeds")
    prepared_by_horizon = {t: prepare_run(config, t) for t in sorted(set(config.horizons))}
    jobs = [(prepared_by_horizon[t], seed) for t in config.horizons for seed in config.seeds]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(_sweep_worker, jobs, chunksize=1))
    else:
        rows = [_sweep_worker(job) for job in jobs]

    n_seeds = len(config.seeds)
    regret_mean, regret_std, ccv_mean, ccv_std = [], [], [], []
    for i, horizon in enumerate(config.horizons):
        block = rows[i * n_seeds:(i + 1) * n_seeds]
        regrets = np.array([r["regret"] for r in block])
        ccvs = np.array([max(r["ccv"]) for r in block])
        regret_mean.append(regrets.mean())
        regret_std.append(regrets.std())
        ccv_mean.append(ccvs.mean())
        ccv_std.append(ccvs.std())
    regret_fit = fit_slope(zip(config.horizons, regret_mean))
    ccv_fit = fit_slope(zip(config.horizons, ccv_mean))
    slacks = [r["min_surrogate_slack"] for r in rows]
    min_slack = float(np.nanmin(slacks)) if slacks and not all(
        math.isnan(s) for s in slacks) else float("nan")
    summary = SweepSummary(
        horizons=config.horizons,
        seeds=config.seeds,
        regret_mean=np.array(regret_mean),
        regret_std=np.array(regret_std),
        ccv_mean=np.array(ccv_mean),
        ccv_std=np.array(ccv_std),
        regret_fit=regret_fit,
        ccv_fit=ccv_fit,
        min_surrogate_slack=min_slack,
    )
    return rows, summary


def write_sweep_csv(rows: list[dict], path) -> None:
    """Per-(horizon, seed) summary matrix, one row per run."""
    if not rows:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("horizon,seed\n")
        return
    m = len(rows[0]["ccv"])
    header = (
        ["horizon", "seed", "opt", "total_reward", "regret"]
        + [f"ccv_{i + 1}" for i in range(m)]
        + [f"final_queue_{i + 1}" for i in range(m)]
        + [f"avg_queue_{i + 1}" for i in range(m)]
        + [f"q99_{i + 1}" for i in range(m)]
        + ["realized_sqerr_f"]
        + [f"realized_sqerr_g_{i + 1}" for i in range(m)]
        + ["error_budget", "min_surrogate_slack"]
    )
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for r in rows:
            row = [str(r["horizon"]), str(r["seed"]), repr(r["opt"]),
                   repr(r["total_reward"]), repr(r["regret"])]
            row += [repr(v) for v in r["ccv"]]
            row += [repr(v) for v in r["final_queues"]]
            row += [repr(v) for v in r["avg_queue"]]
            row += [repr(v) for v in r["queue_quantiles"]["q99"]]
            row.append(repr(r["realized_sqerr_f"]))
            row += [repr(v) for v in r["realized_sqerr_g"]]
            row += [repr(r["error_budget"]), repr(r["min_surrogate_slack"])]
            fh.write(",".join(row) + "\n")


# ---------------------------------------------------------------------------
# Standalone oracle assessment
# ---------------------------------------------------------------------------


@dataclass
class OracleAssessment:
    horizon: int
    seed: int
    error_budget: float
    realized_sqerr_f: float
    realized_sqerr_g: list[float]
    aggregation_regret_f: float | None  # cum. loss minus best candidate (finite only)
    aggregation_regret_g: list[float] | None
    aggregation_bound: float | None     # (1/eta) * ln(n_candidates)

    def to_dict(self) -> dict:
        return {"schema_version": SCHEMA_VERSION, **vars(self)}


def assess_oracles(config: ExperimentConfig, horizon: int, seed: int) -> OracleAssessment:
    """Run the oracles standalone under a uniform logging policy.

    Measures realised cumulative squared error against the truth tables
    and, for finite classes, the deterministic aggregation regret of the
    weighted-mean prediction against the best single candidate.
    """
    spec = config.spec
    m = spec.n_resources
    streams = spawn_streams(seed, _STREAM_COSTS + m)
    policy_rng = streams[_STREAM_POLICY]
    sequencer = ContextSequencer(spec, streams[_STREAM_CONTEXT])
    reward_rng, cost_rngs = streams[_STREAM_REWARD], streams[_STREAM_COSTS:]
    reward_oracle, cost_oracles = config.oracle.build(m)

    positive_part = config.regime is Regime.ALMOST_SURE
    truth_g = positive_part_means(spec) if positive_part else spec.cost_means
    finite = isinstance(reward_oracle, FiniteClassOracle)
    sqerr_f = 0.0
    sqerr_g = np.zeros(m)
    loss_f = 0.0
    cand_loss_f = np.zeros(reward_oracle.n_candidates) if finite else None
    loss_g = np.zeros(m)
    cand_loss_g = [np.zeros(o.n_candidates) for o in cost_oracles] if finite else None
    action_counts = np.zeros(spec.n_actions)

    for t in range(horizon):
        x = sequencer.next(t, action_counts)
        a = int(policy_rng.integers(spec.n_actions))
        action_counts[a] += 1.0
        fhat = reward_oracle.predict(x)
        ghat = [o.predict(x) for o in cost_oracles]
        outcome = sample_outcome(spec, x, a, reward_rng, cost_rngs)
        eff = np.maximum(outcome.costs, 0.0) if positive_part else outcome.costs
        sqerr_f += (fhat[a] - spec.reward_means[x, a]) ** 2
        loss_f += (fhat[a] - outcome.reward) ** 2
        if finite:
            cand_loss_f += (reward_oracle.tables[:, x, a] - outcome.reward) ** 2
        reward_oracle.update(x, a, outcome.reward)
        for i, oracle in enumerate(cost_oracles):
            sqerr_g[i] += (ghat[i][a] - truth_g[i, x, a]) ** 2
            loss_g[i] += (ghat[i][a] - eff[i]) ** 2
            if finite:
                cand_loss_g[i] += (oracle.tables[:, x, a] - eff[i]) ** 2
            oracle.update(x, a, float(eff[i]))

    budget = config.oracle.resolve_error_budget(horizon, m)
    return OracleAssessment(
        horizon=horizon,
        seed=seed,
        error_budget=budget,
        realized_sqerr_f=float(sqerr_f),
        realized_sqerr_g=[float(v) for v in sqerr_g],
        aggregation_regret_f=float(loss_f - cand_loss_f.min()) if finite else None,
        aggregation_regret_g=(
            [float(loss_g[i] - cand_loss_g[i].min()) for i in range(m)] if finite else None
        ),
        aggregation_bound=(
            math.log(reward_oracle.n_candidates) / reward_oracle.eta if finite else None
        ),
    )
