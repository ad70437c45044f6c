"""Constrained contextual bandits via regression oracles.

Inverse-gap-weighted exploration over an adaptively penalised surrogate
reward, with virtual cost queues shaped by a per-regime Lyapunov
potential; exact benchmark solvers and a sweep harness validate the
per-round inequalities and the regret/violation scaling empirically.
"""

from .core import (
    Outcome,
    SequencingError,
    ValidationError,
    sample_action,
    spawn_streams,
    validate_mean_table,
    validate_simplex,
)
from .envs import (
    AdaptiveAdversary,
    BenchmarkPolicy,
    ContextSequencer,
    CyclicContexts,
    FeasibilityCertificate,
    FeasibilityDefinition,
    FeasibilityKind,
    IIDContexts,
    InfeasibleBenchmarkError,
    NoiseModel,
    ProblemSpec,
    benchmark_almost_sure,
    benchmark_budget,
    benchmark_in_expectation,
    benchmark_per_context,
    feasibility_check,
    opt_value,
    positive_part_means,
    sample_outcome,
)
from .harness import (
    BudgetRule,
    ConfigError,
    ExperimentConfig,
    OracleSettings,
    RoundLogs,
    RunSummary,
    SlopeFit,
    SweepSummary,
    assess_oracles,
    check_quadratic_lemma,
    fit_slope,
    prepare_run,
    run_prepared,
    run_single,
    run_sweep,
    write_sweep_csv,
)
from .igw import IGWResult, igw, lemma1_fuzz, lemma1_slack
from .lyapunov import (
    ExponentialLyapunov,
    LyapunovFunction,
    QuadraticLyapunov,
    Regime,
    RegimeParams,
    build_lyapunov,
    z_of,
)
from .oracles import ErrorLedger, FiniteClassOracle, LinearOracle, RegressionOracle
from .policy import (
    ConstrainedSquareCB,
    QueueInvariantError,
    RoundDecision,
    SquareCB,
    surrogate_check_slack,
    surrogate_inequality_fuzz,
)

__version__ = "0.1.0"
