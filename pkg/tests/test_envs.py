import numpy as np
import pytest

from ccbsim import (
    AdaptiveAdversary,
    ContextSequencer,
    CyclicContexts,
    FeasibilityDefinition,
    FeasibilityKind,
    IIDContexts,
    InfeasibleBenchmarkError,
    NoiseModel,
    ProblemSpec,
    ValidationError,
    benchmark_almost_sure,
    benchmark_budget,
    benchmark_in_expectation,
    benchmark_per_context,
    feasibility_check,
    opt_value,
    positive_part_means,
    sample_outcome,
    spawn_streams,
)
from reference_solvers import grid_best_per_context, linprog_budget


def simple_spec(noise=NoiseModel.DETERMINISTIC, process=None, f=None, g=None):
    f = np.array([[0.5, -0.2], [0.1, 0.4]]) if f is None else np.asarray(f, dtype=float)
    g = np.array([[[0.3, -0.5], [-0.1, 0.2]]]) if g is None else np.asarray(g, dtype=float)
    return ProblemSpec(
        n_contexts=f.shape[0], n_actions=f.shape[1], n_resources=g.shape[0],
        reward_means=f, cost_means=g,
        context_process=process if process is not None else CyclicContexts((0, 1)),
        noise=noise,
    )


def env_streams(seed, m=1):
    streams = spawn_streams(seed, 3 + m)
    return streams[2], streams[3:]


class TestContextProcesses:
    def test_cyclic_indexing(self):
        spec = simple_spec(process=CyclicContexts((0, 1)))
        seq = ContextSequencer(spec, np.random.default_rng(0))
        xs = [seq.next(t, np.zeros(2)) for t in range(6)]
        assert xs == [0, 1, 0, 1, 0, 1]
        assert seq.next(5, np.zeros(2)) == 1

    def test_iid_frequencies(self):
        spec = simple_spec(process=IIDContexts(np.array([1 / 3, 2 / 3])))
        seq = ContextSequencer(spec, np.random.default_rng(5))
        n = 100_000
        counts = np.zeros(2)
        for t in range(n):
            counts[seq.next(t, np.zeros(2))] += 1
        assert abs(counts[0] / n - 1 / 3) < 0.01

    def test_adversary_is_replay_deterministic(self):
        spec = simple_spec(process=AdaptiveAdversary())
        seq1 = ContextSequencer(spec, np.random.default_rng(0))
        seq2 = ContextSequencer(spec, np.random.default_rng(99))
        counts = np.array([3.0, 7.0])
        assert seq1.next(4, counts) == seq2.next(4, counts)
        # A pure function of the action history, independent of t and rng.
        assert seq1.next(0, counts) == seq1.next(123, counts)

    def test_adversary_picks_largest_gap(self):
        # Context 0's feasible optimum is far above what the learner's
        # empirical action mix earns there; context 1 is already matched.
        f = np.array([[1.0, 0.0], [0.2, 0.2]])
        g = np.array([[[-1.0, -1.0], [-1.0, -1.0]]])
        spec = simple_spec(f=f, g=g, process=AdaptiveAdversary())
        seq = ContextSequencer(spec, np.random.default_rng(0))
        assert seq.next(0, np.array([0.0, 10.0])) == 0


class TestSampleOutcome:
    def test_deterministic(self):
        spec = simple_spec()
        reward_rng, cost_rngs = env_streams(0)
        out = sample_outcome(spec, 0, 1, reward_rng, cost_rngs)
        assert out.reward == -0.2
        assert out.costs[0] == -0.5

    def test_two_point_symmetric_support_and_mean(self):
        f = np.array([[0.3, 1.0]])
        g = np.array([[[-0.4, 0.0]]])
        spec = simple_spec(f=f, g=g, noise=NoiseModel.TWO_POINT_SYMMETRIC,
                           process=CyclicContexts((0,)))
        reward_rng, cost_rngs = env_streams(1)
        rewards, costs = [], []
        for _ in range(200_000):
            out = sample_outcome(spec, 0, 0, reward_rng, cost_rngs)
            rewards.append(out.reward)
            costs.append(out.costs[0])
        assert set(rewards) <= {-1.0, 1.0}
        assert abs(np.mean(rewards) - 0.3) < 0.01
        assert abs(np.mean(costs) + 0.4) < 0.01

    def test_two_point_degenerate_edge(self):
        f = np.array([[1.0]])
        g = np.array([[[-1.0]]])
        spec = simple_spec(f=f, g=g, noise=NoiseModel.TWO_POINT_SYMMETRIC,
                           process=CyclicContexts((0,)))
        reward_rng, cost_rngs = env_streams(2)
        for _ in range(1000):
            out = sample_outcome(spec, 0, 0, reward_rng, cost_rngs)
            assert out.reward == 1.0
            assert out.costs[0] == -1.0

    def test_two_point_nonpositive(self):
        f = np.array([[0.0]])
        g = np.array([[[-0.3]]])
        spec = simple_spec(f=f, g=g, noise=NoiseModel.TWO_POINT_NONPOSITIVE,
                           process=CyclicContexts((0,)))
        reward_rng, cost_rngs = env_streams(3)
        draws = [sample_outcome(spec, 0, 0, reward_rng, cost_rngs).costs[0]
                 for _ in range(100_000)]
        assert set(draws) <= {-1.0, 0.0}
        assert abs(np.mean(draws) + 0.3) < 0.01

    def test_nonpositive_noise_rejects_positive_means(self):
        with pytest.raises(ValidationError):
            simple_spec(g=np.array([[[0.3, -0.5], [-0.1, 0.2]]]),
                        noise=NoiseModel.TWO_POINT_NONPOSITIVE)

    def test_positive_part_means(self):
        spec = simple_spec()
        assert np.array_equal(positive_part_means(spec),
                              np.array([[[0.3, 0.0], [0.0, 0.2]]]))
        noisy = simple_spec(noise=NoiseModel.TWO_POINT_SYMMETRIC)
        with pytest.raises(ValidationError):
            positive_part_means(noisy)


class TestBenchmarkPerContext:
    def test_inactive_constraint_gives_greedy_point_mass(self):
        pi, value = benchmark_per_context([0.9, 0.2], [[-0.5, -0.9]], 0.0)
        assert np.array_equal(pi, [1.0, 0.0])
        assert value == 0.9

    def test_tight_two_action_mixture(self):
        pi, value = benchmark_per_context([1.0, 0.0], [[1.0, -1.0]], 0.0)
        assert np.allclose(pi, [0.5, 0.5])
        assert value == pytest.approx(0.5)

    def test_slack_shifts_mixture(self):
        pi, value = benchmark_per_context([1.0, 0.0], [[1.0, -1.0]], -0.2)
        assert np.allclose(pi, [0.4, 0.6])
        assert value == pytest.approx(0.4)

    def test_infeasible_raises(self):
        with pytest.raises(InfeasibleBenchmarkError):
            benchmark_per_context([1.0, 0.0], [[0.5, 0.1]], 0.0)

    def test_matches_grid_on_random_instances(self):
        rng = np.random.default_rng(17)
        for _ in range(40):
            k = int(rng.integers(2, 4))
            f = rng.uniform(-1, 1, size=k)
            g = rng.uniform(-1, 1, size=k)
            if g.min() > 0:
                g[int(rng.integers(k))] = -rng.uniform(0, 1)
            pi, value = benchmark_per_context(f, [g], 0.0)
            ref = grid_best_per_context(f, g, 0.0)
            assert value >= ref - 1e-9          # solver at least as good as any grid point
            assert abs(value - ref) <= 2e-3     # and within grid resolution of it
            assert np.count_nonzero(pi) <= 2
            assert float(g @ pi) <= 1e-12

    def test_multi_resource_grid_fallback(self):
        f = [0.9, 0.1, 0.4]
        g = [[0.5, -0.5, 0.1], [0.2, -0.1, -0.4]]
        pi, value = benchmark_per_context(f, g, 0.0)
        assert np.all(np.asarray(g) @ pi <= 1e-9)
        # Single-resource relaxations bound the two-resource optimum.
        _, upper0 = benchmark_per_context(f, [g[0]], 0.0)
        _, upper1 = benchmark_per_context(f, [g[1]], 0.0)
        assert value <= min(upper0, upper1) + 1e-9
        assert value >= 0.1  # the all-feasible point mass on action 1


class TestBenchmarkAlmostSure:
    def test_restricts_to_nonpositive_support(self):
        f = np.array([[0.9, 0.5], [0.8, -0.1]])
        g = np.array([[[0.2, -0.3], [0.0, -0.2]]])
        spec = simple_spec(f=f, g=g)
        policy = benchmark_almost_sure(spec)
        assert np.array_equal(policy.per_context[0], [0.0, 1.0])  # action 0 has g>0
        assert np.array_equal(policy.per_context[1], [1.0, 0.0])  # g=0 allowed
        cert = feasibility_check(spec, policy,
                                 FeasibilityDefinition(kind=FeasibilityKind.ALMOST_SURE))
        assert cert.verified

    def test_infeasible_context_raises(self):
        f = np.array([[0.9, 0.5]])
        g = np.array([[[0.2, 0.3]]])
        with pytest.raises(InfeasibleBenchmarkError):
            benchmark_almost_sure(simple_spec(f=f, g=g, process=CyclicContexts((0,))))


class TestBenchmarkBudget:
    def test_inactive_budget_returns_greedy(self):
        f = np.array([[1.0, 0.0]])
        g = np.array([[[0.2, 0.0]]])
        spec = simple_spec(f=f, g=g, process=CyclicContexts((0,)))
        policy = benchmark_budget(spec, [1.0], per_round_budget=0.5)
        assert np.array_equal(policy.per_context[0], [1.0, 0.0])

    def test_tight_budget_mixture(self):
        f = np.array([[1.0, 0.0]])
        g = np.array([[[1.0, 0.0]]])
        spec = simple_spec(f=f, g=g, process=CyclicContexts((0,)))
        policy = benchmark_budget(spec, [1.0], per_round_budget=0.4)
        assert np.allclose(policy.per_context[0], [0.4, 0.6], atol=1e-9)
        assert policy.value_per_context[0] == pytest.approx(0.4, abs=1e-9)

    def test_infeasible_raises(self):
        f = np.array([[1.0, 0.0]])
        g = np.array([[[1.0, 0.5]]])
        spec = simple_spec(f=f, g=g, process=CyclicContexts((0,)))
        with pytest.raises(InfeasibleBenchmarkError):
            benchmark_budget(spec, [1.0], per_round_budget=0.2)

    def test_matches_linprog_on_random_instances(self):
        rng = np.random.default_rng(23)
        for _ in range(40):
            n = int(rng.integers(1, 4))
            k = int(rng.integers(2, 5))
            f = rng.uniform(-1, 1, size=(n, k))
            g = rng.uniform(-1, 1, size=(1, n, k))
            w = rng.dirichlet(np.ones(n))
            budget = float(rng.uniform(-0.2, 0.5))
            spec = ProblemSpec(n, k, 1, f, g, CyclicContexts(tuple(range(n))),
                               NoiseModel.DETERMINISTIC)
            ref = linprog_budget(f, g[0], w, budget)
            try:
                policy = benchmark_budget(spec, w, budget)
            except InfeasibleBenchmarkError:
                assert ref is None or float(w @ g[0].min(axis=1)) > budget
                continue
            value = float(w @ policy.value_per_context)
            assert ref is not None
            assert abs(value - ref) <= 2e-3
            randomized = np.sum(np.count_nonzero(policy.per_context, axis=1) > 1)
            assert randomized <= 1
            consumption = float(np.einsum("nk,nk,n->", g[0], policy.per_context, w))
            assert consumption <= budget + 1e-9


class TestOptValue:
    def test_point_mass_constant(self):
        f = np.full((1, 2), 0.5)
        g = np.array([[[-1.0, -1.0]]])
        spec = simple_spec(f=f, g=g, process=CyclicContexts((0,)))
        policy = benchmark_in_expectation(spec)
        assert opt_value(policy, np.zeros(100, dtype=int)) == pytest.approx(50.0)

    def test_counts_linearity(self):
        f = np.array([[0.5, -0.2], [0.1, 0.4]])
        g = np.array([[[-0.3, -0.5], [-0.1, -0.2]]])
        spec = simple_spec(f=f, g=g)
        policy = benchmark_in_expectation(spec)
        xs = np.array([0, 1, 1, 0, 1])
        counted = 2 * policy.value_per_context[0] + 3 * policy.value_per_context[1]
        assert opt_value(policy, xs) == pytest.approx(counted, abs=1e-9)

    def test_empty(self):
        f = np.array([[0.5, -0.2]])
        g = np.array([[[-0.3, -0.5]]])
        spec = simple_spec(f=f, g=g, process=CyclicContexts((0,)))
        policy = benchmark_in_expectation(spec)
        assert opt_value(policy, []) == 0.0


class TestFeasibilityCheck:
    def test_in_expectation(self):
        spec = simple_spec()
        policy = benchmark_in_expectation(spec)
        cert = feasibility_check(spec, policy,
                                 FeasibilityDefinition(kind=FeasibilityKind.IN_EXPECTATION))
        assert cert.verified
        assert cert.worst_slack <= 1e-12

    def test_slater_margin_detected(self):
        spec = simple_spec(g=np.array([[[0.3, -0.5], [-0.4, 0.2]]]))
        tight = benchmark_in_expectation(spec, slack=0.0)
        strict = benchmark_in_expectation(spec, slack=-0.2)
        def_s = FeasibilityDefinition(kind=FeasibilityKind.SLATER, slater_eps=0.2)
        assert feasibility_check(spec, strict, def_s).verified
        # The tight benchmark sits at zero expected cost, with no margin.
        assert not feasibility_check(spec, tight, def_s).verified

    def test_almost_sure_null_action(self):
        f = np.array([[0.1, 0.9]])
        g = np.array([[[-1.0, 0.5]]])
        spec = simple_spec(f=f, g=g, process=CyclicContexts((0,)))
        policy = benchmark_almost_sure(spec)
        cert = feasibility_check(spec, policy,
                                 FeasibilityDefinition(kind=FeasibilityKind.ALMOST_SURE))
        assert cert.verified
        bad = benchmark_in_expectation(spec)  # may put mass on the risky action
        cert_b = feasibility_check(spec, bad,
                                   FeasibilityDefinition(kind=FeasibilityKind.ALMOST_SURE))
        assert cert_b.verified == bool(np.all(bad.per_context[0][g[0, 0] > 0] == 0))

    def test_symmetric_noise_breaks_almost_sure(self):
        f = np.array([[0.1]])
        g = np.array([[[-0.5]]])  # mean negative but support includes +1
        spec = simple_spec(f=f, g=g, noise=NoiseModel.TWO_POINT_SYMMETRIC,
                           process=CyclicContexts((0,)))
        policy = benchmark_almost_sure  # construction itself must fail
        with pytest.raises(InfeasibleBenchmarkError):
            policy(spec)

    def test_budget_certificate(self):
        f = np.array([[1.0, 0.0]])
        g = np.array([[[1.0, 0.0]]])
        spec = simple_spec(f=f, g=g, process=CyclicContexts((0,)))
        policy = benchmark_budget(spec, [1.0], per_round_budget=0.4)
        definition = FeasibilityDefinition(kind=FeasibilityKind.BUDGET, budget=40.0,
                                           horizon=100, context_weights=np.array([1.0]))
        cert = feasibility_check(spec, policy, definition)
        assert cert.verified
        tiny = FeasibilityDefinition(kind=FeasibilityKind.BUDGET, budget=30.0,
                                     horizon=100, context_weights=np.array([1.0]))
        assert not feasibility_check(spec, policy, tiny).verified
