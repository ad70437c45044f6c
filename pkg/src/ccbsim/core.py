"""Shared domain types, simplex arithmetic and seeded random streams.

Contexts and actions are plain non-negative integers (indices into the
mean tables of a problem spec).  Probability vectors are 1-D float64
arrays validated by :func:`validate_simplex`.  Every run owns a family
of independent random streams spawned from a single 64-bit seed so that
changing one component (say, the policy) never perturbs the noise
realised by another (say, the environment).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# |sum(p) - 1| beyond this is rejected rather than silently renormalised.
SIMPLEX_SUM_TOL = 1e-8


class ValidationError(ValueError):
    """An input violates one of the documented contracts."""


class SequencingError(RuntimeError):
    """A select/update style protocol was driven out of order."""


def validate_simplex(probs) -> np.ndarray:
    """Validate a probability vector and return it exactly normalised.

    Entries must be non-negative and sum to one within ``1e-8``; inputs
    inside the tolerance are renormalised so cumulative-sum sampling
    sees an exact unit mass.
    """
    p = np.asarray(probs, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise ValidationError(f"expected a non-empty 1-D vector, got shape {p.shape}")
    if not np.all(np.isfinite(p)):
        raise ValidationError("probability vector has non-finite entries")
    if np.any(p < 0.0):
        raise ValidationError(f"probability vector has negative entries: {p}")
    total = float(p.sum())
    if abs(total - 1.0) > SIMPLEX_SUM_TOL:
        raise ValidationError(f"probabilities sum to {total}, not 1 within {SIMPLEX_SUM_TOL}")
    return p / total


def sample_action(dist: np.ndarray, rng: np.random.Generator) -> int:
    """Draw an action index from ``dist`` using one uniform variate.

    Cumulative-sum inversion: returns the smallest index ``a`` with
    ``sum(dist[:a + 1]) > u``.  Exactly one uniform is consumed per call,
    which makes traces bit-exact replayable from the seed.
    """
    p = np.asarray(dist, dtype=float).tolist()
    total = 0.0
    for v in p:
        if v < 0.0:
            raise ValidationError(f"malformed simplex (negative entry {v})")
        total += v
    if abs(total - 1.0) > SIMPLEX_SUM_TOL:
        raise ValidationError(f"malformed simplex (sum={total})")
    u = rng.random()
    acc = 0.0
    last = len(p) - 1
    for a in range(last):
        acc += p[a]
        if acc > u:
            return a
    return last


def validate_mean_table(values, n_contexts: int, n_actions: int, name: str = "table") -> np.ndarray:
    """Validate an (n_contexts, n_actions) mean table with entries in [-1, 1]."""
    t = np.asarray(values, dtype=float)
    if t.shape != (n_contexts, n_actions):
        raise ValidationError(f"{name} has shape {t.shape}, expected {(n_contexts, n_actions)}")
    if not np.all(np.isfinite(t)):
        raise ValidationError(f"{name} has non-finite entries")
    if np.any(np.abs(t) > 1.0):
        raise ValidationError(f"{name} has entries outside [-1, 1]")
    return t


@dataclass(frozen=True)
class Outcome:
    """Realised feedback for one round: a reward and one cost per resource."""

    reward: float
    costs: np.ndarray  # shape (m,), entries in [-1, 1]

    def __post_init__(self):
        costs = self.costs
        if not (isinstance(costs, np.ndarray) and costs.ndim == 1 and costs.dtype == np.float64):
            costs = np.atleast_1d(np.asarray(costs, dtype=float))
            object.__setattr__(self, "costs", costs)
        ok = -1.0 <= self.reward <= 1.0
        if ok:
            for c in costs.tolist():
                if not -1.0 <= c <= 1.0:
                    ok = False
                    break
        if not ok:
            raise ValidationError(f"outcome outside [-1, 1]: reward={self.reward}, costs={costs}")


def spawn_streams(seed: int, n: int) -> list[np.random.Generator]:
    """Split one run seed into ``n`` independent component streams.

    Child ``i`` is keyed only by its spawn index, so the first ``k``
    streams agree between calls with different ``n``.  This is what lets
    an m=2 run with a degenerate second resource replay an m=1 trace.
    """
    if not (0 <= int(seed) < 2**64):
        raise ValidationError(f"seed must be a 64-bit unsigned integer, got {seed}")
    root = np.random.SeedSequence(int(seed))
    return [np.random.Generator(np.random.PCG64(child)) for child in root.spawn(n)]
