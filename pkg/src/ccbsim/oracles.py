"""Online regression oracles for mean rewards and costs.

Each oracle follows the same predict-then-update protocol: ``predict(x)``
returns one estimate per action for the current context, clipped to
[-1, 1]; ``update(x, a, y)`` folds in the single observed value for the
played action.  Predictions are pure functions of the accumulated state,
so two predicts without an interleaved update are bit-identical.

Two constructions are provided:

* :class:`FiniteClassOracle` - exponential-weights aggregation over a
  finite list of candidate mean tables.  With learning rate 1/8 the
  squared loss on [-1, 1] outcomes is exp-concave, giving the
  deterministic aggregation bound ``8 * ln(n_candidates)`` against the
  best single candidate on every realised sequence.
* :class:`LinearOracle` - a Vovk-Azoury-Warmuth style ridge forecaster
  over fixed per-(context, action) feature vectors; the current round's
  feature is included in the prediction statistics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Protocol, runtime_checkable

import numpy as np

from .core import ValidationError

# Exp-concavity constant for squared loss with predictions and outcomes
# in [-1, 1] (range 2): eta = 1 / (2 * range^2).
DEFAULT_ETA = 0.125


@runtime_checkable
class RegressionOracle(Protocol):
    """Predict-then-update contract shared by every oracle implementation."""

    def predict(self, x: int) -> np.ndarray: ...

    def update(self, x: int, a: int, y: float) -> None: ...

    def default_error_budget(self, horizon: int) -> float: ...


def _check_target(y: float) -> float:
    y = float(y)
    if not (-1.0 <= y <= 1.0):
        raise ValidationError(f"regression target outside [-1, 1]: {y}")
    return y


class FiniteClassOracle:
    """Exponential-weights aggregation over candidate mean tables.

    ``tables`` has shape (n_candidates, n_contexts, n_actions) with all
    entries in [-1, 1].  The prediction is the weight-averaged candidate
    prediction (gradient-style aggregation), which achieves the mixable
    bound at ``eta = 1/8`` for this range.
    """

    def __init__(self, tables, eta: float = DEFAULT_ETA):
        t = np.asarray(tables, dtype=float)
        if t.ndim != 3 or t.shape[0] == 0:
            raise ValidationError(f"expected (n_candidates, n_contexts, n_actions), got {t.shape}")
        if not np.all(np.isfinite(t)) or np.any(np.abs(t) > 1.0):
            raise ValidationError("candidate tables must have entries in [-1, 1]")
        if not eta > 0.0:
            raise ValidationError(f"eta must be positive, got {eta}")
        self.tables = t
        self.eta = float(eta)
        self.log_weights = np.zeros(t.shape[0])
        # Contiguous per-context views make the hot predict path a single GEMV.
        self._by_context = [np.ascontiguousarray(t[:, x, :]) for x in range(t.shape[1])]

    @property
    def n_candidates(self) -> int:
        return self.tables.shape[0]

    def weights(self) -> np.ndarray:
        """Normalised candidate weights (softmax of the log weights)."""
        w = np.exp(self.log_weights - self.log_weights.max())
        return w / w.sum()

    def predict(self, x: int) -> np.ndarray:
        lw = self.log_weights
        w = np.exp(lw - lw.max())
        pred = w @ self._by_context[x]
        pred /= w.sum()
        return np.minimum(np.maximum(pred, -1.0), 1.0)

    def update(self, x: int, a: int, y: float) -> None:
        y = _check_target(y)
        d = self.tables[:, x, a] - y
        self.log_weights -= self.eta * (d * d)

    def default_error_budget(self, horizon: int) -> float:
        """(1/eta) * ln(n_candidates); 8*ln|F| at the default learning rate."""
        return max(1.0, math.log(self.n_candidates) / self.eta)


class LinearOracle:
    """Ridge forecaster over fixed features, VAW variant.

    ``features`` has shape (n_contexts, n_actions, d).  The prediction
    for action ``a`` is ``phi' (reg*I + S + phi phi')^{-1} b`` where
    ``S, b`` accumulate past (feature, target) pairs - note the current
    feature enters the inverse, which is what keeps the forecaster's
    cumulative squared error at O(d log T) on realisable sequences.
    """

    def __init__(self, features, regularizer: float = 1.0):
        f = np.asarray(features, dtype=float)
        if f.ndim != 3:
            raise ValidationError(f"expected (n_contexts, n_actions, d) features, got {f.shape}")
        if not np.all(np.isfinite(f)):
            raise ValidationError("features must be finite")
        if not regularizer > 0.0:
            raise ValidationError(f"regularizer must be positive, got {regularizer}")
        self.features = f
        self.regularizer = float(regularizer)
        d = f.shape[2]
        self.gram = regularizer * np.eye(d)
        self.moment = np.zeros(d)

    @property
    def dim(self) -> int:
        return self.features.shape[2]

    def predict(self, x: int) -> np.ndarray:
        phis = self.features[x]  # (K, d)
        preds = np.empty(phis.shape[0])
        for a, phi in enumerate(phis):
            sol = np.linalg.solve(self.gram + np.outer(phi, phi), self.moment)
            preds[a] = phi @ sol
        return np.clip(preds, -1.0, 1.0)

    def update(self, x: int, a: int, y: float) -> None:
        y = _check_target(y)
        phi = self.features[x, a]
        self.gram += np.outer(phi, phi)
        self.moment += y * phi

    def default_error_budget(self, horizon: int) -> float:
        """d * ln(T) + d, the usual O(d log T) shape with unit constants."""
        return self.dim * math.log(max(2, horizon)) + self.dim


@dataclass
class ErrorLedger:
    """Running squared error of predictions against the known truth.

    Only meaningful in simulation, where the true mean tables are
    available; ``budget`` is the error allowance the policy's adaptive
    exploration rate was configured with.
    """

    budget: float
    cumulative_sq_error: float = 0.0
    rounds: int = field(default=0)

    def record(self, predicted: float, truth: float) -> None:
        d = predicted - truth
        self.cumulative_sq_error += d * d
        self.rounds += 1

    @property
    def within_budget(self) -> bool:
        return self.cumulative_sq_error <= self.budget
