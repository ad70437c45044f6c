"""Inverse gap weighting: the exploration distribution and its slack check.

Given per-action loss estimates ``vhat`` (smaller is better) and an
exploration parameter ``gamma >= 0``, the IGW distribution is

    p(a) = 1 / (lam + 2 * gamma * (vhat[a] - vhat[greedy])),

where ``greedy`` is the argmin of ``vhat`` and ``lam`` in ``[1, K]`` is
the unique normaliser making the probabilities sum to one.  This module
always consumes LOSSES; callers maximising a reward must negate (the
policy module converts via ``max(r) - r``, which leaves the distribution
unchanged because gaps are translation-invariant).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import ValidationError

# Absolute bisection tolerance on the normaliser lam.
LAMBDA_TOL = 1e-12


@dataclass(frozen=True)
class IGWResult:
    """An IGW distribution together with the quantities that produced it."""

    dist: np.ndarray      # shape (K,), sums to 1 within 1e-10
    lam: float            # normaliser in [1, K]
    gamma: float
    greedy: int           # argmin of the loss vector, lowest index on ties


def igw(vhat_loss, gamma: float) -> IGWResult:
    """Compute the inverse gap weighting distribution for a loss vector.

    The normaliser is found by bisection on
    ``h(lam) = sum_a 1/(lam + 2*gamma*gap[a]) - 1`` over ``[1, K]``:
    ``h`` is strictly decreasing with ``h(1) >= 0 >= h(K)``, so the root
    exists and the bracket shrinks below ``1e-12``.  Greedy ties break
    to the lowest action index.
    """
    v = np.asarray(vhat_loss, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise ValidationError(f"expected a non-empty 1-D loss vector, got shape {v.shape}")
    if not (math.isfinite(gamma) and gamma >= 0.0):
        raise ValidationError(f"gamma must be finite and >= 0, got {gamma}")

    vals = v.tolist()
    vmin = vals[0]
    greedy = 0
    for i, val in enumerate(vals):
        if not math.isfinite(val):
            raise ValidationError("loss vector has non-finite entries")
        if val < vmin:
            vmin, greedy = val, i

    n_actions = len(vals)
    two_gamma = 2.0 * gamma
    cs = [two_gamma * (val - vmin) for val in vals]  # 2*gamma*gap[a] >= 0, zero at greedy

    if n_actions == 1 or max(cs) == 0.0:
        # All gaps vanish (or gamma == 0): h(K) = 0 exactly, so lam = K.
        lam = float(n_actions)
    else:
        lo, hi = 1.0, float(n_actions)
        while hi - lo > LAMBDA_TOL:
            mid = 0.5 * (lo + hi)
            s = 0.0
            for c in cs:
                s += 1.0 / (mid + c)
            if s >= 1.0:
                lo = mid
            else:
                hi = mid
        lam = 0.5 * (lo + hi)

    dist = np.array([1.0 / (lam + c) for c in cs])
    return IGWResult(dist=dist, lam=lam, gamma=float(gamma), greedy=greedy)


def lemma1_slack(vhat, v, mu, gamma: float) -> float:
    """Slack of the one-step IGW regret bound for loss vectors.

    With ``p = igw(vhat, gamma)`` the bound states, for any true loss
    vector ``v`` and any comparison distribution ``mu``,

        <v, p> - <v, mu>  <=  K/(2*gamma) + gamma * E_{a~p}(vhat[a] - v[a])^2.

    Returns RHS - LHS, which is non-negative for every input.
    """
    if not (np.isfinite(gamma) and gamma > 0.0):
        raise ValidationError(f"gamma must be finite and > 0, got {gamma}")
    v = np.asarray(v, dtype=float)
    mu = np.asarray(mu, dtype=float)
    res = igw(vhat, gamma)
    p = res.dist
    n_actions = p.size
    err = np.asarray(vhat, dtype=float) - v
    rhs = n_actions / (2.0 * gamma) + gamma * float(p @ (err * err))
    lhs = float(v @ p) - float(v @ mu)
    return rhs - lhs


def lemma1_fuzz(trials: int, seed: int = 0, max_actions: int = 8) -> float:
    """Randomised stress test of :func:`lemma1_slack`; returns the min slack.

    Draws estimate/truth vectors in [-3, 3]^K, a random comparison
    simplex and gamma in (0, 100] across K in {1..max_actions}.  The
    fuzz itself is the oracle: the analytical bound says the returned
    minimum should never fall below zero (up to float rounding).
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    worst = math.inf
    for _ in range(trials):
        k = int(rng.integers(1, max_actions + 1))
        vhat = rng.uniform(-3.0, 3.0, size=k)
        v = rng.uniform(-3.0, 3.0, size=k)
        mu = rng.dirichlet(np.ones(k))
        gamma = rng.uniform(0.0, 100.0) + 1e-6
        slack = lemma1_slack(vhat, v, mu, gamma)
        if slack < worst:
            worst = slack
    return worst
