"""PGkM: genetic-algorithm k-means with exponential-mechanism selection.

A candidate is a flat vector of ``k*d`` coordinates (``k`` centroids). Each
round privately selects ``m_prime`` candidates by their (negated) sum of
squared errors, then refills the pool by crossover and mutation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import as_points
from .mechanisms import Budget, ParameterError, exp_select, make_rng


@dataclass(frozen=True)
class PgkmParams:
    pool_size: int = 200
    m_prime: int = 10
    x: float = 1.25e-3
    mutation_scale0: float | None = None  # None -> 0.25 * r
    mutation_decay: float = 0.95
    min_rounds: int = 8
    max_rounds: int = 200  # resource guard; binds only at very large eps

    def __post_init__(self):
        if self.m_prime < 1 or self.m_prime > self.pool_size:
            raise ParameterError("need 1 <= m_prime <= pool_size")
        if not self.x > 0:
            raise ParameterError("x must be positive")
        if self.max_rounds < self.min_rounds:
            raise ParameterError("max_rounds must be >= min_rounds")

    def mutation_scale(self, r: float) -> float:
        return 0.25 * r if self.mutation_scale0 is None else self.mutation_scale0


def num_rounds(n: int, eps: float, params: PgkmParams = PgkmParams()) -> int:
    """``max(8, floor(x * n * eps / m_prime))``, capped at ``params.max_rounds``."""
    rounds = math.floor(min(params.x * n * eps / params.m_prime, params.max_rounds))
    return max(params.min_rounds, int(rounds))


def quality_sensitivity(d: int, r: float = 1.0) -> float:
    """Largest change of the unnormalised cost when one point is added or removed."""
    return 4.0 * d * r * r


def encode(centroids) -> np.ndarray:
    return np.asarray(centroids, dtype=float).reshape(-1)


def decode(p, d: int) -> np.ndarray:
    return np.asarray(p, dtype=float).reshape(-1, d)


def crossover(p1, p2, rng=None, split: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Swap the tails of two parameter vectors after a random split point."""
    p1 = np.asarray(p1, dtype=float)
    p2 = np.asarray(p2, dtype=float)
    n = p1.size
    if p2.size != n:
        raise ParameterError("parents differ in length")
    if n < 2:
        raise ParameterError("crossover needs vectors of length >= 2")
    if split is None:
        split = int(make_rng(rng).integers(1, n))
    elif not 1 <= split <= n - 1:
        raise ParameterError(f"split must be in [1, {n - 1}]")
    c1 = np.concatenate([p1[:split], p2[split:]])
    c2 = np.concatenate([p2[:split], p1[split:]])
    return c1, c2


def mutate(p, scale: float, rng=None, r: float = 1.0) -> np.ndarray:
    """Perturb one random coordinate by ``U(-scale, scale)`` and clip to ``[-r, r]``."""
    if scale < 0:
        raise ParameterError("mutation scale must be non-negative")
    rng = make_rng(rng)
    out = np.array(p, dtype=float, copy=True)
    i = int(rng.integers(out.size))
    out[i] = min(r, max(-r, out[i] + rng.uniform(-scale, scale)))
    return out


def fitness(data, p) -> float:
    """Negated sum of squared distances to the nearest centroid of ``p``."""
    return float(fitness_many(data, np.asarray(p, dtype=float)[None, :])[0])


def fitness_many(data, pool: np.ndarray) -> np.ndarray:
    """Fitness of every row of ``pool`` (shape ``(P, k*d)``)."""
    X = as_points(data)
    d = X.shape[1]
    P = pool.shape[0]
    C = pool.reshape(P, -1, d)
    k = C.shape[1]
    flat = C.reshape(P * k, d)
    # (P*k, N) layout keeps the min over centroids contiguous in memory
    d2 = (flat * flat).sum(1)[:, None] - 2.0 * flat @ X.T + (X * X).sum(1)[None, :]
    d2 = d2.reshape(P, k, X.shape[0]).min(axis=1)
    return -np.maximum(d2, 0.0).sum(axis=1)


def _select_without_replacement(quals, m, eps_each, sens, rng, budget, label):
    remaining = list(range(len(quals)))
    chosen = []
    for s in range(m):
        j = exp_select(quals[remaining], eps_each, sens, rng, budget, f"{label}/pick{s}")
        chosen.append(remaining.pop(j))
    return chosen


def _refill(selected: np.ndarray, pool_size: int, scale: float, rng, r: float) -> np.ndarray:
    pool = [s for s in selected]
    m = len(selected)
    while len(pool) < pool_size:
        if selected.shape[1] >= 2 and m >= 2:
            a, b = rng.choice(m, size=2, replace=False)
            kids = crossover(selected[a], selected[b], rng)
        else:
            kids = (selected[int(rng.integers(m))],)
        for kid in kids:
            if len(pool) < pool_size:
                pool.append(mutate(kid, scale, rng, r))
    return np.array(pool)


def pgkm(data, k: int, eps: float, params: PgkmParams = PgkmParams(), rng=None,
         budget: Budget | None = None, r: float = 1.0, return_history: bool = False):
    """Private genetic k-means; returns ``k x d`` centroids.

    Every round spends ``eps/R``. In ordinary rounds that is split over the
    ``m_prime`` selections; the last round splits it over ``m_prime + 1`` so
    the final pick of a single winner among the survivors stays in budget.
    """
    X = as_points(data)
    n, d = X.shape
    rng = make_rng(rng)
    if budget is None:
        budget = Budget(eps)
    budget.require(eps)
    R = num_rounds(n, eps, params)
    sens = quality_sensitivity(d, r)
    pool = rng.uniform(-r, r, size=(params.pool_size, k * d))
    history = []
    for rnd in range(R):
        last = rnd == R - 1
        picks = params.m_prime + 1 if last else params.m_prime
        eps_each = eps / R / picks
        quals = fitness_many(X, pool)
        chosen = _select_without_replacement(quals, params.m_prime, eps_each, sens, rng, budget,
                                             f"pgkm/round{rnd}")
        selected = pool[chosen]
        if last:
            j = exp_select(quals[chosen], eps_each, sens, rng, budget, f"pgkm/round{rnd}/final")
            best = selected[j]
        else:
            scale = params.mutation_scale(r) * params.mutation_decay ** rnd
            pool = _refill(selected, params.pool_size, scale, rng, r)
        if return_history:
            history.append(-quals[chosen].max() / n)
    out = decode(best, d)
    return (out, history) if return_history else out


def gene(data, k: int, rounds: int, params: PgkmParams = PgkmParams(), rng=None, r: float = 1.0):
    """Non-private variant: exact top-``m_prime`` selection every round.

    Returns the best centroids found and the per-round best NICV.
    """
    X = as_points(data)
    n, d = X.shape
    rng = make_rng(rng)
    pool = rng.uniform(-r, r, size=(params.pool_size, k * d))
    history = []
    best = None
    for rnd in range(rounds):
        quals = fitness_many(X, pool)
        chosen = np.argsort(-quals, kind="stable")[: params.m_prime]
        best = pool[chosen[0]]
        history.append(-quals[chosen[0]] / n)
        scale = params.mutation_scale(r) * params.mutation_decay ** rnd
        pool = _refill(pool[chosen], params.pool_size, scale, rng, r)
    return decode(best, d), history
