"""DPLloyd: a fixed number of Lloyd iterations answered through the Laplace
mechanism.

Each point takes part in ``t`` count queries (sensitivity 1) and ``d*t`` sum
queries (sensitivity ``r``), so every query gets noise ``Lap((d*r + 1)*t/eps)``.
In budget terms a count query costs ``eps/((d*r+1)*t)`` and a sum query
``r*eps/((d*r+1)*t)``; the per-iteration spends add up to ``eps/t``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import as_points
from .kmeans import assign, cluster_sums
from .mechanisms import Budget, ParameterError, laplace_mechanism, make_rng

MIN_NOISY_COUNT = 0.5


@dataclass(frozen=True)
class DPLloydParams:
    t: int = 5
    r: float = 1.0
    clamp: bool = True

    def __post_init__(self):
        if self.t < 1:
            raise ParameterError(f"t must be >= 1, got {self.t}")
        if not self.r > 0:
            raise ParameterError(f"r must be positive, got {self.r}")


def noise_scale(d: int, r: float, t: int, eps: float) -> float:
    """Laplace scale shared by every count and sum query."""
    return (d * r + 1.0) * t / eps


def dplloyd(data, init, eps: float, params: DPLloydParams = DPLloydParams(), rng=None,
            budget: Budget | None = None) -> np.ndarray:
    """Run ``params.t`` noisy Lloyd iterations from ``init``.

    A centroid whose noisy count is at most 0.5 keeps its previous value for
    that iteration. With ``params.clamp`` coordinates are clipped to
    ``[-r, r]`` after every update.
    """
    X = as_points(data)
    C = np.array(init, dtype=float, copy=True)
    k, d = C.shape
    if X.shape[1] != d:
        raise ParameterError(f"data has d={X.shape[1]}, centroids have d={d}")
    rng = make_rng(rng)
    if budget is None:
        budget = Budget(eps)
    budget.require(eps)
    r, t = params.r, params.t
    denom = (d * r + 1.0) * t
    eps_count = eps / denom
    eps_sum = r * eps / denom

    for it in range(t):
        labels = assign(X, C)
        counts, sums = cluster_sums(X, labels, k)
        noisy_counts = laplace_mechanism(counts, 1.0, eps_count, rng, budget, f"dplloyd/iter{it}/count")
        noisy_sums = np.empty_like(sums)
        for i in range(d):
            noisy_sums[:, i] = laplace_mechanism(sums[:, i], r, eps_sum, rng, budget, f"dplloyd/iter{it}/sum{i}")
        ok = noisy_counts > MIN_NOISY_COUNT
        C[ok] = noisy_sums[ok] / noisy_counts[ok, None]
        if params.clamp:
            np.clip(C, -r, r, out=C)
    return C


def dplloyd_one_round(data, init, eps: float, r: float = 1.0, rng=None, budget: Budget | None = None,
                      clamp: bool = True) -> np.ndarray:
    """A single DPLloyd iteration, noise ``Lap((d*r + 1)/eps)``."""
    return dplloyd(data, init, eps, DPLloydParams(t=1, r=r, clamp=clamp), rng, budget)
