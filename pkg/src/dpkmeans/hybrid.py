"""Hybrid: seed one DPLloyd round with EUGkM centroids when the budget allows.

The switch compares predicted errors only, using public quantities
(``N``, ``d``, ``k``, ``r``, ``rho``, ``t``), never the data values.
Above the threshold, half the budget publishes a synopsis and picks
centroids from it, and the other half pays for one DPLloyd round on the raw
data. Below it, the whole budget goes to EUGkM.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import as_points
from .dplloyd import dplloyd_one_round
from .error_models import DEFAULT_RHO
from .eugkm import DEFAULT_THETA, MAX_CELLS, eugkm
from .mechanisms import Budget, ParameterError, make_rng


@dataclass(frozen=True)
class HybridDecision:
    eps_threshold: float
    applied_hybrid: bool
    X: float
    Y: float
    t_condition: bool


def hybrid_threshold(N: int, d: int, k: int, r: float = 1.0, rho: float = DEFAULT_RHO,
                     t: int = 5) -> tuple[float, float, float, bool]:
    """Return ``(eps_b, X, Y, t_ok)``.

    One half-budget DPLloyd round beats the EUGkM variance when
    ``X / eps**2 <= Y * eps**(-4/(2+d))``, i.e. ``eps >= (X/Y)**((2+d)/(2d))``.
    It beats full ``t``-round DPLloyd whenever ``t >= 2``.
    """
    if not (N > 0 and d > 0 and k > 0 and r > 0 and t > 0):
        raise ParameterError("N, d, k, r and t must be positive")
    if not 0.0 <= rho <= 0.5:
        raise ParameterError(f"rho must be in [0, 0.5], got {rho}")
    X = 8.0 * d * (1.0 + (2.0 * rho * r) ** 2) * (k * (d * r + 1.0) / N) ** 2
    Y = 2.0 * d * r ** 2 * k ** ((d - 2.0) / d) / (3.0 * 10.0 ** (2.0 * d / (2.0 + d)) * N ** (4.0 / (2.0 + d)))
    eps_b = (X / Y) ** ((2.0 + d) / (2.0 * d))
    return eps_b, X, Y, t >= 2


def decide(N: int, d: int, k: int, eps: float, r: float = 1.0, rho: float = DEFAULT_RHO,
           t: int = 5) -> HybridDecision:
    eps_b, X, Y, t_ok = hybrid_threshold(N, d, k, r, rho, t)
    return HybridDecision(eps_b, bool(eps >= eps_b and t_ok), X, Y, t_ok)


def hybrid(data, k: int, eps: float, theta: float = DEFAULT_THETA, init_sets=None, rng=None,
           budget: Budget | None = None, r: float = 1.0, rho: float = DEFAULT_RHO, t: int = 5,
           max_cells: int | None = MAX_CELLS, return_synopsis: bool = False):
    """Private k-means by EUGkM, refined by one DPLloyd round when worthwhile.

    Returns ``(centroids, decision)``, plus the synopsis when asked. Budget
    spends are scoped ``eugkm`` and ``dplloyd_one_round``.
    """
    X = as_points(data)
    n, d = X.shape
    rng = make_rng(rng)
    if budget is None:
        budget = Budget(eps)
    budget.require(eps)
    decision = decide(n, d, k, eps, r, rho, t)
    eps_grid = eps / 2.0 if decision.applied_hybrid else eps
    with budget.scope("eugkm"):
        C, syn = eugkm(X, k, eps_grid, theta, init_sets, rng, budget, r, max_cells=max_cells)
    if decision.applied_hybrid:
        with budget.scope("dplloyd_one_round"):
            C = dplloyd_one_round(X, C, eps - eps_grid, r, rng, budget)
    return (C, decision, syn) if return_synopsis else (C, decision)


def refine(data, start, eps: float, r: float = 1.0, rng=None, budget: Budget | None = None) -> np.ndarray:
    """The second hybrid stage alone: one DPLloyd round from ``start``."""
    if budget is None:
        budget = Budget(eps)
    with budget.scope("dplloyd_one_round"):
        return dplloyd_one_round(data, start, eps, r, make_rng(rng), budget)

