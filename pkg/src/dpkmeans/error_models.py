"""Closed-form error predictions for DPLloyd, EUGkM and the hybrid refinement.

``rho`` is the average normalised centroid magnitude ``|S_i| / (2 r C)``
(cluster coordinate sum over twice the half-width times the cluster size).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .eugkm import DEFAULT_THETA, choose_M
from .mechanisms import ParameterError

DEFAULT_RHO = 0.25


@dataclass(frozen=True)
class ErrorModelParams:
    N: int
    d: int
    k: int
    eps: float
    t: int = 5
    r: float = 1.0
    rho: float = DEFAULT_RHO
    M: float | None = None  # None -> sized from N, eps, d, theta
    theta: float = DEFAULT_THETA

    def __post_init__(self):
        for name in ("N", "d", "k", "eps", "t", "r", "theta"):
            if not getattr(self, name) > 0:
                raise ParameterError(f"{name} must be positive, got {getattr(self, name)}")
        if not 0.0 <= self.rho <= 0.5:
            raise ParameterError(f"rho must be in [0, 0.5], got {self.rho}")
        if self.M is not None and not self.M >= 1:
            raise ParameterError(f"M must be >= 1, got {self.M}")

    @property
    def cells(self) -> float:
        return choose_M(self.N, self.eps, self.d, self.theta) if self.M is None else float(self.M)

    def with_(self, **changes) -> "ErrorModelParams":
        return replace(self, **changes)


def _centroid_factor(p: ErrorModelParams) -> float:
    return 2.0 * p.d * (1.0 + (2.0 * p.rho * p.r) ** 2)


def predict_dplloyd_mse(p: ErrorModelParams) -> float:
    """Per-round centroid MSE of DPLloyd, ``2d(1+(2 rho r)^2)(k t (d r+1)/(N eps))^2``."""
    return _centroid_factor(p) * (p.k * p.t * (p.d * p.r + 1.0) / (p.N * p.eps)) ** 2


def predict_eugkm_variance(p: ErrorModelParams) -> float:
    """Centroid variance from the grid noise, ``2 d M r^2 k^((d-2)/d) / (3 N^2 eps^2)``."""
    return 2.0 * p.d * p.cells * p.r ** 2 * p.k ** ((p.d - 2.0) / p.d) / (3.0 * p.N ** 2 * p.eps ** 2)


def predict_eugkm_bias_bound(p: ErrorModelParams) -> float:
    """Upper bound on the squared centroid bias from snapping points to cell centres."""
    return p.d * p.r ** 2 / p.cells ** (2.0 / p.d)


def predict_hybrid_one_round_mse(p: ErrorModelParams) -> float:
    """One DPLloyd round at half the budget: ``8d(1+(2 rho r)^2)(k(d r+1)/(N eps))^2``."""
    return 4.0 * predict_dplloyd_mse(p.with_(t=1))
