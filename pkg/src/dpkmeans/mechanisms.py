"""Seeded randomness, privacy-budget accounting and the Laplace / exponential
mechanisms shared by every clustering algorithm in the package."""

from __future__ import annotations

import hashlib
import math
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

BUDGET_TOLERANCE = 1e-9


def budget_tolerance(total: float) -> float:
    """Absolute slack for ledger checks: 1e-9, scaled up for totals above 1
    so float rounding in sums of many small spends at huge eps is tolerated."""
    return BUDGET_TOLERANCE * max(1.0, abs(total))


class ParameterError(ValueError):
    """Invalid argument to a mechanism or algorithm."""


class BudgetExceededError(RuntimeError):
    """Raised when a spend would push a Budget past its total."""


# --------------------------------------------------------------------------
# randomness


def make_rng(seed=None) -> np.random.Generator:
    """Return a ``numpy.random.Generator`` for ``seed``.

    Accepts ``None``, an integer seed or an existing Generator (returned as
    is), in the spirit of ``sklearn.utils.check_random_state``.
    """
    if isinstance(seed, np.random.Generator):
        return seed
    if seed is not None and not isinstance(seed, (int, np.integer)):
        raise ParameterError(f"seed must be an int, None or a Generator, got {type(seed).__name__}")
    return np.random.Generator(np.random.PCG64(seed))


def derive_seed(master_seed: int, *labels) -> int:
    """Stable 63-bit seed from a master seed and arbitrary labels.

    Uses SHA-256 over the labels' ``repr`` so the result does not depend on
    Python's per-process hash randomisation.
    """
    h = hashlib.sha256(repr((int(master_seed),) + tuple(labels)).encode("utf-8"))
    return int.from_bytes(h.digest()[:8], "little") >> 1


def spawn_seed(rng: np.random.Generator) -> int:
    return int(rng.integers(0, 2**63 - 1))


# --------------------------------------------------------------------------
# budget


@dataclass
class Budget:
    """Sequential-composition ledger for a total privacy budget ``total``.

    Every mechanism call records ``(label, eps)``. ``scope`` prefixes labels
    so composite algorithms (e.g. the hybrid) can be audited per stage.
    """

    total: float
    spent: float = 0.0
    ledger: list[tuple[str, float]] = field(default_factory=list)
    _scopes: list[str] = field(default_factory=list, repr=False)

    def __post_init__(self):
        if not (self.total > 0 and math.isfinite(self.total)):
            raise ParameterError(f"budget total must be positive and finite, got {self.total}")

    @property
    def remaining(self) -> float:
        return self.total - self.spent

    def spend(self, eps: float, label: str = "") -> None:
        if not (eps > 0 and math.isfinite(eps)):
            raise ParameterError(f"eps must be positive and finite, got {eps}")
        if self.spent + eps > self.total + budget_tolerance(self.total):
            raise BudgetExceededError(
                f"spending {eps:.6g} on {label!r} exceeds budget "
                f"(spent {self.spent:.6g} of {self.total:.6g})"
            )
        self.spent += eps
        self.ledger.append(("/".join(self._scopes + [label]) if label else "/".join(self._scopes), eps))

    def require(self, eps: float) -> None:
        """Fail early if ``eps`` cannot be afforded."""
        if self.spent + eps > self.total + budget_tolerance(self.total):
            raise BudgetExceededError(
                f"need {eps:.6g} but only {self.remaining:.6g} of {self.total:.6g} remains"
            )

    @contextmanager
    def scope(self, name: str):
        self._scopes.append(name)
        try:
            yield self
        finally:
            self._scopes.pop()

    def by_prefix(self, depth: int = 1) -> dict[str, float]:
        """Sum ledger amounts grouped by the first ``depth`` label components."""
        out: dict[str, float] = {}
        for label, eps in self.ledger:
            key = "/".join(label.split("/")[:depth])
            out[key] = out.get(key, 0.0) + eps
        return out

    def exhausted(self, tol: float | None = None) -> bool:
        tol = budget_tolerance(self.total) if tol is None else tol
        return abs(self.spent - self.total) <= tol


# --------------------------------------------------------------------------
# Laplace


def _check_scale(scale: float) -> None:
    if not (scale > 0 and math.isfinite(scale)):
        raise ParameterError(f"Laplace scale must be positive and finite, got {scale}")


def laplace_noise(scale: float, size, rng: np.random.Generator) -> np.ndarray:
    """Laplace(0, scale) draws by inverse CDF, one uniform per draw."""
    _check_scale(scale)
    u = rng.random(size) - 0.5
    # u == -0.5 maps to -inf; redraw the (probability 2**-53) offenders
    bad = u == -0.5
    while np.any(bad):
        u[bad] = rng.random(int(bad.sum())) - 0.5
        bad = u == -0.5
    return -scale * np.sign(u) * np.log1p(-2.0 * np.abs(u))


def laplace_sample(scale: float, rng: np.random.Generator) -> float:
    """One draw from the two-sided Laplace distribution with scale ``scale``."""
    return float(laplace_noise(scale, 1, rng)[0])


def laplace_mechanism(
    values,
    sensitivity: float,
    eps: float,
    rng: np.random.Generator,
    budget: Budget,
    label: str = "laplace",
) -> np.ndarray:
    """Add Lap(sensitivity/eps) to every entry of ``values``; spend ``eps`` once.

    ``sensitivity`` must be the L1 sensitivity of the whole vector, so a
    histogram over disjoint cells (parallel composition) costs a single spend.
    """
    if not (sensitivity > 0 and math.isfinite(sensitivity)):
        raise ParameterError(f"sensitivity must be positive and finite, got {sensitivity}")
    budget.spend(eps, label)
    values = np.asarray(values, dtype=float)
    return values + laplace_noise(sensitivity / eps, values.shape, rng)


def noisy_count(
    true_count: float,
    sensitivity: float,
    eps: float,
    rng: np.random.Generator,
    budget: Budget,
    label: str = "count",
) -> float:
    """``true_count + Lap(sensitivity/eps)``. The result may be negative."""
    return float(laplace_mechanism([true_count], sensitivity, eps, rng, budget, label)[0])


# --------------------------------------------------------------------------
# exponential mechanism


def exp_select_probabilities(qualities: Sequence[float], eps: float, quality_sensitivity: float) -> np.ndarray:
    q = np.asarray(qualities, dtype=float)
    if q.ndim != 1 or q.size == 0:
        raise ParameterError("exponential mechanism needs a non-empty 1-d list of qualities")
    if not np.all(np.isfinite(q)):
        raise ParameterError("candidate qualities must be finite")
    logits = (eps / (2.0 * quality_sensitivity)) * q
    logits -= logits.max()
    w = np.exp(logits)
    return w / w.sum()


def exp_select(
    qualities: Sequence[float],
    eps: float,
    quality_sensitivity: float,
    rng: np.random.Generator,
    budget: Budget,
    label: str = "select",
) -> int:
    """Index chosen with probability proportional to ``exp(eps*q/(2*GS))``.

    ``qualities`` are the candidates' scores, higher is better.
    """
    if not (quality_sensitivity > 0 and math.isfinite(quality_sensitivity)):
        raise ParameterError(f"quality sensitivity must be positive, got {quality_sensitivity}")
    if not (eps > 0 and math.isfinite(eps)):
        raise ParameterError(f"eps must be positive and finite, got {eps}")
    p = exp_select_probabilities(qualities, eps, quality_sensitivity)
    budget.spend(eps, label)
    u = rng.random()
    idx = int(np.searchsorted(np.cumsum(p), u, side="right"))
    return min(idx, p.size - 1)
