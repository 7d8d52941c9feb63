"""Sample-and-aggregate k-means (GkM).

The data is split into ``ell`` random blocks, each block is clustered
without privacy, and the block centroids are averaged position by position
before Laplace noise ``Lap(2*(max-min)*k*d/(ell*eps))`` is added. The output
range ``[min, max]`` is the fixed data domain ``[-r, r]``.

Block outputs come in arbitrary order, so they are lined up before
averaging. The default matches each block's centroids to a public,
data-independent reference set by minimum total squared distance. Each
block's aligned output still depends on that block alone, which keeps the
one-block-per-tuple sensitivity argument intact.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .data import as_points
from .kmeans import sphere_packing_init
from .mechanisms import Budget, ParameterError, laplace_mechanism, make_rng, spawn_seed

BLOCK_MAX_ITER = 50
ALIGNMENTS = ("reference", "shared_init", "sort")


class BlockMode(str, enum.Enum):
    N_POW_04 = "n_pow_04"
    THREE_K = "three_k"
    EXPLICIT = "explicit"


@dataclass(frozen=True)
class BlockPolicy:
    mode: BlockMode = BlockMode.N_POW_04
    explicit_ell: int | None = None

    @classmethod
    def n_pow_04(cls):
        return cls(BlockMode.N_POW_04)

    @classmethod
    def three_k(cls):
        return cls(BlockMode.THREE_K)

    @classmethod
    def explicit(cls, ell: int):
        return cls(BlockMode.EXPLICIT, int(ell))


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def resolve_ell(n: int, k: int, policy: BlockPolicy) -> int:
    """Number of blocks for a dataset of ``n`` points.

    ``N_POW_04`` rounds ``n**0.4``; ``THREE_K`` rounds ``n/(3k)`` (blocks of
    about ``3k`` points); both are at least 1.
    """
    if n < 1:
        raise ParameterError("n must be positive")
    mode = BlockMode(policy.mode)
    if mode is BlockMode.N_POW_04:
        ell = _round_half_up(n ** 0.4)
    elif mode is BlockMode.THREE_K:
        ell = _round_half_up(n / (3.0 * k))
    else:
        if policy.explicit_ell is None or policy.explicit_ell < 1:
            raise ParameterError("explicit block policy needs a positive ell")
        if policy.explicit_ell > n:
            raise ParameterError(f"ell={policy.explicit_ell} exceeds n={n}")
        return int(policy.explicit_ell)
    return max(1, min(ell, n))


def partition_blocks(data, ell: int, rng=None) -> list[np.ndarray]:
    """Random partition into ``ell`` disjoint blocks whose sizes differ by at most one."""
    X = as_points(data)
    if not 1 <= ell <= X.shape[0]:
        raise ParameterError(f"ell must be in [1, {X.shape[0]}], got {ell}")
    perm = make_rng(rng).permutation(X.shape[0])
    return [X[idx] for idx in np.array_split(perm, ell)]


def noise_scale(k: int, d: int, ell: int, eps: float, r: float = 1.0) -> float:
    """Per-coordinate Laplace scale of the aggregated centroids."""
    return 2.0 * (2.0 * r) * k * d / (ell * eps)


def batched_lloyd(blocks: list[np.ndarray], init: np.ndarray, max_iter: int = BLOCK_MAX_ITER,
                  tol: float = 1e-6) -> np.ndarray:
    """Lloyd's algorithm on many small blocks at once.

    ``init`` is ``(B, k, d)``. Blocks are padded to a common length and the
    padding is masked out. Same update rule as ``kmeans.lloyd``: empty
    clusters keep their centroid, a block stops once its largest centroid
    shift is below ``tol``.
    """
    B = len(blocks)
    k, d = init.shape[1:]
    size = max(len(b) for b in blocks)
    X = np.zeros((B, size, d))
    mask = np.zeros((B, size))
    for b, block in enumerate(blocks):
        X[b, : len(block)] = block
        mask[b, : len(block)] = 1.0
    C = init.astype(float, copy=True)
    active = np.ones(B, dtype=bool)
    eye = np.eye(k)
    for _ in range(max_iter):
        diff = X[:, :, None, :] - C[:, None, :, :]
        labels = np.einsum("bnkd,bnkd->bnk", diff, diff).argmin(axis=2)
        onehot = eye[labels] * mask[:, :, None]
        counts = onehot.sum(axis=1)
        sums = np.einsum("bnk,bnd->bkd", onehot, X)
        new = np.where(counts[:, :, None] > 0, sums / np.maximum(counts, 1.0)[:, :, None], C)
        shift = np.sqrt(((new - C) ** 2).sum(axis=2)).max(axis=1)
        C = np.where(active[:, None, None], new, C)
        active &= shift >= tol
        if not active.any():
            break
    return C


def _local_inits(blocks, k, d, r, rng):
    # k distinct points of the block; short blocks are padded with uniform draws
    init = np.empty((len(blocks), k, d))
    for b, block in enumerate(blocks):
        take = min(k, len(block))
        init[b, :take] = block[rng.choice(len(block), take, replace=False)]
        init[b, take:] = rng.uniform(-r, r, size=(k - take, d))
    return init


def align_to_reference(block_centroids: np.ndarray, reference: np.ndarray) -> np.ndarray:
    """Reorder each block's centroids to the assignment with the smallest
    total squared distance to ``reference``."""
    out = np.empty_like(block_centroids)
    for b, C in enumerate(block_centroids):
        cost = ((C[:, None, :] - reference[None, :, :]) ** 2).sum(axis=2)
        rows, cols = linear_sum_assignment(cost)
        out[b, cols] = C[rows]
    return out


def block_centroids(blocks, k: int, d: int, r: float, rng, alignment: str = "reference") -> np.ndarray:
    """Non-private k-means on every block, lined up by index; ``(ell, k, d)``.

    ``reference``: each block starts from k of its own points, then its
    centroids are matched to a sphere-packing reference drawn independently
    of the data. ``shared_init``: every block starts from the same uniform
    random centroids and keeps their order. ``sort``: independent uniform
    starts, centroids sorted lexicographically.
    """
    if alignment not in ALIGNMENTS:
        raise ParameterError(f"alignment must be one of {ALIGNMENTS}, got {alignment!r}")
    if alignment == "reference":
        init = _local_inits(blocks, k, d, r, rng)
    elif alignment == "shared_init":
        init = np.broadcast_to(rng.uniform(-r, r, size=(k, d)), (len(blocks), k, d))
    else:
        init = rng.uniform(-r, r, size=(len(blocks), k, d))
    out = batched_lloyd(blocks, init, BLOCK_MAX_ITER, 1e-6 * r)
    if alignment == "reference":
        out = align_to_reference(out, sphere_packing_init(d, k, r, spawn_seed(rng)))
    elif alignment == "sort":
        for b in range(out.shape[0]):
            out[b] = out[b][np.lexsort(out[b].T[::-1])]
    return out


def sag_only(data, k: int, ell: int, rng=None, r: float = 1.0, alignment: str = "reference") -> np.ndarray:
    """Block-and-average centroids with no noise (the aggregation error alone)."""
    rng = make_rng(rng)
    X = as_points(data)
    blocks = partition_blocks(X, ell, rng)
    return block_centroids(blocks, k, X.shape[1], r, rng, alignment).mean(axis=0)


def gkm(data, k: int, eps: float, policy: BlockPolicy = BlockPolicy(), rng=None,
        budget: Budget | None = None, r: float = 1.0, half_budget_range: bool = False,
        alignment: str = "reference") -> np.ndarray:
    """Private sample-and-aggregate k-means.

    ``half_budget_range`` mimics reserving half the budget for output-range
    estimation: half of ``eps`` is ledgered for it and the noise uses the
    other half. ``alignment`` picks how block outputs are lined up (see
    ``block_centroids``).
    """
    X = as_points(data)
    n, d = X.shape
    rng = make_rng(rng)
    if budget is None:
        budget = Budget(eps)
    budget.require(eps)
    ell = resolve_ell(n, k, policy)
    agg = sag_only(X, k, ell, rng, r, alignment)
    noise_eps = eps
    if half_budget_range:
        noise_eps = eps / 2.0
        budget.spend(eps - noise_eps, "gkm/range")
    sens = 2.0 * (2.0 * r) * k * d / ell
    out = laplace_mechanism(agg, sens, noise_eps, rng, budget, "gkm/aggregate")
    return np.clip(out, -r, r)
