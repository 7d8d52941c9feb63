"""Non-private Lloyd iteration, NICV, and the sphere-packing initialiser.

Labels are 0-based cluster indices. Ties go to the lowest index.
"""

from __future__ import annotations

import numpy as np

from .data import as_points
from .mechanisms import make_rng

PACKING_ATTEMPTS = 200
PACKING_RESTARTS = 20
PACKING_MAX_STEPS = 30
PACKING_REL_TOL = 1e-3


def sq_distances(X: np.ndarray, C: np.ndarray) -> np.ndarray:
    """``N x k`` squared Euclidean distances, exact differences (no expansion)."""
    diff = X[:, None, :] - C[None, :, :]
    return np.einsum("nkd,nkd->nk", diff, diff)


def _fast_sq_distances(X: np.ndarray, C: np.ndarray) -> np.ndarray:
    # |x|^2 - 2x.c + |c|^2; cheaper for large N, clipped against round-off
    d2 = (X * X).sum(1)[:, None] - 2.0 * X @ C.T + (C * C).sum(1)[None, :]
    return np.maximum(d2, 0.0)


def _distances(X, C):
    if X.shape[0] * C.shape[0] * X.shape[1] <= 2_000_000:
        return sq_distances(X, C)
    return _fast_sq_distances(X, C)


def assign(data, centroids) -> np.ndarray:
    """Index of the nearest centroid for every point."""
    X = as_points(data)
    C = np.asarray(centroids, dtype=float)
    return np.argmin(_distances(X, C), axis=1)


def cluster_sums(X: np.ndarray, labels: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-cluster point counts (k,) and coordinate sums (k, d)."""
    counts = np.bincount(labels, minlength=k).astype(float)
    sums = np.stack([np.bincount(labels, weights=X[:, i], minlength=k) for i in range(X.shape[1])], axis=1)
    return counts, sums


def update_centroids(data, labels, k: int, previous) -> np.ndarray:
    """Mean of each cluster; empty clusters keep their previous centroid."""
    X = as_points(data)
    prev = np.asarray(previous, dtype=float)
    counts, sums = cluster_sums(X, np.asarray(labels), k)
    out = prev.copy()
    nz = counts > 0
    out[nz] = sums[nz] / counts[nz, None]
    return out


def lloyd(data, init, max_iter: int = 1000, tol: float | None = None, r: float = 1.0,
          return_n_iter: bool = False):
    """Lloyd's algorithm from ``init``.

    Stops when the largest centroid displacement falls below ``tol``
    (default ``1e-6 * r``) or after ``max_iter`` iterations.
    """
    X = as_points(data)
    C = np.array(init, dtype=float, copy=True)
    k = C.shape[0]
    if tol is None:
        tol = 1e-6 * r
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        labels = assign(X, C)
        new = update_centroids(X, labels, k, C)
        shift = np.sqrt(((new - C) ** 2).sum(axis=1)).max()
        C = new
        if shift < tol:
            break
    return (C, n_iter) if return_n_iter else C


def lloyd_path(data, init, n_iter: int) -> list[np.ndarray]:
    """Centroids after 0, 1, ..., ``n_iter`` Lloyd steps (no early stop)."""
    X = as_points(data)
    C = np.array(init, dtype=float, copy=True)
    path = [C]
    for _ in range(n_iter):
        C = update_centroids(X, assign(X, C), C.shape[0], C)
        path.append(C)
    return path


def nicv(data, centroids) -> float:
    """Mean squared distance from each point to its nearest centroid."""
    X = as_points(data)
    C = np.asarray(centroids, dtype=float)
    return float(_distances(X, C).min(axis=1).mean())


def sse(data, centroids) -> float:
    X = as_points(data)
    return float(_distances(X, np.asarray(centroids, dtype=float)).min(axis=1).sum())


def nicv_by_cluster(data, centroids) -> float:
    """NICV through the partition: sum over clusters of squared deviations."""
    X = as_points(data)
    C = np.asarray(centroids, dtype=float)
    labels = assign(X, C)
    total = 0.0
    for j in range(C.shape[0]):
        members = X[labels == j]
        if len(members):
            total += float(((members - C[j]) ** 2).sum())
    return total / X.shape[0]


# --------------------------------------------------------------------------
# sphere packing


def _try_pack(d, k, r, a, rng, attempts=PACKING_ATTEMPTS, restarts=PACKING_RESTARTS):
    """Place ``k`` centres at least ``a`` from the border and ``2a`` apart.

    Centres are placed one by one; each gets ``attempts`` random candidates
    and the first that fits is kept. ``restarts`` independent sequences run
    side by side and the radius is declared infeasible when all of them fail.
    """
    lo, hi = -r + a, r - a
    if lo > hi:
        return None
    # all restarts advance together; a restart dies when no candidate fits
    placed = rng.uniform(lo, hi, size=(restarts, 1, d))
    for _j in range(1, k):
        cand = rng.uniform(lo, hi, size=(placed.shape[0], attempts, d))
        diff = cand[:, :, None, :] - placed[:, None, :, :]
        ok = (np.einsum("rajd,rajd->raj", diff, diff) >= (2 * a) ** 2).all(axis=2)
        alive = ok.any(axis=1)
        if not alive.any():
            return None
        first = ok.argmax(axis=1)
        chosen = cand[np.arange(cand.shape[0]), first]
        placed = np.concatenate([placed, chosen[:, None, :]], axis=1)[alive]
    return placed[0]


def sphere_packing_init(d: int, k: int, r: float = 1.0, seed=None, return_radius: bool = False):
    """Data-independent initial centroids spread out by a binary search on
    the packing radius ``a`` over ``[0, r]``.

    Returns ``k x d`` centroids (and the achieved radius when asked).
    """
    if k < 1 or d < 1:
        raise ValueError("k and d must be positive")
    rng = make_rng(seed)
    best = rng.uniform(-r, r, size=(k, d))  # a = 0 is always feasible
    best_a = 0.0
    lo, hi = 0.0, float(r)
    for _ in range(PACKING_MAX_STEPS):
        if hi - lo < PACKING_REL_TOL * r:
            break
        mid = 0.5 * (lo + hi)
        placed = _try_pack(d, k, r, mid, rng)
        if placed is None:
            hi = mid
        else:
            lo, best, best_a = mid, placed, mid
    return (best, best_a) if return_radius else best
