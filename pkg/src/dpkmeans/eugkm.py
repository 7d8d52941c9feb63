"""EUGkM: publish a noisy uniform-grid histogram, then cluster the grid.

The grid has ``m`` cells per dimension, sized so that the total cell count
is about ``(N*eps/theta)**(2d/(2+d))``. Each cell releases its count plus
``Lap(1/eps)``; since every point sits in exactly one cell, the whole
histogram costs ``eps`` once. Clustering treats each cell as its centre
point weighted by the signed noisy count, so negative cells can cancel
spurious positive ones.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import as_points
from .mechanisms import Budget, ParameterError, laplace_mechanism, make_rng

DEFAULT_THETA = 10.0
MIN_CLUSTER_WEIGHT = 0.5
# cap on m**d; the sized grid explodes at huge eps (noise-free checks)
MAX_CELLS = 2 ** 18
SYNOPSIS_MAX_ITER = 50
INIT_CHUNK_ENTRIES = 8_000_000


@dataclass(frozen=True)
class Grid:
    d: int
    m: int
    r: float = 1.0

    def __post_init__(self):
        if self.d < 1 or self.m < 1:
            raise ParameterError(f"grid needs d >= 1 and m >= 1, got d={self.d}, m={self.m}")
        if not self.r > 0:
            raise ParameterError("r must be positive")

    @property
    def n_cells(self) -> int:
        return self.m ** self.d

    @property
    def width(self) -> float:
        return 2.0 * self.r / self.m


@dataclass(frozen=True)
class Synopsis:
    grid: Grid
    counts: np.ndarray
    eps_used: float

    def __post_init__(self):
        c = np.array(self.counts, dtype=float, copy=True)
        if c.shape != (self.grid.n_cells,):
            raise ParameterError(f"expected {self.grid.n_cells} counts, got shape {c.shape}")
        c.setflags(write=False)
        object.__setattr__(self, "counts", c)


def choose_M(n: int, eps: float, d: int, theta: float = DEFAULT_THETA) -> float:
    """Target number of cells, ``(n*eps/theta)**(2d/(2+d))``."""
    if not (n > 0 and eps > 0 and theta > 0):
        raise ParameterError("n, eps and theta must be positive")
    return (n * eps / theta) ** (2.0 * d / (2.0 + d))


def grid_layout(d: int, r: float, M_target: float, max_cells: int | None = MAX_CELLS) -> Grid:
    """Smallest uniform grid with at least ``M_target`` cells.

    ``m = ceil(M_target**(1/d))``; when ``m**d`` would exceed ``max_cells``
    the side is reduced to the largest ``m`` that fits.
    """
    if not M_target >= 1:
        raise ParameterError(f"M_target must be >= 1, got {M_target}")
    m = max(1, math.ceil(M_target ** (1.0 / d) - 1e-9))
    if m ** d < M_target:  # guard the float root
        m += 1
    if max_cells is not None and m ** d > max_cells:
        m = max(1, int(math.floor(max_cells ** (1.0 / d) + 1e-9)))
        while m > 1 and m ** d > max_cells:
            m -= 1
    return Grid(d, m, r)


def cell_coords(points, grid: Grid) -> np.ndarray:
    """Per-dimension cell indices; the top face belongs to the last cell."""
    X = as_points(points)
    idx = np.floor((X + grid.r) / grid.width).astype(np.int64)
    return np.clip(idx, 0, grid.m - 1)


def cell_index(points, grid: Grid) -> np.ndarray:
    """Row-major flat cell index of each point."""
    coords = cell_coords(points, grid)
    return np.ravel_multi_index(tuple(coords.T), (grid.m,) * grid.d)


def cell_centers(grid: Grid) -> np.ndarray:
    """``m**d x d`` cell centres in row-major order."""
    axis = -grid.r + (np.arange(grid.m) + 0.5) * grid.width
    mesh = np.meshgrid(*([axis] * grid.d), indexing="ij")
    return np.stack([g.reshape(-1) for g in mesh], axis=1)


def histogram(data, grid: Grid) -> np.ndarray:
    return np.bincount(cell_index(data, grid), minlength=grid.n_cells).astype(float)


def publish_synopsis(data, grid: Grid, eps: float, rng=None, budget: Budget | None = None) -> Synopsis:
    """Noisy cell counts ``count + Lap(1/eps)``, neither rounded nor truncated."""
    rng = make_rng(rng)
    if budget is None:
        budget = Budget(eps)
    X = as_points(data)
    if X.shape[1] != grid.d:
        raise ParameterError(f"data has d={X.shape[1]}, grid has d={grid.d}")
    noisy = laplace_mechanism(histogram(X, grid), 1.0, eps, rng, budget, "eugkm/synopsis")
    return Synopsis(grid, noisy, eps)


def grid_sq_distances(grid: Grid, C) -> np.ndarray:
    """``len(C) x m**d`` squared distances from centroids to every cell centre.

    Built one dimension at a time from ``m``-long per-axis tables, using the
    product structure of the grid instead of a full distance matrix product.
    """
    C = np.asarray(C, dtype=float)
    axis = -grid.r + (np.arange(grid.m) + 0.5) * grid.width
    out = (axis[None, :] - C[:, 0:1]) ** 2
    for i in range(1, grid.d):
        per_axis = (axis[None, :] - C[:, i:i + 1]) ** 2
        out = (out[:, :, None] + per_axis[:, None, :]).reshape(C.shape[0], -1)
    return out


def _nearest(D: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-init nearest centroid from ``D`` of shape ``(I*k, n)``; ties to the lowest index."""
    D = D.reshape(-1, k, D.shape[1])
    best = D[:, 0].copy()
    labels = np.zeros(best.shape, dtype=np.intp)
    for j in range(1, k):
        closer = D[:, j] < best
        labels[closer] = j
        np.minimum(best, D[:, j], out=best)
    return labels, best


def _batched_synopsis_kmeans(s: Synopsis, inits, max_iter, tol):
    """Signed-weight Lloyd from several inits at once; ``inits`` is ``(I, k, d)``."""
    C = np.array(inits, dtype=float, copy=True)
    I, k, d = C.shape
    P = cell_centers(s.grid)
    w = s.counts
    w_tiled = np.tile(w, I)
    wp_tiled = [np.tile(w * P[:, i], I) for i in range(d)]
    offsets = (np.arange(I) * k)[:, None]
    active = np.ones(I, dtype=bool)
    prev_C, prev_obj = C.copy(), np.full(I, np.inf)
    for _ in range(max_iter + 1):
        labels, best = _nearest(grid_sq_distances(s.grid, C.reshape(I * k, d)), k)
        obj = best @ w
        # signed weights break Lloyd's monotone descent; step back and stop
        worse = active & (obj > prev_obj)
        C[worse] = prev_C[worse]
        active &= ~worse
        if not active.any() or _ == max_iter:
            break
        flat = (labels + offsets).reshape(-1)
        mass = np.bincount(flat, weights=w_tiled, minlength=I * k).reshape(I, k)
        sums = np.stack([np.bincount(flat, weights=wp, minlength=I * k) for wp in wp_tiled], axis=1)
        sums = sums.reshape(I, k, d)
        ok = (mass >= MIN_CLUSTER_WEIGHT) & active[:, None]
        prev_C, prev_obj = C.copy(), np.where(active, obj, prev_obj)
        C[ok] = sums[ok] / mass[ok][:, None]
        shift = np.sqrt(((C - prev_C) ** 2).sum(axis=2)).max(axis=1)
        active &= shift >= tol
        if not active.any():
            break
    return C


def synopsis_kmeans(s: Synopsis, init, max_iter: int = SYNOPSIS_MAX_ITER, tol: float | None = None) -> np.ndarray:
    """Weighted Lloyd over cell centres with signed weights.

    A cluster whose weight sum is below 0.5 keeps its previous centroid.
    Iteration stops on a shift below ``tol`` (default ``1e-6 * r``) or after
    ``max_iter`` updates. With signed weights an update can raise the
    weighted cost and a low-mass centroid can wander indefinitely, so an
    update that raises the cost is undone and iteration stops there. For
    non-negative weights this never triggers.
    """
    return synopsis_kmeans_many(s, [init], max_iter, tol)[0]


def synopsis_kmeans_many(s: Synopsis, inits, max_iter: int = SYNOPSIS_MAX_ITER,
                         tol: float | None = None) -> np.ndarray:
    """``synopsis_kmeans`` from every init; returns ``(I, k, d)``."""
    inits = np.asarray(inits, dtype=float)
    if inits.ndim != 3 or inits.shape[2] != s.grid.d:
        raise ParameterError(f"inits must be (I, k, {s.grid.d}), got shape {inits.shape}")
    if tol is None:
        tol = 1e-6 * s.grid.r
    # bound the (inits*k x cells) distance matrix to a few million entries
    step = max(1, INIT_CHUNK_ENTRIES // (s.grid.n_cells * inits.shape[1]))
    out = [_batched_synopsis_kmeans(s, inits[lo:lo + step], max_iter, tol)
           for lo in range(0, inits.shape[0], step)]
    return np.concatenate(out, axis=0)


def synopsis_nicv(s: Synopsis, c) -> float:
    """Signed-weight mean squared distance of cell centres to the nearest centroid."""
    d2 = grid_sq_distances(s.grid, c).min(axis=0)
    return float((s.counts * d2).sum() / max(1.0, float(s.counts.sum())))


def eugkm(data, k: int, eps: float, theta: float = DEFAULT_THETA, init_sets=None, rng=None,
          budget: Budget | None = None, r: float = 1.0, m: int | None = None,
          max_cells: int | None = MAX_CELLS) -> tuple[np.ndarray, Synopsis]:
    """Publish one synopsis with ``eps`` and cluster it from every init set.

    Returns the centroids with the lowest synopsis NICV, and the synopsis.
    The raw data is not read after publication. ``m`` overrides the grid
    side (mainly for tests).
    """
    X = as_points(data)
    n, d = X.shape
    rng = make_rng(rng)
    if budget is None:
        budget = Budget(eps)
    budget.require(eps)
    if init_sets is None or len(init_sets) == 0:
        raise ParameterError("eugkm needs at least one init set")
    grid = Grid(d, int(m), r) if m is not None else grid_layout(d, r, max(1.0, choose_M(n, eps, d, theta)), max_cells)
    syn = publish_synopsis(X, grid, eps, rng, budget)
    return cluster_synopsis(syn, init_sets), syn


def cluster_synopsis(syn: Synopsis, init_sets) -> np.ndarray:
    """Best-of-inits synopsis k-means, scored by synopsis NICV (post-processing only)."""
    runs = synopsis_kmeans_many(syn, init_sets)
    scores = [synopsis_nicv(syn, c) for c in runs]
    return runs[int(np.argmin(scores))]


# --------------------------------------------------------------------------
# synopsis file


def format_synopsis(s: Synopsis) -> str:
    """Plain text: ``d m r eps_used`` then one ``index count`` line per cell.

    Floats are written with ``repr`` so a reload is bit-exact.
    """
    g = s.grid
    lines = [f"{g.d} {g.m} {float(g.r)!r} {float(s.eps_used)!r}"]
    lines += [f"{i} {float(v)!r}" for i, v in enumerate(s.counts)]
    return "\n".join(lines) + "\n"


def write_synopsis(path, s: Synopsis) -> None:
    Path(path).write_text(format_synopsis(s), encoding="utf-8")


def read_synopsis(path) -> Synopsis:
    from .data import FormatError

    text = Path(path).read_text(encoding="utf-8").splitlines()
    if not text:
        raise FormatError(f"{path}: empty synopsis file")
    try:
        d_s, m_s, r_s, e_s = text[0].split()
        grid = Grid(int(d_s), int(m_s), float(r_s))
        eps = float(e_s)
    except ValueError as exc:
        raise FormatError(f"{path}:1: bad header {text[0]!r}") from exc
    counts = np.zeros(grid.n_cells)
    seen = np.zeros(grid.n_cells, dtype=bool)
    for lineno, line in enumerate(text[1:], start=2):
        if not line.strip():
            continue
        try:
            i_s, v_s = line.split()
            i, v = int(i_s), float(v_s)
        except ValueError as exc:
            raise FormatError(f"{path}:{lineno}: expected 'index count', got {line!r}") from exc
        if not 0 <= i < grid.n_cells:
            raise FormatError(f"{path}:{lineno}: cell index {i} out of range")
        counts[i] = v
        seen[i] = True
    if not seen.all():
        raise FormatError(f"{path}: {int((~seen).sum())} cells missing")
    return Synopsis(grid, counts, eps)
