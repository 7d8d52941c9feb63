"""Datasets: CSV ingestion, min-max normalisation to ``[-r, r]^d`` and
well-separated Gaussian-cluster generation."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .mechanisms import make_rng


class FormatError(ValueError):
    """Malformed CSV input; the message names the offending line."""


class InfeasibleSpecError(ValueError):
    pass


@dataclass(frozen=True)
class Dataset:
    """``N x d`` points, optionally normalised to ``[-r, r]^d``.

    ``r`` is ``None`` for raw (unnormalised) coordinates.
    """

    points: np.ndarray
    r: float | None = None
    provenance: str = ""

    def __post_init__(self):
        pts = np.array(self.points, dtype=float, copy=True)
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise ValueError(f"points must be a non-empty N x d matrix, got shape {pts.shape}")
        if self.r is not None:
            if not self.r > 0:
                raise ValueError(f"r must be positive, got {self.r}")
            if np.any(np.abs(pts) > self.r):
                raise ValueError(f"coordinates outside [-{self.r}, {self.r}]")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    def __len__(self):
        return self.n


def as_points(data) -> np.ndarray:
    """Coordinates of a Dataset or anything array-like, as a float 2-d array."""
    if isinstance(data, Dataset):
        return data.points
    pts = np.asarray(data, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    return pts


# --------------------------------------------------------------------------
# CSV


def _parse_row(fields: list[str]) -> list[float] | None:
    try:
        vals = [float(f) for f in fields]
    except ValueError:
        return None
    return vals


def load_csv(path, d: int | None = None) -> Dataset:
    """Read comma-separated numbers into an unnormalised Dataset.

    A single header line is skipped when the first row does not parse as
    numbers. Blank lines are ignored. Ragged or non-numeric rows raise
    FormatError with the 1-based line number.
    """
    path = Path(path)
    text = path.read_bytes().decode("utf-8-sig")
    rows: list[list[float]] = []
    width = d
    lines = text.splitlines()
    # one physical line per record, so reader position == line number
    for lineno, (raw, fields) in enumerate(zip(lines, csv.reader(lines)), start=1):
        if not raw.strip():
            continue
        vals = _parse_row([f.strip() for f in fields])
        if vals is None:
            if lineno == 1 and not rows:
                continue  # header
            raise FormatError(f"{path}:{lineno}: non-numeric field in {raw!r}")
        if not all(math.isfinite(v) for v in vals):
            raise FormatError(f"{path}:{lineno}: non-finite value in {raw!r}")
        if width is None:
            width = len(vals)
        elif len(vals) != width:
            raise FormatError(f"{path}:{lineno}: expected {width} columns, found {len(vals)}")
        rows.append(vals)
    if not rows:
        raise FormatError(f"{path}: no data rows")
    return Dataset(np.array(rows, dtype=float), r=None, provenance=f"csv:{path}")


def write_csv(path, points, header: list[str] | None = None) -> None:
    """Write points with ``repr`` floats so a reload is bit-exact."""
    pts = as_points(points)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        if header:
            fh.write(",".join(header) + "\n")
        for row in pts:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


# --------------------------------------------------------------------------
# normalisation


def normalize(raw, r: float = 1.0) -> Dataset:
    """Map each column affinely so its observed min is ``-r`` and max ``+r``.

    Constant columns map to 0.
    """
    if not r > 0:
        raise ValueError(f"r must be positive, got {r}")
    pts = as_points(raw)
    lo = pts.min(axis=0)
    hi = pts.max(axis=0)
    span = hi - lo
    const = span == 0
    safe = np.where(const, 1.0, span)
    out = (pts - lo) / safe * (2.0 * r) - r
    out[:, const] = 0.0
    np.clip(out, -r, r, out=out)
    prov = raw.provenance if isinstance(raw, Dataset) else ""
    return Dataset(out, r=r, provenance=f"normalized({prov})" if prov else "normalized")


# --------------------------------------------------------------------------
# synthetic data


@dataclass(frozen=True)
class SyntheticSpec:
    d: int
    k: int
    n: int
    separation: float
    cluster_std: float | None = None
    seed: int = 0
    r: float = 1.0

    def __post_init__(self):
        if self.d < 1 or self.k < 1 or self.n < 1:
            raise ValueError("d, k and n must be positive")
        if self.k > self.n:
            raise ValueError(f"k={self.k} exceeds n={self.n}")
        if not self.separation > 0:
            raise ValueError("separation must be positive")
        if self.cluster_std is not None and not self.cluster_std > 0:
            raise ValueError("cluster_std must be positive")

    @property
    def std(self) -> float:
        return self.separation / 6.0 if self.cluster_std is None else self.cluster_std


def cluster_sizes(n: int, k: int) -> list[int]:
    """Split ``n`` into ``k`` sizes differing by at most one, larger first."""
    base, extra = divmod(n, k)
    return [base + 1 if j < extra else base for j in range(k)]


MAX_CENTER_ATTEMPTS = 10_000


def _place_centers(spec: SyntheticSpec, rng: np.random.Generator) -> np.ndarray:
    margin = spec.r - 3.0 * spec.std
    if margin < 0:
        raise InfeasibleSpecError(f"cluster_std={spec.std} leaves no room inside [-{spec.r}, {spec.r}]")
    centers: list[np.ndarray] = []
    for _ in range(MAX_CENTER_ATTEMPTS):
        c = rng.uniform(-margin, margin, spec.d)
        if all(np.linalg.norm(c - o) >= spec.separation for o in centers):
            centers.append(c)
            if len(centers) == spec.k:
                return np.array(centers)
    raise InfeasibleSpecError(
        f"could not place {spec.k} centers with separation {spec.separation} "
        f"in {MAX_CENTER_ATTEMPTS} attempts"
    )


def gen_synthetic(spec: SyntheticSpec) -> tuple[Dataset, np.ndarray]:
    """Equal-size isotropic Gaussian clusters clamped to the cube.

    Returns the dataset and the ``k x d`` true centers.
    """
    rng = make_rng(spec.seed)
    centers = _place_centers(spec, rng)
    blocks = [
        rng.normal(centers[j], spec.std, size=(size, spec.d))
        for j, size in enumerate(cluster_sizes(spec.n, spec.k))
    ]
    pts = np.clip(np.vstack(blocks), -spec.r, spec.r)
    prov = f"synthetic(d={spec.d},k={spec.k},n={spec.n},sep={spec.separation},std={spec.std},seed={spec.seed})"
    return Dataset(pts, r=spec.r, provenance=prov), centers
