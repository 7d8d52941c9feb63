"""Config-driven benchmark runs: shared init sets, a non-private baseline and
per-algorithm repetition/averaging rules, reported as CSV.

Every repetition draws its randomness from a seed derived from
``(master_seed, algorithm, eps, repetition)``, so reports do not depend on
execution order, and every repetition must spend exactly its budget.
"""

from __future__ import annotations

import copy
import dataclasses
import io
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import Dataset, SyntheticSpec, gen_synthetic, load_csv, normalize
from .dplloyd import DPLloydParams, dplloyd, dplloyd_one_round
from .error_models import (DEFAULT_RHO, ErrorModelParams, predict_dplloyd_mse, predict_eugkm_bias_bound,
                           predict_eugkm_variance, predict_hybrid_one_round_mse)
from .eugkm import DEFAULT_THETA, eugkm
from .gkm import BlockPolicy, gkm
from .hybrid import decide
from .kmeans import lloyd, nicv, sphere_packing_init
from .mechanisms import Budget, budget_tolerance, derive_seed, make_rng
from .pgkm import pgkm

ALGORITHMS = ("lloyd_baseline", "dplloyd", "gkm", "gkm3k", "pgkm", "eugkm", "hybrid")
REPORT_HEADER = "algorithm,eps,mean_nicv,std_nicv,n_runs,wall_ms"

# repetition counts: dplloyd counts runs per init set, eugkm and hybrid count
# synopses, hybrid_refine counts one-round refinements per synopsis
FULL_PROTOCOL = {"init_sets": 30, "dplloyd": 100, "gkm": 100, "gkm3k": 100, "pgkm": 100,
                 "eugkm": 10, "hybrid": 10, "hybrid_refine": 10}
DESK_PROTOCOL = {"init_sets": 10, "dplloyd": 10, "gkm": 10, "gkm3k": 10, "pgkm": 10,
                 "eugkm": 10, "hybrid": 10, "hybrid_refine": 10}
PROTOCOLS = {"full": FULL_PROTOCOL, "desk": DESK_PROTOCOL}


class ConfigError(ValueError):
    pass


class BudgetAuditError(AssertionError):
    pass


# --------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class ExperimentConfig:
    k: int
    eps_list: tuple[float, ...]
    algorithms: tuple[str, ...]
    dataset_path: str | None = None
    synthetic: SyntheticSpec | None = None
    r: float = 1.0
    protocol: str = "desk"
    reps: dict = field(default_factory=dict)
    init_sets: int | None = None
    master_seed: int = 0
    theta: float = DEFAULT_THETA
    rho: float = DEFAULT_RHO
    t: int = 5

    def __post_init__(self):
        if self.k < 1:
            raise ConfigError(f"k must be >= 1, got {self.k}")
        if not self.eps_list or any(not (e > 0 and math.isfinite(e)) for e in self.eps_list):
            raise ConfigError("eps must be a non-empty list of positive numbers")
        if not self.algorithms:
            raise ConfigError("algorithms must be non-empty")
        for a in self.algorithms:
            if a not in ALGORITHMS:
                raise ConfigError(f"unknown algorithm {a!r}; choose from {', '.join(ALGORITHMS)}")
        if (self.dataset_path is None) == (self.synthetic is None):
            raise ConfigError("give exactly one of dataset.path or synthetic.*")
        if self.protocol not in PROTOCOLS:
            raise ConfigError(f"protocol must be 'desk' or 'full', got {self.protocol!r}")
        for key, v in self.reps.items():
            if key not in FULL_PROTOCOL or key == "init_sets":
                raise ConfigError(f"unknown reps key reps.{key}")
            if v < 1:
                raise ConfigError(f"reps.{key} must be >= 1")
        if self.init_sets is not None and self.init_sets < 1:
            raise ConfigError("init_sets must be >= 1")
        if not self.r > 0 or not self.theta > 0 or self.t < 1:
            raise ConfigError("r, theta and t must be positive")
        if not 0 <= self.rho <= 0.5:
            raise ConfigError("rho must be in [0, 0.5]")

    def count(self, key: str) -> int:
        if key == "init_sets":
            return self.init_sets if self.init_sets is not None else PROTOCOLS[self.protocol]["init_sets"]
        return int(self.reps.get(key, PROTOCOLS[self.protocol][key]))

    def with_protocol(self, protocol: str) -> "ExperimentConfig":
        return dataclasses.replace(self, protocol=protocol)


def _floats(text: str, key: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError as exc:
        raise ConfigError(f"{key}: expected a comma-separated list of numbers, got {text!r}") from exc


def _int(text: str, key: str) -> int:
    try:
        return int(text)
    except ValueError as exc:
        raise ConfigError(f"{key}: expected an integer, got {text!r}") from exc


def _float(text: str, key: str) -> float:
    try:
        return float(text)
    except ValueError as exc:
        raise ConfigError(f"{key}: expected a number, got {text!r}") from exc


def parse_config(text: str, base_dir: Path | None = None) -> ExperimentConfig:
    """Parse flat ``key = value`` lines; ``#`` starts a comment."""
    kv: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key in kv:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        kv[key] = value

    known = {"dataset.path", "k", "r", "eps", "algorithms", "seed", "init_sets", "theta", "rho", "t", "protocol"}
    syn_keys = {"synthetic.d", "synthetic.k", "synthetic.n", "synthetic.separation", "synthetic.std",
                "synthetic.seed"}
    for key in kv:
        if key not in known and key not in syn_keys and not key.startswith("reps."):
            raise ConfigError(f"unknown key {key!r}")
    r = _float(kv.get("r", "1"), "r")
    synthetic = None
    if any(key in kv for key in syn_keys):
        try:
            synthetic = SyntheticSpec(
                d=_int(kv.get("synthetic.d", ""), "synthetic.d"),
                k=_int(kv.get("synthetic.k", kv.get("k", "")), "synthetic.k"),
                n=_int(kv.get("synthetic.n", ""), "synthetic.n"),
                separation=_float(kv.get("synthetic.separation", "0.5"), "synthetic.separation"),
                cluster_std=_float(kv["synthetic.std"], "synthetic.std") if "synthetic.std" in kv else None,
                seed=_int(kv.get("synthetic.seed", kv.get("seed", "0")), "synthetic.seed"),
                r=r,
            )
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"synthetic: {exc}") from exc
    path = kv.get("dataset.path")
    if path is not None and base_dir is not None and not Path(path).is_absolute():
        path = str(base_dir / path)
    if "k" not in kv:
        raise ConfigError("missing required key 'k'")
    if "eps" not in kv:
        raise ConfigError("missing required key 'eps'")
    reps = {key[5:]: _int(v, key) for key, v in kv.items() if key.startswith("reps.")}
    algorithms = tuple(a.strip() for a in kv.get("algorithms", ",".join(ALGORITHMS)).split(",") if a.strip())
    return ExperimentConfig(
        k=_int(kv["k"], "k"),
        eps_list=_floats(kv["eps"], "eps"),
        algorithms=algorithms,
        dataset_path=path,
        synthetic=synthetic,
        r=r,
        protocol=kv.get("protocol", "desk"),
        reps=reps,
        init_sets=_int(kv["init_sets"], "init_sets") if "init_sets" in kv else None,
        master_seed=_int(kv.get("seed", "0"), "seed"),
        theta=_float(kv.get("theta", str(DEFAULT_THETA)), "theta"),
        rho=_float(kv.get("rho", str(DEFAULT_RHO)), "rho"),
        t=_int(kv.get("t", "5"), "t"),
    )


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    return parse_config(path.read_text(encoding="utf-8"), path.parent)


def load_dataset(cfg: ExperimentConfig) -> Dataset:
    if cfg.synthetic is not None:
        return gen_synthetic(cfg.synthetic)[0]
    return normalize(load_csv(cfg.dataset_path), cfg.r)


# --------------------------------------------------------------------------
# protocol pieces


def make_init_sets(d: int, k: int, r: float, count: int, master_seed: int) -> list[np.ndarray]:
    """``count`` sphere-packing initialisations, seeded by (master_seed, index)."""
    if count < 1:
        raise ValueError("count must be >= 1")
    return [sphere_packing_init(d, k, r, derive_seed(master_seed, "init", i)) for i in range(count)]


def run_baseline(data, init_sets) -> float:
    """Lowest NICV of non-private Lloyd over the init sets."""
    if len(init_sets) == 0:
        raise ValueError("need at least one init set")
    return min(nicv(data, lloyd(data, init)) for init in init_sets)


def _audit(budget: Budget, eps: float, what: str) -> None:
    if abs(budget.spent - eps) > budget_tolerance(eps):
        raise BudgetAuditError(f"{what}: spent {budget.spent!r} of eps={eps!r}")


@dataclass
class ReportRow:
    algorithm: str
    eps: float | None
    mean_nicv: float
    std_nicv: float
    n_runs: int
    wall_ms: float | None = None


@dataclass
class Report:
    rows: list[ReportRow]
    baseline_nicv: float | None = None

    def row(self, algorithm: str, eps: float | None = None) -> ReportRow:
        for r in self.rows:
            if r.algorithm == algorithm and (eps is None or r.eps == eps):
                return r
        raise KeyError((algorithm, eps))

    def to_csv(self, timing: bool = False) -> str:
        out = io.StringIO()
        out.write(REPORT_HEADER + "\n")
        for r in self.rows:
            eps = "" if r.eps is None else repr(float(r.eps))
            wall = f"{r.wall_ms:.1f}" if timing and r.wall_ms is not None else ""
            out.write(f"{r.algorithm},{eps},{float(r.mean_nicv)!r},{float(r.std_nicv)!r},{r.n_runs},{wall}\n")
        return out.getvalue()


def _summary(values) -> tuple[float, float]:
    v = np.asarray(values, dtype=float)
    return float(v.mean()), float(v.std(ddof=1)) if v.size > 1 else 0.0


def run_algorithm(name: str, data: Dataset, eps: float, init_sets, cfg: ExperimentConfig) -> list[float]:
    """Raw-data NICVs of every repetition of ``name`` at ``eps``."""
    X, k, r, seed = data.points, cfg.k, cfg.r, cfg.master_seed
    out: list[float] = []

    def fresh(*labels):
        return make_rng(derive_seed(seed, name, float(eps), *labels)), Budget(eps)

    if name == "dplloyd":
        for i, init in enumerate(init_sets):
            for j in range(cfg.count("dplloyd")):
                rng, b = fresh(i, j)
                C = dplloyd(X, init, eps, DPLloydParams(cfg.t, r), rng, b)
                _audit(b, eps, f"dplloyd rep ({i}, {j})")
                out.append(nicv(X, C))
    elif name in ("gkm", "gkm3k"):
        policy = BlockPolicy.n_pow_04() if name == "gkm" else BlockPolicy.three_k()
        for j in range(cfg.count(name)):
            rng, b = fresh(j)
            C = gkm(X, k, eps, policy, rng, b, r)
            _audit(b, eps, f"{name} rep {j}")
            out.append(nicv(X, C))
    elif name == "pgkm":
        for j in range(cfg.count("pgkm")):
            rng, b = fresh(j)
            C = pgkm(X, k, eps, rng=rng, budget=b, r=r)
            _audit(b, eps, f"pgkm rep {j}")
            out.append(nicv(X, C))
    elif name == "eugkm":
        for j in range(cfg.count("eugkm")):
            rng, b = fresh(j)
            C, _ = eugkm(X, k, eps, cfg.theta, init_sets, rng, b, r)
            _audit(b, eps, f"eugkm rep {j}")
            out.append(nicv(X, C))
    elif name == "hybrid":
        out = _run_hybrid(data, eps, init_sets, cfg, fresh)
    else:
        raise ConfigError(f"unknown algorithm {name!r}")
    return out


def _run_hybrid(data, eps, init_sets, cfg, fresh) -> list[float]:
    """Each synopsis seeds several one-round refinements; every
    (synopsis, refinement) pair is one run costing ``eps``. When the
    threshold rule falls back, each synopsis is one EUGkM run."""
    X, k, r = data.points, cfg.k, cfg.r
    decision = decide(data.n, data.d, k, eps, r, cfg.rho, cfg.t)
    out = []
    for s in range(cfg.count("hybrid")):
        rng, b = fresh(s)
        if not decision.applied_hybrid:
            with b.scope("eugkm"):
                C, _ = eugkm(X, k, eps, cfg.theta, init_sets, rng, b, r)
            _audit(b, eps, f"hybrid (fallback) rep {s}")
            out.append(nicv(X, C))
            continue
        with b.scope("eugkm"):
            C0, _ = eugkm(X, k, eps / 2.0, cfg.theta, init_sets, rng, b, r)
        for j in range(cfg.count("hybrid_refine")):
            rng_j, _ = fresh(s, j)
            bj = copy.deepcopy(b)  # the shared synopsis is charged to every run
            with bj.scope("dplloyd_one_round"):
                C = dplloyd_one_round(X, C0, eps - eps / 2.0, r, rng_j, bj)
            _audit(bj, eps, f"hybrid rep ({s}, {j})")
            out.append(nicv(X, C))
    return out


def run_experiment(cfg: ExperimentConfig, data: Dataset | None = None) -> Report:
    data = load_dataset(cfg) if data is None else data
    init_sets = make_init_sets(data.d, cfg.k, cfg.r, cfg.count("init_sets"), cfg.master_seed)
    t0 = time.perf_counter()
    baseline = run_baseline(data, init_sets)
    rows = []
    if "lloyd_baseline" in cfg.algorithms:
        rows.append(ReportRow("lloyd_baseline", None, baseline, 0.0, len(init_sets),
                              (time.perf_counter() - t0) * 1000.0))
    for name in cfg.algorithms:
        if name == "lloyd_baseline":
            continue
        for eps in cfg.eps_list:
            t0 = time.perf_counter()
            values = run_algorithm(name, data, eps, init_sets, cfg)
            mean, std = _summary(values)
            rows.append(ReportRow(name, eps, mean, std, len(values), (time.perf_counter() - t0) * 1000.0))
    return Report(rows, baseline)


# --------------------------------------------------------------------------
# error-model table

PREDICT_HEADER = ("N,d,k,eps,t,r,rho,theta,M,dplloyd_mse,eugkm_variance,eugkm_bias_bound,"
                  "hybrid_one_round_mse,eps_threshold,applied_hybrid")


def predict_table(Ns, ds, ks, eps_list, t: int = 5, r: float = 1.0, rho: float = DEFAULT_RHO,
                  theta: float = DEFAULT_THETA) -> str:
    """CSV of every predictor and the hybrid threshold over the lattice."""
    lines = [PREDICT_HEADER]
    for N in Ns:
        for d in ds:
            for k in ks:
                for eps in eps_list:
                    p = ErrorModelParams(N=N, d=d, k=k, eps=eps, t=t, r=r, rho=rho, theta=theta)
                    dec = decide(N, d, k, eps, r, rho, t)
                    vals = [N, d, k, eps, t, r, rho, theta, p.cells, predict_dplloyd_mse(p),
                            predict_eugkm_variance(p), predict_eugkm_bias_bound(p),
                            predict_hybrid_one_round_mse(p), dec.eps_threshold]
                    lines.append(",".join(repr(v) if isinstance(v, float) else str(v) for v in vals)
                                 + f",{str(dec.applied_hybrid).lower()}")
    return "\n".join(lines) + "\n"
