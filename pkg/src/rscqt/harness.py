"""Convergence studies: simulate, estimate and report over a grid of shot counts and seeds."""
from __future__ import annotations

import csv
import io
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .design import FiducialDesign, SequenceSet, is_scic
from .estimator import RegularizationConfig, estimate, objective, regularization
from .gauge import gauge_distance
from .optimize import OptimizerConfig
from .qops import GateSet, validate
from .serialization import load_gateset, load_json
from .simulator import frequencies, loss, probabilities, sample

log = logging.getLogger(__name__)

CSV_HEADER = ("n", "seed", "sqrt_loss_est_true", "sqrt_loss_true_emp", "gauge_dist", "reg_to_target",
              "r_used", "physical", "runtime_s")
DOMINANCE_TOL = 1e-8
PHYSICAL_TOL = 1e-8


@dataclass
class StudyConfig:
    true_set: GateSet
    target_set: GateSet
    design: SequenceSet
    fiducials: Optional[FiducialDesign]
    n_grid: tuple
    seeds: tuple
    r_schedule: RegularizationConfig = RegularizationConfig("c_over_N", c=1.0)
    output: Optional[str] = None
    optimizer: OptimizerConfig = OptimizerConfig()
    record_runtime: bool = False
    workers: int = 1

    def __post_init__(self):
        self.n_grid = tuple(int(n) for n in self.n_grid)
        self.seeds = tuple(int(s) for s in self.seeds)
        if not self.n_grid or any(b <= a for a, b in zip(self.n_grid, self.n_grid[1:])):
            raise ValueError("n_grid must be non-empty and strictly increasing")
        if self.n_grid[0] < 1:
            raise ValueError("shot counts must be positive")
        if not self.seeds:
            raise ValueError("seeds must be non-empty")
        if not self.true_set.compatible_with(self.target_set):
            raise ValueError("true and target gate sets have different shapes")
        self.design.check_range(self.target_set.n_gates)

    @classmethod
    def from_json(cls, obj: dict, base_dir=".") -> "StudyConfig":
        """Build from a config file; relative paths resolve against ``base_dir``."""
        base = Path(base_dir)

        def path(key):
            if key not in obj:
                raise ValueError(f"study config is missing '{key}'")
            return base / obj[key]

        fiducials = None
        if obj.get("fiducials"):
            fiducials = FiducialDesign.from_json(load_json(path("fiducials")))
        opt = OptimizerConfig(**obj.get("optimizer", {}))
        return cls(
            true_set=load_gateset(path("true_set"), require_physical=True),
            target_set=load_gateset(path("target_set"), require_physical=True),
            design=SequenceSet.from_json(load_json(path("design"))),
            fiducials=fiducials,
            n_grid=tuple(obj["n_grid"]),
            seeds=tuple(obj["seeds"]),
            r_schedule=RegularizationConfig.from_json(obj.get("r_schedule", {})),
            output=str(base / obj["output"]) if obj.get("output") else None,
            optimizer=opt,
            record_runtime=bool(obj.get("record_runtime", False)),
            workers=int(obj.get("workers", 1)),
        )


@dataclass(frozen=True)
class StudyRow:
    n: int
    seed: int
    sqrt_loss_est_true: float
    sqrt_loss_true_emp: float
    gauge_dist: float
    reg_to_target: float
    r_used: float
    physical: bool
    runtime_s: float
    objective_est: float
    objective_true: float
    converged: bool

    @property
    def dominance_ok(self) -> bool:
        return self.objective_est <= self.objective_true + DOMINANCE_TOL


def run_cell(cfg: StudyConfig, n: int, seed: int) -> StudyRow:
    t0 = time.perf_counter()
    p_true = probabilities(cfg.true_set, cfg.design)
    f = frequencies(sample(p_true, n, seed))
    res = estimate(f, cfg.design, cfg.target_set, cfg.r_schedule, cfg.optimizer, fiducials=cfg.fiducials)
    est = res.estimate
    f_true = objective(cfg.true_set, f, cfg.design, cfg.target_set, res.r_used)
    row = StudyRow(
        n=n, seed=seed,
        sqrt_loss_est_true=float(np.sqrt(loss(probabilities(est, cfg.design), p_true))),
        sqrt_loss_true_emp=float(np.sqrt(loss(p_true, f))),
        gauge_dist=gauge_distance(est, cfg.true_set, cfg.fiducials),
        reg_to_target=res.reg_value,
        r_used=res.r_used,
        physical=validate(est, PHYSICAL_TOL, PHYSICAL_TOL).ok,
        runtime_s=time.perf_counter() - t0,
        objective_est=res.objective_value,
        objective_true=f_true,
        converged=res.converged,
    )
    level = logging.INFO if row.dominance_ok else logging.WARNING
    log.log(level, "n=%d seed=%d F(est)=%.12g F(true)=%.12g dominance=%s", n, seed, row.objective_est,
            row.objective_true, row.dominance_ok)
    return row


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    residual: float
    n: tuple
    medians: tuple
    ratios: tuple

    def to_json(self) -> dict:
        return {"slope": self.slope, "intercept": self.intercept, "residual": self.residual,
                "n": list(self.n), "medians": list(self.medians),
                "ratio_to_lnln_rate": [None if not np.isfinite(r) else r for r in self.ratios]}


def lnln_rate(n) -> np.ndarray:
    """``sqrt(ln ln n / n)``; undefined (nan) for ``n <= e``."""
    n = np.asarray(n, dtype=float)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.sqrt(np.log(np.log(n)) / n)
    return np.where(n > np.e, out, np.nan)


def fit_rate(n, values) -> RateFit:
    """Least-squares line through ``(log n, log median(values at n))``."""
    n = np.asarray(n, dtype=float)
    values = np.asarray(values, dtype=float)
    if n.shape != values.shape:
        raise ValueError("n and values must have the same length")
    grid = np.unique(n)
    if grid.size < 3:
        raise ValueError("a rate fit needs at least 3 distinct n values")
    med = np.array([np.median(values[n == x]) for x in grid])
    if np.any(med <= 0) or np.any(grid <= 0):
        raise ValueError("rate fit needs positive n and positive medians")
    x, y = np.log(grid), np.log(med)
    design = np.column_stack([x, np.ones_like(x)])
    (slope, intercept), *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = float(np.linalg.norm(y - design @ np.array([slope, intercept])))
    return RateFit(float(slope), float(intercept), resid, tuple(int(v) for v in grid),
                   tuple(float(v) for v in med), tuple(float(v) for v in med / lnln_rate(grid)))


@dataclass
class StudyResult:
    rows: list
    summary: dict = field(default_factory=dict)


def _median_by_n(rows, attr):
    out = {}
    for n in sorted({r.n for r in rows}):
        out[n] = float(np.median([getattr(r, attr) for r in rows if r.n == n]))
    return out


def summarize(rows, scic_report=None) -> dict:
    fields = ("sqrt_loss_est_true", "sqrt_loss_true_emp", "gauge_dist", "reg_to_target")
    medians = {a: _median_by_n(rows, a) for a in fields}
    ns = sorted(medians["gauge_dist"])
    summary = {
        "per_n": {str(n): {f"median_{a}": medians[a][n] for a in fields} for n in ns},
        "physical_fraction": float(np.mean([r.physical for r in rows])),
        "dominance": {
            "violations": [[r.n, r.seed] for r in rows if not r.dominance_ok],
            "max_excess": float(max(r.objective_est - r.objective_true for r in rows)),
        },
        "converged_fraction": float(np.mean([r.converged for r in rows])),
    }
    if len(ns) >= 3:
        n_arr = [r.n for r in rows]
        summary["rates"] = {a: fit_rate(n_arr, [getattr(r, a) for r in rows]).to_json()
                            for a in ("sqrt_loss_true_emp", "sqrt_loss_est_true")}
    summary["gauge_dist_decreased"] = bool(medians["gauge_dist"][ns[-1]] < medians["gauge_dist"][ns[0]])
    if scic_report is not None:
        summary["design"] = {"is_scic": scic_report.is_scic, "missing": [list(m) for m in scic_report.missing]}
        if not scic_report.is_scic:
            summary["warning"] = "design is not SCIC for the target; gauge distances are not conclusive"
    return summary


def run_study(cfg: StudyConfig) -> StudyResult:
    """Every ``(n, seed)`` cell, rows sorted by ``(n, seed)``, plus a summary."""
    report = None
    if cfg.fiducials is not None:
        report = is_scic(cfg.design, cfg.fiducials, cfg.target_set)
        if not report.is_scic:
            log.warning("design is not SCIC for the target set (missing %d sequences)", len(report.missing))
    cells = [(n, seed) for n in cfg.n_grid for seed in cfg.seeds]
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            rows = list(pool.map(run_cell, [cfg] * len(cells), *zip(*cells)))
    else:
        rows = [run_cell(cfg, n, seed) for n, seed in cells]
    rows.sort(key=lambda r: (r.n, r.seed))
    summary = summarize(rows, report)
    if report is None:
        summary["warning"] = "no fiducial design given; SCIC property not checked"
    return StudyResult(rows, summary)


def _fmt(x: float) -> str:
    return repr(float(x))


def rows_to_csv(rows, record_runtime: bool = False) -> str:
    """Report CSV. ``runtime_s`` is left empty unless requested, which keeps reports byte-identical."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in rows:
        w.writerow([r.n, r.seed, _fmt(r.sqrt_loss_est_true), _fmt(r.sqrt_loss_true_emp), _fmt(r.gauge_dist),
                    _fmt(r.reg_to_target), _fmt(r.r_used), str(r.physical).lower(),
                    f"{r.runtime_s:.3f}" if record_runtime else ""])
    return buf.getvalue()


def rows_from_csv(text: str) -> list:
    """Rows of a report CSV as dictionaries with typed values."""
    out = []
    reader = csv.DictReader(io.StringIO(text))
    if tuple(reader.fieldnames or ()) != CSV_HEADER:
        raise ValueError("unexpected study report header")
    for rec in reader:
        row = {k: float(v) if v else None for k, v in rec.items() if k not in ("n", "seed", "physical")}
        row.update(n=int(rec["n"]), seed=int(rec["seed"]), physical=rec["physical"] == "true")
        out.append(row)
    return out
