"""Monte Carlo harness checking that sample estimators hit their population targets.

Replication ``r`` of an experiment with base seed ``seed`` draws from the
stream ``numpy.random.default_rng([seed, r])``, so replications are
order-independent and the report is a deterministic function of the
experiment.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import estimation as est
from . import identification as ident
from .errors import CompShockError, InvalidArgumentError
from .svma import AugmentedSvmaModel, InstrumentSpec, simulate

logger = logging.getLogger(__name__)

TARGETS = ("lpiv", "cumulative_lpiv", "sectoral", "sectoral_cumulative", "gmm_test")


class ReplicationError(CompShockError):
    def __init__(self, replication: int, cause: Exception):
        super().__init__(f"replication {replication} failed: {type(cause).__name__}: {cause}")
        self.replication = replication
        self.cause = cause
        self.exit_code = getattr(cause, "exit_code", 1)


@dataclass
class Experiment:
    model: object
    specs: Sequence[InstrumentSpec]
    T: int
    horizons: Sequence[int] = (0,)
    replications: int = 100
    seed: int = 0
    target: str = "lpiv"
    instrument: int = 0
    instruments: Optional[Sequence[int]] = None
    controls: est.ControlSpec = field(default_factory=est.ControlSpec)
    weighting: str = "2sls"
    bandwidth: Optional[int] = None
    loading_pattern: Optional[np.ndarray] = None
    se_multiplier: float = 3.0
    coverage_threshold: float = 0.90
    test_level: float = 0.05
    size_tolerance: float = 0.03

    def validate(self) -> None:
        if self.replications < 1:
            raise InvalidArgumentError("an experiment needs at least one replication")
        if self.target not in TARGETS:
            raise InvalidArgumentError(f"unknown target {self.target!r}; choose from {TARGETS}")
        if not self.horizons:
            raise InvalidArgumentError("at least one horizon is required")
        if self.T <= self.controls.lags + max(self.horizons):
            raise InvalidArgumentError("T must exceed the lag order plus the largest horizon")
        if self.target.startswith("sectoral") or self.target == "gmm_test":
            if not isinstance(self.model, AugmentedSvmaModel):
                raise InvalidArgumentError(f"target {self.target!r} needs an augmented model")


@dataclass
class HorizonSummary:
    horizon: int
    target: np.ndarray
    mean_estimate: np.ndarray
    mc_sd: np.ndarray
    mean_se: np.ndarray
    coverage: float
    bias: np.ndarray


@dataclass
class ExperimentReport:
    target: str
    T: int
    replications: int
    seed: int
    rows: list
    rejection_rates: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    passed: dict = field(default_factory=dict)
    estimates: Optional[np.ndarray] = None

    @property
    def all_passed(self) -> bool:
        return all(self.passed.values())

    def table(self) -> list:
        """Tidy rows: one per horizon and component."""
        out = []
        for row in self.rows:
            for k in range(row.target.size):
                out.append({
                    "horizon": row.horizon, "component": k + 1,
                    "target": float(row.target[k]), "mean": float(row.mean_estimate[k]),
                    "bias": float(row.bias[k]), "mc_sd": float(row.mc_sd[k]),
                    "mean_se": float(row.mean_se[k]), "coverage": row.coverage,
                })
        for h, rate in self.rejection_rates.items():
            out.append({"horizon": h, "component": 0, "rejection_rate": rate})
        return out


def population_targets(e: Experiment) -> dict:
    """Population value per horizon, computed from the model alone."""
    spec = e.specs[e.instrument]
    out = {}
    for h in e.horizons:
        if e.target == "lpiv":
            out[h] = np.array([ident.lpiv_estimand(e.model, spec, h)])
        elif e.target == "cumulative_lpiv":
            out[h] = np.array([ident.cumulative_lpiv_estimand(e.model, spec, h).estimand])
        elif e.target == "sectoral":
            out[h] = ident.sectoral_targets(e.model, h)
        elif e.target == "sectoral_cumulative":
            out[h] = ident.sectoral_targets(e.model, h, cumulative=True)
        else:
            out[h] = np.array([float(e.model.satisfies_no_intersectoral())])
    return out


def _estimate(e: Experiment, panel, h: int) -> tuple:
    if e.target in ("lpiv", "cumulative_lpiv"):
        r = est.lpiv_estimate(panel, e.instrument, h, e.controls,
                              cumulative=e.target == "cumulative_lpiv", bandwidth=e.bandwidth)
        return np.array([r.point]), np.array([r.std_errors])
    if e.target.startswith("sectoral"):
        r = est.sectoral_irf_estimate(panel, e.instruments, h, e.controls, e.weighting,
                                      cumulative=e.target == "sectoral_cumulative",
                                      bandwidth=e.bandwidth)
        return r.point, r.std_errors
    r = est.gmm_test_no_intersectoral(panel, e.instruments, h, e.controls,
                                      loading_pattern=e.loading_pattern, bandwidth=e.bandwidth)
    return np.array([r.p_value]), np.array([r.statistic])


def run_replication(e: Experiment, r: int) -> list:
    """Estimates and standard errors for one replication, per horizon."""
    panel = simulate(e.model, e.specs, e.T, seed=[e.seed, r])
    try:
        return [_estimate(e, panel, h) for h in e.horizons]
    except CompShockError as exc:
        raise ReplicationError(r, exc) from exc


def _replicate(args):
    return run_replication(*args)


def run_experiment(e: Experiment, n_jobs: int = 1) -> ExperimentReport:
    """Run ``e.replications`` simulate-estimate-compare cycles.

    ``n_jobs > 1`` spreads replications over processes; results are folded
    in replication order, so the report does not depend on ``n_jobs``.
    """
    e.validate()
    targets = population_targets(e)
    jobs = [(e, r) for r in range(e.replications)]
    if n_jobs > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(_replicate, jobs))
    else:
        results = [_replicate(job) for job in jobs]
    est_arr = np.array([[res[k][0] for k in range(len(e.horizons))] for res in results])
    se_arr = np.array([[res[k][1] for k in range(len(e.horizons))] for res in results])
    report = ExperimentReport(target=e.target, T=e.T, replications=e.replications, seed=e.seed,
                              rows=[], estimates=est_arr)
    if e.target == "gmm_test":
        report.tolerances = {"level": e.test_level, "size_tolerance": e.size_tolerance}
        null_true = bool(targets[e.horizons[0]][0])
        for k, h in enumerate(e.horizons):
            rate = float(np.mean(est_arr[:, k, 0] < e.test_level))
            report.rejection_rates[h] = rate
            if null_true:
                report.passed[f"size h={h}"] = abs(rate - e.test_level) <= e.size_tolerance
        return report
    report.tolerances = {"se_multiplier": e.se_multiplier,
                         "coverage_threshold": e.coverage_threshold}
    for k, h in enumerate(e.horizons):
        target = targets[h]
        point, se = est_arr[:, k, :], se_arr[:, k, :]
        covered = np.all(np.abs(point - target) <= e.se_multiplier * se, axis=1)
        mean = point.mean(axis=0)
        sd = point.std(axis=0, ddof=1) if e.replications > 1 else np.zeros_like(mean)
        row = HorizonSummary(horizon=h, target=target, mean_estimate=mean, mc_sd=sd,
                             mean_se=se.mean(axis=0), coverage=float(covered.mean()),
                             bias=mean - target)
        report.rows.append(row)
        report.passed[f"coverage h={h}"] = row.coverage >= e.coverage_threshold
    return report


@dataclass
class BiasCurve:
    rows: list
    passed: bool
    reports: list = field(default_factory=list)


def bias_curve(e: Experiment, T_grid: Sequence[int], rel_tol: float = 0.05,
               abs_tol: float = 0.02, n_jobs: int = 1) -> BiasCurve:
    """Absolute bias ``|mean estimate - target|`` for each sample size.

    Only the largest sample size is held to ``bias < rel_tol*|target| + abs_tol``;
    no monotone decline is required.
    """
    if e.target == "gmm_test":
        raise InvalidArgumentError("bias curves apply to point targets only")
    rows, reports = [], []
    T_grid = list(T_grid)
    if not T_grid:
        raise InvalidArgumentError("T grid must be nonempty")
    for T in T_grid:
        sub = Experiment(**{**e.__dict__, "T": int(T)})
        rep = run_experiment(sub, n_jobs=n_jobs)
        reports.append(rep)
        for row in rep.rows:
            for k in range(row.target.size):
                rows.append({"T": int(T), "horizon": row.horizon, "component": k + 1,
                             "target": float(row.target[k]), "mean": float(row.mean_estimate[k]),
                             "bias": float(abs(row.bias[k])),
                             "mc_se": float(row.mc_sd[k] / np.sqrt(rep.replications))})
    T_max = max(T_grid)
    passed = all(r["bias"] < rel_tol * abs(r["target"]) + abs_tol for r in rows if r["T"] == T_max)
    return BiasCurve(rows, passed, reports)
