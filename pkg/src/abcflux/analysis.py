"""Ensemble orchestration, estimators, and the statistical tests that
operationalize the scaling-limit predictions.

Trajectories are independent: each gets its own deterministic generator
spawned from (master_seed, trajectory_index), and results are merged in
trajectory order, so the whole pipeline is a pure function of the plan.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .dynamics import SimulationClock, evolve_to
from .errors import ConfigurationError, ParameterError
from .fields import (FieldContext, FieldRecorder, FieldSeries, NormalModeConstants,
                     check_wrap_margin, default_dt, normal_mode_constants)
from .kernel import (KernelTables, ModelParams, build_rate_model, build_tables,
                     check_truncation)
from .lattice import sample_invariant
from .operators import TestFunction


def trajectory_rng(master_seed: int, index: int) -> np.random.Generator:
    """Independent per-trajectory stream: PCG64 seeded by
    SeedSequence(master_seed, spawn_key=(index,))."""
    return np.random.Generator(
        np.random.PCG64(np.random.SeedSequence(master_seed, spawn_key=(index,))))


@dataclass(frozen=True)
class ExperimentPlan:
    """One ensemble: parameters, horizon, observables, and the master seed.

    Identical plans with identical seeds produce identical outputs.
    """

    params: ModelParams
    test_function: TestFunction
    trajectories: int
    horizon: float
    master_seed: int = 0
    dt: float | None = None
    pair_terms: bool = False
    block_eps: tuple[float, ...] = ()
    quad_eps: tuple[float, ...] = ()
    energy_eps: tuple[float, ...] = ()
    r_cut: int | None = None

    def sample_times(self, constants: NormalModeConstants) -> np.ndarray:
        dt = self.dt if self.dt is not None else default_dt(self.params.n, constants)
        count = max(1, int(round(self.horizon / dt)))
        return np.linspace(0.0, self.horizon, count + 1)


@dataclass
class EnsembleResult:
    plan: ExperimentPlan
    tables: KernelTables
    constants: NormalModeConstants
    series: list[FieldSeries]

    def stacked(self, getter) -> np.ndarray:
        return np.array([getter(s) for s in self.series])


def _simulate_one(plan: ExperimentPlan, context: FieldContext, index: int,
                  times: np.ndarray) -> FieldSeries:
    rng = trajectory_rng(plan.master_seed, index)
    config = sample_invariant(plan.params.densities, plan.params.lattice_size, rng)
    clock = SimulationClock()
    recorder = FieldRecorder(
        context, times, trajectory_id=index, pair_terms=plan.pair_terms,
        block_eps=plan.block_eps, quad_eps=plan.quad_eps,
        energy_eps=plan.energy_eps)
    rate_model = build_rate_model(plan.params.k_n, plan.params.energies)
    evolve_to(config, clock, plan.horizon, [recorder], rate_model,
              context.tables, rng)
    return recorder.to_series()


_WORKER_STATE: dict = {}


def _init_worker(plan: ExperimentPlan):
    tables = build_tables(plan.params)
    constants = normal_mode_constants(plan.params, tables)
    context = FieldContext(plan.params, tables, constants, plan.test_function,
                           r_cut=plan.r_cut)
    _WORKER_STATE["plan"] = plan
    _WORKER_STATE["context"] = context
    _WORKER_STATE["times"] = plan.sample_times(constants)


def _worker_run(index: int) -> FieldSeries:
    return _simulate_one(_WORKER_STATE["plan"], _WORKER_STATE["context"], index,
                         _WORKER_STATE["times"])


def run_ensemble(plan: ExperimentPlan, threads: int = 1) -> EnsembleResult:
    """Simulate the plan's trajectories independently and merge them in order."""
    tables = build_tables(plan.params)
    check_truncation(tables)
    constants = normal_mode_constants(plan.params, tables)
    check_wrap_margin(plan.params, constants, plan.test_function, plan.horizon)
    times = plan.sample_times(constants)
    if plan.trajectories == 0:
        return EnsembleResult(plan, tables, constants, [])
    if threads <= 1:
        context = FieldContext(plan.params, tables, constants, plan.test_function,
                               r_cut=plan.r_cut)
        series = [_simulate_one(plan, context, i, times)
                  for i in range(plan.trajectories)]
    else:
        with ProcessPoolExecutor(max_workers=threads, initializer=_init_worker,
                                 initargs=(plan,)) as pool:
            series = list(pool.map(_worker_run, range(plan.trajectories),
                                   chunksize=max(1, plan.trajectories // (4 * threads))))
    return EnsembleResult(plan, tables, constants, series)


def static_field_samples(params: ModelParams, h: TestFunction, n_samples: int,
                         master_seed: int = 0) -> np.ndarray:
    """(n_samples, 2) array of (Z+, Z-) under the invariant product measure."""
    tables = build_tables(params)
    constants = normal_mode_constants(params, tables)
    context = FieldContext(params, tables, constants, h)
    out = np.empty((n_samples, 2))
    for i in range(n_samples):
        rng = trajectory_rng(master_seed, i)
        config = sample_invariant(params.densities, params.lattice_size, rng)
        out[i, 0] = context.field_value(config, 1, 0.0)
        out[i, 1] = context.field_value(config, -1, 0.0)
    return out


# ---------------------------------------------------------------------------
# estimators
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EstimatorReport:
    name: str
    estimate: float
    se: float
    batches: int
    ess: float
    reference: float | None = None
    z_score: float | None = None

    def with_reference(self, reference: float) -> "EstimatorReport":
        if self.se > 0:
            z = (self.estimate - reference) / self.se
        else:
            z = 0.0 if self.estimate == reference else math.inf
        return replace(self, reference=reference, z_score=z)


def batch_mean_estimate(values, batches: int | None = None,
                        name: str = "") -> EstimatorReport:
    """Mean with standard error.

    With `batches` None the samples are treated as i.i.d. (one value per
    independent trajectory) and the plain SE applies; otherwise the series is
    split into `batches` contiguous batches and the SE comes from the batch
    means (for autocorrelated within-trajectory series).
    """
    vals = np.asarray(values, dtype=float)
    if vals.ndim != 1 or vals.size == 0:
        raise ParameterError("batch_mean_estimate needs a nonempty 1-d array")
    mean = float(vals.mean())
    if batches is None:
        n = vals.size
        se = float(vals.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
        return EstimatorReport(name=name, estimate=mean, se=se, batches=n, ess=n)
    if batches < 2:
        raise ParameterError("need at least 2 batches")
    if vals.size < batches:
        raise ParameterError(
            f"fewer samples ({vals.size}) than batches ({batches})")
    usable = (vals.size // batches) * batches
    means = vals[:usable].reshape(batches, -1).mean(axis=1)
    se = float(means.std(ddof=1) / math.sqrt(batches))
    var_full = float(vals.var(ddof=1))
    ess = var_full / (se * se) if se > 0 else float(vals.size)
    return EstimatorReport(name=name, estimate=mean, se=se, batches=batches,
                           ess=min(ess, float(vals.size)))


@dataclass(frozen=True)
class TestResult:
    name: str
    estimate: float
    reference: float
    se: float
    z: float
    passed: bool


def test_limit_prediction(reports, tolerance_sigma: float = 4.0) -> list[TestResult]:
    """Pass each report iff |estimate - reference| <= tolerance_sigma * SE.

    The default 4-sigma threshold keeps the family-wise false-failure rate of
    the full battery below 1% (two-sided 4-sigma ~ 6e-5 per test).
    """
    results = []
    for rep in reports:
        if rep.reference is None:
            raise ConfigurationError(f"report {rep.name!r} lacks a reference value")
        if rep.se > 0:
            z = (rep.estimate - rep.reference) / rep.se
        else:
            z = 0.0 if rep.estimate == rep.reference else math.inf
        results.append(TestResult(
            name=rep.name, estimate=rep.estimate, reference=rep.reference,
            se=rep.se, z=z, passed=abs(z) <= tolerance_sigma))
    return results


def fit_power_law(xs, ys) -> tuple[float, float, float]:
    """Least squares on log-log: returns (exponent, intercept, r_squared)."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.size < 3:
        raise ParameterError("power-law fit needs at least 3 points")
    if np.any(x <= 0) or np.any(y <= 0):
        raise ParameterError("power-law fit needs positive data")
    lx, ly = np.log(x), np.log(y)
    slope, intercept = np.polyfit(lx, ly, 1)
    pred = slope * lx + intercept
    ss_res = float(np.sum((ly - pred) ** 2))
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r_sq = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), r_sq
