"""Continuous-time Markov evolution of the configuration, plus exact
small-system oracles (dense generator matrices and the product-measure
stationarity check).

Exchanges are simulated by thinning: attempts arrive as a Poisson process at
the constant rate Theta(n) * L * r_max * (1 - truncated_mass); an attempt picks
a uniform site, a displacement from the renormalized truncated kernel, and is
accepted with probability r_{x,x+z}(eta)/r_max. The accepted-jump chain then
realizes exactly the truncated-kernel generator
Q(eta, eta^{x,y}) = Theta(n) p(y - x) r_{x,y}(eta).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._fastloop import apply_events
from .errors import ParameterError
from .kernel import KernelTables, ModelParams, RateModel, build_rate_model, build_tables
from .lattice import Configuration

_CHUNK = 1 << 16


@dataclass
class SimulationClock:
    """Macroscopic time (the generator already contains Theta(n)) and the
    number of attempted events."""

    macro_time: float = 0.0
    event_count: int = 0


@dataclass(frozen=True)
class JumpProposal:
    x: int
    z: int
    accept_prob: float


def attempt_rate(tables: KernelTables, rate_model: RateModel) -> float:
    """Total Poisson attempt rate of the thinned chain."""
    return tables.theta_n * tables.lattice_size * rate_model.r_max * tables.p_mass


def sample_displacement(tables: KernelTables, rng: np.random.Generator) -> int:
    """Draw z from the truncated, renormalized kernel."""
    j = int(np.searchsorted(tables.cdf, rng.random(), side="right"))
    return int(tables.displacements[min(j, tables.displacements.shape[0] - 1)])


def propose(config: Configuration, rate_model: RateModel, tables: KernelTables,
            rng: np.random.Generator) -> JumpProposal | None:
    """One uniform-site/kernel-displacement proposal; None when the species match."""
    x = int(rng.integers(0, config.size))
    z = sample_displacement(tables, rng)
    y = (x + z) % config.size
    a, b = int(config.species[x]), int(config.species[y])
    if a == b:
        return None
    return JumpProposal(x=x, z=z, accept_prob=float(rate_model.acceptance[a, b]))


def step(config: Configuration, clock: SimulationClock, rate_model: RateModel,
         tables: KernelTables, rng: np.random.Generator) -> None:
    """Advance by one attempt: exponential clock, thinning accept/reject."""
    rate = attempt_rate(tables, rate_model)
    clock.macro_time += rng.exponential(1.0 / rate)
    clock.event_count += 1
    prop = propose(config, rate_model, tables, rng)
    if prop is None:
        return
    if rng.random() < prop.accept_prob:
        y = (prop.x + prop.z) % config.size
        sp = config.species
        sp[prop.x], sp[y] = sp[y], sp[prop.x]


def _run_attempts(config: Configuration, count: int, tables: KernelTables,
                  rate_model: RateModel, rng: np.random.Generator) -> int:
    """Apply `count` attempts in fixed-size chunks; returns accepted swaps."""
    swaps = 0
    disps = tables.displacements.astype(np.int64)
    acceptance = np.ascontiguousarray(rate_model.acceptance)
    remaining = count
    while remaining > 0:
        m = min(remaining, _CHUNK)
        sites = rng.integers(0, config.size, m, dtype=np.int64)
        u_disp = rng.random(m)
        u_acc = rng.random(m)
        swaps += apply_events(config.species, sites, u_disp, u_acc,
                              tables.cdf, disps, acceptance)
        remaining -= m
    return swaps


def evolve_to(config: Configuration, clock: SimulationClock, t_target: float,
              observers, rate_model: RateModel, tables: KernelTables,
              rng: np.random.Generator) -> None:
    """Evolve the chain to t_target, invoking each observer at its sample times.

    The state handed to an observer at time t is the state after the last
    attempt before t (piecewise-constant sampling). Attempt counts per
    inter-sample interval are Poisson with the constant total attempt rate,
    which is distributionally identical to the per-event exponential clock.
    """
    if t_target < clock.macro_time:
        raise ParameterError(
            f"t_target={t_target} precedes the current time {clock.macro_time}")
    observers = list(observers)
    for obs in observers:
        times = np.asarray(obs.times, dtype=float)
        if times.ndim != 1 or np.any(np.diff(times) < 0):
            raise ParameterError("observer sample grid must be a sorted 1-d array")
    rate = attempt_rate(tables, rate_model)
    # merged strictly-increasing schedule of observation times in [now, t_target]
    observed = {float(t) for obs in observers for t in np.asarray(obs.times, dtype=float)
                if clock.macro_time <= t <= t_target}
    for t_stop in sorted(observed | {float(t_target)}):
        dt = t_stop - clock.macro_time
        if dt > 0:
            count = int(rng.poisson(rate * dt))
            _run_attempts(config, count, tables, rate_model, rng)
            clock.event_count += count
            clock.macro_time = t_stop
        if t_stop in observed:
            for obs in observers:
                if np.any(np.asarray(obs.times, dtype=float) == t_stop):
                    obs.record(t_stop, config, clock)


@dataclass
class GridObserver:
    """Callback observer over a fixed sample grid."""

    times: np.ndarray
    callback: object

    def record(self, t, config, clock):
        self.callback(t, config, clock)


def _digit_matrix(size: int) -> np.ndarray:
    """All 3^size species assignments, one row per state, base-3 little-endian."""
    n_states = 3 ** size
    states = np.arange(n_states)
    digits = np.empty((n_states, size), dtype=np.int64)
    for x in range(size):
        digits[:, x] = (states // 3 ** x) % 3
    return digits


def exact_generator(params: ModelParams, l_small: int,
                    rates: np.ndarray | None = None) -> np.ndarray:
    """Dense rate matrix over all 3^l_small states on the small torus.

    Q(eta, eta^{x,y}) = Theta(n) p(y-x) r_{x,y}(eta) for eta(x) != eta(y),
    truncated kernel, diagonal = -row sum. `rates` overrides the 3x3 pair-rate
    table (for deliberately broken-rate diagnostics).
    """
    if 3 ** l_small > 2187:
        raise ParameterError(f"exact generator limited to 3^L <= 2187, got L={l_small}")
    tables = build_tables(params, lattice_size=l_small)
    if rates is None:
        rates = build_rate_model(params.k_n, params.energies).rates
    digits = _digit_matrix(l_small)
    n_states = digits.shape[0]
    states = np.arange(n_states)
    q = np.zeros((n_states, n_states))
    pow3 = 3 ** np.arange(l_small)
    for x in range(l_small):
        for d, p_d in zip(tables.displacements, tables.p):
            y = (x + int(d)) % l_small
            a = digits[:, x]
            b = digits[:, y]
            mask = a != b
            rate = tables.theta_n * p_d * rates[a[mask], b[mask]]
            target = states[mask] + (b[mask] - a[mask]) * pow3[x] \
                + (a[mask] - b[mask]) * pow3[y]
            np.add.at(q, (states[mask], target), rate)
    q[np.diag_indices_from(q)] -= q.sum(axis=1)
    return q


def product_measure_vector(densities, l_small: int) -> np.ndarray:
    """Product-measure probabilities over the 3^l_small states."""
    rho = np.asarray(densities, dtype=float)
    digits = _digit_matrix(l_small)
    return np.prod(rho[digits], axis=1)


def verify_stationarity(params: ModelParams, l_small: int,
                        rates: np.ndarray | None = None) -> float:
    """Max-norm residual of pi^T Q for the product measure pi."""
    q = exact_generator(params, l_small, rates=rates)
    pi = product_measure_vector(params.densities, l_small)
    return float(np.max(np.abs(pi @ q)))


def apply_generator(q: np.ndarray, observable: np.ndarray) -> np.ndarray:
    """Q f as a state-indexed vector (for oracle comparisons)."""
    return q @ observable
