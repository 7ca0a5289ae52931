import numpy as np
import pytest

from abcflux._fastloop import _apply_events_py, apply_events
from abcflux.dynamics import (GridObserver, SimulationClock, attempt_rate,
                              evolve_to, exact_generator, propose,
                              sample_displacement, step, verify_stationarity,
                              _digit_matrix)
from abcflux.errors import ParameterError
from abcflux.kernel import ModelParams, build_rate_model, build_tables
from abcflux.lattice import Configuration, sample_invariant
from abcflux.validation import generator_identity_residual

UNIFORM = (1 / 3, 1 / 3, 1 / 3)


def make_params(gamma=1.0, asymmetry=0.0, kappa0=0.0, n=2, lattice_size=16,
                energies=(1.0, 0.0, -1.0), densities=UNIFORM):
    return ModelParams.from_asymmetry(
        gamma, asymmetry, energies=energies, densities=densities, d1=1.0,
        kn_rule=(kappa0, 0.0), n=n, lattice_size=lattice_size)


def test_sample_displacement_symmetric_sign_balance():
    params = make_params(gamma=1.0, asymmetry=0.0, lattice_size=256)
    tables = build_tables(params)
    rng = np.random.default_rng(0)
    # bulk draws through the same inverse-cdf the event loop uses
    idx = np.searchsorted(tables.cdf, rng.random(1_000_000), side="right")
    zs = tables.displacements[np.minimum(idx, len(tables.cdf) - 1)]
    p_pos = np.mean(zs > 0)
    se = np.sqrt(0.25 / zs.size)
    assert abs(p_pos - 0.5) < 4.0 * se
    # nearest-site odds ratio 2^(gamma+1) = 4 at gamma = 1
    p1 = np.mean(np.abs(zs) == 1)
    p2 = np.mean(np.abs(zs) == 2)
    assert p1 / p2 == pytest.approx(4.0, rel=0.02)
    # interface draws follow the same law
    single = np.array([sample_displacement(tables, rng) for _ in range(20_000)])
    assert abs(np.mean(single > 0) - 0.5) < 4.0 * np.sqrt(0.25 / single.size)


def test_sample_displacement_one_sided():
    params = make_params(gamma=1.0, asymmetry=1.0, lattice_size=256)
    tables = build_tables(params)
    rng = np.random.default_rng(1)
    draws = [sample_displacement(tables, rng) for _ in range(10_000)]
    assert min(draws) > 0


def test_proposal_acceptance_unit_for_symmetric_rates():
    params = make_params(kappa0=0.0, lattice_size=32, n=2)
    tables = build_tables(params)
    rate_model = build_rate_model(params.k_n, params.energies)
    rng = np.random.default_rng(2)
    config = sample_invariant(UNIFORM, 32, rng)
    seen = 0
    while seen < 50:
        prop = propose(config, rate_model, tables, rng)
        if prop is not None:
            assert prop.accept_prob == pytest.approx(1.0)
            seen += 1


def test_step_advances_clock_and_conserves():
    params = make_params(kappa0=0.1, asymmetry=0.5, lattice_size=32, n=2)
    tables = build_tables(params)
    rate_model = build_rate_model(params.k_n, params.energies)
    rng = np.random.default_rng(3)
    config = sample_invariant(UNIFORM, 32, rng)
    before = tuple(config.counts)
    clock = SimulationClock()
    for _ in range(500):
        step(config, clock, rate_model, tables, rng)
    assert clock.event_count == 500
    assert clock.macro_time > 0
    assert tuple(config.recount()) == before


def test_evolve_to_conserves_and_counts_events():
    params = make_params(gamma=1.5, asymmetry=0.8, kappa0=0.2, n=4,
                         lattice_size=128)
    tables = build_tables(params)
    rate_model = build_rate_model(params.k_n, params.energies)
    rng = np.random.default_rng(4)
    config = sample_invariant(UNIFORM, 128, rng)
    before = tuple(config.counts)
    clock = SimulationClock()
    horizon = 0.5
    evolve_to(config, clock, horizon, [], rate_model, tables, rng)
    assert tuple(config.recount()) == before
    expected = attempt_rate(tables, rate_model) * horizon
    assert abs(clock.event_count - expected) < 4.0 * np.sqrt(expected)
    with pytest.raises(ParameterError):
        evolve_to(config, clock, clock.macro_time - 1.0, [], rate_model,
                  tables, rng)


def test_observers_invoked_once_in_order():
    params = make_params(lattice_size=32, n=2)
    tables = build_tables(params)
    rate_model = build_rate_model(params.k_n, params.energies)
    rng = np.random.default_rng(5)
    config = sample_invariant(UNIFORM, 32, rng)
    clock = SimulationClock()
    calls = []
    obs = GridObserver(times=np.array([0.1, 0.2]),
                       callback=lambda t, c, ck: calls.append(t))
    evolve_to(config, clock, 0.3, [obs], rate_model, tables, rng)
    assert calls == [0.1, 0.2]
    assert clock.macro_time == pytest.approx(0.3)
    with pytest.raises(ParameterError):
        bad = GridObserver(times=np.array([0.2, 0.1]), callback=lambda *a: None)
        evolve_to(config, clock, 0.4, [bad], rate_model, tables, rng)


def test_evolve_to_noop_at_current_time():
    params = make_params(lattice_size=32, n=2)
    tables = build_tables(params)
    rate_model = build_rate_model(params.k_n, params.energies)
    rng = np.random.default_rng(6)
    config = sample_invariant(UNIFORM, 32, rng)
    clock = SimulationClock()
    evolve_to(config, clock, 0.0, [], rate_model, tables, rng)
    assert clock.event_count == 0


def test_exact_generator_structure(canonical_params):
    q = exact_generator(canonical_params, 5)
    assert q.shape == (243, 243)
    np.testing.assert_allclose(q.sum(axis=1), 0.0, atol=1e-12)
    off_diag = q - np.diag(np.diag(q))
    assert np.all(off_diag >= 0)
    # constant observable is annihilated
    np.testing.assert_allclose(q @ np.ones(243), 0.0, atol=1e-10)
    with pytest.raises(ParameterError):
        exact_generator(canonical_params, 8)


def test_generator_matches_closed_forms(canonical_params):
    residual = generator_identity_residual(canonical_params, l_small=6,
                                           n_configs=30, seed=11)
    assert residual < 1e-12


def test_stationarity_residuals(canonical_params):
    assert verify_stationarity(canonical_params, 5) < 1e-10
    rates = build_rate_model(canonical_params.k_n,
                             canonical_params.energies).rates.copy()
    rates[0, 1] = 2.0
    assert verify_stationarity(canonical_params, 5, rates=rates) > 1e-3


def test_stationarity_point_mass():
    params = make_params(densities=(1.0, 0.0, 0.0))
    assert verify_stationarity(params, 4) < 1e-12


def test_thinning_matches_generator_row():
    params = make_params(gamma=1.0, asymmetry=0.5, kappa0=0.1, n=2,
                         lattice_size=16)
    l_small = 4
    tables = build_tables(params, lattice_size=l_small)
    rate_model = build_rate_model(params.k_n, params.energies)
    q = exact_generator(params, l_small)
    digits = _digit_matrix(l_small)
    pow3 = 3 ** np.arange(l_small)
    start = np.array([0, 1, 2, 0], dtype=np.int8)
    state = int(start.astype(int) @ pow3)
    row = q[state].copy()
    row[state] = 0.0
    probs = row / row.sum()
    rng = np.random.default_rng(7)
    n_trials = 4000
    counts = np.zeros(81)
    for _ in range(n_trials):
        config = Configuration.from_species(start.copy())
        clock = SimulationClock()
        while True:
            step(config, clock, rate_model, tables, rng)
            target = int(config.species.astype(int) @ pow3)
            if target != state:
                counts[target] += 1
                break
    support = probs > 0
    assert np.all(counts[~support] == 0)
    for idx in np.nonzero(support)[0]:
        se = np.sqrt(n_trials * probs[idx] * (1 - probs[idx]))
        assert abs(counts[idx] - n_trials * probs[idx]) < 5.0 * se


def test_time_reversal_displacement_histogram():
    # fully symmetric dynamics: accepted displacements are sign-symmetric
    params = make_params(gamma=1.0, asymmetry=0.0, kappa0=0.0, n=2,
                         lattice_size=64)
    tables = build_tables(params)
    rate_model = build_rate_model(params.k_n, params.energies)
    rng = np.random.default_rng(8)
    config = sample_invariant(UNIFORM, 64, rng)
    accepted = []
    clock = SimulationClock()
    while len(accepted) < 20_000:
        prop = propose(config, rate_model, tables, rng)
        if prop is not None and rng.random() < prop.accept_prob:
            accepted.append(prop.z)
            y = (prop.x + prop.z) % 64
            sp = config.species
            sp[prop.x], sp[y] = sp[y], sp[prop.x]
    zs = np.array(accepted)
    p_pos = np.mean(zs > 0)
    assert abs(p_pos - 0.5) < 4.0 * np.sqrt(0.25 / zs.size)
    hist_fwd, _ = np.histogram(zs, bins=np.arange(-32.5, 33.5))
    hist_bwd, _ = np.histogram(-zs, bins=np.arange(-32.5, 33.5))
    big = (hist_fwd + hist_bwd) > 200
    rel = np.abs(hist_fwd[big] - hist_bwd[big]) / np.sqrt(hist_fwd[big] + hist_bwd[big])
    assert np.all(rel < 5.0)


def test_numba_and_python_loops_agree():
    params = make_params(gamma=1.5, asymmetry=0.6, kappa0=0.2, n=2,
                         lattice_size=64)
    tables = build_tables(params)
    rate_model = build_rate_model(params.k_n, params.energies)
    rng = np.random.default_rng(9)
    species = sample_invariant(UNIFORM, 64, rng).species
    m = 5000
    sites = rng.integers(0, 64, m)
    u_disp = rng.random(m)
    u_acc = rng.random(m)
    args = (tables.cdf, tables.displacements.astype(np.int64),
            np.ascontiguousarray(rate_model.acceptance))
    s1 = species.copy()
    s2 = species.copy()
    n1 = apply_events(s1, sites, u_disp, u_acc, *args)
    n2 = _apply_events_py(s2, sites, u_disp, u_acc, *args)
    assert n1 == n2
    np.testing.assert_array_equal(s1, s2)
