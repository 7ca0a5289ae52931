import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import zeta

from abcflux.errors import ParameterError
from abcflux.kernel import (ModelParams, asym_first_moment, build_rate_model,
                            build_tables, c_hat, classify_hypothesis,
                            exchange_rate, normalize_kernel,
                            pairwise_balance_residual, power_sum,
                            scaled_drift_moment, theta)


def test_power_sum_matches_zeta():
    for s in (1.001, 1.05, 1.5, 2.0, 2.5, 4.0, 7.5):
        assert power_sum(s) == pytest.approx(zeta(s), rel=1e-12)
    with pytest.raises(ParameterError):
        power_sum(1.0)


def test_normalize_kernel_gamma_one():
    c_plus, c_minus, c_gamma = normalize_kernel(1.0, 0.0)
    # zeta(2) = pi^2/6, so c_gamma = 3/pi^2
    assert c_gamma == pytest.approx(3.0 / math.pi ** 2, rel=1e-12)
    assert c_plus == c_minus == pytest.approx(c_gamma)


def test_normalize_kernel_three_halves_asymmetric():
    c_plus, c_minus, c_gamma = normalize_kernel(1.5, 0.5)
    assert c_gamma == pytest.approx(1.0 / (2.0 * zeta(2.5)), rel=1e-12)
    assert c_gamma == pytest.approx(0.37272064814438854, rel=1e-10)
    assert c_plus == pytest.approx(1.5 * c_gamma)
    assert c_minus == pytest.approx(0.5 * c_gamma)


def test_normalize_kernel_rejects_bad_arguments():
    with pytest.raises(ParameterError):
        normalize_kernel(-1.0, 0.0)
    with pytest.raises(ParameterError):
        normalize_kernel(1.0, 1.5)


@given(st.floats(0.2, 4.0), st.floats(-1.0, 1.0))
@settings(max_examples=30, deadline=None)
def test_kernel_symmetric_antisymmetric_split(gamma, asymmetry):
    params = ModelParams.from_asymmetry(
        gamma, asymmetry, energies=(1.0, 0.0, -1.0), densities=(1 / 3,) * 3,
        d1=1.0, kn_rule=(0.1, 0.0), n=2, lattice_size=64)
    t = build_tables(params)
    np.testing.assert_allclose(t.p, t.s + t.a, rtol=0, atol=1e-15)
    np.testing.assert_allclose(t.s, t.s[::-1], rtol=0, atol=1e-15)
    np.testing.assert_allclose(t.a, -t.a[::-1], rtol=0, atol=1e-15)
    assert np.all(t.s >= 0)
    assert np.all(np.abs(t.a) <= t.s + 1e-15)


def test_theta_values():
    assert theta(100, 1.0) == pytest.approx(100.0)
    assert theta(10, 3.0) == pytest.approx(100.0)  # min(3, 2) = 2
    assert theta(100, 2.0) == pytest.approx(1e4 / math.log(100.0), rel=1e-12)
    with pytest.raises(ParameterError):
        theta(1, 2.0)
    with pytest.raises(ParameterError):
        theta(10, 0.0)


def test_exchange_rate_examples():
    energies = (1.0, 0.0, -1.0)
    for pair in (("A", "B"), ("B", "C"), ("C", "A")):
        assert exchange_rate(*pair, 0.0, energies) == pytest.approx(1.0)
    assert exchange_rate("A", "B", 0.1, energies) == pytest.approx(1.1)
    assert exchange_rate("B", "A", 0.1, energies) == pytest.approx(0.9)
    assert exchange_rate("A", "C", 0.1, energies) == pytest.approx(1.2)
    with pytest.raises(ParameterError):
        exchange_rate("C", "A", 0.6, energies)
    with pytest.raises(ParameterError):
        exchange_rate("A", "A", 0.1, energies)


def test_pairwise_balance_telescopes():
    energies = (1.0, 0.0, -1.0)
    for k_n in (0.0, 0.05, 0.3):
        rates = build_rate_model(k_n, energies).rates
        fwd = rates[0, 1] + rates[1, 2] + rates[2, 0]
        assert fwd == pytest.approx(3.0, abs=1e-14)
        assert pairwise_balance_residual(rates) == pytest.approx(0.0, abs=1e-14)


@given(st.tuples(st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2)),
       st.floats(0.0, 0.12))
@settings(max_examples=40, deadline=None)
def test_pairwise_balance_any_energies(energies, k_n):
    rates = np.zeros((3, 3))
    for a in range(3):
        for b in range(3):
            if a != b:
                rates[a, b] = 1.0 + k_n * (energies[a] - energies[b])
    assert abs(pairwise_balance_residual(rates)) < 1e-12


def test_drift_moments():
    # symmetric kernel: both moments vanish
    params = ModelParams.from_asymmetry(
        1.5, 0.0, energies=(1.0, 0.0, -1.0), densities=(1 / 3,) * 3,
        d1=1.0, kn_rule=(0.1, 0.0), n=4, lattice_size=64)
    t = build_tables(params)
    assert t.m_a == 0.0
    assert t.m_n_gamma == 0.0
    # gamma in (0, 1): scaled moment is zero even with asymmetry
    assert scaled_drift_moment(0.7, 0.4, 0.1, 16) == 0.0
    # gamma = 3/2: m_a = (c+ - c-) * zeta(3/2)
    c_plus, c_minus, _ = normalize_kernel(1.5, 0.5)
    diff = c_plus - c_minus
    assert asym_first_moment(1.5, c_plus, c_minus) == pytest.approx(
        diff * 2.6123753486854883, rel=1e-10)
    assert asym_first_moment(1.5, c_plus, c_minus) == pytest.approx(
        diff * zeta(1.5), rel=1e-12)
    with pytest.raises(ParameterError):
        asym_first_moment(1.0, c_plus, c_minus)
    # gamma = 1 windowed moment: theta(n) * (c+ - c-) * harmonic(n)
    c_plus, c_minus, _ = normalize_kernel(1.0, 0.5)
    harmonic = sum(1.0 / r for r in range(1, 17))
    assert scaled_drift_moment(1.0, c_plus, c_minus, 16) == pytest.approx(
        16.0 * (c_plus - c_minus) * harmonic, rel=1e-12)
    # gamma > 1: theta(n) * m_a
    assert scaled_drift_moment(1.5, *normalize_kernel(1.5, 0.5)[:2], 16) \
        == pytest.approx(16.0 ** 1.5 * asym_first_moment(
            1.5, *normalize_kernel(1.5, 0.5)[:2]), rel=1e-12)


def test_c_gamma_strictly_increasing():
    grid = np.linspace(0.1, 6.0, 60)
    values = [normalize_kernel(g, 0.0)[2] for g in grid]
    assert all(b > a for a, b in zip(values, values[1:]))


def test_truncated_mass_bound():
    for gamma in (0.5, 1.0, 1.5, 3.0):
        params = ModelParams.from_asymmetry(
            gamma, 0.3, energies=(1.0, 0.0, -1.0), densities=(1 / 3,) * 3,
            d1=1.0, kn_rule=(0.1, 0.0), n=8, lattice_size=512)
        t = build_tables(params)
        # integral tail bound, both tails: (c+ + c-) * (L/2)^-gamma / gamma
        bound = 2.0 * t.c_gamma * (256.0 ** -gamma) / gamma * (1.0 + 1e-2)
        assert 0.0 < t.truncated_mass <= bound


def test_sampling_cdf_normalized(canonical_params):
    t = build_tables(canonical_params)
    assert t.cdf[-1] == pytest.approx(1.0)
    assert np.all(np.diff(t.cdf) >= 0)
    np.testing.assert_allclose(t.sampling_pdf().sum(), 1.0, rtol=1e-12)


def test_c_hat_values():
    _, _, c2 = normalize_kernel(2.0, 0.0)
    assert c_hat(2.0, c2) == pytest.approx(2.0 * c2)
    _, _, c3 = normalize_kernel(3.0, 0.0)
    assert c_hat(3.0, c3) == pytest.approx(2.0 * c3 * zeta(2.0), rel=1e-12)
    with pytest.raises(ParameterError):
        c_hat(1.5, 0.3)


def test_classify_hypothesis():
    def params_for(gamma, asymmetry, kappa0, beta):
        return ModelParams.from_asymmetry(
            gamma, asymmetry, energies=(1.0, 0.0, -1.0), densities=(1 / 3,) * 3,
            d1=1.0, kn_rule=(kappa0, beta), n=4, lattice_size=64)

    # gamma=1, constant K_n, asymmetric kernel: K* = lim kappa0 n^{-1/2} = 0
    h = classify_hypothesis(params_for(1.0, 0.5, 0.1, 0.0))
    assert h.tag == "Hyp1" and h.k_star == 0.0
    # symmetric kernel always falls in the Gaussian regime
    h = classify_hypothesis(params_for(1.5, 0.0, 0.2, 0.0))
    assert h.tag == "Hyp1"
    # gamma=3/2, constant K_n = kappa0: K* = kappa0 in (0, inf)
    h = classify_hypothesis(params_for(1.5, 0.5, 0.2, 0.0))
    assert h.tag == "Hyp2" and h.k_star == pytest.approx(0.2)
    # gamma=2 with beta >= 1/2 satisfies the log-corrected criterion
    assert classify_hypothesis(params_for(2.0, 0.5, 0.2, 0.5)).tag == "Hyp1"
    assert classify_hypothesis(params_for(2.0, 0.5, 0.2, 0.25)).tag == "Neither"
    # gamma > 2 with constant K_n: K* = inf
    h = classify_hypothesis(params_for(3.0, 0.5, 0.2, 0.0))
    assert h.tag == "Neither" and math.isinf(h.k_star)
    # exponent tuned exactly: gamma = 1.8, beta = min(gamma,2) - 3/2 = 0.3
    h = classify_hypothesis(params_for(1.8, 0.5, 0.15, 0.3))
    assert h.tag == "Hyp2" and h.k_star == pytest.approx(0.15)


def test_hyp2_requires_gamma_at_least_three_halves():
    # beta >= 0 (bounded K_n) makes K* in (0, inf) impossible below gamma = 3/2
    for gamma in (0.5, 1.0, 1.2, 1.4):
        for beta in (0.0, 0.2, 1.0):
            params = ModelParams.from_asymmetry(
                gamma, 0.5, energies=(1.0, 0.0, -1.0), densities=(1 / 3,) * 3,
                d1=1.0, kn_rule=(0.1, beta), n=4, lattice_size=64)
            assert classify_hypothesis(params).tag != "Hyp2"


def test_model_params_invariants():
    good = dict(energies=(1.0, 0.0, -1.0), densities=(1 / 3, 1 / 3, 1 / 3),
                d1=1.0, kn_rule=(0.1, 0.0), n=4, lattice_size=64)
    ModelParams.from_asymmetry(1.0, 0.5, **good)
    with pytest.raises(ParameterError):  # odd torus
        ModelParams.from_asymmetry(1.0, 0.5, **{**good, "lattice_size": 63})
    with pytest.raises(ParameterError):  # torus shorter than 8n
        ModelParams.from_asymmetry(1.0, 0.5, **{**good, "lattice_size": 16})
    with pytest.raises(ParameterError):  # E_A = E_C (also the Delta = 0 case)
        ModelParams.from_asymmetry(1.0, 0.5, **{**good, "energies": (1.0, 0.0, 1.0)})
    with pytest.raises(ParameterError):  # rate positivity
        ModelParams.from_asymmetry(1.0, 0.5, **{**good, "kn_rule": (0.3, 0.0)})
    with pytest.raises(ParameterError):  # unbounded K_n
        ModelParams.from_asymmetry(1.0, 0.5, **{**good, "kn_rule": (0.1, -0.5)})
    with pytest.raises(ParameterError):  # unnormalized kernel weights
        ModelParams(gamma=1.0, c_plus=0.5, c_minus=0.5, **good)
    with pytest.raises(ParameterError):  # zero d1
        ModelParams.from_asymmetry(1.0, 0.5, **{**good, "d1": 0.0})
    with pytest.raises(ParameterError):  # densities do not sum to one
        ModelParams.from_asymmetry(1.0, 0.5,
                                   **{**good, "densities": (0.5, 0.4, 0.2)})
