import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import chi2_contingency

from abcflux.errors import ParameterError
from abcflux.lattice import (Configuration, block_average, centered_indicator,
                             centered_indicator_vectors, exchange,
                             sample_invariant)

UNIFORM = (1 / 3, 1 / 3, 1 / 3)


def test_sample_invariant_degenerate():
    rng = np.random.default_rng(0)
    config = sample_invariant((1.0, 0.0, 0.0), 64, rng)
    assert np.all(config.species == 0)
    assert tuple(config.counts) == (64, 0, 0)


def test_sample_invariant_counts_ci():
    rng = np.random.default_rng(1)
    size = 9000
    config = sample_invariant(UNIFORM, size, rng)
    margin = 4.0 * np.sqrt(size * (1 / 3) * (2 / 3))
    for c in config.counts:
        assert abs(c - size / 3) < margin
    np.testing.assert_array_equal(config.counts, config.recount())


def test_centered_indicator_independence():
    rng = np.random.default_rng(2)
    n_samples = 10_000
    vals_x = np.empty(n_samples)
    vals_y = np.empty(n_samples)
    for i in range(n_samples):
        config = sample_invariant(UNIFORM, 8, rng)
        vals_x[i] = centered_indicator(config, 2, "A", UNIFORM)
        vals_y[i] = centered_indicator(config, 5, "A", UNIFORM)
    # distinct sites: covariance zero within 4 standard errors
    cov = np.mean(vals_x * vals_y)
    se = np.std(vals_x * vals_y, ddof=1) / np.sqrt(n_samples)
    assert abs(cov) < 4.0 * se
    # same site: chi(1/3) = 2/9
    var = np.mean(vals_x * vals_x)
    se = np.std(vals_x * vals_x, ddof=1) / np.sqrt(n_samples)
    assert abs(var - 2.0 / 9.0) < 4.0 * se


def test_exchange_examples():
    config = Configuration.from_species([0, 1, 2])
    exchange(config, 0, 2)
    assert config.species.tolist() == [2, 1, 0]
    exchange(config, 0, 2)
    assert config.species.tolist() == [0, 1, 2]
    exchange(config, 1, 1)
    assert config.species.tolist() == [0, 1, 2]


@given(st.lists(st.tuples(st.integers(0, 63), st.integers(0, 63)),
                min_size=1, max_size=200))
@settings(max_examples=25, deadline=None)
def test_exchange_conserves_counts(pairs):
    rng = np.random.default_rng(3)
    config = sample_invariant(UNIFORM, 64, rng)
    before = tuple(config.counts)
    for x, y in pairs:
        exchange(config, x, y)
    assert tuple(config.recount()) == before


def test_centered_indicator_values():
    config = Configuration.from_species([0, 1, 2, 0])
    assert centered_indicator(config, 0, "A", UNIFORM) == pytest.approx(2 / 3)
    assert centered_indicator(config, 1, "A", UNIFORM) == pytest.approx(-1 / 3)
    for x in range(4):
        total = sum(centered_indicator(config, x, a, UNIFORM) for a in "ABC")
        assert total == pytest.approx(0.0, abs=1e-15)


def test_indicator_products_vanish():
    rng = np.random.default_rng(4)
    config = sample_invariant(UNIFORM, 32, rng)
    xi_a, xi_b = centered_indicator_vectors(config, UNIFORM)
    raw_a = xi_a + 1 / 3
    raw_b = xi_b + 1 / 3
    np.testing.assert_allclose(raw_a * raw_b, 0.0, atol=1e-15)
    np.testing.assert_allclose(raw_a ** 2, raw_a, atol=1e-15)


def test_block_average_constant_config():
    config = Configuration.from_species(np.zeros(32, dtype=np.int8))
    ba = block_average(config, 10, 4, "A", "B", UNIFORM)
    assert ba.left == pytest.approx(2 / 3)
    assert ba.right == pytest.approx(-1 / 3)
    assert ba.psi == pytest.approx(-2 / 9)


def test_block_average_validation():
    config = Configuration.from_species(np.zeros(32, dtype=np.int8))
    with pytest.raises(ParameterError):
        block_average(config, 0, 9, "A", "B", UNIFORM)  # > L/4
    with pytest.raises(ParameterError):
        block_average(config, 0, 0, "A", "B", UNIFORM)


def test_block_average_moments():
    rng = np.random.default_rng(5)
    block = 4
    n_samples = 4000
    psis = np.empty(n_samples)
    for i in range(n_samples):
        config = sample_invariant(UNIFORM, 32, rng)
        psis[i] = block_average(config, 16, block, "A", "B", UNIFORM).psi
    se = np.std(psis, ddof=1) / np.sqrt(n_samples)
    assert abs(psis.mean()) < 4.0 * se
    chi = (1 / 3) * (2 / 3)
    bound = chi * chi / block ** 2
    se2 = np.std(psis ** 2, ddof=1) / np.sqrt(n_samples)
    assert np.mean(psis ** 2) < bound + 4.0 * se2


def test_permutation_invariance_chi_square():
    rng = np.random.default_rng(6)
    size = 4
    perm = rng.permutation(size)
    n_samples = 6000
    pow3 = 3 ** np.arange(size)
    direct = np.empty(n_samples, dtype=int)
    permuted = np.empty(n_samples, dtype=int)
    for i in range(n_samples):
        c1 = sample_invariant(UNIFORM, size, rng)
        c2 = sample_invariant(UNIFORM, size, rng)
        direct[i] = int(c1.species.astype(int) @ pow3)
        permuted[i] = int(c2.species.astype(int)[perm] @ pow3)
    counts = np.zeros((2, 81), dtype=int)
    np.add.at(counts[0], direct, 1)
    np.add.at(counts[1], permuted, 1)
    _, p_value, _, _ = chi2_contingency(counts)
    assert p_value > 1e-3


def test_dump_round_trip():
    rng = np.random.default_rng(7)
    config = sample_invariant(UNIFORM, 40, rng)
    text = config.to_text()
    assert text.endswith("\n") and len(text) == 41
    back = Configuration.from_text(text)
    np.testing.assert_array_equal(back.species, config.species)
    with pytest.raises(ParameterError):
        Configuration.from_text("ABX\n")
