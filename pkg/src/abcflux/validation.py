"""Deterministic verification suite: closed-form generator identities,
exhaustive stationarity, operator convergence, and constant identities.

The closed forms below are the single-site generator expansions obtained by
splitting the exchange sums over partner species (with the C indicator
eliminated through completeness); they are evaluated directly from the kernel
arrays, independently of the dense generator matrix they are checked against.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import _digit_matrix, exact_generator, verify_stationarity
from .fields import normal_mode_constants
from .kernel import (ModelParams, build_rate_model, build_tables,
                     pairwise_balance_residual)
from .operators import gaussian, bump, modulated_gaussian, operator_convergence_errors

_A, _B, _C = 0, 1, 2


def _closed_form_l_xi(species: np.ndarray, z: int, alpha: int, tables,
                      rates: np.ndarray) -> float:
    """(L xi_z^alpha)(eta) from the split-by-partner expansion (unscaled)."""
    beta = _B if alpha == _A else _A
    size = species.shape[0]
    r_ac = rates[alpha, _C]
    r_ca = rates[_C, alpha]
    r_ab = rates[alpha, beta]
    r_ba = rates[beta, alpha]
    xi_a = (species == alpha).astype(float)
    xi_b = (species == beta).astype(float)
    total = 0.0
    for d, p_d in zip(tables.displacements, tables.p):
        y = (z + int(d)) % size
        p_zy = float(tables.p[tables.displacements == -d][0])  # p(z - y)
        p_yz = p_d                                             # p(y - z)
        total += p_zy * (r_ac * xi_a[y] - r_ca * xi_a[z]) \
            + p_yz * (r_ca * xi_a[y] - r_ac * xi_a[z])
        total += p_zy * ((r_ca - r_ac) * xi_a[y] * xi_a[z]
                         + (r_ab - r_ac) * xi_a[y] * xi_b[z]
                         + (r_ca - r_ba) * xi_a[z] * xi_b[y])
        total += p_yz * ((r_ac - r_ca) * xi_a[y] * xi_a[z]
                         + (r_ba - r_ca) * xi_a[y] * xi_b[z]
                         + (r_ac - r_ab) * xi_a[z] * xi_b[y])
    return total


def _closed_form_products(species: np.ndarray, z: int, tables,
                          rates: np.ndarray) -> dict[str, float]:
    """The four single-site product identities xi_z^a (L xi_z^b)(eta)."""
    size = species.shape[0]
    xi_a = (species == _A).astype(float)
    xi_b = (species == _B).astype(float)
    out = {"aa": 0.0, "ba": 0.0, "ab": 0.0, "bb": 0.0}
    for d, p_d in zip(tables.displacements, tables.p):
        w = (z + int(d)) % size
        p_zw = float(tables.p[tables.displacements == -d][0])
        p_wz = p_d
        out["aa"] += (-xi_a[z] * (p_zw * rates[_C, _A] + p_wz * rates[_A, _C])
                      + (p_zw * rates[_C, _A] + p_wz * rates[_A, _C]) * xi_a[w] * xi_a[z]
                      + (p_zw * (rates[_C, _A] - rates[_B, _A])
                         + p_wz * (rates[_A, _C] - rates[_A, _B])) * xi_a[z] * xi_b[w])
        out["ba"] += (p_zw * rates[_A, _B] + p_wz * rates[_B, _A]) * xi_a[w] * xi_b[z]
        out["ab"] += (p_zw * rates[_B, _A] + p_wz * rates[_A, _B]) * xi_b[w] * xi_a[z]
        out["bb"] += (-xi_b[z] * (p_zw * rates[_C, _B] + p_wz * rates[_B, _C])
                      + (p_zw * rates[_C, _B] + p_wz * rates[_B, _C]) * xi_b[w] * xi_b[z]
                      + (p_zw * (rates[_C, _B] - rates[_A, _B])
                         + p_wz * (rates[_B, _C] - rates[_B, _A])) * xi_b[z] * xi_a[w])
    return out


def generator_identity_residual(params: ModelParams, l_small: int = 7,
                                n_configs: int = 100, seed: int = 5) -> float:
    """Worst deviation between the dense generator applied to single-site
    observables and the closed-form expansions, over random configurations."""
    tables = build_tables(params, lattice_size=l_small)
    rates = build_rate_model(params.k_n, params.energies).rates
    q = exact_generator(params, l_small) / tables.theta_n
    digits = _digit_matrix(l_small)
    pow3 = 3 ** np.arange(l_small)
    rng = np.random.default_rng(seed)
    worst = 0.0
    obs = {}
    for alpha in (_A, _B):
        for z in range(l_small):
            obs[alpha, z] = q @ (digits[:, z] == alpha).astype(float)
    for _ in range(n_configs):
        species = rng.integers(0, 3, l_small)
        state = int(species @ pow3)
        for z in range(l_small):
            for alpha in (_A, _B):
                direct = obs[alpha, z][state]
                closed = _closed_form_l_xi(species, z, alpha, tables, rates)
                worst = max(worst, abs(direct - closed))
            prods = _closed_form_products(species, z, tables, rates)
            xi_az = 1.0 if species[z] == _A else 0.0
            xi_bz = 1.0 if species[z] == _B else 0.0
            worst = max(
                worst,
                abs(xi_az * obs[_A, z][state] - prods["aa"]),
                abs(xi_bz * obs[_A, z][state] - prods["ba"]),
                abs(xi_az * obs[_B, z][state] - prods["ab"]),
                abs(xi_bz * obs[_B, z][state] - prods["bb"]))
    return worst


def pair_expectation_residual(params: ModelParams) -> float:
    """Enumerated E[(f_w - f_z)^2 r_{z,w}] against twice the static variance
    constant, for both normal modes."""
    tables = build_tables(params)
    constants = normal_mode_constants(params, tables)
    rates = build_rate_model(params.k_n, params.energies).rates
    rho = np.asarray(params.densities)
    worst = 0.0
    for sign in (1, -1):
        f_vals = constants.f_values(sign, params.densities)
        acc = 0.0
        for a in range(3):
            for b in range(3):
                if a != b:
                    acc += rho[a] * rho[b] * (f_vals[b] - f_vals[a]) ** 2 * rates[a, b]
        worst = max(worst, abs(acc - 2.0 * constants.d3(sign)))
    return worst


@dataclass(frozen=True)
class CheckResult:
    name: str
    value: float
    threshold: float
    passed: bool


def run_validation_suite(broken_rates: bool = False,
                         full_operators: bool = False) -> list[CheckResult]:
    """The deterministic pass/fail battery used by the `validate` subcommand.

    `broken_rates` injects an unbalanced rate table into the stationarity
    check (a negative control that must fail). `full_operators` extends the
    operator-convergence scan to all three test-function families and n=256.
    """
    checks: list[CheckResult] = []
    rng = np.random.default_rng(12)

    # pairwise balance for random energies and K_n
    worst = 0.0
    for _ in range(50):
        energies = tuple(rng.normal(size=3))
        k_n = float(rng.uniform(0.0, 0.4 / (2 * max(
            abs(energies[i] - energies[j]) for i in range(3) for j in range(3)) + 1e-9)))
        rates = build_rate_model(k_n, energies).rates
        worst = max(worst, abs(pairwise_balance_residual(rates)))
    checks.append(CheckResult("pairwise_balance", worst, 1e-12, worst < 1e-12))

    # exhaustive stationarity on the 243-state torus
    worst = 0.0
    for gamma in (1.0, 1.5, 3.0):
        for kappa0 in (0.0, 0.1):
            params = ModelParams.from_asymmetry(
                gamma, 0.5, energies=(1.0, 0.0, -1.0), densities=(1/3, 1/3, 1/3),
                d1=1.0, kn_rule=(kappa0, 0.0), n=2, lattice_size=16)
            if broken_rates:
                rates = build_rate_model(params.k_n, params.energies).rates.copy()
                rates[0, 1] = 2.0
                worst = max(worst, verify_stationarity(params, 5, rates=rates))
            else:
                worst = max(worst, verify_stationarity(params, 5))
    checks.append(CheckResult("stationarity_L5", worst, 1e-10, worst < 1e-10))

    # closed-form generator identities at L=7
    params = ModelParams.from_asymmetry(
        1.5, 0.6, energies=(1.0, 0.0, -1.0), densities=(1/3, 1/3, 1/3), d1=1.0,
        kn_rule=(0.2, 0.0), n=2, lattice_size=16)
    resid = generator_identity_residual(params, l_small=7, n_configs=100)
    checks.append(CheckResult("generator_identities_L7", resid, 1e-12, resid < 1e-12))

    # pair-expectation identity for random parameter sets
    worst = 0.0
    for _ in range(20):
        energies = tuple(rng.normal(size=3))
        delta = (energies[0] - energies[1]) ** 2 \
            - (energies[0] - energies[2]) * (energies[2] - energies[1])
        if energies[0] == energies[2] or delta <= 0:
            continue
        gap = max(abs(energies[i] - energies[j]) for i in range(3) for j in range(3))
        params_r = ModelParams.from_asymmetry(
            1.5, float(rng.uniform(-0.9, 0.9)), energies=energies,
            densities=(1/3, 1/3, 1/3), d1=float(rng.uniform(0.5, 2.0)),
            kn_rule=(float(rng.uniform(0.0, 0.45 / gap)), 0.0), n=2, lattice_size=16)
        worst = max(worst, pair_expectation_residual(params_r))
    checks.append(CheckResult("pair_expectation", worst, 1e-12, worst < 1e-12))

    # normal-mode constant identities
    worst = 0.0
    for _ in range(20):
        energies = tuple(rng.normal(size=3))
        delta = (energies[0] - energies[1]) ** 2 \
            - (energies[0] - energies[2]) * (energies[2] - energies[1])
        if energies[0] == energies[2] or delta <= 0:
            continue
        params_r = ModelParams.from_asymmetry(
            1.5, 0.3, energies=energies, densities=(1/3, 1/3, 1/3),
            d1=1.0, kn_rule=(0.1, 0.0), n=2, lattice_size=16)
        con = normal_mode_constants(params_r)
        cross = 2 * con.d1 ** 2 + 2 * con.d2_plus * con.d2_minus \
            - con.d1 * (con.d2_plus + con.d2_minus)
        scale = max(1.0, abs(2 * con.d2_plus * con.d2_minus))
        worst = max(worst, abs(cross) / scale)
    checks.append(CheckResult("cross_identity", worst, 1e-12, worst < 1e-12))

    # operator convergence: err(n) decreasing along the n-grid
    families = [("gaussian", gaussian(0.0, 1.0))]
    ns = (32, 64, 128)
    if full_operators:
        families += [("bump", bump(0.0, 2.0)),
                     ("modulated_gaussian", modulated_gaussian(0.0, 1.0, 0.7))]
        ns = (32, 64, 128, 256)
    ok = True
    margin = 0.0
    for _, fam in families:
        for gamma in (0.5, 1.0, 1.5, 3.0):
            errs = [operator_convergence_errors(fam, gamma, n) for n in ns]
            for i in range(len(ns) - 1):
                ok = ok and errs[i + 1][0] < errs[i][0] and errs[i + 1][1] < errs[i][1]
                margin = max(margin, errs[i + 1][0] / errs[i][0],
                             errs[i + 1][1] / errs[i][1])
    checks.append(CheckResult("operator_convergence", margin, 1.0, ok))
    return checks


def operator_convergence_table(ns=(32, 64, 128, 256)) -> list[tuple]:
    """Rows (family, gamma, n, err_sym, err_asym) for the convergence report."""
    rows = []
    for name, fam in [("gaussian", gaussian(0.0, 1.0)), ("bump", bump(0.0, 2.0)),
                      ("modulated_gaussian", modulated_gaussian(0.0, 1.0, 0.7))]:
        for gamma in (0.5, 1.0, 1.5, 3.0):
            for n in ns:
                err_sym, err_asym = operator_convergence_errors(fam, gamma, n)
                rows.append((name, gamma, n, err_sym, err_asym))
    return rows
