"""Heavy-tailed jump kernel, exchange rates, time scale, and asymmetry-regime
classification for the three-species long-range exclusion process.

The jump probability is p(z) = c+ z^{-1-gamma} for z > 0 and c- |z|^{-1-gamma}
for z < 0, normalized so that p sums to one over the nonzero integers. Exchange
rates between species a and b are r_{ab} = 1 + K_n (E_a - E_b), with K_n a
power-law sequence kappa0 * n^{-beta}. Everything downstream (sampling tables,
discrete operators, exact small-system generators) is built from the single
truncated kernel table produced here, so the simulated chain and the reference
computations always share one kernel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError

#: species indices used throughout: A=0, B=1, C=2
SPECIES = ("A", "B", "C")
SPECIES_INDEX = {"A": 0, "B": 1, "C": 2}

#: hard ceiling for the probability mass dropped by the torus truncation
TRUNCATED_MASS_LIMIT = 2e-3

_PARTIAL_TERMS = 2048


def power_tail_sum(s: float, start: int) -> float:
    """Sum of z^{-s} for z >= start, s > 1, via Euler-Maclaurin.

    Relative error below 1e-13 for start >= 8.
    """
    if s <= 1.0:
        raise ParameterError(f"power series exponent must exceed 1, got s={s}")
    m = float(start)
    tail = m ** (1.0 - s) / (s - 1.0) + 0.5 * m ** (-s) + s * m ** (-s - 1.0) / 12.0
    tail -= s * (s + 1.0) * (s + 2.0) * m ** (-s - 3.0) / 720.0
    return tail


def power_sum(s: float) -> float:
    """Sum of z^{-s} over z >= 1 (the zeta series), s > 1.

    Partial sum plus Euler-Maclaurin tail; relative error < 1e-13 down to
    s = 1 + 1e-3.
    """
    if s <= 1.0:
        raise ParameterError(f"divergent series: requires s > 1, got s={s}")
    z = np.arange(1, _PARTIAL_TERMS, dtype=float)
    return float(np.sum(z ** (-s))) + power_tail_sum(s, _PARTIAL_TERMS)


def normalize_kernel(gamma: float, asymmetry: float) -> tuple[float, float, float]:
    """Return (c_plus, c_minus, c_gamma) with c_pm = c_gamma * (1 +- asymmetry).

    c_gamma = 1 / (2 * sum_{z>=1} z^{-1-gamma}) makes p a probability measure.
    """
    if gamma <= 0:
        raise ParameterError(f"gamma must be positive, got {gamma}")
    if not -1.0 <= asymmetry <= 1.0:
        raise ParameterError(f"asymmetry must lie in [-1, 1], got {asymmetry}")
    c_gamma = 1.0 / (2.0 * power_sum(1.0 + gamma))
    return c_gamma * (1.0 + asymmetry), c_gamma * (1.0 - asymmetry), c_gamma


def theta(n: int, gamma: float) -> float:
    """Time scale: n^{min(gamma, 2)} for gamma != 2, n^2 / ln(n) for gamma = 2."""
    if gamma <= 0:
        raise ParameterError(f"gamma must be positive, got {gamma}")
    if n < 1:
        raise ParameterError(f"scale n must be a positive integer, got {n}")
    if gamma == 2.0:
        if n < 2:
            raise ParameterError("gamma = 2 needs n >= 2 (log degeneracy at n = 1)")
        return n * n / math.log(n)
    return float(n) ** min(gamma, 2.0)


def exchange_rate(alpha: int | str, beta: int | str, k_n: float,
                  energies: tuple[float, float, float]) -> float:
    """Rate 1 + K_n (E_alpha - E_beta) for an ordered species pair."""
    a = SPECIES_INDEX[alpha] if isinstance(alpha, str) else alpha
    b = SPECIES_INDEX[beta] if isinstance(beta, str) else beta
    if a == b:
        raise ParameterError("exchange_rate needs two distinct species")
    rate = 1.0 + k_n * (energies[a] - energies[b])
    if rate <= 0.0:
        raise ParameterError(
            f"rate positivity violated: r_{SPECIES[a]}{SPECIES[b]} = {rate} <= 0 "
            f"(need 2*K*max|E_a - E_b| < 1)")
    return rate


@dataclass(frozen=True)
class RateModel:
    """The six pair rates, their majorant, and the thinning acceptance table."""

    k_n: float
    rates: np.ndarray        # 3x3, rates[a, b] for a != b, 0 on the diagonal
    r_max: float
    acceptance: np.ndarray   # rates / r_max, 0 on the diagonal

    @property
    def r_min(self) -> float:
        off = self.rates[~np.eye(3, dtype=bool)]
        return float(off.min())


def build_rate_model(k_n: float, energies: tuple[float, float, float]) -> RateModel:
    rates = np.zeros((3, 3))
    for a in range(3):
        for b in range(3):
            if a != b:
                rates[a, b] = exchange_rate(a, b, k_n, energies)
    r_max = float(rates.max())
    acceptance = np.where(np.eye(3, dtype=bool), 0.0, rates / r_max)
    return RateModel(k_n=k_n, rates=rates, r_max=r_max, acceptance=acceptance)


def pairwise_balance_residual(rates: np.ndarray) -> float:
    """(r_AB + r_BC + r_CA) - (r_BA + r_CB + r_AC); zero for invariance."""
    fwd = rates[0, 1] + rates[1, 2] + rates[2, 0]
    bwd = rates[1, 0] + rates[2, 1] + rates[0, 2]
    return float(fwd - bwd)


@dataclass(frozen=True)
class ModelParams:
    """Full microscopic parameter set.

    kn_rule = (kappa0, beta) defines K_n = kappa0 * n^{-beta}; beta >= 0 keeps
    the sequence bounded with limit K = kappa0 * 1{beta == 0}.
    """

    gamma: float
    c_plus: float
    c_minus: float
    energies: tuple[float, float, float]
    densities: tuple[float, float, float]
    d1: float
    kn_rule: tuple[float, float]
    n: int
    lattice_size: int

    def __post_init__(self):
        if self.gamma <= 0:
            raise ParameterError(f"gamma must be positive, got {self.gamma}")
        if self.c_plus < 0 or self.c_minus < 0:
            raise ParameterError("kernel weights c_plus, c_minus must be nonnegative")
        c_gamma = 1.0 / (2.0 * power_sum(1.0 + self.gamma))
        if abs(self.c_plus + self.c_minus - 2.0 * c_gamma) > 1e-9 * c_gamma:
            raise ParameterError(
                "kernel not normalized: c_plus + c_minus must equal "
                f"2*c_gamma = {2 * c_gamma:.12g}, got {self.c_plus + self.c_minus:.12g}")
        rho = self.densities
        if any(not 0.0 <= r <= 1.0 for r in rho) or abs(sum(rho) - 1.0) > 1e-12:
            raise ParameterError(f"densities must lie in [0,1] and sum to 1, got {rho}")
        if self.d1 == 0:
            raise ParameterError("d1 must be nonzero")
        kappa0, beta = self.kn_rule
        if kappa0 < 0:
            raise ParameterError(f"kappa0 must be nonnegative, got {kappa0}")
        if beta < 0:
            raise ParameterError(
                f"beta must be nonnegative (K_n bounded), got beta={beta}")
        k_lim = kappa0 if beta == 0 else 0.0
        e = self.energies
        max_gap = max(abs(e[a] - e[b]) for a in range(3) for b in range(3))
        if 2.0 * k_lim * max_gap >= 1.0:
            raise ParameterError(
                "rate positivity violated: 2*K*max|E_a - E_b| = "
                f"{2 * k_lim * max_gap:.6g} >= 1")
        if e[0] == e[2]:
            raise ParameterError("energies must satisfy E_A != E_C")
        if self.delta <= 0:
            raise ParameterError(
                f"normal-mode discriminant must be positive, got {self.delta:.6g}")
        if self.n < 1:
            raise ParameterError(f"n must be a positive integer, got {self.n}")
        if self.lattice_size % 2 != 0:
            raise ParameterError(f"lattice_size must be even, got {self.lattice_size}")
        if self.lattice_size < 8 * self.n:
            raise ParameterError(
                f"lattice_size must be at least 8*n = {8 * self.n}, got {self.lattice_size}")
        # construction of the rate model re-checks per-pair positivity at the
        # realized K_n (which can exceed the limit K when beta > 0)
        build_rate_model(self.k_n, self.energies)

    @classmethod
    def from_asymmetry(cls, gamma: float, asymmetry: float, *, energies, densities,
                       d1: float, kn_rule, n: int, lattice_size: int) -> "ModelParams":
        c_plus, c_minus, _ = normalize_kernel(gamma, asymmetry)
        return cls(gamma=gamma, c_plus=c_plus, c_minus=c_minus,
                   energies=tuple(energies), densities=tuple(densities), d1=d1,
                   kn_rule=tuple(kn_rule), n=n, lattice_size=lattice_size)

    @property
    def c_gamma(self) -> float:
        return 0.5 * (self.c_plus + self.c_minus)

    @property
    def k_n(self) -> float:
        kappa0, beta = self.kn_rule
        return kappa0 * float(self.n) ** (-beta)

    @property
    def k_limit(self) -> float:
        kappa0, beta = self.kn_rule
        return kappa0 if beta == 0 else 0.0

    @property
    def theta_n(self) -> float:
        return theta(self.n, self.gamma)

    @property
    def delta(self) -> float:
        ea, eb, ec = self.energies
        return (ea - eb) ** 2 - (ea - ec) * (ec - eb)

    def with_scale(self, n: int, lattice_size: int | None = None) -> "ModelParams":
        return ModelParams(
            gamma=self.gamma, c_plus=self.c_plus, c_minus=self.c_minus,
            energies=self.energies, densities=self.densities, d1=self.d1,
            kn_rule=self.kn_rule, n=n,
            lattice_size=lattice_size if lattice_size is not None else 32 * n)


@dataclass(frozen=True)
class KernelTables:
    """Truncated kernel arrays plus the derived analytic constants.

    `displacements` lists z in {-M..-1, 1..M} with M = L//2; `p`, `s`, `a` are
    aligned with it. `circ_p` and `circ_a` are length-L circular layouts
    (index z mod L) used by the FFT-based double sums; the two antipodal
    displacements of an even torus share one circular slot, which is exactly
    the torus aggregation of the generator.
    """

    gamma: float
    lattice_size: int
    max_disp: int
    displacements: np.ndarray
    p: np.ndarray
    s: np.ndarray
    a: np.ndarray
    cdf: np.ndarray
    circ_p: np.ndarray
    circ_a: np.ndarray
    circ_s: np.ndarray
    c_gamma: float
    c_plus: float
    c_minus: float
    c_hat_gamma: float | None
    m_a: float | None
    m_n_gamma: float
    theta_n: float
    truncated_mass: float
    p_mass: float
    n: int

    def sampling_pdf(self) -> np.ndarray:
        """Renormalized probabilities matching the cdf sampler."""
        return self.p / self.p_mass


def asym_first_moment(gamma: float, c_plus: float, c_minus: float) -> float:
    """m_a = 2 sum_{r>=1} r a(r) = (c+ - c-) * sum_{r>=1} r^{-gamma}; gamma > 1."""
    if c_plus == c_minus:
        return 0.0
    if gamma <= 1.0:
        raise ParameterError(
            f"first moment of the asymmetric part diverges for gamma = {gamma} <= 1")
    return (c_plus - c_minus) * power_sum(gamma)


def scaled_drift_moment(gamma: float, c_plus: float, c_minus: float, n: int) -> float:
    """m_n^gamma: 0 on gamma < 1, the n-windowed first moment at gamma = 1,
    Theta(n) * m_a for gamma > 1."""
    th = theta(n, gamma)
    if c_plus == c_minus or gamma < 1.0:
        return 0.0
    if gamma == 1.0:
        harmonic = float(np.sum(1.0 / np.arange(1, n + 1, dtype=float)))
        return th * (c_plus - c_minus) * harmonic
    return th * asym_first_moment(gamma, c_plus, c_minus)


def drift_moments(tables: "KernelTables") -> tuple[float | None, float]:
    """(m_a, m_n^gamma) for a built table; m_a is None when divergent."""
    return tables.m_a, tables.m_n_gamma


def c_hat(gamma: float, c_gamma: float) -> float:
    """Diffusive-regime constant: 2 c_2 at gamma = 2, 2 c_gamma zeta(gamma-1)
    above (the second moment of the one-sided kernel, doubled for both tails;
    this is the exact large-n limit of the symmetric stencil)."""
    if gamma < 2.0:
        raise ParameterError("c_hat is defined for gamma >= 2")
    if gamma == 2.0:
        return 2.0 * c_gamma
    return 2.0 * c_gamma * power_sum(gamma - 1.0)


def build_tables(params: ModelParams, lattice_size: int | None = None) -> KernelTables:
    """Precompute kernel arrays for a torus of the given (default params') size."""
    size = params.lattice_size if lattice_size is None else lattice_size
    gamma = params.gamma
    max_disp = size // 2
    if max_disp < 1:
        raise ParameterError(f"lattice too small for any displacement: L={size}")
    pos = np.arange(1, max_disp + 1, dtype=float)
    weights = pos ** (-1.0 - gamma)
    disps = np.concatenate([-np.arange(max_disp, 0, -1), np.arange(1, max_disp + 1)])
    p = np.concatenate([params.c_minus * weights[::-1], params.c_plus * weights])
    s = 0.5 * (p + p[::-1])
    a = 0.5 * (p - p[::-1])
    p_mass = float((params.c_plus + params.c_minus) * weights.sum())
    truncated_mass = float(
        (params.c_plus + params.c_minus) * power_tail_sum(1.0 + gamma, max_disp + 1))
    cdf = np.cumsum(p / p_mass)
    cdf[-1] = 1.0
    circ_p = np.zeros(size)
    circ_a = np.zeros(size)
    circ_s = np.zeros(size)
    np.add.at(circ_p, disps % size, p)
    np.add.at(circ_a, disps % size, a)
    np.add.at(circ_s, disps % size, s)
    m_a = None
    if params.c_plus == params.c_minus:
        m_a = 0.0
    elif gamma > 1.0:
        m_a = asym_first_moment(gamma, params.c_plus, params.c_minus)
    return KernelTables(
        gamma=gamma, lattice_size=size, max_disp=max_disp, displacements=disps,
        p=p, s=s, a=a, cdf=cdf, circ_p=circ_p, circ_a=circ_a, circ_s=circ_s,
        c_gamma=params.c_gamma, c_plus=params.c_plus, c_minus=params.c_minus,
        c_hat_gamma=c_hat(gamma, params.c_gamma) if gamma >= 2.0 else None,
        m_a=m_a,
        m_n_gamma=scaled_drift_moment(gamma, params.c_plus, params.c_minus, params.n),
        theta_n=params.theta_n, truncated_mass=truncated_mass, p_mass=p_mass,
        n=params.n)


def check_truncation(tables: KernelTables, limit: float = TRUNCATED_MASS_LIMIT) -> None:
    if tables.truncated_mass >= limit:
        raise ParameterError(
            f"truncated kernel mass {tables.truncated_mass:.3e} exceeds the limit "
            f"{limit:.1e}; increase lattice_size (L={tables.lattice_size}, "
            f"gamma={tables.gamma})")


@dataclass(frozen=True)
class HypothesisClass:
    """Asymmetry-strength regime: tag in {Hyp1, Hyp2, Neither} and the limit
    K* of Theta(n) K_n / n^{3/2} (0, finite, or inf)."""

    tag: str
    k_star: float


def classify_hypothesis(params: ModelParams) -> HypothesisClass:
    """Decide the scaling regime from the exponent algebra of the K_n power law."""
    kappa0, beta = params.kn_rule
    gamma = params.gamma
    symmetric = params.c_plus == params.c_minus
    if gamma == 2.0:
        # Theta(n) K_n / n^{3/2} = kappa0 n^{1/2 - beta} / log n
        if beta > 0.5:
            k_star = 0.0
        elif beta == 0.5:
            k_star = 0.0  # 1/log n -> 0
        else:
            k_star = math.inf if kappa0 > 0 else 0.0
        if symmetric or kappa0 == 0.0 or beta >= 0.5:
            # K_n sqrt(n) (log n)^{-3/4} -> 0 iff beta >= 1/2 on the power-law family
            return HypothesisClass(tag="Hyp1", k_star=k_star)
        return HypothesisClass(tag="Neither", k_star=k_star)
    exponent = min(gamma, 2.0) - 1.5 - beta
    if kappa0 == 0.0:
        k_star = 0.0
    elif abs(exponent) < 1e-12:
        k_star = kappa0
    elif exponent < 0:
        k_star = 0.0
    else:
        k_star = math.inf
    if symmetric or k_star == 0.0:
        return HypothesisClass(tag="Hyp1", k_star=k_star)
    if math.isfinite(k_star):
        return HypothesisClass(tag="Hyp2", k_star=k_star)
    return HypothesisClass(tag="Neither", k_star=k_star)
