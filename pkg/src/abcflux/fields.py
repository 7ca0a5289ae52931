"""Fluctuation fields, normal-mode constants, and the trajectory observables of
the martingale decomposition Z_t = Z_0 + M_t + B_t + I_t.

The two normal fields (signs +/-) are the linear combinations
f^s = D1 * centered_A + D2^s * centered_B evaluated against a test function
translated at velocity v_n^s. All double sums over site pairs (the nonlinear
term B, its block-average substitutes, and the quadratic-variation compensator)
are exact torus sums with the truncated kernel, evaluated through circular FFT
correlations; test functions are evaluated analytically at real (translated)
arguments, so no flooring enters except in the block-field substitute, which
keeps its floored gradient on purpose.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError
from .kernel import (KernelTables, ModelParams, build_rate_model, build_tables,
                     classify_hypothesis)
from .lattice import Configuration
from .operators import TestFunction

SIGNS = (1, -1)


def _sign_key(sign: int) -> str:
    return "+" if sign > 0 else "-"


@dataclass(frozen=True)
class NormalModeConstants:
    """Diagonalization constants of the coupled A/B fluctuation fields."""

    delta: float
    d1: float
    lambda_plus: float
    lambda_minus: float
    d2_plus: float
    d2_minus: float
    d3_plus: float
    d3_minus: float
    v_plus: float
    v_minus: float
    kappa_plus: float
    kappa_minus: float
    d4: float
    d5_plus: float
    d5_minus: float
    d6_plus: float
    d6_minus: float

    def lam(self, sign: int) -> float:
        return self.lambda_plus if sign > 0 else self.lambda_minus

    def d2(self, sign: int) -> float:
        return self.d2_plus if sign > 0 else self.d2_minus

    def d3(self, sign: int) -> float:
        return self.d3_plus if sign > 0 else self.d3_minus

    def velocity(self, sign: int) -> float:
        return self.v_plus if sign > 0 else self.v_minus

    def kappa(self, sign: int) -> float:
        return self.kappa_plus if sign > 0 else self.kappa_minus

    def b_coefficients(self, sign: int) -> tuple[float, float, float]:
        if sign > 0:
            return self.d4, self.d5_plus, self.d6_plus
        return self.d4, self.d5_minus, self.d6_minus

    def f_values(self, sign: int, densities) -> np.ndarray:
        """f(species) = d1*(1{A} - rho_A) + d2*(1{B} - rho_B) for the 3 species."""
        d2 = self.d2(sign)
        base = np.array([self.d1, 0.0, 0.0]) + np.array([0.0, d2, 0.0])
        return base - (self.d1 * densities[0] + d2 * densities[1])


def _d3_value(d1: float, d2: float, densities) -> float:
    chi_a = densities[0] * (1.0 - densities[0])
    chi_b = densities[1] * (1.0 - densities[1])
    return d1 * d1 * chi_a + d2 * d2 * chi_b - 2.0 * d1 * d2 * densities[0] * densities[1]


def normal_mode_constants(params: ModelParams,
                          tables: KernelTables | None = None) -> NormalModeConstants:
    """All diagonalization constants for the given parameters.

    Velocities need the scaled drift moment (from the kernel tables); the
    coupling constants kappa need K* and the first moment m_a.
    """
    ea, eb, ec = params.energies
    if ea == ec:
        raise ParameterError("energies must satisfy E_A != E_C")
    delta = params.delta
    if delta <= 0:
        raise ParameterError(f"discriminant must be positive, got {delta}")
    if tables is None:
        tables = build_tables(params)
    d1 = params.d1
    sqrt_delta = math.sqrt(delta)
    lam = {1: sqrt_delta, -1: -sqrt_delta}
    d2 = {s: d1 * (ea - eb + lam[s]) / (ea - ec) for s in SIGNS}
    d3 = {s: _d3_value(d1, d2[s], params.densities) for s in SIGNS}
    v = {s: -(2.0 * params.k_n / 3.0) * tables.m_n_gamma * lam[s] for s in SIGNS}
    hyp = classify_hypothesis(params)
    kappa = {}
    for s in SIGNS:
        if hyp.k_star == 0.0 or tables.m_a in (None, 0.0):
            kappa[s] = 0.0
        elif math.isinf(hyp.k_star):
            # outside both scaling regimes the coupling is undefined;
            # simulation stays allowed, limit tests are disabled
            kappa[s] = math.nan
        else:
            kappa[s] = -2.0 * hyp.k_star * tables.m_a \
                * (ea - 2.0 * eb + ec - s * sqrt_delta) * (ea - ec) \
                / (s * 2.0 * d1 * sqrt_delta)
    d4 = d1 * (ec - ea)
    d5 = {s: d2[s] * (ec - eb) for s in SIGNS}
    d6 = {s: 0.5 * (d1 * (eb - ec) + d2[s] * (ea - ec)) for s in SIGNS}
    return NormalModeConstants(
        delta=delta, d1=d1,
        lambda_plus=lam[1], lambda_minus=lam[-1],
        d2_plus=d2[1], d2_minus=d2[-1],
        d3_plus=d3[1], d3_minus=d3[-1],
        v_plus=v[1], v_minus=v[-1],
        kappa_plus=kappa[1], kappa_minus=kappa[-1],
        d4=d4, d5_plus=d5[1], d5_minus=d5[-1],
        d6_plus=d6[1], d6_minus=d6[-1])


def check_wrap_margin(params: ModelParams, constants: NormalModeConstants,
                      h: TestFunction, horizon: float, safety: float = 2.0) -> None:
    """Refuse configurations where the two normal fields can wrap into each
    other over the horizon (periodicity artifact guard)."""
    span = 2.0 * h.support_radius
    drift = abs(constants.v_plus - constants.v_minus) * horizon / params.n
    room = params.lattice_size / params.n
    if span + drift + safety > room:
        raise ParameterError(
            f"wrap margin violated: support span {span:.2f} + relative drift "
            f"{drift:.2f} + safety {safety} exceeds torus length {room:.2f} "
            "macroscopic units; enlarge lattice_size or shorten the horizon")


def default_dt(n: int, constants: NormalModeConstants) -> float:
    vmax = max(abs(constants.v_plus), abs(constants.v_minus))
    return min(1e-2, 0.1 * n / max(1.0, vmax))


# ---------------------------------------------------------------------------
# field evaluations
# ---------------------------------------------------------------------------

def _wrapped_positions(size: int, shift: float) -> np.ndarray:
    """((x - shift) mod L) / 1 for x = 0..L-1, as float site coordinates."""
    return np.mod(np.arange(size, dtype=float) - shift, size)


def fluctuation_field(config: Configuration, h: TestFunction, n: int,
                      alpha: int | str, shift: float, densities) -> float:
    """Centered, sqrt(n)-normalized empirical density tested against
    H(. - shift/n); shift in lattice units, torus-wrapped."""
    from .kernel import SPECIES_INDEX
    a = SPECIES_INDEX[alpha] if isinstance(alpha, str) else alpha
    size = config.size
    if 2.0 * h.support_radius > size / n - 2.0:
        raise ParameterError(
            "test-function support does not fit on the torus with a safe margin")
    vals = h.value(_wrapped_positions(size, shift) / n)
    xi = (config.species == a).astype(float) - densities[a]
    return float(vals @ xi) / math.sqrt(n)


def normal_field(config: Configuration, h: TestFunction, n: int, sign: int, t: float,
                 constants: NormalModeConstants, densities) -> float:
    """D1 * [Y^A + (D2/D1) Y^B] tested against the velocity-translated H."""
    shift = t * constants.velocity(sign)
    ya = fluctuation_field(config, h, n, 0, shift, densities)
    yb = fluctuation_field(config, h, n, 1, shift, densities)
    return constants.d1 * ya + constants.d2(sign) * yb


class FieldContext:
    """Shared precomputation for trajectory observables at one (params, H).

    Drift tables and translated test-function values are cached per
    (sign, sample time) and shared across trajectories; per-configuration
    work is FFT correlations and dot products.
    """

    def __init__(self, params: ModelParams, tables: KernelTables,
                 constants: NormalModeConstants, h: TestFunction,
                 r_cut: int | None = None):
        self.params = params
        self.tables = tables
        self.constants = constants
        self.h = h
        self.n = params.n
        self.size = tables.lattice_size
        self.sqrt_n = math.sqrt(params.n)
        self.rates = build_rate_model(params.k_n, params.energies).rates
        self.r_cut = tables.max_disp if r_cut is None else int(r_cut)
        if not 1 <= self.r_cut <= tables.max_disp:
            raise ParameterError(
                f"r_cut must lie in [1, L/2] = [1, {tables.max_disp}], got {r_cut}")
        size = self.size
        # one-sided antisymmetric kernel a(z), z = 1..r_cut, circular layout;
        # on an even torus the antipodal displacement cancels in the generator
        a_one = np.zeros(size)
        zs = np.arange(1, self.r_cut + 1)
        a_one[zs] = 0.5 * (tables.c_plus - tables.c_minus) * zs ** (-1.0 - params.gamma)
        if size % 2 == 0 and self.r_cut == tables.max_disp:
            a_one[tables.max_disp] = 0.0
        self._rfft_a1 = np.fft.rfft(a_one)
        # two-sided jump kernel restricted to |d| <= r_cut, circular layout
        if self.r_cut == tables.max_disp:
            circ_p = tables.circ_p
        else:
            circ_p = np.zeros(size)
            keep = np.abs(tables.displacements) <= self.r_cut
            np.add.at(circ_p, tables.displacements[keep] % size, tables.p[keep])
        self._rfft_p = np.fft.rfft(circ_p)
        self._hyp = classify_hypothesis(params)
        self._hv_cache: dict = {}
        self._drift_cache: dict = {}
        self._grad_cache: dict = {}

    # -- cached, trajectory-independent tables ------------------------------

    def hv(self, sign: int, t: float) -> np.ndarray:
        key = (sign, round(float(t), 12))
        out = self._hv_cache.get(key)
        if out is None:
            shift = t * self.constants.velocity(sign)
            out = self.h.value(_wrapped_positions(self.size, shift) / self.n)
            self._hv_cache[key] = out
        return out

    def grad_hv(self, sign: int, t: float, floored: bool) -> np.ndarray:
        key = (sign, round(float(t), 12), floored)
        out = self._grad_cache.get(key)
        if out is None:
            shift = t * self.constants.velocity(sign)
            pos = _wrapped_positions(self.size, shift)
            if floored:
                pos = np.floor(pos)
            out = self.h.grad(pos / self.n)
            self._grad_cache[key] = out
        return out

    def drift_table(self, sign: int, t: float) -> np.ndarray:
        """[Theta sym-stencil - asym-stencil](H) at the translated grid points."""
        key = (sign, round(float(t), 12))
        out = self._drift_cache.get(key)
        if out is None:
            tb = self.tables
            hv = self.hv(sign, t)
            rfft_hv = np.fft.rfft(hv)
            corr_s = np.fft.irfft(rfft_hv * np.conj(np.fft.rfft(tb.circ_s)), n=self.size)
            sym = tb.theta_n * 2.0 * (corr_s - float(tb.s.sum()) * hv)
            corr_a = np.fft.irfft(rfft_hv * np.conj(np.fft.rfft(tb.circ_a)), n=self.size)
            lam = self.constants.lam(sign)
            grad = self.grad_hv(sign, t, floored=False)
            asym = (2.0 * lam * self.params.k_n / 3.0) * (
                tb.theta_n * corr_a - (tb.m_n_gamma / self.n) * grad)
            out = sym - asym
            self._drift_cache[key] = out
        return out

    # -- per-configuration evaluations ---------------------------------------

    def snapshot(self, config: Configuration) -> "_Snapshot":
        return _Snapshot(self, config)

    def field_value(self, config: Configuration, sign: int, t: float,
                    snap: "_Snapshot | None" = None) -> float:
        snap = snap or self.snapshot(config)
        return float(self.hv(sign, t) @ snap.f_vec(sign)) / self.sqrt_n

    def i_integrand(self, config: Configuration, sign: int, t: float,
                    snap: "_Snapshot | None" = None) -> float:
        snap = snap or self.snapshot(config)
        return float(self.drift_table(sign, t) @ snap.f_vec(sign)) / self.sqrt_n

    def b_integrands(self, config: Configuration, sign: int, t: float,
                     snap: "_Snapshot | None" = None) -> dict:
        """Nonlinear-term integrands: the four ordered (alpha, beta) pair values
        and their combination through (d4, d5, d6)."""
        snap = snap or self.snapshot(config)
        hv = self.hv(sign, t)
        pref = self.tables.theta_n * self.params.k_n / self.sqrt_n
        # correlations of hv-weighted centered indicators with the one-sided kernel
        weighted = np.fft.irfft(
            np.fft.rfft(hv[None, :] * snap.xi, axis=1) * np.conj(self._rfft_a1)[None, :],
            n=self.size, axis=1)
        pairs = {}
        for ia, a_name in enumerate("AB"):
            for ib, b_name in enumerate("AB"):
                pairs[a_name + b_name] = pref * (
                    float(snap.xi[ia] @ weighted[ib])
                    - float((hv * snap.xi[ia]) @ snap.ca1_xi[ib]))
        d4, d5, d6 = self.constants.b_coefficients(sign)
        pairs["combined"] = 4.0 * (d4 * pairs["AA"] + d5 * pairs["BB"]
                                   - d6 * (pairs["AB"] + pairs["BA"]))
        return pairs

    def qv_integrand(self, config: Configuration, sign: int, t: float,
                     snap: "_Snapshot | None" = None) -> float:
        """Compensator integrand of the Dynkin martingale (nonnegative)."""
        snap = snap or self.snapshot(config)
        hv = self.hv(sign, t)
        f_vals = self.constants.f_values(sign, self.params.densities)
        oh = snap.one_hots
        hv_oh = hv[None, :] * oh
        hv2_oh = hv[None, :] * hv_oh
        p_weighted = np.fft.irfft(
            np.fft.rfft(np.vstack([hv_oh, hv2_oh]), axis=1)
            * np.conj(self._rfft_p)[None, :],
            n=self.size, axis=1)
        total = 0.0
        for a in range(3):
            for b in range(3):
                if a == b:
                    continue
                g_ab = (f_vals[b] - f_vals[a]) ** 2 * self.rates[a, b]
                if g_ab == 0.0:
                    continue
                term = (float(hv2_oh[a] @ snap.p_of_oh[b])
                        - 2.0 * float(hv_oh[a] @ p_weighted[b])
                        + float(oh[a] @ p_weighted[3 + b]))
                total += g_ab * term
        return self.tables.theta_n / self.n * total

    def qv_expectation_integrand(self, sign: int, t: float) -> float:
        """Exact stationary expectation of the compensator integrand:
        2 D3 (Theta/n) sum_{z,w} [H_z - H_w]^2 s(w - z) over the torus."""
        hv = self.hv(sign, t)
        tb = self.tables
        if self.r_cut == tb.max_disp:
            circ_s = tb.circ_s
            s_mass = float(tb.s.sum())
        else:
            circ_s = np.zeros(self.size)
            keep = np.abs(tb.displacements) <= self.r_cut
            np.add.at(circ_s, tb.displacements[keep] % self.size, tb.s[keep])
            s_mass = float(tb.s[keep].sum())
        corr = np.fft.irfft(np.fft.rfft(hv) * np.conj(np.fft.rfft(circ_s)),
                            n=self.size)
        pair_sum = 2.0 * (s_mass * float(hv @ hv) - float(hv @ corr))
        return 2.0 * self.constants.d3(sign) * tb.theta_n / self.n * pair_sum

    # -- block-average observables -------------------------------------------

    def block_substitute_prefactor(self) -> float:
        if not (self._hyp.k_star and math.isfinite(self._hyp.k_star)):
            raise ParameterError(
                "block-field substitute needs K* in (0, inf); got "
                f"{self._hyp.k_star}")
        return self._hyp.k_star * self.tables.m_a

    def _block_averages(self, vec: np.ndarray, block: int) -> tuple[np.ndarray, np.ndarray]:
        """(left, right) running block averages over the flanking windows."""
        size = self.size
        cs = np.concatenate([[0.0], np.cumsum(np.concatenate([vec, vec]))])
        idx = np.arange(size)
        left = (cs[idx + size] - cs[idx + size - block]) / block
        right = (cs[idx + 1 + block] - cs[idx + 1]) / block
        return left, right

    def block_substitute_integrands(self, config: Configuration, sign: int, t: float,
                                    eps: float, snap: "_Snapshot | None" = None) -> dict:
        """Per-pair replacement observables: K* m_a * sum_x grad H(floor(x - tv)/n)
        * Psi_{x, eps n}^{alpha beta}; requires a finite positive K*."""
        pref = self.block_substitute_prefactor()
        block = int(round(eps * self.n))
        if block < 2:
            raise ParameterError(f"eps*n = {eps * self.n:.2f} < 2: empty blocks")
        snap = snap or self.snapshot(config)
        grad = self.grad_hv(sign, t, floored=True)
        left = {}
        right = {}
        for idx, name in enumerate("AB"):
            left[name], right[name] = snap.blocks(idx, block)
        out = {}
        for a_name in ("A", "B"):
            for b_name in ("A", "B"):
                out[a_name + b_name] = pref * float(
                    grad @ (left[a_name] * right[b_name]))
        d4, d5, d6 = self.constants.b_coefficients(sign)
        out["combined"] = 4.0 * (d4 * out["AA"] + d5 * out["BB"]
                                 - d6 * (out["AB"] + out["BA"]))
        return out

    def quadratic_block_integrand(self, config: Configuration, sign: int, t: float,
                                  eps: float, floored: bool = True,
                                  snap: "_Snapshot | None" = None) -> float:
        """sum_x grad H((x - tv)/n) * (left f-block)(right f-block) with blocks
        of eps*n sites; the regression target whose slope estimates -kappa."""
        block = int(round(eps * self.n))
        if block < 2:
            raise ParameterError(f"eps*n = {eps * self.n:.2f} < 2: empty blocks")
        snap = snap or self.snapshot(config)
        grad = self.grad_hv(sign, t, floored=floored)
        la, ra = snap.blocks(0, block)
        lb, rb = snap.blocks(1, block)
        d1, d2 = self.constants.d1, self.constants.d2(sign)
        left = d1 * la + d2 * lb
        right = d1 * ra + d2 * rb
        return float(grad @ (left * right))


class _Snapshot:
    """Per-configuration work shared across signs and observables at one
    sample time: species one-hots, centered indicators, and the kernel
    correlations that do not depend on the test function."""

    def __init__(self, ctx: FieldContext, config: Configuration):
        self._ctx = ctx
        rho = ctx.params.densities
        sp = config.species
        self.one_hots = np.stack([(sp == a) for a in range(3)]).astype(np.float64)
        self.xi = self.one_hots[:2] - np.array(rho[:2], dtype=float)[:, None]
        self._p_of_oh = None
        self._ca1_xi = None
        self._f_vecs: dict[int, np.ndarray] = {}
        self._blocks: dict = {}

    @property
    def p_of_oh(self) -> np.ndarray:
        if self._p_of_oh is None:
            ctx = self._ctx
            self._p_of_oh = np.fft.irfft(
                np.fft.rfft(self.one_hots, axis=1) * np.conj(ctx._rfft_p)[None, :],
                n=ctx.size, axis=1)
        return self._p_of_oh

    @property
    def ca1_xi(self) -> np.ndarray:
        if self._ca1_xi is None:
            ctx = self._ctx
            self._ca1_xi = np.fft.irfft(
                np.fft.rfft(self.xi, axis=1) * np.conj(ctx._rfft_a1)[None, :],
                n=ctx.size, axis=1)
        return self._ca1_xi

    def f_vec(self, sign: int) -> np.ndarray:
        vec = self._f_vecs.get(sign)
        if vec is None:
            c = self._ctx.constants
            vec = c.d1 * self.xi[0] + c.d2(sign) * self.xi[1]
            self._f_vecs[sign] = vec
        return vec

    def blocks(self, species_idx: int, block: int) -> tuple[np.ndarray, np.ndarray]:
        key = (species_idx, block)
        pair = self._blocks.get(key)
        if pair is None:
            pair = self._ctx._block_averages(self.xi[species_idx], block)
            self._blocks[key] = pair
        return pair


# ---------------------------------------------------------------------------
# series assembly
# ---------------------------------------------------------------------------

@dataclass
class FieldSeries:
    """Time-indexed observables along one trajectory.

    The decomposition arrays are cumulative trapezoid integrals of the recorded
    integrands; m = z - z(0) - b - i holds by construction at every sample
    time, so the residual is exactly the Dynkin martingale up to quadrature
    error. `extras` holds auxiliary cumulative observables keyed like
    "b_pair:+:AB", "bsub:+:0.10:AB", "quadblock:-:0.10", "energy:+:0.20".
    """

    trajectory_id: int
    sample_times: np.ndarray
    z_plus: np.ndarray
    z_minus: np.ndarray
    b_plus: np.ndarray
    b_minus: np.ndarray
    i_plus: np.ndarray
    i_minus: np.ndarray
    qv_plus: np.ndarray
    qv_minus: np.ndarray
    m_plus: np.ndarray
    m_minus: np.ndarray
    extras: dict = field(default_factory=dict)

    def z(self, sign: int) -> np.ndarray:
        return self.z_plus if sign > 0 else self.z_minus

    def m(self, sign: int) -> np.ndarray:
        return self.m_plus if sign > 0 else self.m_minus

    def qv(self, sign: int) -> np.ndarray:
        return self.qv_plus if sign > 0 else self.qv_minus

    def b(self, sign: int) -> np.ndarray:
        return self.b_plus if sign > 0 else self.b_minus


def cumulative_trapezoid(times: np.ndarray, values: np.ndarray) -> np.ndarray:
    out = np.zeros_like(values)
    if len(times) > 1:
        dt = np.diff(times)
        out[1:] = np.cumsum(0.5 * dt * (values[1:] + values[:-1]))
    return out


def assemble_series(trajectory_id: int, sample_times: np.ndarray,
                    samples: dict[str, np.ndarray], n: int,
                    constants: NormalModeConstants,
                    dt_warn: bool = True) -> FieldSeries:
    """Integrate recorded integrands into the decomposition arrays.

    `samples` maps integrand names ("z:+", "b:+", "i:+", "qv:+", extras...) to
    sample arrays aligned with `sample_times`.
    """
    times = np.asarray(sample_times, dtype=float)
    if np.any(np.diff(times) < 0):
        raise ParameterError("sample grid must be sorted")
    if dt_warn and len(times) > 1:
        dt = float(np.max(np.diff(times)))
        vmax = max(abs(constants.v_plus), abs(constants.v_minus))
        if dt * vmax > 0.1 * n:
            warnings.warn(
                f"sample grid too coarse: dt*|v_n| = {dt * vmax:.2f} lattice units "
                f"> 0.1*n = {0.1 * n:.2f}; halve dt for the translation quadrature",
                stacklevel=2)
    cols = {}
    for sign in SIGNS:
        key = _sign_key(sign)
        z = np.asarray(samples[f"z:{key}"], dtype=float)
        b = cumulative_trapezoid(times, np.asarray(samples[f"b:{key}"], dtype=float))
        i_t = cumulative_trapezoid(times, np.asarray(samples[f"i:{key}"], dtype=float))
        qv = cumulative_trapezoid(times, np.asarray(samples[f"qv:{key}"], dtype=float))
        m = z - z[0] - b - i_t
        cols[key] = (z, b, i_t, qv, m)
    extras = {}
    for name, vals in samples.items():
        base = name.split(":")[0]
        if base in ("z", "b", "i", "qv"):
            continue
        extras[name] = cumulative_trapezoid(times, np.asarray(vals, dtype=float))
    zp, bp, ip, qp, mp = cols["+"]
    zm, bm, im, qm, mm = cols["-"]
    return FieldSeries(
        trajectory_id=trajectory_id, sample_times=times,
        z_plus=zp, z_minus=zm, b_plus=bp, b_minus=bm,
        i_plus=ip, i_minus=im, qv_plus=qp, qv_minus=qm,
        m_plus=mp, m_minus=mm, extras=extras)


def energy_field(series: FieldSeries, sign: int, eps: float, s: float, t: float) -> float:
    """B^eps_{s,t}(H) from the recorded block-product integrand."""
    if not 0.0 < eps < 0.5:
        raise ParameterError(f"eps must lie in (0, 1/2), got {eps}")
    key = f"energy:{_sign_key(sign)}:{eps:.4f}"
    if key not in series.extras:
        raise ParameterError(f"series lacks the energy observable {key!r}")
    times = series.sample_times
    if s < times[0] - 1e-12 or t > times[-1] + 1e-12:
        raise ParameterError("sample grid does not cover [s, t]")
    vals = series.extras[key]
    return float(np.interp(t, times, vals) - np.interp(s, times, vals))


class FieldRecorder:
    """Observer collecting integrand samples for one trajectory."""

    def __init__(self, context: FieldContext, sample_times, trajectory_id: int = 0,
                 pair_terms: bool = False, block_eps: tuple[float, ...] = (),
                 quad_eps: tuple[float, ...] = (), energy_eps: tuple[float, ...] = ()):
        self.context = context
        self.times = np.asarray(sample_times, dtype=float)
        if np.any(np.diff(self.times) < 0):
            raise ParameterError("observer sample grid must be sorted")
        self.trajectory_id = trajectory_id
        self.pair_terms = pair_terms
        self.block_eps = tuple(block_eps)
        self.quad_eps = tuple(quad_eps)
        self.energy_eps = tuple(energy_eps)
        self._data: dict[str, list] = {}

    def _push(self, name: str, value: float) -> None:
        self._data.setdefault(name, []).append(value)

    def record(self, t, config, clock) -> None:
        ctx = self.context
        snap = ctx.snapshot(config)
        for sign in SIGNS:
            key = _sign_key(sign)
            self._push(f"z:{key}", ctx.field_value(config, sign, t, snap))
            self._push(f"i:{key}", ctx.i_integrand(config, sign, t, snap))
            b_vals = ctx.b_integrands(config, sign, t, snap)
            self._push(f"b:{key}", b_vals["combined"])
            if self.pair_terms:
                for pair in ("AA", "BB", "AB", "BA"):
                    self._push(f"b_pair:{key}:{pair}", b_vals[pair])
            self._push(f"qv:{key}", ctx.qv_integrand(config, sign, t, snap))
            for eps in self.block_eps:
                subs = ctx.block_substitute_integrands(config, sign, t, eps, snap)
                for pair in ("AA", "BB", "AB", "BA", "combined"):
                    self._push(f"bsub:{key}:{eps:.4f}:{pair}", subs[pair])
            for eps in self.quad_eps:
                self._push(f"quadblock:{key}:{eps:.4f}",
                           ctx.quadratic_block_integrand(config, sign, t, eps,
                                                         snap=snap))
            for eps in self.energy_eps:
                self._push(f"energy:{key}:{eps:.4f}",
                           ctx.quadratic_block_integrand(config, sign, t, eps,
                                                         floored=False, snap=snap))

    def to_series(self) -> FieldSeries:
        samples = {k: np.asarray(v) for k, v in self._data.items()}
        return assemble_series(self.trajectory_id, self.times, samples,
                               self.context.n, self.context.constants)


class AuxRecorder:
    """Slim observer recording a chosen subset of integrands (no full
    decomposition), e.g. the nonlinear term against a second test function on
    the shared trajectory, or the block-product energy integrands on a finer
    grid than the main decomposition needs."""

    def __init__(self, context: FieldContext, sample_times,
                 fields: tuple[str, ...] = ("b",), signs: tuple[int, ...] = SIGNS,
                 energy_eps: tuple[float, ...] = ()):
        self.context = context
        self.times = np.asarray(sample_times, dtype=float)
        if np.any(np.diff(self.times) < 0):
            raise ParameterError("observer sample grid must be sorted")
        self.fields = tuple(fields)
        self.signs = tuple(signs)
        self.energy_eps = tuple(energy_eps)
        self._data: dict[str, list] = {}

    def record(self, t, config, clock) -> None:
        ctx = self.context
        snap = ctx.snapshot(config)
        for sign in self.signs:
            key = _sign_key(sign)
            if "z" in self.fields:
                self._data.setdefault(f"z:{key}", []).append(
                    ctx.field_value(config, sign, t, snap))
            if "b" in self.fields:
                self._data.setdefault(f"b:{key}", []).append(
                    ctx.b_integrands(config, sign, t, snap)["combined"])
            if "i" in self.fields:
                self._data.setdefault(f"i:{key}", []).append(
                    ctx.i_integrand(config, sign, t, snap))
            if "qv" in self.fields:
                self._data.setdefault(f"qv:{key}", []).append(
                    ctx.qv_integrand(config, sign, t, snap))
            for eps in self.energy_eps:
                self._data.setdefault(f"energy:{key}:{eps:.4f}", []).append(
                    ctx.quadratic_block_integrand(config, sign, t, eps,
                                                  floored=False, snap=snap))

    def samples(self) -> dict[str, np.ndarray]:
        return {k: np.asarray(v) for k, v in self._data.items()}

    def cumulative(self, name: str) -> np.ndarray:
        return cumulative_trapezoid(self.times, np.asarray(self._data[name]))


# ---------------------------------------------------------------------------
# standalone single-evaluation wrappers
# ---------------------------------------------------------------------------

def _context_for(params: ModelParams, h: TestFunction, tables: KernelTables | None,
                 constants: NormalModeConstants | None,
                 r_cut: int | None = None) -> FieldContext:
    tables = build_tables(params) if tables is None else tables
    constants = normal_mode_constants(params, tables) if constants is None else constants
    return FieldContext(params, tables, constants, h, r_cut=r_cut)


def nonlinear_term_increment(config, h, params, t, sign=1, constants=None,
                             tables=None, r_cut=None) -> dict:
    ctx = _context_for(params, h, tables, constants, r_cut)
    return ctx.b_integrands(config, sign, t)


def integral_term_increment(config, h, params, t, sign=1, constants=None,
                            tables=None) -> float:
    ctx = _context_for(params, h, tables, constants)
    return ctx.i_integrand(config, sign, t)


def qv_increment(config, h, params, t, sign=1, constants=None, tables=None,
                 r_cut=None) -> float:
    ctx = _context_for(params, h, tables, constants, r_cut)
    return ctx.qv_integrand(config, sign, t)
