"""Discrete long-range operators, their continuum limits, grid norms,
Fourier-multiplier cross-checks, and the matrix-exponential reference for the
Gaussian (Ornstein-Uhlenbeck) regime.

Conventions. Grid points sit at u/n for integer-valued site coordinates u; all
stencils accept real site coordinates because the translated test functions
are evaluated analytically. The discrete symmetric stencil is

    sym(H)(u/n) = 2 sum_r [H((u+r)/n) - H(u/n)] s(r),

reported multiplied by Theta(n); the asymmetric one carries the drift
compensator,

    asym(H)(u/n) = (2 lambda K_n / 3) { Theta(n) sum_r [H((u+r)/n) - H(u/n)] a(r)
                                        - (m_n^gamma / n) grad H(u/n) }.

With the untruncated kernel the mass identities sum_r s(r) = 1 and
sum_r a(r) = 0 turn both infinite sums into exact finite sums over the support
of H.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate

from .errors import NumericalError, ParameterError
from .kernel import (KernelTables, c_hat, normalize_kernel,
                     scaled_drift_moment, theta)

_SUPPORT_EPS = 1e-14
_SING_H = 1e-4          # Taylor-replacement radius for singular integrals
_GL_ORDER = 16


@dataclass(frozen=True)
class TestFunction:
    """Analytic test function: gaussian, bump, or modulated gaussian.

    Evaluators are vectorized over numpy arrays. `support_radius` is where the
    envelope falls below 1e-14.
    """

    family: str
    center: float
    width: float
    wavenumber: float = 0.0

    def _t(self, u):
        return np.asarray(u, dtype=float) - self.center

    def value(self, u):
        t = self._t(u)
        if self.family == "gaussian":
            return np.exp(-0.5 * (t / self.width) ** 2)
        if self.family == "modulated_gaussian":
            return np.exp(-0.5 * (t / self.width) ** 2) * np.cos(2 * np.pi * self.wavenumber * t)
        if self.family == "bump":
            x = t / self.width
            inside = np.abs(x) < 1.0
            out = np.zeros_like(x)
            xs = np.where(inside, x, 0.0)
            out[inside] = np.exp(1.0 - 1.0 / (1.0 - xs[inside] ** 2))
            return out
        raise ParameterError(f"unknown test-function family {self.family!r}")

    def grad(self, u):
        t = self._t(u)
        if self.family == "gaussian":
            return -(t / self.width ** 2) * np.exp(-0.5 * (t / self.width) ** 2)
        if self.family == "modulated_gaussian":
            w = 2 * np.pi * self.wavenumber
            env = np.exp(-0.5 * (t / self.width) ** 2)
            return env * (-(t / self.width ** 2) * np.cos(w * t) - w * np.sin(w * t))
        if self.family == "bump":
            x = t / self.width
            inside = np.abs(x) < 1.0
            out = np.zeros_like(x)
            xs = x[inside]
            g = np.exp(1.0 - 1.0 / (1.0 - xs ** 2))
            out[inside] = g * (-2.0 * xs / (1.0 - xs ** 2) ** 2) / self.width
            return out
        raise ParameterError(f"unknown test-function family {self.family!r}")

    def lap(self, u):
        t = self._t(u)
        if self.family == "gaussian":
            s2 = self.width ** 2
            return (t ** 2 / s2 ** 2 - 1.0 / s2) * np.exp(-0.5 * t ** 2 / s2)
        if self.family == "modulated_gaussian":
            s2 = self.width ** 2
            w = 2 * np.pi * self.wavenumber
            env = np.exp(-0.5 * t ** 2 / s2)
            return env * ((t ** 2 / s2 ** 2 - 1.0 / s2 - w ** 2) * np.cos(w * t)
                          + (2.0 * t * w / s2) * np.sin(w * t))
        if self.family == "bump":
            x = t / self.width
            inside = np.abs(x) < 1.0
            out = np.zeros_like(x)
            xs = x[inside]
            g = np.exp(1.0 - 1.0 / (1.0 - xs ** 2))
            gp = -2.0 * xs / (1.0 - xs ** 2) ** 2
            gpp = -2.0 * (1.0 + 3.0 * xs ** 2) / (1.0 - xs ** 2) ** 3
            out[inside] = g * (gpp + gp ** 2) / self.width ** 2
            return out
        raise ParameterError(f"unknown test-function family {self.family!r}")

    @property
    def support_radius(self) -> float:
        if self.family == "bump":
            return self.width
        return self.width * math.sqrt(-2.0 * math.log(_SUPPORT_EPS))

    def l2_norm_sq_exact(self) -> float | None:
        """Closed-form integral of H^2 where available (None for bump)."""
        if self.family == "gaussian":
            return self.width * math.sqrt(math.pi)
        if self.family == "modulated_gaussian":
            w = 2 * math.pi * self.wavenumber
            return 0.5 * self.width * math.sqrt(math.pi) * (
                1.0 + math.exp(-self.width ** 2 * w ** 2))
        return None


def gaussian(center: float, width: float) -> TestFunction:
    return TestFunction("gaussian", center, width)


def bump(center: float, halfwidth: float) -> TestFunction:
    return TestFunction("bump", center, halfwidth)


def modulated_gaussian(center: float, width: float, wavenumber: float) -> TestFunction:
    return TestFunction("modulated_gaussian", center, width, wavenumber)


@dataclass(frozen=True)
class GridFunction:
    """Values attached to site coordinates x0..x0+len-1, macroscopic points x/n."""

    values: np.ndarray
    n: int
    x0: int


def grid_window(h: TestFunction, n: int, margin: float = 0.0) -> np.ndarray:
    """Integer site coordinates covering the support of H (plus margin), scale n."""
    r = h.support_radius + margin
    lo = math.floor((h.center - r) * n)
    hi = math.ceil((h.center + r) * n)
    return np.arange(lo, hi + 1)


def discrete_l2_norm(h, n: int) -> float:
    """Squared grid norm (1/n) sum_x H(x/n)^2, truncated where |H| < 1e-14."""
    if isinstance(h, GridFunction):
        return float(np.sum(h.values ** 2)) / h.n
    xs = grid_window(h, n)
    vals = h.value(xs / n)
    return float(np.sum(vals ** 2)) / n


def _stencil_sum(h: TestFunction, n: int, us: np.ndarray, weights_of_r,
                 r_min: int, r_max: int, chunk: int = 512) -> np.ndarray:
    """sum_r H((u + r)/n) w(r) for each u in `us`, r in [r_min, r_max] minus 0.

    Integer-valued site coordinates share one evaluation grid, so the sum is a
    discrete correlation (FFT-evaluated); non-integer coordinates fall back to
    blocked outer products.
    """
    rs = np.arange(r_min, r_max + 1, dtype=float)
    w = weights_of_r(np.where(rs == 0, 1.0, rs))
    w[rs == 0.0] = 0.0
    if np.all(us == np.round(us)):
        from scipy.signal import fftconvolve

        u0 = int(us.min())
        u1 = int(us.max())
        grid = np.arange(u0 + r_min, u1 + r_max + 1)
        hv = h.value(grid / n)
        corr = fftconvolve(hv, w[::-1], mode="valid")
        return corr[(us - u0).astype(int)]
    rs = rs[rs != 0]
    w = weights_of_r(rs)
    out = np.empty(us.shape[0])
    for i0 in range(0, us.shape[0], chunk):
        block = us[i0:i0 + chunk, None]
        out[i0:i0 + chunk] = (h.value((block + rs[None, :]) / n) @ w)
    return out


def _analytic_r_range(h: TestFunction, n: int, us: np.ndarray) -> tuple[int, int]:
    r = h.support_radius
    lo = math.floor(h.center * n - r * n - float(us.max()))
    hi = math.ceil(h.center * n + r * n - float(us.min()))
    return lo, hi


def discrete_sym_op(h: TestFunction, n: int, gamma: float, us,
                    tables: KernelTables | None = None) -> GridFunction | np.ndarray:
    """Theta(n) * sym-stencil of H at real site coordinates `us`.

    With `tables` the truncated kernel of the simulator is used; without, the
    untruncated kernel via the exact mass identity sum_r s(r) = 1.
    """
    us = np.asarray(us, dtype=float)
    th = theta(n, gamma)
    h_at = h.value(us / n)
    if tables is not None:
        s_arr = tables.s
        disp = tables.displacements
        s_mass = float(s_arr.sum())
        rs = disp.astype(float)
        out = np.empty(us.shape[0])
        for i0 in range(0, us.shape[0], 512):
            block = us[i0:i0 + 512, None]
            out[i0:i0 + 512] = h.value((block + rs[None, :]) / n) @ s_arr
        return th * 2.0 * (out - s_mass * h_at)
    _, _, c_gamma = normalize_kernel(gamma, 0.0)
    lo, hi = _analytic_r_range(h, n, us)
    sums = _stencil_sum(h, n, us, lambda r: c_gamma * np.abs(r) ** (-1.0 - gamma), lo, hi)
    return th * 2.0 * (sums - h_at)


def discrete_asym_op(h: TestFunction, n: int, gamma: float, lam: float, k_n: float,
                     c_plus: float, c_minus: float, us,
                     tables: KernelTables | None = None) -> np.ndarray:
    """(2 lambda K_n / 3) { Theta(n) asym-stencil - (m_n^gamma / n) grad H } at `us`.

    The asymmetric stencil self-truncates on the support of H (sum_r a(r) = 0
    on any symmetric range), so the truncated and untruncated variants agree.
    """
    us = np.asarray(us, dtype=float)
    th = theta(n, gamma)
    if lam == 0.0 or k_n == 0.0 or c_plus == c_minus:
        return np.zeros(us.shape[0])
    half_diff = 0.5 * (c_plus - c_minus)
    if tables is not None:
        a_arr = tables.a
        rs = tables.displacements.astype(float)
        out = np.empty(us.shape[0])
        for i0 in range(0, us.shape[0], 512):
            block = us[i0:i0 + 512, None]
            out[i0:i0 + 512] = h.value((block + rs[None, :]) / n) @ a_arr
        sums = out
    else:
        lo, hi = _analytic_r_range(h, n, us)
        sums = _stencil_sum(
            h, n, us, lambda r: half_diff * np.sign(r) * np.abs(r) ** (-1.0 - gamma),
            lo, hi)
    m_n = scaled_drift_moment(gamma, c_plus, c_minus, n)
    return (2.0 * lam * k_n / 3.0) * (th * sums - (m_n / n) * h.grad(us / n))


# ---------------------------------------------------------------------------
# continuum operators via panel quadrature with Taylor-regularized singularity
# ---------------------------------------------------------------------------

@lru_cache(maxsize=64)
def _gl_rule(order: int):
    return np.polynomial.legendre.leggauss(order)

def _dyadic_panels(h0: float, r_end: float, breakpoints: tuple[float, ...] = (),
                   max_width: float = 0.5):
    """Gauss-Legendre nodes/weights on geometrically growing panels covering
    [h0, r_end]; panel widths are capped so smooth structure stays resolved."""
    edges = [h0]
    while edges[-1] < r_end:
        width = min(edges[-1], max_width)
        edges.append(min(edges[-1] + width, r_end))
    for b in breakpoints:
        if h0 < b < r_end:
            edges.append(b)
    edges = np.unique(np.asarray(edges))
    xg, wg = _gl_rule(_GL_ORDER)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * (edges[1:] - edges[:-1])
    nodes = (mid[:, None] + half[:, None] * xg[None, :]).ravel()
    weights = (half[:, None] * wg[None, :]).ravel()
    return nodes, weights


def _fourth_derivative(h: TestFunction, u, delta: float = 1e-3):
    u = np.asarray(u, dtype=float)
    return (h.lap(u + delta) - 2.0 * h.lap(u) + h.lap(u - delta)) / delta ** 2


def _third_derivative(h: TestFunction, u, delta: float = 1e-4):
    u = np.asarray(u, dtype=float)
    return (h.lap(u + delta) - h.lap(u - delta)) / (2.0 * delta)


def continuum_sym_op(h: TestFunction, gamma: float, u) -> np.ndarray | float:
    """Long-range symmetric generator on test functions.

    gamma < 2: c_gamma * int [H(u+v) + H(u-v) - 2H(u)] |v|^{-1-gamma} dv with
    the |v| < h part replaced by its fourth-order Taylor value; gamma >= 2:
    c_hat * Laplacian(H), analytically.
    """
    if gamma <= 0:
        raise ParameterError(f"gamma must be positive, got {gamma}")
    scalar = np.isscalar(u)
    us = np.atleast_1d(np.asarray(u, dtype=float))
    _, _, c_gamma = normalize_kernel(gamma, 0.0)
    if gamma >= 2.0:
        out = c_hat(gamma, c_gamma) * h.lap(us)
        return float(out[0]) if scalar else out
    r_end = h.support_radius + float(np.max(np.abs(us - h.center))) + 1.0
    nodes, weights = _dyadic_panels(_SING_H, r_end)
    kern = weights * nodes ** (-1.0 - gamma)
    vals = (h.value(us[:, None] + nodes[None, :])
            + h.value(us[:, None] - nodes[None, :])
            - 2.0 * h.value(us)[:, None])
    main = vals @ kern
    small = (h.lap(us) * _SING_H ** (2.0 - gamma) / (2.0 - gamma)
             + _fourth_derivative(h, us) * _SING_H ** (4.0 - gamma) / (12.0 * (4.0 - gamma)))
    tail = -2.0 * h.value(us) * r_end ** (-gamma) / gamma
    # main/small/tail are the v > 0 half; the integrand is even in v
    out = 2.0 * c_gamma * (main + small + tail)
    return float(out[0]) if scalar else out


def continuum_asym_op(h: TestFunction, gamma: float, lam: float, k_const: float,
                      c_plus: float, c_minus: float, u) -> np.ndarray | float:
    """Long-range antisymmetric generator with the gamma-dependent compensator.

    Zero identically for gamma >= 2. For gamma = 1 the compensator is windowed
    to |v| <= 1 (enforced by the quadrature breakpoint at v=1).
    """
    if gamma <= 0:
        raise ParameterError(f"gamma must be positive, got {gamma}")
    scalar = np.isscalar(u)
    us = np.atleast_1d(np.asarray(u, dtype=float))
    if gamma >= 2.0 or lam == 0.0 or k_const == 0.0 or c_plus == c_minus:
        out = np.zeros(us.shape[0])
        return 0.0 if scalar else out
    pref = lam * k_const * (c_plus - c_minus) / 3.0
    r_end = h.support_radius + float(np.max(np.abs(us - h.center))) + 1.0
    nodes, weights = _dyadic_panels(_SING_H, r_end, breakpoints=(1.0,))
    kern = weights * nodes ** (-1.0 - gamma)
    if gamma > 1.0:
        comp = nodes
    elif gamma == 1.0:
        comp = nodes * (nodes <= 1.0)
    else:
        comp = np.zeros_like(nodes)
    vals = (h.value(us[:, None] + nodes[None, :])
            - h.value(us[:, None] - nodes[None, :])
            - 2.0 * h.grad(us)[:, None] * comp[None, :])
    main = vals @ kern
    d3 = _third_derivative(h, us)
    small = d3 * _SING_H ** (3.0 - gamma) / (3.0 * (3.0 - gamma))
    if gamma < 1.0:
        small = small + 2.0 * h.grad(us) * _SING_H ** (1.0 - gamma) / (1.0 - gamma)
    if gamma > 1.0:
        tail = -2.0 * h.grad(us) * r_end ** (1.0 - gamma) / (gamma - 1.0)
    else:
        tail = np.zeros(us.shape[0])
    out = pref * (main + small + tail)
    return float(out[0]) if scalar else out


def _l2_of(fn, center: float, radius: float) -> float:
    nodes, weights = _dyadic_panels(1e-9, radius + 1.0)
    vals_p = fn(center + nodes) ** 2
    vals_m = fn(center - nodes) ** 2
    return float(np.sum(weights * (vals_p + vals_m)))


def seminorm(h: TestFunction, gamma: float) -> float:
    """Noise seminorm: c_hat ||grad H||_L2^2 for gamma >= 2; the double
    singular integral c_gamma iint [H(v)-H(u)]^2 |v-u|^{-1-gamma} below 2."""
    if gamma <= 0:
        raise ParameterError(f"gamma must be positive, got {gamma}")
    _, _, c_gamma = normalize_kernel(gamma, 0.0)
    radius = h.support_radius
    if gamma >= 2.0:
        return c_hat(gamma, c_gamma) * _l2_of(h.grad, h.center, radius)
    grad_sq = _l2_of(h.grad, h.center, radius)
    lap_sq = _l2_of(h.lap, h.center, radius)
    d3_sq = _l2_of(lambda u: _third_derivative(h, u), h.center, radius)
    norm_sq = h.l2_norm_sq_exact()
    if norm_sq is None:
        norm_sq = _l2_of(h.value, h.center, radius)
    r_end = 2.0 * radius + 1.0
    w_cross = 0.15
    w_nodes, w_weights = _dyadic_panels(_SING_H, r_end, breakpoints=(w_cross,))
    u_nodes, u_weights = _dyadic_panels(1e-9, radius + 1.0)
    u_all = np.concatenate([h.center + u_nodes, h.center - u_nodes])
    uw_all = np.concatenate([u_weights, u_weights])
    h_at_u = h.value(u_all)
    # same-quadrature value at w = 0 so the w -> 0 cancellation is exact
    overlap0 = float(np.sum(uw_all * h_at_u * h_at_u))
    g_vals = np.empty(w_nodes.shape[0])
    for j, w in enumerate(w_nodes):
        if w < w_cross:
            # Fourier-side Taylor of g(w) = int [H(u+w) - H(u)]^2 du
            g_vals[j] = (grad_sq * w ** 2 - lap_sq * w ** 4 / 12.0
                         + d3_sq * w ** 6 / 360.0)
        else:
            overlap = float(np.sum(uw_all * h_at_u * h.value(u_all + w)))
            g_vals[j] = 2.0 * (overlap0 - overlap)
    main = float(np.sum(w_weights * w_nodes ** (-1.0 - gamma) * g_vals))
    small = (grad_sq * _SING_H ** (2.0 - gamma) / (2.0 - gamma)
             - lap_sq * _SING_H ** (4.0 - gamma) / (12.0 * (4.0 - gamma)))
    tail = 2.0 * norm_sq * r_end ** (-gamma) / gamma
    return 2.0 * c_gamma * (main + small + tail)


# ---------------------------------------------------------------------------
# Fourier-multiplier references
# ---------------------------------------------------------------------------

def sym_multiplier_constant(gamma: float) -> float:
    """C(gamma) with sym-operator symbol -C(gamma) |2 pi k|^gamma, gamma in (0,2)."""
    if not 0.0 < gamma < 2.0:
        raise ParameterError("symbol constant defined for gamma in (0, 2)")
    _, _, c_gamma = normalize_kernel(gamma, 0.0)
    head, _ = integrate.quad(lambda w: (1.0 - math.cos(w)) * w ** (-1.0 - gamma),
                             0.0, 1.0, epsabs=1e-13, epsrel=1e-12)
    osc, _ = integrate.quad(lambda w: w ** (-1.0 - gamma), 1.0, np.inf,
                            weight="cos", wvar=1.0)
    j_sym = head + 1.0 / gamma - osc
    return 4.0 * c_gamma * j_sym


def _j_asym(gamma: float) -> float:
    """int_0^inf (w - sin w) w^{-1-gamma} dw, gamma in (1, 2)."""
    head, _ = integrate.quad(lambda w: (w - math.sin(w)) * w ** (-1.0 - gamma),
                             0.0, 1.0, epsabs=1e-13, epsrel=1e-12)
    osc, _ = integrate.quad(lambda w: w ** (-1.0 - gamma), 1.0, np.inf,
                            weight="sin", wvar=1.0)
    return head + 1.0 / (gamma - 1.0) - osc


def _j_sin(gamma: float) -> float:
    """int_0^inf sin(w) w^{-1-gamma} dw, gamma in (0, 1)."""
    head, _ = integrate.quad(lambda w: math.sin(w) * w ** (-1.0 - gamma),
                             0.0, 1.0, epsabs=1e-13, epsrel=1e-12)
    osc, _ = integrate.quad(lambda w: w ** (-1.0 - gamma), 1.0, np.inf,
                            weight="sin", wvar=1.0)
    return head + osc


def asym_multiplier(k, gamma: float, lam: float, k_const: float,
                    c_plus: float, c_minus: float) -> np.ndarray:
    """Symbol of the antisymmetric operator on e^{2 pi i k u} (purely imaginary,
    odd in k). Power-law form off gamma = 1; explicit window integral at 1."""
    ks = np.atleast_1d(np.asarray(k, dtype=float))
    pref = lam * k_const * (c_plus - c_minus) / 3.0
    if gamma >= 2.0 or pref == 0.0:
        return np.zeros(ks.shape[0], dtype=complex)
    out = np.empty(ks.shape[0], dtype=complex)
    if gamma > 1.0:
        j = _j_asym(gamma)
        out = -2.0j * pref * j * np.sign(ks) * (2.0 * np.pi * np.abs(ks)) ** gamma
    elif gamma < 1.0:
        j = _j_sin(gamma)
        out = 2.0j * pref * j * np.sign(ks) * (2.0 * np.pi * np.abs(ks)) ** gamma
    else:
        for i, kv in enumerate(ks):
            if kv == 0.0:
                out[i] = 0.0
                continue
            b = 2.0 * math.pi * abs(kv)
            head, _ = integrate.quad(
                lambda w: (math.sin(w) - w) * w ** (-2.0), 0.0, b,
                epsabs=1e-13, epsrel=1e-12)
            osc, _ = integrate.quad(lambda w: w ** (-2.0), b, np.inf,
                                    weight="sin", wvar=1.0)
            out[i] = 2.0j * pref * b * (head + osc) * math.copysign(1.0, kv)
    return out


def asym_multiplier_apply(h: TestFunction, gamma: float, lam: float, k_const: float,
                          c_plus: float, c_minus: float, u) -> np.ndarray | float:
    """Apply the antisymmetric operator through its Fourier symbol.

    Requires a gaussian or modulated gaussian (closed-form transform); used to
    cross-validate the quadrature route.
    """
    if h.family not in ("gaussian", "modulated_gaussian"):
        raise ParameterError("multiplier route needs a (modulated) gaussian")
    scalar = np.isscalar(u)
    us = np.atleast_1d(np.asarray(u, dtype=float))
    sigma = h.width
    k0 = h.wavenumber
    k_span = k0 + 6.0 / (2.0 * math.pi * sigma) + 1.0
    ks = np.linspace(-k_span, k_span, 16384)
    base = sigma * math.sqrt(2.0 * math.pi)
    hat = 0.5 * base * (np.exp(-2.0 * np.pi ** 2 * sigma ** 2 * (ks - k0) ** 2)
                        + np.exp(-2.0 * np.pi ** 2 * sigma ** 2 * (ks + k0) ** 2))
    hat = hat * np.exp(-2.0j * np.pi * ks * h.center)
    sym = asym_multiplier(ks, gamma, lam, k_const, c_plus, c_minus)
    phases = np.exp(2.0j * np.pi * np.outer(us, ks))
    out = np.trapezoid(phases * (sym * hat)[None, :], ks, axis=1).real
    return float(out[0]) if scalar else out


# ---------------------------------------------------------------------------
# Ornstein-Uhlenbeck matrix-exponential reference on the periodic grid
# ---------------------------------------------------------------------------

def drift_symbol(tables: KernelTables, lam: float, k_n: float) -> np.ndarray:
    """Eigenvalues of the drift Theta(n) sym - asym on the circulant grid,
    indexed by the rfft modes of the torus."""
    size = tables.lattice_size
    f_s = np.fft.rfft(tables.circ_s)
    f_a = np.fft.rfft(tables.circ_a)
    thetas = 2.0 * np.pi * np.arange(f_s.shape[0]) / size
    s_mass = float(tables.s.sum())
    sym = tables.theta_n * 2.0 * (f_s.real - s_mass)
    s_a = -0.5 * f_a.imag  # sum_{d>0} a(d) sin(theta d)
    skew = 1.0j * (2.0 * lam * k_n / 3.0) * (
        2.0 * tables.theta_n * s_a - tables.m_n_gamma * thetas)
    return sym - skew


def ou_reference_covariance(h: TestFunction, g: TestFunction, t: float, n: int,
                            tables: KernelTables, lam: float, k_n: float,
                            d3: float, grid_size: int | None = None) -> float:
    """d3 * (1/n) < e^{tA} H, G >_grid with A the simulator's drift stencil.

    The grid defaults to the kernel table's torus; supports of H and G must fit
    inside it. The circulant exponential is exact for the grid-sampled inputs.
    """
    size = tables.lattice_size if grid_size is None else grid_size
    if grid_size is not None and grid_size != tables.lattice_size:
        raise ParameterError("grid_size must match the kernel table's torus")
    for fn in (h, g):
        if fn.center - fn.support_radius < 0 or fn.center + fn.support_radius > size / n:
            raise ParameterError(
                f"test-function support [{fn.center - fn.support_radius:.3g}, "
                f"{fn.center + fn.support_radius:.3g}] does not fit on the torus "
                f"[0, {size / n:.3g}] at scale n={n}")
    xs = np.arange(size) / n
    h_vals = h.value(xs)
    g_vals = g.value(xs)
    symbol = drift_symbol(tables, lam, k_n)
    propagated = np.fft.irfft(np.exp(t * symbol) * np.fft.rfft(h_vals), n=size)
    if not np.all(np.isfinite(propagated)):
        raise NumericalError("matrix exponential overflowed; check the drift symbol")
    return d3 * float(np.dot(propagated, g_vals)) / n


def operator_convergence_errors(h: TestFunction, gamma: float, n: int,
                                lam: float = 1.0, k_const: float = 0.5,
                                asymmetry: float = 0.5,
                                margin: float = 6.0) -> tuple[float, float]:
    """Grid L2 errors of the discrete stencils against the continuum operators.

    err = (1/n) sum_x [discrete - continuum]^2(x/n) over the support window
    plus margin. The asymmetric comparison uses K_n = k_const (constant rule).
    """
    xs = grid_window(h, n, margin=margin).astype(float)
    c_plus, c_minus, _ = normalize_kernel(gamma, asymmetry)
    disc_s = discrete_sym_op(h, n, gamma, xs)
    cont_s = continuum_sym_op(h, gamma, xs / n)
    err_sym = float(np.sum((disc_s - cont_s) ** 2)) / n
    disc_a = discrete_asym_op(h, n, gamma, lam, k_const, c_plus, c_minus, xs)
    cont_a = continuum_asym_op(h, gamma, lam, k_const, c_plus, c_minus, xs / n)
    err_asym = float(np.sum((disc_a - cont_a) ** 2)) / n
    return err_sym, err_asym
