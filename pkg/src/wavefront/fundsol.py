"""Fundamental solution v(t, xi) of y'' - cy' - dy - xi (K*y)(t - ch) = delta.

Three constructions are provided:

* ``closed_form_xi0``: xi = 0 (or a dirac kernel without delay), where v is a
  two-sided exponential;
* ``local_steps``: dirac kernel with ch > 0, by the method of steps on t >= 0
  and the exact branch -e^{lambda0 t}/chi'(lambda0) on t < 0;
* ``fourier_subtraction``: any kernel, by inverting 1/chi with the xi = 0
  resolvent removed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import signal

from . import _fourier, _steps
from .charfun import CharParams, _roots_on, _scan_bound, chi, chi_prime, chi_second, real_root_set
from .errors import GridMismatch, HorizonExceeded, NoNegativeRoot, NoPositiveRoot, NotHyperbolic
from .grid import GridFunction, GridSpec, Tail, simpson

METHODS = ("closed_form_xi0", "local_steps", "fourier_subtraction")
DEGENERATE_TOL = 1e-8


@dataclass(frozen=True)
class TailAsymptotics:
    lambda_plus: float
    rho_plus: float
    lambda_minus: float
    rho_minus: float
    remainder_rates: tuple[float, float]
    gamma: float
    double_root: bool = False
    # coefficient b of (a + b t) e^{lambda t} when two negative zeros collide
    double_slope: float = 0.0


@dataclass(frozen=True, eq=False)
class FundamentalSolution:
    params: CharParams
    samples: GridFunction
    tails: TailAsymptotics
    method: str
    quadrature_error: float = 0.0
    horizon: float = math.inf
    _eval: Callable = field(repr=False, default=None)
    _conv: Callable = field(repr=False, default=None)

    def __call__(self, t):
        """v at arbitrary points (exact branch, not interpolated)."""
        out = self._eval(np.atleast_1d(np.asarray(t, dtype=float)))
        return out if np.ndim(t) else float(out[0])

    def convolved(self, t, shift: float = 0.0) -> np.ndarray:
        """(K * v)(t - shift)."""
        return self._conv(np.atleast_1d(np.asarray(t, dtype=float)), shift)

    def convolved_on_grid(self, shift: float = 0.0) -> np.ndarray:
        return self.convolved(self.samples.t, shift)

    @property
    def beyond_xi_star(self) -> bool:
        return not math.isfinite(self.tails.lambda_plus)


# -- roots and tails -----------------------------------------------------------

def _zeros(params: CharParams):
    """Real zeros split by sign; the negative side may be empty beyond xi*."""
    try:
        rs = real_root_set(params)
        return rs.lambda2, rs.lambda1, rs.lambda0, rs.lambda_m1, rs.near_degenerate
    except NoNegativeRoot:
        pass
    Z = _scan_bound(params)
    roots, tang = _roots_on(params, -Z, Z)
    pos = sorted([r for r in roots if r > 0] + [x for x in tang if x > 0] * 2)
    if not pos:
        raise NotHyperbolic("chi has no positive zero")
    lm1 = pos[1] if len(pos) > 1 else math.inf
    return -math.inf, math.nan, pos[0], lm1, False


def tail_asymptotics(params: CharParams) -> TailAsymptotics:
    try:
        l2, l1, l0, lm1, degenerate = _zeros(params)
    except NoPositiveRoot as exc:
        raise NotHyperbolic(str(exc)) from exc
    rho_minus = -1.0 / chi_prime(params, l0)
    if not math.isfinite(l1):
        return TailAsymptotics(math.nan, math.nan, l0, rho_minus, (l2, lm1), l0)
    cp1 = chi_prime(params, l1)
    double = degenerate and abs(cp1) < DEGENERATE_TOL
    slope = 0.0
    if double:
        lam = 0.5 * (l1 + l2) if math.isfinite(l2) else l1
        # residue of e^{zt}/chi at a double zero: 2 t e^{lam t} / chi''(lam)
        slope = 2.0 / chi_second(params, lam)
        rho_plus = math.nan
    else:
        rho_plus = 1.0 / cp1
    gamma = min(l0, -l1)
    return TailAsymptotics(l1, rho_plus, l0, rho_minus, (l2, lm1), gamma, double, slope)


def default_grid(params: CharParams, dt: float = 0.01) -> GridSpec:
    t = tail_asymptotics(params)
    l1 = t.lambda_plus if math.isfinite(t.lambda_plus) else -t.lambda_minus
    L = min(200.0, max(40.0 / t.lambda_minus, 40.0 / abs(l1), 10.0 + 5.0 * params.ch))
    return GridSpec.snapped(L, dt)


def _quadratic_roots(c: float, d: float) -> tuple[float, float]:
    disc = math.sqrt(c * c + 4 * d)
    a = (c + disc) / 2
    b = -2 * d / (c + disc)  # stable form of (c - disc)/2
    return a, b


def _two_sided(t, a: float, b: float) -> np.ndarray:
    """min(e^{bt}, e^{at}) / (b - a): the xi = 0 fundamental solution."""
    t = np.asarray(t, dtype=float)
    with np.errstate(over="ignore", under="ignore"):
        return np.where(t >= 0, np.exp(b * np.maximum(t, 0.0)), np.exp(a * np.minimum(t, 0.0))) / (b - a)


# -- constructions ---------------------------------------------------------------

def _right_tail(tails: TailAsymptotics, t: np.ndarray, v: np.ndarray) -> Tail | None:
    if not math.isfinite(tails.lambda_plus):
        return None
    if tails.double_root:
        lam = tails.lambda_plus
        ok = np.flatnonzero((t > 0) & (np.abs(v) > 1e-8))
        m = ok[-max(2, ok.size // 10):]
        a = np.mean(v[m] * np.exp(-lam * t[m]) - tails.double_slope * t[m])
        return Tail(lam, float(a), tails.double_slope)
    return Tail(tails.lambda_plus, tails.rho_plus)


def _closed_form(params: CharParams, grid: GridSpec, tails: TailAsymptotics) -> FundamentalSolution:
    d_eff = params.d + (params.xi if params.kernel.is_dirac else 0.0)
    a, b = _quadratic_roots(params.c, d_eff)
    t = grid.t
    v = _two_sided(t, a, b)
    kern = params.kernel

    def conv(x, shift):
        if kern.is_dirac:
            return _two_sided(x - shift, a, b)
        return kern.convolve_two_sided_exp(x - shift, a, b, 1.0 / (b - a))

    samples = GridFunction(t[0], grid.dt, v, Tail(a, 1.0 / (b - a)), Tail(b, 1.0 / (b - a)))
    return FundamentalSolution(params, samples, tails, "closed_form_xi0",
                               _eval=lambda x: _two_sided(x, a, b), _conv=conv)


def _local_steps(params: CharParams, grid: GridSpec, tails: TailAsymptotics, T: float | None = None
                 ) -> FundamentalSolution:
    l0 = tails.lambda_minus
    l1 = tails.lambda_plus if math.isfinite(tails.lambda_plus) else None
    b = _quadratic_roots(params.c, params.d + params.xi)[1]
    gap = l0 - (l1 if l1 is not None else 2.0 * b)
    T = grid.L if T is None else T
    # past the certified horizon the right tail is exact to working precision
    T_dps = (_steps.MAX_DPS - 25) * math.log(10.0) / gap
    T_cnt = (_steps.MAX_STEPS - 2) * params.ch
    horizon = min(T, T_dps, T_cnt)
    if horizon < T and l1 is None:
        raise HorizonExceeded(f"method of steps limited to t <= {horizon:g} and no real tail beyond it")
    sol = _steps.StepSolution(params.c, params.h, params.d, params.xi, l0, horizon, gap)
    rho_minus = -1.0 / float(sol.chi_prime0)
    right = None

    def ev(x):
        x = np.asarray(x, dtype=float)
        out = np.empty(x.size)
        neg = x < 0
        out[neg] = rho_minus * np.exp(l0 * x[neg])
        mid = (~neg) & (x <= horizon)
        out[mid] = sol.v(x[mid])
        far = x > horizon
        if np.any(far):
            out[far] = right(x[far])
        return out

    t = grid.t
    solved = (t >= 0) & (t <= horizon)
    v = np.empty(t.size)
    v[solved] = sol.v(t[solved])
    right = _right_tail(tails, t[solved], v[solved]) or Tail(0.0, 0.0)
    v[t < 0] = rho_minus * np.exp(l0 * t[t < 0])
    v[t > horizon] = right(t[t > horizon])
    samples = GridFunction(t[0], grid.dt, v, Tail(l0, rho_minus), _right_tail(tails, t, v))
    return FundamentalSolution(params, samples, tails, "local_steps", horizon=horizon,
                               _eval=ev, _conv=lambda x, s: ev(x - s))


def _splice(t: np.ndarray, v: np.ndarray, tail: Tail | None, side: int) -> tuple[np.ndarray, float]:
    """Replace the outer samples on one side by the tail model.

    Far out the transform values carry an absolute error of about 1e-14
    while the tail model is exact up to a faster-decaying remainder; the
    switch is placed where the two agree best.
    """
    if tail is None:
        return v, math.inf * side
    sel = np.flatnonzero(t * side > 0)
    ref = v[sel]
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.abs(tail(t[sel]) - ref) / np.abs(ref)
    rel = np.where(np.isfinite(rel), rel, np.inf)
    k = int(np.argmin(rel))
    if rel[k] > 1e-6:
        return v, math.inf * side
    out = v.copy()
    ts = float(t[sel[k]])
    outer = t * side >= ts * side
    out[outer] = tail(t[outer])
    return out, ts


def _fourier_subtraction(params: CharParams, grid: GridSpec, tails: TailAsymptotics
                         ) -> FundamentalSolution:
    a, b = _quadratic_roots(params.c, params.d)
    kern = params.kernel
    fc = _fourier.FourierCorrection(params, P=4.0 * grid.L + 20.0, dt=grid.dt)
    t = grid.t
    v = _two_sided(t, a, b) + fc.on_grid(grid.n_half)
    left = Tail(tails.lambda_minus, tails.rho_minus)
    right = _right_tail(tails, t, v)
    v, t_left = _splice(t, v, left, -1)
    v, t_right = _splice(t, v, right, 1)

    def corr(x, convolved=False, shift=0.0):
        # grid-aligned batches go through one FFT instead of direct sums
        k = np.rint(x / grid.dt)
        if x.size > 64 and np.all(np.abs(x - k * grid.dt) < 1e-9 * grid.dt) and 2 * np.abs(k).max() < fc.M:
            return fc.on_grid(k.astype(int), convolved=convolved, shift=shift)
        return fc.at(x, convolved=convolved, shift=shift)

    def ev(x):
        x = np.asarray(x, dtype=float)
        out = np.empty(x.size)
        lo, hi = x <= t_left, x >= t_right
        mid = ~(lo | hi)
        out[mid] = _two_sided(x[mid], a, b) + corr(x[mid])
        out[lo] = left(x[lo])
        out[hi] = right(x[hi])
        return out

    def conv_v0(x):
        if kern.is_dirac:
            return _two_sided(x, a, b)
        return kern.convolve_two_sided_exp(x, a, b, 1.0 / (b - a))

    def conv(x, shift):
        x = np.asarray(x, dtype=float)
        return conv_v0(x - shift) + corr(x, convolved=True, shift=shift)

    samples = GridFunction(t[0], grid.dt, v, left, right)
    return FundamentalSolution(params, samples, tails, "fourier_subtraction",
                               quadrature_error=fc.error_bound, _eval=ev, _conv=conv)


def fundamental_solution(params: CharParams, grid: GridSpec | None = None, method: str | None = None
                         ) -> FundamentalSolution:
    """Build v on a symmetric grid (default: dt = 0.01 and tails below e^-40)."""
    if params.xi < 0:
        raise ValueError("xi must be nonnegative")
    tails = tail_asymptotics(params)
    grid = grid or default_grid(params)
    closed_ok = params.xi == 0 or (params.kernel.is_dirac and params.ch == 0)
    if method is None:
        if closed_ok:
            method = "closed_form_xi0"
        elif params.kernel.is_dirac:
            method = "local_steps"
        else:
            method = "fourier_subtraction"
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}")
    if method == "closed_form_xi0":
        if not closed_ok:
            raise ValueError("closed form needs xi = 0 or a dirac kernel without delay")
        return _closed_form(params, grid, tails)
    if method == "local_steps":
        if not params.kernel.is_dirac or params.ch <= 0 or params.xi <= 0:
            raise ValueError("method of steps needs a dirac kernel, ch > 0 and xi > 0")
        return _local_steps(params, grid, tails)
    return _fourier_subtraction(params, grid, tails)


def v_local_steps(params: CharParams, T: float, dt: float = 0.01) -> GridFunction:
    """v on [0, T] from the method of steps alone."""
    tails = tail_asymptotics(params)
    b = _quadratic_roots(params.c, params.d + params.xi)[1]
    l1 = tails.lambda_plus if math.isfinite(tails.lambda_plus) else 2.0 * b
    sol = _steps.StepSolution(params.c, params.h, params.d, params.xi, tails.lambda_minus, T,
                              tails.lambda_minus - l1)
    n = int(round(T / dt))
    return GridFunction(0.0, dt, sol.v(dt * np.arange(n + 1)))


# -- kernels on grids -------------------------------------------------------------

def _hat_integral(y):
    """Antiderivative of the unit hat function on [-1, 1]."""
    y = np.clip(y, -1.0, 1.0)
    return np.where(y < 0, 0.5 * (y + 1) ** 2, 1.0 - 0.5 * (1 - y) ** 2)


def kernel_weights(kernel, dt: float) -> np.ndarray:
    """Weights w_j, j = -J..J, with sum_j w_j f(t - j dt) ~ (K * f)(t).

    Gaussian densities use the trapezoid rule, which is spectrally accurate
    for smooth integrands; the uniform density integrates exactly against the
    piecewise-linear interpolant of f.
    """
    if kernel.is_dirac:
        return np.ones(1)
    if kernel.family == "gaussian":
        lo, hi = kernel.support()
        J = int(math.ceil(max(abs(lo), abs(hi)) / dt))
        w = kernel.density(dt * np.arange(-J, J + 1)) * dt
        return w / w.sum()
    a = kernel.a
    J = int(math.ceil(a / dt)) + 1
    s = dt * np.arange(-J, J + 1)
    w = (_hat_integral((a - s) / dt) - _hat_integral((-a - s) / dt)) * dt / (2 * a)
    return w


def kernel_apply(kernel, f: GridFunction, shift: float = 0.0) -> np.ndarray:
    """(K * f)(t - shift) at the nodes of ``f``; tails supply values off the grid."""
    w = kernel_weights(kernel, f.dt)
    J = (w.size - 1) // 2
    k = shift / f.dt
    ki = int(round(k))
    if abs(k - ki) < 1e-9:
        pad_l, pad_r = J + max(ki, 0), J + max(-ki, 0)
        ext = f.extended(pad_l, pad_r)
        out = signal.fftconvolve(ext, w, mode="valid") if w.size > 1 else ext
        start = max(ki, 0) - ki
        return out[start:start + f.n]
    # off-grid shift: convolve on the grid, then interpolate the result
    pad = J + int(math.ceil(abs(k))) + 3
    ext = f.extended(pad, pad)
    conv = signal.fftconvolve(ext, w, mode="valid") if w.size > 1 else ext[J:ext.size - J]
    t_conv = f.t0 - (pad - J) * f.dt + f.dt * np.arange(conv.size)
    g = GridFunction(t_conv[0], f.dt, conv)
    return np.asarray(g(f.t - shift))


# -- diagnostics ----------------------------------------------------------------

D2_STENCIL = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0
D1_STENCIL = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0


def derivatives(values: np.ndarray, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Fourth-order central first and second differences (nan at the two end nodes)."""
    d1 = np.full(values.size, np.nan)
    d2 = np.full(values.size, np.nan)
    d1[2:-2] = np.correlate(values, D1_STENCIL, mode="valid") / dt
    d2[2:-2] = np.correlate(values, D2_STENCIL, mode="valid") / dt**2
    return d1, d2


def singular_points(params: CharParams, L: float) -> np.ndarray:
    """Points where v (or a low derivative) is not smooth.

    Beyond 0 the kink of v propagates through the delayed term: to k ch for a
    dirac kernel and to ch +- a for the uniform kernel.
    """
    pts = [0.0]
    ch = params.ch
    k = params.kernel
    if k.is_dirac and ch > 0:
        pts += list(ch * np.arange(1, int(L / ch) + 2))
    elif k.family == "uniform":
        for n in (1, 2):
            pts += [n * ch + m * k.a for m in range(-n, n + 1)]
    return np.array(pts)


@dataclass
class FundsolReport:
    max_value: float
    argmax: float
    negative: bool
    argmin: float
    dv_jump: float
    d2v_jump: float
    jump_error_1: float
    jump_error_2: float
    monotone_violation_left: float
    monotone_violation_right: float
    convexity_violation_left: float
    interior_residual: float
    sup_abs: float
    slope_left: float
    slope_right: float
    tail_coeff_error: float
    laplace_errors: list = field(default_factory=list)

    @property
    def shape_ok(self) -> bool:
        return (self.monotone_violation_left <= 1e-12 and self.monotone_violation_right <= 1e-12
                and self.convexity_violation_left <= 1e-10)

    def lines(self) -> list[str]:
        return [f"{k} = {v}" for k, v in self.__dict__.items()]


def jump_estimates(fs: FundamentalSolution, step: float = 1e-3) -> tuple[float, float]:
    """One-sided estimates of v'(0+) - v'(0-) and v''(0+) - v''(0-)."""
    h = step
    p = fs(np.array([0.0, h, 2 * h, 3 * h]))
    m = fs(np.array([0.0, -h, -2 * h, -3 * h]))
    # second-order one-sided stencils
    d1p = (-3 * p[0] + 4 * p[1] - p[2]) / (2 * h)
    d1m = (3 * m[0] - 4 * m[1] + m[2]) / (2 * h)
    d2p = (2 * p[0] - 5 * p[1] + 4 * p[2] - p[3]) / h**2
    d2m = (2 * m[0] - 5 * m[1] + 4 * m[2] - m[3]) / h**2
    return d1p - d1m, d2p - d2m


def interior_residual(fs: FundamentalSolution, exclude: float | None = None) -> float:
    """sup |v'' - cv' - dv - xi (K*v)(t - ch)| away from the non-smooth points."""
    p = fs.params
    g = fs.samples
    t = g.t
    d1, d2 = derivatives(g.values, g.dt)
    kv = fs.convolved(t, p.ch) if p.xi != 0 else np.zeros_like(t)
    res = d2 - p.c * d1 - p.d * g.values - p.xi * kv
    excl = 2 * g.dt if exclude is None else exclude
    mask = np.isfinite(res)
    for s in singular_points(p, g.t_end):
        mask &= np.abs(t - s) > excl + 1e-9
    return float(np.max(np.abs(res[mask]))) if np.any(mask) else math.nan


def laplace_identity_errors(fs: FundamentalSolution, probes=None) -> list[tuple[float, float]]:
    """Relative error of int_0^inf e^{-zt} v dt against
    1/chi(z) - (1/chi'(lambda0)) / (z - lambda0) for z > lambda0."""
    p = fs.params
    l0 = fs.tails.lambda_minus
    probes = probes or [l0 + 0.5, l0 + 1.0, l0 + 2.0]
    g = fs.samples
    i0 = g.index_of(0.0)
    t = g.t[i0:]
    out = []
    for z in probes:
        num = simpson(np.exp(-z * t) * g.values[i0:], g.dt)
        tail = g.right_tail
        if tail is not None and tail.slope == 0.0:
            num += tail.coeff * math.exp((tail.rate - z) * t[-1]) / (z - tail.rate)
        exact = 1.0 / chi(p, z) - (1.0 / chi_prime(p, l0)) / (z - l0)
        out.append((z, abs(num - exact) / abs(exact)))
    return out


def check_fundsol(fs: FundamentalSolution, step: float = 1e-3) -> FundsolReport:
    g = fs.samples
    t, v = g.t, g.values
    i0 = g.index_of(0.0)
    imax = int(np.argmax(v))
    dv, d2v = jump_estimates(fs, step)
    dl = np.diff(v[: i0 + 1])
    dr = np.diff(v[i0:])
    second = v[: i0 - 1] - 2 * v[1:i0] + v[2 : i0 + 1]
    tails = fs.tails
    # log-slope regression on the outer tenth of each side, where |v| is resolved
    def slope(sel):
        sel = sel[np.abs(v[sel]) > 1e-250]
        if sel.size < 3:
            return math.nan
        return float(np.polyfit(t[sel], np.log(np.abs(v[sel])), 1)[0])

    m = max(3, i0 // 10)
    s_left = slope(np.arange(0, m))
    s_right = slope(np.arange(g.n - m, g.n))
    coeff_err = math.nan
    if math.isfinite(tails.lambda_plus) and not tails.double_root:
        l2 = tails.remainder_rates[0]
        t_star = math.log(1e-6) / (l2 - tails.lambda_plus) if math.isfinite(l2) else 1.0
        t_star = max(t_star, step)
        if t_star < g.t_end:
            val = fs(t_star) * math.exp(-tails.lambda_plus * t_star)
            coeff_err = abs(val - tails.rho_plus) / abs(tails.rho_plus)
    lap = laplace_identity_errors(fs) if fs.params.kernel.is_dirac else []
    return FundsolReport(
        max_value=float(v[imax]), argmax=float(t[imax]), negative=bool(v[imax] < 0),
        argmin=float(t[int(np.argmin(v))]),
        dv_jump=dv, d2v_jump=d2v, jump_error_1=abs(dv - 1.0), jump_error_2=abs(d2v - fs.params.c),
        monotone_violation_left=float(max(0.0, dl.max())) if dl.size else 0.0,
        monotone_violation_right=float(max(0.0, -dr.min())) if dr.size else 0.0,
        convexity_violation_left=float(max(0.0, -second.min())) if second.size else 0.0,
        interior_residual=interior_residual(fs), sup_abs=float(np.max(np.abs(v))),
        slope_left=s_left, slope_right=s_right, tail_coeff_error=coeff_err, laplace_errors=lap,
    )


@dataclass
class ResolventResult:
    u: GridFunction
    residual: float


def apply_resolvent(fs: FundamentalSolution, f: GridFunction) -> ResolventResult:
    """u = -v * f, which solves u'' - cu' - du - xi (K*u)(t - ch) + f = 0.

    The trapezoid sum is corrected for the unit jump of v' at 0, which is
    otherwise its leading O(dt^2) error term.
    """
    vs = fs.samples
    if abs(vs.dt - f.dt) > 1e-12 * f.dt:
        raise GridMismatch(f"fundamental solution dt={vs.dt} differs from f dt={f.dt}")
    dt = f.dt
    nv = (vs.n - 1) // 2
    if abs(vs.t0 + nv * dt) > 1e-9:
        raise GridMismatch("fundamental solution grid must be centred at 0")
    ext = f.extended(nv, nv)
    conv = signal.fftconvolve(ext, vs.values, mode="valid") * dt
    u_vals = -(conv + dt**2 * f.values / 12.0)
    lt = rt = None
    if f.left_tail is None and f.right_tail is None:
        # constant extensions of f map to constants u = -f / chi(0)
        k0 = -1.0 / chi(fs.params, 0.0)
        lt, rt = Tail(0.0, float(k0 * f.values[0])), Tail(0.0, float(k0 * f.values[-1]))
    u = GridFunction(f.t0, dt, u_vals, lt, rt)
    p = fs.params
    d1, d2 = derivatives(u.values, dt)
    ku = kernel_apply(p.kernel, u, p.ch) if p.xi != 0 else np.zeros(u.n)
    res = d2 - p.c * d1 - p.d * u.values - p.xi * ku + f.values
    res = res[2:-2]
    return ResolventResult(u, float(np.max(np.abs(res))) if res.size else 0.0)


def fundsol_csv(fs: FundamentalSolution) -> str:
    return fs.samples.to_csv("v")
