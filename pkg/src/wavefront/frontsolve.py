"""Monotone iteration for the wavefront profile.

The profile solves phi = A phi with

    (A phi)(t) = int N(s) g1~(phi(t - s - ch)) ds,

starting from the upper solution min(kappa, kappa e^{mu0 t}). Iterates
decrease pointwise and converge to a front, which is then translated so
that phi(0) = kappa / 2.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import fft as sfft
from scipy import optimize
from scipy.interpolate import CubicSpline, PchipInterpolator

from .charfun import c_sharp, chi0_positive_roots, classify_point, fmt
from .errors import (CollapsedToZero, ConvergenceFailure, IterationLimitReached, NotInDL,
                     RangeViolation)
from .fundsol import _splice, derivatives, kernel_weights
from .grid import GridFunction, Tail, uniform_grid
from .model import DerivedConstants, ModelSpec, build_nonlinearity
from .reduction import G1, Reduction, reduce_model

RANGE_TOL = 1e-12
ORDER_TOL = 1e-12
Q_BOUND = 1e3


@dataclass(frozen=True)
class SolverConfig:
    L: float = 40.0
    dt: float = 0.01
    tol_iter: float = 1e-10
    max_iter: int = 5000
    eps_lower: float | None = None  # default mu0 / 10
    record_every: int = 0  # keep every k-th iterate (0: none)

    def __post_init__(self):
        if not (self.L > 0 and self.dt > 0 and self.max_iter > 0):
            raise ValueError("L, dt and max_iter must be positive")
        if not self.tol_iter < 1e-4:
            raise ValueError("tol_iter must be below 1e-4")

    def grid_for(self, ch: float, dirac: bool) -> tuple[float, float]:
        """(L, dt) with L/dt integral and, for a dirac kernel, ch/dt integral."""
        dt = self.dt
        if dirac and ch > 0:
            dt = ch / math.ceil(ch / self.dt - 1e-9)
        n = math.ceil(self.L / dt - 1e-9)
        return n * dt, dt


@dataclass
class FrontReport:
    residual_ftc: float
    residual_yp: float
    left_boundary_gap: float
    right_boundary_gap: float
    decay_rate_left: float
    decay_class: str
    monotone_violation: float
    range_ok: bool
    uniqueness_sup_diff: float | None = None

    def lines(self) -> list[str]:
        return [f"{k} = {v!r}" for k, v in self.__dict__.items()]


@dataclass(eq=False)
class FrontSolution:
    profile: GridFunction
    raw: GridFunction
    shift: float
    iterations: int
    sup_steps: list
    max_increase: float
    mu0: float
    kappa: float
    model: ModelSpec
    reduction: Reduction = field(repr=False)
    diagnostics: FrontReport | None = None
    iterates: list = field(default_factory=list, repr=False)
    operator: "FrontOperator" = field(default=None, repr=False)


def initial_upper(kappa: float, mu0: float, t, degenerate: bool = False) -> np.ndarray:
    """min(kappa, kappa e^{mu0 t}); at a double zero mu0 of chi0 the slower
    kappa (1 - mu0 t) e^{mu0 t} on t <= 0, which is also fixed by the linearization."""
    t = np.asarray(t, dtype=float)
    tn = np.minimum(t, 0.0)
    base = kappa * np.exp(mu0 * tn)
    if degenerate:
        base = base * (1.0 - mu0 * tn)
    return np.minimum(kappa, base)


def lower_barrier(kappa: float, mu0: float, eps: float, t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    tn = np.minimum(t, 0.0)
    return np.where(t <= 0, kappa * np.exp(mu0 * tn) * (1.0 - np.exp(eps * tn)), 0.0)


class FrontOperator:
    """Discrete A on the grid t_i = -L + i dt.

    The shifted kernel M(s) = N(s - ch) is sampled on s_j = j dt, so
    (A phi)(t_i) = sum_j w_j G(t_i - s_j) with G = g1~(phi) and w_j = M(s_j) dt.
    A dirac kernel puts the unit jump of v' at s = ch, a grid node; the
    weight there absorbs the leading trapezoid error of that kink.
    """

    def __init__(self, model: ModelSpec, red: Reduction, kappa: float, mu0: float, L: float, dt: float):
        self.model, self.red, self.kappa, self.mu0 = model, red, kappa, mu0
        self.t = uniform_grid(L, dt)
        self.dt = dt
        self.n = self.t.size
        self.g1 = G1(model, red.xi, kappa)
        N = red.N
        if abs(N.dt - dt) > 1e-12 * dt:
            raise ValueError("kernel N must share the solver spacing")
        ch = model.ch
        nN = (N.n - 1) // 2
        if model.kernel.is_dirac:
            k = int(round(ch / dt))
            # M(s_j) = N(s_j - ch): the same samples moved right by k nodes
            self.j_lo, self.j_hi = -nN + k, nN + k
            w = N.values * dt
            w[nN] -= dt**2 * (1.0 + red.xi) / 12.0
        else:
            self.j_lo = -nN + int(math.floor(ch / dt))
            self.j_hi = self.j_lo + N.n - 1
            s = dt * np.arange(self.j_lo, self.j_hi + 1)
            m_vals = -(1.0 + red.xi) * red.fs.convolved(s, ch)
            # far out the transform noise is replaced by N's own tails
            m_vals, _ = _splice(s - ch, m_vals, N.left_tail, -1)
            m_vals, _ = _splice(s - ch, m_vals, N.right_tail, 1)
            w = np.maximum(m_vals, 0.0) * dt
        if self.j_lo > 0 or self.j_hi < 0:
            raise ValueError("kernel support does not contain the origin")
        self.w = w
        # G is needed on t_i - s_j for all i, j
        self.pad_left = self.j_hi
        self.pad_right = -self.j_lo
        self.n_ext = self.n + self.pad_left + self.pad_right
        nfft = sfft.next_fast_len(self.n_ext + w.size - 1, real=True)
        self.nfft = nfft
        self.w_hat = sfft.rfft(w, nfft)
        # weights in the variable q = phi e^{-mu0 t}; see __call__
        s_nodes = dt * np.arange(self.j_lo, self.j_hi + 1)
        with np.errstate(divide="ignore"):
            ww = np.where(w > 0, np.exp(np.log(np.where(w > 0, w, 1.0)) - mu0 * s_nodes), 0.0)
        self.w_hat_q = sfft.rfft(ww, nfft)
        self.tau = self.t[0] + dt * np.arange(-self.pad_left, self.n + max(self.pad_right, 0))
        self.tail_coeff = None
        self.tail_slope = 0.0  # left extension (tail_coeff + tail_slope t) e^{mu0 t}
        self.left_value = None  # constant left extension instead of the exponential one
        self.right_value = None  # defaults to kappa
        self.g1_prime_0 = red.g1_prime_0

    def extend(self, phi: np.ndarray) -> np.ndarray:
        """phi on [t0 - pad_left dt, t_end + pad_right dt]: tail_coeff e^{mu0 t} on
        the left (or a boundary-matched exponential when no coefficient is set),
        kappa on the right."""
        dt = self.dt
        tl = self.t[0] + dt * np.arange(-self.pad_left, 0)
        if self.left_value is not None:
            left = np.full(tl.size, self.left_value)
        else:
            coeff = self.tail_coeff if self.tail_coeff is not None else phi[0] * math.exp(-self.mu0 * self.t[0])
            left = (coeff + self.tail_slope * tl) * np.exp(self.mu0 * tl)
        right = np.full(max(self.pad_right, 0), self.kappa if self.right_value is None else self.right_value)
        return np.concatenate([left, phi, right])

    def check_range(self, phi: np.ndarray):
        lo, hi = phi.min(), phi.max()
        if lo < -RANGE_TOL * self.kappa or hi > self.kappa * (1 + RANGE_TOL):
            raise RangeViolation(f"iterate outside [0, kappa]: [{lo:.3g}, {hi:.3g}]")

    def __call__(self, phi: np.ndarray, check: bool = True) -> np.ndarray:
        """A phi on the grid.

        The zero state is unstable, so an absolute rounding error of the FFT
        in the far left tail, where phi is tiny, would be amplified at every
        step. On t < 0 the convolution is therefore carried out for
        G e^{-mu0 t} against w e^{-mu0 s}, whose rounding error is relative to
        the local size of phi.
        """
        if check:
            self.check_range(phi)
        x = np.clip(self.extend(phi), 0.0, None)
        G = self.g1(x)
        # full[m] = sum_q w[q] G[m - q]; grid node i reads m = i + len(w) - 1
        start = self.w.size - 1
        full = sfft.irfft(sfft.rfft(G, self.nfft) * self.w_hat, self.nfft)
        out = full[start:start + self.n].copy()
        pos = x > 1e-300
        ratio = np.full(x.size, self.g1_prime_0)
        ratio[pos] = G[pos] / x[pos]
        with np.errstate(divide="ignore"):
            q = np.where(pos, np.exp(np.log(np.where(pos, x, 1.0)) - self.mu0 * self.tau), 0.0)
        gq = ratio * q
        # only worthwhile when phi is dominated by C e^{mu0 t}, as every iterate is
        if not gq.max() <= Q_BOUND * max(self.kappa, float(G.max())):
            return out
        fq = sfft.irfft(sfft.rfft(gq, self.nfft) * self.w_hat_q, self.nfft)
        neg = self.t < 0
        out[neg] = fq[start:start + self.n][neg] * np.exp(self.mu0 * self.t[neg])
        return out


def apply_A(phi: GridFunction, red: Reduction, model: ModelSpec,
            constants: DerivedConstants | None = None) -> GridFunction:
    """One application of A to a profile sampled on a symmetric grid with N's spacing."""
    const = constants or build_nonlinearity(model.g)
    mu = chi0_positive_roots(model, const.g_prime_0)
    if mu is None:
        raise NotInDL("chi0 has no positive zeros")
    L = -phi.t0
    if abs(phi.t_end - L) > 1e-9 * max(1.0, L):
        raise ValueError("phi must live on a symmetric grid [-L, L]")
    op = FrontOperator(model, red, const.kappa, mu.mu0, L, phi.dt)
    if phi.left_tail is not None:
        op.tail_coeff = phi.left_tail.coeff * math.exp((phi.left_tail.rate - mu.mu0) * phi.t0)
    else:
        op.left_value = float(phi.values[0])
    if phi.right_tail is None:
        op.right_value = float(phi.values[-1])
    out = op(np.asarray(phi.values, dtype=float))
    return GridFunction(phi.t0, phi.dt, out, phi.left_tail, phi.right_tail)


def _prepare(model: ModelSpec, cfg: SolverConfig, constants: DerivedConstants | None,
             red: Reduction | None, allow_boundary: bool):
    const = constants or build_nonlinearity(model.g)
    memb = classify_point(model.h, model.c, model, constants=const)
    if not (memb.in_DL or (allow_boundary and memb.on_D0_boundary and memb.in_Dkappa)):
        raise NotInDL(f"(h, c) = ({model.h}, {model.c}) is not in the admissible domain "
                      f"(c#={memb.c_sharp_at_h:.6g}, xi*={memb.xi_star_at:.6g})")
    mu = chi0_positive_roots(model, const.g_prime_0)
    L, dt = cfg.grid_for(model.ch, model.kernel.is_dirac)
    if red is None or abs(red.N.dt - dt) > 1e-12:
        red = reduce_model(model, dt=dt, constants=const)
    return const, mu, L, dt, red, memb


def _normalize(t: np.ndarray, phi: np.ndarray, kappa: float, mu0: float) -> tuple[GridFunction, float]:
    """Translate so that phi(0) = kappa / 2, resampling by monotone cubic interpolation."""
    interp = PchipInterpolator(t, phi, extrapolate=False)
    half = 0.5 * kappa
    i = int(np.searchsorted(phi, half))
    if i <= 0 or i >= t.size:
        raise ConvergenceFailure("profile never crosses kappa / 2", last_iterate=phi)
    s = optimize.brentq(lambda x: float(interp(x)) - half, t[i - 1], t[i], xtol=1e-14)
    x = t + s
    out = np.empty_like(phi)
    inside = (x >= t[0]) & (x <= t[-1])
    out[inside] = interp(x[inside])
    lo = x < t[0]
    out[lo] = phi[0] * np.exp(mu0 * (x[lo] - t[0]))
    out[x > t[-1]] = phi[-1]
    coeff = phi[0] * math.exp(-mu0 * (t[0] - s))
    dt = t[1] - t[0]
    return GridFunction(t[0], dt, out, Tail(mu0, coeff), None), s


def solve_front(model: ModelSpec, cfg: SolverConfig = SolverConfig(), constants: DerivedConstants | None = None,
                reduction: Reduction | None = None, start_shift: float = 0.0,
                allow_boundary: bool = True, validate: bool = True) -> FrontSolution:
    const, mu, L, dt, red, memb = _prepare(model, cfg, constants, reduction, allow_boundary)
    kappa, mu0 = const.kappa, mu.mu0
    op = FrontOperator(model, red, kappa, mu0, L, dt)
    t = op.t
    eps = cfg.eps_lower if cfg.eps_lower is not None else mu0 / 10.0
    barrier = lower_barrier(kappa, mu0, eps, t + start_shift)
    degenerate = memb.on_D0_boundary or mu.degenerate
    phi = initial_upper(kappa, mu0, t + start_shift, degenerate)
    # the limit keeps the tail coefficient of the upper solution, so the left
    # extension is pinned to it; matching it to the current iterate instead
    # leaves a neutral mode that drifts for thousands of iterations
    e = kappa * math.exp(mu0 * start_shift)
    if degenerate:
        op.tail_coeff, op.tail_slope = e * (1.0 - mu0 * start_shift), -e * mu0
    else:
        op.tail_coeff = e
    steps, kept = [], []
    max_inc = -math.inf
    converged = False
    it = 0
    for it in range(1, cfg.max_iter + 1):
        new = op(phi)
        diff = new - phi
        inc = float(diff.max())
        max_inc = max(max_inc, inc)
        if inc > ORDER_TOL * kappa:
            i = int(np.argmax(diff))
            raise ConvergenceFailure(f"iterate {it} rose by {inc:.3g} at t={t[i]:.4g}; the scheme is not monotone",
                                     last_iterate=new)
        step = float(np.max(np.abs(diff)))
        steps.append(step)
        if cfg.record_every and it % cfg.record_every == 0:
            kept.append(new)
        if np.any(new < barrier - RANGE_TOL * kappa):
            i = int(np.argmax(barrier - new))
            raise CollapsedToZero(f"iterate {it} fell below the lower barrier at t={t[i]:.4g}")
        phi = new
        if step < cfg.tol_iter:
            converged = True
            break
    if not converged:
        raise IterationLimitReached(f"no convergence in {cfg.max_iter} iterations (last step {steps[-1]:.3g})")
    raw = GridFunction(t[0], dt, phi, Tail(mu0, phi[0] * math.exp(-mu0 * t[0])), None)
    prof, shift = _normalize(t, phi, kappa, mu0)
    sol = FrontSolution(profile=prof, raw=raw, shift=shift, iterations=it, sup_steps=steps,
                        max_increase=max_inc, mu0=mu0, kappa=kappa, model=model, reduction=red,
                        iterates=kept, operator=op)
    if validate:
        sol.diagnostics = validate_front(sol, model, const)
    return sol


def profile_residual(phi: np.ndarray, op: FrontOperator, model: ModelSpec) -> np.ndarray:
    """y'' - cy' - y + (K * g(y(. - ch))) at interior nodes (nan at the ends)."""
    dt = op.dt
    d1, d2 = derivatives(phi, dt)
    ext = op.extend(phi)
    gx = model.g(np.clip(ext, 0.0, None))
    k = model.kernel
    # (K * g(phi(. - ch)))(t_i) = sum_m wk_m gx(t_i - ch - m dt)
    wk = kernel_weights(k, dt)
    J = (wk.size - 1) // 2
    shift = model.ch / dt
    base = op.pad_left
    conv = np.convolve(gx, wk, mode="same") if wk.size > 1 else gx
    if abs(shift - round(shift)) < 1e-9:
        kg = conv[base + np.arange(op.n) - int(round(shift))]
    else:
        te = op.t[0] - base * dt + dt * np.arange(ext.size)
        kg = CubicSpline(te, conv)(op.t - model.ch)
    res = d2 - model.c * d1 - phi + kg
    # drop nodes whose stencil or kernel support leaves the sampled range
    res[: 2] = np.nan
    res[-2:] = np.nan
    return res


def _decay(t: np.ndarray, phi: np.ndarray, mu0: float, L: float, near_boundary: bool) -> tuple[float, str]:
    """Log-slope on [-L, -L/2] and the decay class of the left tail."""
    sel = (t >= -L) & (t <= -L / 2) & (phi > 0)
    tt, y = t[sel], np.log(phi[sel])
    coef = np.polyfit(tt, y, 1)
    slope = float(coef[0])
    # the log-slope of t e^{mu0 t} is within 2% of mu0 on long windows, so the
    # two-parameter fit is tried first at the boundary
    if near_boundary:
        r = phi[sel] * np.exp(-mu0 * tt)
        lin = np.polyval(np.polyfit(tt, r, 1), tt) * np.exp(mu0 * tt)
        expo = np.exp(np.polyval(coef, tt))
        rel = lambda m: float(np.sum(((m - phi[sel]) / phi[sel]) ** 2))
        if rel(lin) < rel(expo):
            return slope, "degenerate_t_exp"
    if abs(slope - mu0) <= 0.02 * mu0:
        return slope, "pure_mu0"
    return slope, "mu1"


def validate_front(sol: FrontSolution, model: ModelSpec, constants: DerivedConstants | None = None) -> FrontReport:
    op = sol.operator
    phi = sol.raw.values
    kappa = sol.kappa
    ftc = float(np.max(np.abs(op(phi, check=False) - phi)))
    res = profile_residual(phi, op, model)
    yp = float(np.nanmax(np.abs(res)))
    fd = np.diff(sol.profile.values)
    mono = float(max(0.0, -fd.min()))
    rng = bool(phi.min() >= -RANGE_TOL * kappa and phi.max() <= kappa * (1 + RANGE_TOL))
    cs = c_sharp(model.h, model, (constants or build_nonlinearity(model.g)).g_prime_0)
    near = abs(model.c - cs) <= 1e-3 * max(1.0, cs)
    L = -op.t[0]
    slope, cls = _decay(op.t, sol.profile.values, sol.mu0, L, near)
    return FrontReport(residual_ftc=ftc, residual_yp=yp, left_boundary_gap=float(sol.profile.values[0]),
                       right_boundary_gap=float(kappa - sol.profile.values[-1]), decay_rate_left=slope,
                       decay_class=cls, monotone_violation=mono, range_ok=rng)


def uniqueness_probe(model: ModelSpec, cfg: SolverConfig = SolverConfig(), shift: float = 2.0,
                     first: FrontSolution | None = None) -> float:
    """sup |phi - psi| between normalized fronts from two translated upper solutions."""
    a = first or solve_front(model, cfg, validate=False)
    b = solve_front(model, cfg, reduction=a.reduction, start_shift=shift, validate=False)
    return float(np.max(np.abs(a.profile.values - b.profile.values)))


def profile_csv(sol: FrontSolution) -> str:
    return sol.profile.to_csv("phi")


def report_csv(rep: FrontReport) -> str:
    keys = list(rep.__dict__)
    vals = [fmt(v) if isinstance(v, (int, float)) and v is not None else ("" if v is None else str(v))
            for v in rep.__dict__.values()]
    return ",".join(keys) + "\n" + ",".join(vals) + "\n"
