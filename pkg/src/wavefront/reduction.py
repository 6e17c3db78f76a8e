"""Reduction of the profile equation to a positive convolution fixed point.

With g1(s) = (g(s) + xi s) / (1 + xi) and N = -(1 + xi) K * v(., xi), a
bounded profile solves the second-order equation exactly when

    phi(t) = int N(t - s) g1(phi(s - ch)) ds.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .charfun import CharParams, chi, chi0_positive_roots, real_root_set, xi_star
from .errors import InterlacingViolated, NegativeInput, NegativityViolated, NotInDkappa
from .fundsol import FundamentalSolution, _splice, default_grid, fundamental_solution
from .grid import GridFunction, GridSpec, Tail, simpson
from .model import DerivedConstants, ModelSpec, build_nonlinearity

DELTA_CAP = 0.1


def build_xi(model: ModelSpec, constants: DerivedConstants | None = None) -> tuple[float, float]:
    """xi = |g'(kappa)| + delta with delta = min(0.1, (xi* - |g'(kappa)|) / 2)."""
    const = constants or build_nonlinearity(model.g)
    gk = abs(const.g_prime_kappa)
    xs = xi_star(model.c, model.h, model.kernel)
    if not gk < xs:
        raise NotInDkappa(f"|g'(kappa)| = {gk:.6g} is not below xi* = {xs:.6g}")
    delta = DELTA_CAP if math.isinf(xs) else min(DELTA_CAP, 0.5 * (xs - gk))
    return gk + delta, delta


def check_interlacing(model: ModelSpec, xi: float, constants: DerivedConstants) -> dict:
    """lambda1(xi) < lambda1(|g'k|) < 0 < mu0 <= mu1 < lambda0(|g'k|) < lambda0(xi)."""
    gk = abs(constants.g_prime_kappa)
    base = CharParams(c=model.c, h=model.h, kernel=model.kernel)
    r_xi = real_root_set(base.with_xi(xi))
    r_k = real_root_set(base.with_xi(gk))
    mu = chi0_positive_roots(model, constants.g_prime_0)
    if mu is None:
        raise InterlacingViolated("chi0 has no positive zeros: c is below c#(h)")
    chain = [r_xi.lambda1, r_k.lambda1, 0.0, mu.mu0, mu.mu1, r_k.lambda0, r_xi.lambda0]
    ok = all(a < b for a, b in zip(chain, chain[1:])) or (
        mu.degenerate and all(a < b for a, b in zip(chain[:4] + chain[5:], chain[1:4] + chain[5:]))
        and chain[2] < chain[3] and chain[4] < chain[5])
    if not ok:
        raise InterlacingViolated(f"root chain not ordered: {chain}")
    return {"lambda1_xi": r_xi.lambda1, "lambda1_k": r_k.lambda1, "mu0": mu.mu0, "mu1": mu.mu1,
            "lambda0_k": r_k.lambda0, "lambda0_xi": r_xi.lambda0, "mu_degenerate": mu.degenerate}


class G1:
    """g1 extended by the constant kappa above kappa (vectorized)."""

    def __init__(self, model: ModelSpec, xi: float, kappa: float):
        self.g, self.xi, self.kappa = model.g, float(xi), float(kappa)

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        if np.any(s < -1e-15):
            raise NegativeInput("g1 is defined for nonnegative arguments")
        x = np.clip(s, 0.0, self.kappa)
        out = (self.g(x) + self.xi * x) / (1.0 + self.xi)
        return out if out.ndim else float(out)


def g1_tilde(model: ModelSpec, xi: float, s: float, constants: DerivedConstants | None = None) -> float:
    const = constants or build_nonlinearity(model.g)
    if s < 0:
        raise NegativeInput(f"s = {s} is negative")
    return float(G1(model, xi, const.kappa)(s))


@dataclass(eq=False)
class Reduction:
    xi: float
    delta: float
    N: GridFunction
    g1_prime_0: float
    g1_prime_kappa: float
    strip: tuple[float, float]
    mass: float
    laplace_errors: list = field(default_factory=list)
    linearization_error: float = math.nan
    interlacing: dict = field(default_factory=dict)
    fs: FundamentalSolution | None = field(default=None, repr=False)

    @property
    def mass_error(self) -> float:
        return abs(self.mass - 1.0)

    def report_lines(self) -> list[str]:
        lines = [f"xi = {self.xi!r}", f"delta = {self.delta!r}", f"mass_error = {self.mass_error!r}",
                 f"g1_prime_0 = {self.g1_prime_0!r}", f"g1_prime_kappa = {self.g1_prime_kappa!r}",
                 f"strip = {self.strip!r}", f"linearization_error = {self.linearization_error!r}"]
        lines += [f"laplace_probe z={z!r} rel_error = {e!r}" for z, e in self.laplace_errors]
        return lines


def weighted_integral(g: GridFunction, z: float = 0.0) -> float:
    """int e^{-zs} g(s) ds over the real line: Simpson on each half-line
    (the kink at 0 sits on a panel edge) plus closed-form tail integrals."""
    t = g.t
    i0 = g.index_of(0.0)
    w = np.exp(-z * t) * g.values
    total = simpson(w[: i0 + 1], g.dt) + simpson(w[i0:], g.dt)
    for tail, edge, side in ((g.left_tail, t[0], -1), (g.right_tail, t[-1], 1)):
        if tail is None:
            continue
        r = tail.rate - z
        if tail.slope:
            # int of (a + b s) e^{rs} beyond the edge
            a, b = tail.coeff, tail.slope
            val = math.exp(r * edge) * ((a + b * edge) / r - b / r**2)
            total += -val if side > 0 else val
        else:
            val = tail.coeff * math.exp(r * edge) / r
            total += -val if side > 0 else val
    return float(total)


def build_N(model: ModelSpec, fs: FundamentalSolution, constants: DerivedConstants | None = None,
            delta: float | None = None) -> Reduction:
    const = constants or build_nonlinearity(model.g)
    xi = fs.params.xi
    if delta is None:
        delta = xi - abs(const.g_prime_kappa)
    k = model.kernel
    scale = -(1.0 + xi)
    if k.is_dirac:
        vals = scale * fs.samples.values
    else:
        vals = scale * fs.convolved_on_grid()
    tl = fs.samples.left_tail
    tr = fs.samples.right_tail
    left = Tail(tl.rate, scale * tl.coeff * float(k.transform(tl.rate))) if tl else None
    right = None
    if tr is not None:
        kh = float(k.transform(tr.rate))
        right = Tail(tr.rate, scale * tr.coeff * kh, scale * tr.slope * kh)
    if not k.is_dirac:
        t = fs.samples.t
        vals, _ = _splice(t, vals, left, -1)
        vals, _ = _splice(t, vals, right, 1)
    N = GridFunction(fs.samples.t0, fs.samples.dt, vals, left, right)
    if np.any(N.values <= 0):
        i = int(np.argmin(N.values))
        raise NegativityViolated(f"N({N.t[i]:.6g}) = {N.values[i]:.3g} is not positive")
    mass = weighted_integral(N)
    lam1, lam0 = fs.tails.lambda_plus, fs.tails.lambda_minus
    mu = chi0_positive_roots(model, const.g_prime_0)
    probes = [0.5 * lam1] + ([0.5 * mu.mu0, mu.mu0] if mu else [0.5 * lam0])
    errs = []
    for z in probes:
        exact = scale * float(k.transform(z)) / chi(fs.params, z)
        errs.append((z, abs(weighted_integral(N, z) - exact) / abs(exact)))
    g10 = (const.g_prime_0 + xi) / (1.0 + xi)
    g1k = (const.g_prime_kappa + xi) / (1.0 + xi)
    lin = math.nan
    if mu is not None:
        lin = abs(g10 * math.exp(-mu.mu0 * model.ch) * weighted_integral(N, mu.mu0) - 1.0)
    return Reduction(xi=xi, delta=delta, N=N, g1_prime_0=g10, g1_prime_kappa=g1k, strip=(lam1, lam0),
                     mass=mass, laplace_errors=errs, linearization_error=lin, fs=fs)


def reduce_model(model: ModelSpec, dt: float = 0.01, L: float | None = None,
                 constants: DerivedConstants | None = None) -> Reduction:
    """Select xi, build v and N on a grid of spacing dt, and certify the identities."""
    const = constants or build_nonlinearity(model.g)
    xi, delta = build_xi(model, const)
    inter = check_interlacing(model, xi, const)
    params = CharParams(c=model.c, h=model.h, d=1.0, xi=xi, kernel=model.kernel)
    grid = default_grid(params, dt) if L is None else GridSpec.snapped(L, dt)
    fs = fundamental_solution(params, grid)
    red = build_N(model, fs, const, delta)
    red.interlacing = inter
    return red


def kernel_n_csv(red: Reduction) -> str:
    return red.N.to_csv("N")
