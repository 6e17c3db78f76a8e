"""Characteristic functions, their real zeros, and the (h, c) domains.

The characteristic function of the linear problem is

    chi(z, xi) = z**2 - c z - d - xi * exp(-c h z) * khat(z),

with ``khat`` the kernel transform. The linearization at 0 is ``chi`` with
``d = 1, xi = -g'(0)``; the one at kappa uses ``xi = |g'(kappa)|``.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import optimize

from .errors import (CharOverflow, ConvergenceFailure, NoNegativeRoot, NoPositiveRoot,
                     WavefrontError)
from .model import KernelSpec, ModelSpec, build_nonlinearity

ROOT_XTOL = 1e-15
TANGENCY_TOL = 1e-12
BOUNDARY_TOL = 1e-8
RTOL = 4 * np.finfo(float).eps


@dataclass(frozen=True)
class CharParams:
    c: float
    h: float = 0.0
    d: float = 1.0
    xi: float = 0.0
    kernel: KernelSpec = KernelSpec()

    @property
    def ch(self) -> float:
        return self.c * self.h

    def with_xi(self, xi: float) -> "CharParams":
        return replace(self, xi=float(xi))


def _weight(p: CharParams, z):
    """exp(-chz) khat(z) and its first two z-derivatives."""
    k = p.kernel
    z = np.asarray(z, dtype=float)
    with np.errstate(over="ignore", invalid="ignore"):
        e = np.exp(-p.ch * z)
        k0, k1, k2 = k.transform(z), k.d_transform(z), k.d2_transform(z)
        w0 = e * k0
        w1 = e * (k1 - p.ch * k0)
        w2 = e * (k2 - 2 * p.ch * k1 + p.ch**2 * k0)
    return w0, w1, w2


def chi(params: CharParams, z, strict: bool = False):
    """Evaluate chi(z, xi). Overflow yields +-inf unless ``strict``."""
    z = np.asarray(z, dtype=float)
    w0 = _weight(params, z)[0]
    with np.errstate(invalid="ignore", over="ignore"):
        out = z**2 - params.c * z - params.d - params.xi * w0
    if strict and not np.all(np.isfinite(out)):
        raise CharOverflow("exponential term exceeds the floating range; shrink the interval")
    return out if out.ndim else float(out)


def chi_prime(params: CharParams, z):
    z = np.asarray(z, dtype=float)
    w1 = _weight(params, z)[1]
    with np.errstate(invalid="ignore", over="ignore"):
        out = 2 * z - params.c - params.xi * w1
    return out if out.ndim else float(out)


def chi_second(params: CharParams, z):
    z = np.asarray(z, dtype=float)
    w2 = _weight(params, z)[2]
    with np.errstate(invalid="ignore", over="ignore"):
        out = 2.0 - params.xi * w2
    return out if out.ndim else float(out)


def log_weight(params: CharParams, z):
    """log(exp(-chz) khat(z)) for real z, overflow-free."""
    z = np.asarray(z, dtype=float)
    return -params.ch * z + params.kernel.log_transform(z)


def _weight_rate(params: CharParams, side: int) -> float:
    """Growth behaviour of exp(-chz) khat(z) as z -> side * inf.

    Returns +inf for super-exponential growth, otherwise the exponential
    rate (``0`` with a vanishing prefactor counts as not dominating z**2).
    """
    k = params.kernel
    lin = -params.ch * side
    if k.family == "gaussian":
        return math.inf
    if k.family == "uniform":
        return lin + k.a
    return lin


def asymptotic_sign(params: CharParams, side: int) -> int:
    """Sign of chi(z) as z -> side * infinity."""
    if params.xi <= 0:
        return 1
    return -1 if _weight_rate(params, side) > 0 else 1


@dataclass(frozen=True)
class RootSet:
    lambda2: float
    lambda1: float
    lambda0: float
    lambda_m1: float
    chi_prime: tuple[float, float, float, float]
    near_degenerate: bool = False

    @property
    def finite_roots(self) -> list[float]:
        return [r for r in (self.lambda2, self.lambda1, self.lambda0, self.lambda_m1) if math.isfinite(r)]


def _scan_bound(params: CharParams) -> float:
    Z = 8.0
    for _ in range(40):
        ok = True
        for side in (-1, 1):
            s = asymptotic_sign(params, side)
            v = chi(params, side * Z)
            dv = chi_prime(params, side * Z)
            if not (np.sign(v) == s and np.sign(dv) * side == s):
                ok = False
        if ok:
            return Z
        Z *= 2.0
        if Z > 1e5:
            break
    raise ConvergenceFailure("could not find a scan interval matching the asymptotic sign of chi")


def _roots_on(params: CharParams, lo: float, hi: float, n: int = 4001):
    """All zeros of chi in [lo, hi] (simple or tangential)."""
    z = np.linspace(lo, hi, n)
    dz = chi_prime(params, z)
    f = lambda x: chi(params, x)
    fp = lambda x: chi_prime(params, x)
    crit = []
    sgn = np.sign(dz)
    for i in np.flatnonzero(sgn[:-1] * sgn[1:] < 0):
        crit.append(optimize.brentq(fp, z[i], z[i + 1], xtol=ROOT_XTOL, rtol=RTOL))
    for i in np.flatnonzero(sgn == 0):
        crit.append(float(z[i]))
    knots = [lo] + sorted(crit) + [hi]
    roots = []
    found = []
    for a, b in zip(knots[:-1], knots[1:]):
        fa, fb = f(a), f(b)
        hit = False
        if np.isfinite(fa) and np.isfinite(fb) and fa * fb < 0:
            roots.append(optimize.brentq(f, a, b, xtol=ROOT_XTOL * max(1.0, abs(a)), rtol=RTOL, maxiter=500))
            hit = True
        found.append(hit)
    tangential = []
    for i, x in enumerate(knots[1:-1]):
        # a critical point touching zero with no crossing on either side
        if found[i] or found[i + 1]:
            continue
        if abs(f(x)) <= TANGENCY_TOL * (1.0 + x * x):
            tangential.append(x)
    return sorted(set(roots)), tangential


def real_root_set(params: CharParams) -> RootSet:
    """Ordered real zeros lambda2 <= lambda1 < 0 < lambda0 <= lambda_{-1}."""
    if params.c**2 + params.d <= 0:
        raise NoPositiveRoot("c^2 + d must be positive")
    Z = _scan_bound(params)
    roots, tangential = _roots_on(params, -Z, Z)
    neg = sorted([r for r in roots if r < 0] + [t for t in tangential if t < 0] * 2, reverse=True)
    pos = sorted([r for r in roots if r > 0] + [t for t in tangential if t > 0] * 2)
    if not neg:
        raise NoNegativeRoot(f"chi has no negative real zero (xi={params.xi:g}); xi > xi* or not hyperbolic")
    if not pos:
        raise NoPositiveRoot(f"chi has no positive real zero (xi={params.xi:g}); xi > xi* or not hyperbolic")
    if len(neg) > 2 or len(pos) > 2:
        raise ConvergenceFailure(f"more than four real zeros found: {neg + pos}")
    l1 = neg[0]
    l2 = neg[1] if len(neg) > 1 else -math.inf
    l0 = pos[0]
    lm1 = pos[1] if len(pos) > 1 else math.inf
    cp = tuple(float(chi_prime(params, r)) if math.isfinite(r) else math.nan for r in (l2, l1, l0, lm1))
    degenerate = bool(tangential) or any(abs(x) < 1e-8 for x in cp if math.isfinite(x))
    return RootSet(l2, l1, l0, lm1, cp, degenerate)


def has_roots_of_both_signs(params: CharParams) -> bool:
    try:
        real_root_set(params)
    except (NoNegativeRoot, NoPositiveRoot):
        return False
    return True


# -- critical gain ---------------------------------------------------------

def _side_sup(params: CharParams, side: int) -> tuple[float, float]:
    """sup over z on one half-axis of (z^2 - cz - d) / W(z), W = exp(-chz)khat.

    For a given xi the zeros of chi on that side are the solutions of
    ratio(z) = xi, so the supremum is the largest gain keeping a zero there.
    Returns (xi_side, z at the maximum).
    """
    p0 = params.with_xi(1.0)
    if asymptotic_sign(p0, side) > 0:
        return math.inf, math.nan
    c, d = params.c, params.d
    r = (c + side * math.sqrt(c * c + 4 * d)) / 2.0  # zero of the quadratic on this side

    def log_ratio(z):
        z = np.asarray(z, dtype=float)
        qv = z * z - c * z - d
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(qv > 0, np.log(np.where(qv > 0, qv, 1.0)) - log_weight(p0, z), -np.inf)

    def dlog_ratio(z):
        qv = z * z - c * z - d
        w0, w1, _ = _weight(p0, z)
        return (2 * z - c) / qv - w1 / w0

    span = 4.0
    for _ in range(60):
        z = r + side * np.linspace(0.0, span, 8001)[1:]
        lr = log_ratio(z)
        i = int(np.argmax(lr))
        if i < len(z) - 50 and lr[-1] < lr[i] - 30:
            break
        span *= 2.0
    else:
        raise ConvergenceFailure("ratio maximum not bracketed", last_iterate=float(z[i]))
    a, b = z[max(i - 1, 0)], z[min(i + 1, len(z) - 1)]
    if i == 0:
        a = r + side * 1e-12
    lo, hi = min(a, b), max(a, b)
    try:
        zs = optimize.brentq(dlog_ratio, lo, hi, xtol=1e-15, rtol=RTOL, maxiter=500)
    except ValueError:
        res = optimize.minimize_scalar(lambda x: -float(log_ratio(x)), bounds=(lo, hi), method="bounded",
                                       options={"xatol": 1e-14})
        zs = float(res.x)
    return float(np.exp(log_ratio(zs))), zs


def xi_star(c: float, h: float, kernel: KernelSpec, d: float = 1.0) -> float:
    """Largest gain for which chi(., xi) keeps real zeros of both signs."""
    params = CharParams(c=c, h=h, d=d, xi=0.0, kernel=kernel)
    return min(_side_sup(params, -1)[0], _side_sup(params, 1)[0])


def xi_star_detail(c: float, h: float, kernel: KernelSpec, d: float = 1.0) -> dict:
    params = CharParams(c=c, h=h, d=d, xi=0.0, kernel=kernel)
    neg, zneg = _side_sup(params, -1)
    pos, zpos = _side_sup(params, 1)
    return {"xi_star": min(neg, pos), "xi_neg": neg, "z_neg": zneg, "xi_pos": pos, "z_pos": zpos}


def xi_star_bisection(c: float, h: float, kernel: KernelSpec, d: float = 1.0, hi: float | None = None,
                      tol: float = 1e-12) -> float:
    """Independent estimate of xi* by bisection on the root-existence predicate."""
    base = CharParams(c=c, h=h, d=d, xi=0.0, kernel=kernel)
    pred = lambda xi: has_roots_of_both_signs(base.with_xi(xi))
    lo = 0.0
    hi = 1.0 if hi is None else hi
    while pred(hi):
        lo, hi = hi, hi * 2.0
        if hi > 1e8:
            return math.inf
    while hi - lo > tol * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if pred(mid):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# -- linearization at zero ---------------------------------------------------

@dataclass(frozen=True)
class PositiveRootPair:
    mu0: float
    mu1: float
    degenerate: bool


def _chi0_params(model: ModelSpec, g0: float, h: float | None = None, c: float | None = None) -> CharParams:
    return CharParams(c=model.c if c is None else c, h=model.h if h is None else h, d=1.0, xi=-g0,
                      kernel=model.kernel)


def _chi0_minimum(params: CharParams) -> tuple[float, float]:
    """Minimizer and minimum of the strictly convex chi_0 over z >= 0."""
    if chi_prime(params, 0.0) >= 0:
        return 0.0, float(chi(params, 0.0))
    hi = 1.0
    while chi_prime(params, hi) <= 0:
        hi *= 2.0
        if hi > 1e6:
            raise ConvergenceFailure("chi_0 minimum not bracketed")
    zm = optimize.brentq(lambda x: chi_prime(params, x), 0.0, hi, xtol=1e-15, rtol=RTOL)
    return zm, float(chi(params, zm))


def chi0_positive_roots(model: ModelSpec, g_prime_0: float | None = None, degenerate_tol: float = 1e-10
                        ) -> PositiveRootPair | None:
    g0 = build_nonlinearity(model.g).g_prime_0 if g_prime_0 is None else g_prime_0
    p = _chi0_params(model, g0)
    zm, vm = _chi0_minimum(p)
    if abs(vm) <= degenerate_tol:
        return PositiveRootPair(zm, zm, True)
    if vm > 0:
        return None
    f = lambda x: chi(p, x)
    mu0 = optimize.brentq(f, 0.0, zm, xtol=ROOT_XTOL, rtol=RTOL)
    hi = max(2 * zm, 1.0)
    while f(hi) <= 0:
        hi *= 2.0
    mu1 = optimize.brentq(f, zm, hi, xtol=ROOT_XTOL * hi, rtol=RTOL)
    return PositiveRootPair(mu0, mu1, False)


def _c_sharp_newton(h: float, kernel: KernelSpec, g0: float, steps: int | None = None,
                    tol: float = 1e-14) -> tuple[float, float]:
    """Double positive root of chi_0 by damped Newton on (z, c), continued in h."""
    z = math.sqrt(g0 - 1.0)
    c = 2.0 * z
    if kernel.family != "dirac":
        # h = 0 start: eliminate c, solve z^2 + 1 - g0 khat + g0 z khat' = 0
        f0 = lambda x: x * x + 1 - g0 * float(kernel.transform(x)) + g0 * x * float(kernel.d_transform(x))
        try:
            hi = 1e-3
            while f0(hi) <= 0:
                hi *= 1.5
            lo = hi / 1.5 if hi > 1e-3 else 0.0
            z = optimize.brentq(f0, lo, hi, xtol=1e-15)
            c = (z * z - 1 + g0 * float(kernel.transform(z))) / z
        except (ValueError, OverflowError):
            pass
    n = steps if steps is not None else max(1, int(math.ceil(abs(h) / 0.05)))
    for k in range(1, n + 1):
        hk = h * k / n
        for it in range(100):
            p = CharParams(c=c, h=hk, d=1.0, xi=-g0, kernel=kernel)
            w0, w1, w2 = _weight(p, z)
            F1 = z * z - c * z - 1 + g0 * w0
            F2 = 2 * z - c + g0 * w1
            # derivatives of exp(-c h z) khat(z) with respect to c
            kz, kz1 = float(kernel.transform(z)), float(kernel.d_transform(z))
            e = math.exp(-c * hk * z)
            dw0_dc = -hk * z * e * kz
            dw1_dc = e * (-hk * z * (kz1 - c * hk * kz) - hk * kz)
            J = np.array([[F2, -z + g0 * dw0_dc], [2 + g0 * w2, -1 + g0 * dw1_dc]])
            F = np.array([F1, F2])
            try:
                step = np.linalg.solve(J, -F)
            except np.linalg.LinAlgError as exc:
                raise ConvergenceFailure("singular Jacobian", last_iterate=(z, c)) from exc
            norm0 = float(np.hypot(F1, F2))
            lam = 1.0
            for _ in range(60):
                zn, cn = z + lam * step[0], c + lam * step[1]
                if zn > 0:
                    pn = CharParams(c=cn, h=hk, d=1.0, xi=-g0, kernel=kernel)
                    r = np.hypot(chi(pn, zn), chi_prime(pn, zn))
                    if np.isfinite(r) and r <= (1 - 1e-4 * lam) * norm0 or norm0 < 1e-15:
                        break
                lam *= 0.5
            else:
                raise ConvergenceFailure("damped Newton stalled", last_iterate=(z, c))
            z, c = zn, cn
            if abs(step[0]) * lam <= tol * max(1, abs(z)) and abs(step[1]) * lam <= tol * max(1, abs(c)):
                break
        else:
            raise ConvergenceFailure("Newton iteration limit", last_iterate=(z, c))
    return z, c


def _c_sharp_bisection(h: float, kernel: KernelSpec, g0: float, tol: float = 1e-13) -> float:
    """c_# as the zero of c -> min_{z>0} chi_0(z; c), which is decreasing in c."""
    def m(c):
        return _chi0_minimum(CharParams(c=c, h=h, d=1.0, xi=-g0, kernel=kernel))[1]

    lo, hi = -1.0, 1.0
    while m(hi) > 0:
        hi = 2 * hi if hi > 0 else 1.0
    while m(lo) <= 0:
        lo = 2 * lo
    return optimize.brentq(m, lo, hi, xtol=tol, rtol=RTOL, maxiter=500)


def c_sharp(h: float, model: ModelSpec, g_prime_0: float | None = None) -> float:
    """Critical linear speed: chi_0 has a positive double zero at c = c_#(h)."""
    g0 = build_nonlinearity(model.g).g_prime_0 if g_prime_0 is None else g_prime_0
    if g0 <= 1:
        raise WavefrontError("c_sharp requires g'(0) > 1")
    try:
        z, c = _c_sharp_newton(h, model.kernel, g0)
        p = CharParams(c=c, h=h, d=1.0, xi=-g0, kernel=model.kernel)
        if z > 0 and abs(chi(p, z)) < 1e-11 * (1 + z * z) and abs(chi_prime(p, z)) < 1e-9 * (1 + abs(z)):
            return float(c)
    except (ConvergenceFailure, OverflowError, FloatingPointError):
        pass
    return float(_c_sharp_bisection(h, model.kernel, g0))


# -- domain classification ---------------------------------------------------

@dataclass(frozen=True)
class DomainMembership:
    in_D0: bool
    on_D0_boundary: bool
    in_Dkappa: bool
    in_DL: bool
    c_sharp_at_h: float
    xi_star_at: float
    margin_kappa: float


def classify_point(h: float, c: float, model: ModelSpec, tol_boundary: float = BOUNDARY_TOL,
                   constants=None, c_sharp_value: float | None = None) -> DomainMembership:
    const = build_nonlinearity(model.g) if constants is None else constants
    cs = c_sharp(h, model, const.g_prime_0) if c_sharp_value is None else c_sharp_value
    on_b = abs(c - cs) <= tol_boundary
    in_d0 = c > cs + tol_boundary
    xs = xi_star(c, h, model.kernel)
    gk = abs(const.g_prime_kappa)
    in_dk = gk < xs
    return DomainMembership(in_D0=in_d0, on_D0_boundary=on_b, in_Dkappa=in_dk,
                            in_DL=(in_d0 or on_b) and in_dk, c_sharp_at_h=cs, xi_star_at=xs,
                            margin_kappa=xs - gk)


@dataclass
class DomainMap:
    h_values: np.ndarray
    c_values: np.ndarray
    cells: list  # h-major list of (h, c, DomainMembership | None)

    def to_csv(self) -> str:
        return domain_map_csv(self)


def _axis(lo: float, hi: float, step: float) -> np.ndarray:
    if not step > 0:
        raise ValueError("grid step must be positive")
    if hi < lo:
        return np.empty(0)
    n = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return lo + step * np.arange(n)


def domain_map(h_range: tuple[float, float, float], c_range: tuple[float, float, float],
               model: ModelSpec) -> DomainMap:
    """Classify every (h, c) cell; per-cell failures are recorded as None."""
    hs = _axis(*h_range)
    cs = _axis(*c_range)
    if hs.size * cs.size > 10**6:
        raise ValueError("domain map limited to 10^6 cells")
    const = build_nonlinearity(model.g)
    cells = []
    for h in hs:
        try:
            csh = c_sharp(float(h), model, const.g_prime_0)
        except WavefrontError:
            csh = None
        for c in cs:
            try:
                if csh is None:
                    raise WavefrontError("c_sharp failed")
                mem = classify_point(float(h), float(c), model, constants=const, c_sharp_value=csh)
            except (WavefrontError, ValueError, ZeroDivisionError):
                mem = None
            cells.append((float(h), float(c), mem))
    return DomainMap(hs, cs, cells)


DOMAIN_MAP_HEADER = ["h", "c", "in_D0", "on_D0_boundary", "in_Dkappa", "in_DL", "c_sharp", "xi_star",
                     "margin_kappa"]


def fmt(x) -> str:
    """17-significant-digit float formatting used by every CSV."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if math.isnan(x):
        return "nan"
    return f"{x:.17g}"


def domain_map_csv(dm: DomainMap) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(DOMAIN_MAP_HEADER)
    for h, c, m in dm.cells:
        if m is None:
            w.writerow([fmt(h), fmt(c)] + ["unknown"] * 7)
        else:
            w.writerow([fmt(h), fmt(c), fmt(m.in_D0), fmt(m.on_D0_boundary), fmt(m.in_Dkappa), fmt(m.in_DL),
                        fmt(m.c_sharp_at_h), fmt(m.xi_star_at), fmt(m.margin_kappa)])
    return buf.getvalue()
