"""Kernels, birth functions and the standing hypotheses on them.

Everything here works in the normalized form of the profile equation,

    y'' - c y' - y + (K * g(y(. - ch)))(t) = 0,

i.e. with unit linear decay. :func:`normalize` maps the raw Nicholson
parameters (p, delta) and the physical (h, c, kernel widths) onto it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import optimize, special

from .errors import InvalidSampleCount, MultipleFixedPoints, NoPositiveFixedPoint

KERNEL_FAMILIES = ("dirac", "gaussian", "uniform")
G_FAMILIES = ("nicholson", "mackey_glass")


@dataclass(frozen=True)
class KernelSpec:
    """Unit-mass interaction kernel with a closed-form two-sided transform.

    ``transform(z)`` is ``khat(z) = int exp(-z s) K(s) ds``. The gaussian
    family is the normal density with mean ``mean`` and deviation ``sigma``,
    the uniform family is ``1/(2a)`` on ``[-a, a]``.
    """

    family: str = "dirac"
    sigma: float = 1.0
    mean: float = 0.0
    a: float = 1.0

    def __post_init__(self):
        if self.family not in KERNEL_FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}")
        if self.family == "gaussian" and not self.sigma > 0:
            raise ValueError("gaussian kernel needs sigma > 0")
        if self.family == "uniform" and not self.a > 0:
            raise ValueError("uniform kernel needs a > 0")

    @property
    def is_dirac(self) -> bool:
        return self.family == "dirac"

    # -- transform and its derivatives (real or complex argument) ---------
    def transform(self, z):
        z = np.asarray(z)
        if self.family == "dirac":
            return np.ones_like(z, dtype=np.result_type(z, float))
        if self.family == "gaussian":
            return np.exp(0.5 * self.sigma**2 * z**2 - self.mean * z)
        y = self.a * z
        small = np.abs(y) < 1e-4
        ys = np.where(small, 1.0, y)
        with np.errstate(over="ignore", invalid="ignore"):
            out = np.sinh(ys) / ys
        return np.where(small, 1.0 + y**2 / 6.0 + y**4 / 120.0, out)

    def log_transform(self, z):
        """``log khat(z)`` for real z, safe for arguments where khat overflows."""
        z = np.asarray(z, dtype=float)
        if self.family == "dirac":
            return np.zeros_like(z)
        if self.family == "gaussian":
            return 0.5 * self.sigma**2 * z**2 - self.mean * z
        y = np.abs(self.a * z)
        small = y < 1e-4
        ys = np.where(small, 1.0, y)
        big = ys + np.log1p(-np.exp(-2.0 * ys)) - np.log(2.0 * ys)
        return np.where(small, y**2 / 6.0, big)

    def d_transform(self, z):
        z = np.asarray(z, dtype=float)
        if self.family == "dirac":
            return np.zeros_like(z)
        if self.family == "gaussian":
            return self.transform(z) * (self.sigma**2 * z - self.mean)
        a = self.a
        y = a * z
        small = np.abs(y) < 1e-3
        ys = np.where(small, 1.0, y)
        with np.errstate(over="ignore", invalid="ignore"):
            big = (ys * np.cosh(ys) - np.sinh(ys)) / ys**2
        return a * np.where(small, y / 3.0 + y**3 / 30.0, big)

    def d2_transform(self, z):
        z = np.asarray(z, dtype=float)
        if self.family == "dirac":
            return np.zeros_like(z)
        if self.family == "gaussian":
            s2 = self.sigma**2
            return self.transform(z) * ((s2 * z - self.mean) ** 2 + s2)
        a = self.a
        y = a * z
        small = np.abs(y) < 1e-2
        ys = np.where(small, 1.0, y)
        with np.errstate(over="ignore", invalid="ignore"):
            big = (ys**2 * np.sinh(ys) - 2 * ys * np.cosh(ys) + 2 * np.sinh(ys)) / ys**3
        return a**2 * np.where(small, 1.0 / 3.0 + y**2 / 10.0, big)

    def fourier(self, u):
        """``khat(iu) = int exp(-ius) K(s) ds``."""
        u = np.asarray(u, dtype=float)
        if self.family == "dirac":
            return np.ones_like(u, dtype=complex)
        if self.family == "gaussian":
            return np.exp(-0.5 * self.sigma**2 * u**2 - 1j * self.mean * u)
        return np.sinc(self.a * u / np.pi).astype(complex)

    def cos_sin(self, u, ch: float):
        """Oscillatory parts ``C(u) = int K(s) cos(u(ch+s)) ds`` and ``S(u)``."""
        w = self.fourier(-np.asarray(u, dtype=float)) * np.exp(1j * np.asarray(u) * ch)
        return w.real, w.imag

    def density(self, s):
        """Pointwise kernel density; ``None`` for the dirac family."""
        if self.family == "dirac":
            return None
        s = np.asarray(s, dtype=float)
        if self.family == "gaussian":
            x = (s - self.mean) / self.sigma
            return np.exp(-0.5 * x**2) / (self.sigma * math.sqrt(2 * math.pi))
        return np.where(np.abs(s) <= self.a, 0.5 / self.a, 0.0)

    def support(self, eps: float = 1e-17) -> tuple[float, float]:
        """Interval outside of which the density is below ``eps`` relative."""
        if self.family == "dirac":
            return 0.0, 0.0
        if self.family == "gaussian":
            w = self.sigma * math.sqrt(-2.0 * math.log(eps))
            return self.mean - w, self.mean + w
        return -self.a, self.a

    def convolve_two_sided_exp(self, t, lam_left: float, lam_right: float, scale: float):
        """Closed form of ``K * f`` for ``f(x) = scale * exp(lam_left x)`` on
        ``x < 0`` and ``scale * exp(lam_right x)`` on ``x >= 0``.

        Requires ``lam_left > 0 > lam_right``.
        """
        t = np.asarray(t, dtype=float)
        if self.family == "dirac":
            return scale * np.where(t < 0, np.exp(lam_left * np.minimum(t, 0.0)),
                                    np.exp(lam_right * np.maximum(t, 0.0)))
        if self.family == "gaussian":
            m, s = self.mean, self.sigma
            out = np.zeros_like(t)
            for lam, sgn in ((lam_left, -1.0), (lam_right, 1.0)):
                y = (t - m + lam * s**2) / s
                out += np.exp(lam * (t - m) + 0.5 * lam**2 * s**2 + special.log_ndtr(sgn * y))
            return scale * out
        a = self.a

        def prim(x):
            # antiderivative of f / scale vanishing at -inf
            xm = np.minimum(x, 0.0)
            xp = np.maximum(x, 0.0)
            return np.exp(lam_left * xm) / lam_left + np.expm1(lam_right * xp) / lam_right

        return scale * (prim(t + a) - prim(t - a)) / (2 * a)

    def rescaled(self, factor: float) -> "KernelSpec":
        """Kernel of the variable ``s' = factor * s``."""
        return replace(self, sigma=self.sigma * factor, mean=self.mean * factor, a=self.a * factor)


def kernel_transform(kernel: KernelSpec, z: float) -> float:
    """Closed-form two-sided transform ``int exp(-zs) K(s) ds`` at real ``z``."""
    return float(kernel.transform(float(z)))


@dataclass(frozen=True)
class NonlinearitySpec:
    """Birth function in normalized (unit linear decay) form.

    nicholson:     g(u) = (p/delta) u exp(-u)
    mackey_glass:  g(u) = p u / (1 + u**q)
    """

    family: str = "nicholson"
    p: float = 6.0
    delta: float = 1.0
    q: float = 8.0

    def __post_init__(self):
        if self.family not in G_FAMILIES:
            raise ValueError(f"unknown nonlinearity family {self.family!r}")
        if not self.p > 0:
            raise ValueError("p must be positive")
        if self.family == "nicholson" and not self.delta > 0:
            raise ValueError("delta must be positive")
        if self.family == "mackey_glass" and not self.q > 0:
            raise ValueError("q must be positive")

    @property
    def beta(self) -> float:
        return self.p / self.delta if self.family == "nicholson" else self.p

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        if self.family == "nicholson":
            return self.beta * u * np.exp(-u)
        return self.p * u / (1.0 + u**self.q)

    def derivative(self, u):
        u = np.asarray(u, dtype=float)
        if self.family == "nicholson":
            return self.beta * (1.0 - u) * np.exp(-u)
        uq = u**self.q
        return self.p * (1.0 + (1.0 - self.q) * uq) / (1.0 + uq) ** 2


@dataclass(frozen=True)
class DerivedConstants:
    kappa: float
    g_prime_0: float
    g_prime_kappa: float
    gco_witness: tuple[float, float] | None = None


@dataclass(frozen=True)
class ModelSpec:
    """Complete normalized model: kernel, birth function, delay and speed."""

    kernel: KernelSpec = field(default_factory=KernelSpec)
    g: NonlinearitySpec = field(default_factory=NonlinearitySpec)
    h: float = 0.0
    c: float = 0.0

    @property
    def ch(self) -> float:
        return self.c * self.h

    def at(self, h: float | None = None, c: float | None = None) -> "ModelSpec":
        return replace(self, h=self.h if h is None else float(h), c=self.c if c is None else float(c))


@dataclass(frozen=True)
class RescaleMap:
    """Map from raw (physical) parameters to the normalized model.

    With linear decay ``delta``, the substitution ``t' = delta t``,
    ``x' = sqrt(delta) x`` gives ``h' = delta h``, ``c' = c / sqrt(delta)``
    and kernel lengths multiplied by ``sqrt(delta)``.
    """

    delta: float = 1.0

    @property
    def space_factor(self) -> float:
        return math.sqrt(self.delta)

    def describe(self) -> str:
        if self.delta == 1.0:
            return "identity (delta = 1)"
        return (f"t' = {self.delta!r} t, x' = sqrt({self.delta!r}) x; "
                f"h' = delta h, c' = c/sqrt(delta), kernel lengths * sqrt(delta), g'(0) = p/delta")


def normalize(kernel: KernelSpec, g: NonlinearitySpec, h: float, c: float) -> tuple[ModelSpec, RescaleMap]:
    """Build the normalized model from raw config values."""
    delta = g.delta if g.family == "nicholson" else 1.0
    rmap = RescaleMap(delta)
    model = ModelSpec(kernel=kernel.rescaled(rmap.space_factor), g=g,
                      h=float(h) * delta, c=float(c) / rmap.space_factor)
    return model, rmap


def _scan_grid(s_max: float) -> np.ndarray:
    return np.unique(np.concatenate([np.geomspace(1e-8, s_max, 2000), np.linspace(0, s_max, 4001)[1:]]))


def build_nonlinearity(spec: NonlinearitySpec) -> DerivedConstants:
    """Locate the positive equilibrium and the derivatives at both equilibria."""
    s_max = 1.0
    while spec(s_max) >= s_max:
        s_max *= 2.0
        if s_max > 1e8:
            raise MultipleFixedPoints("g(s) >= s on the whole scan range; no stable equilibrium")
    s_max *= 2.0
    s = _scan_grid(s_max)
    sign = np.sign(spec(s) - s)
    nz = sign != 0
    changes = np.flatnonzero(np.diff(sign[nz]) != 0)
    if changes.size == 0:
        raise NoPositiveFixedPoint(f"g(s) < s on (0, {s_max:g}] (g'(0) = {float(spec.derivative(0.0)):g})")
    if changes.size > 1:
        raise MultipleFixedPoints(f"{changes.size} sign changes of g(s) - s on (0, {s_max:g}]")
    sv = s[nz]
    lo, hi = sv[changes[0]], sv[changes[0] + 1]
    kappa = optimize.bisect(lambda x: float(spec(x)) - x, lo, hi, xtol=1e-13 * hi, rtol=4 * np.finfo(float).eps,
                            maxiter=400)
    g0 = float(spec.derivative(0.0))
    gk = float(spec.derivative(kappa))
    return DerivedConstants(kappa=kappa, g_prime_0=g0, g_prime_kappa=gk,
                            gco_witness=_fit_gco(spec, g0, kappa))


def _fit_gco(spec, g0: float, kappa: float, n: int = 4096):
    u = np.linspace(0.0, kappa / 10.0, n + 1)[1:]
    dev = np.abs(spec(u) / u - g0)
    ratio = dev / u
    if np.all(np.isfinite(ratio)):
        return float(np.max(ratio)) * (1 + 1e-9), 1.0
    # log-log regression on the points where the deviation is resolvable
    ok = dev > 0
    if ok.sum() < 2:
        return None
    theta, logc = np.polyfit(np.log(u[ok]), np.log(dev[ok]), 1)
    if not 0 < theta <= 1:
        return None
    c_fit = float(np.max(dev[ok] / u[ok] ** theta))
    return c_fit * (1 + 1e-9), float(theta)


@dataclass
class HypothesisReport:
    M_holds: bool
    ST_holds: bool
    subtangent_at_0: bool
    gco_holds: bool
    details: list[tuple[str, float, float]]

    @property
    def all_hold(self) -> bool:
        return self.M_holds and self.ST_holds and self.subtangent_at_0

    def failures(self) -> list[str]:
        out = []
        for flag, name in ((self.M_holds, "M"), (self.ST_holds, "ST"),
                           (self.subtangent_at_0, "subtangency"), (self.gco_holds, "gco")):
            if not flag:
                out.append(name)
        return out


def check_hypotheses(spec: NonlinearitySpec, constants: DerivedConstants, n_samples: int = 4096,
                     tol: float = 1e-12) -> HypothesisReport:
    """Sample-based certification of (M), (ST), sub-tangency at 0 and the
    Holder-type condition on ``g(u)/u`` near 0.

    Each entry of ``details`` is ``(check, worst sample point, margin)``; a
    check passes iff its margin is nonnegative.
    """
    if n_samples < 16:
        raise InvalidSampleCount(f"n_samples must be >= 16, got {n_samples}")
    k = constants.kappa
    details = []

    details.append(("M: g'(0) > 1", 0.0, constants.g_prime_0 - 1.0))
    details.append(("M: g'(kappa) < 0", k, -constants.g_prime_kappa))
    s_pos = np.linspace(0.0, 2 * k, n_samples + 1)[1:]
    gp = spec(s_pos)
    i = int(np.argmin(gp))
    details.append(("M: g(s) > 0 on (0, 2 kappa]", float(s_pos[i]), float(gp[i])))
    # a single sign change of g(s) - s was certified by build_nonlinearity
    M = all(m > 0 for _, _, m in details)

    s = np.linspace(0.0, k, n_samples)
    w = spec(s) - constants.g_prime_kappa * s
    dw = np.diff(w)
    i = int(np.argmin(dw))
    st_margin = float(dw[i]) + tol
    details.append(("ST: g(s) - g'(kappa) s nondecreasing", float(s[i]), st_margin))

    excess = spec(s) - constants.g_prime_0 * s
    i = int(np.argmax(excess))
    sub_margin = tol - float(excess[i])
    details.append(("subtangency: g(s) <= g'(0) s", float(s[i]), sub_margin))

    wit = constants.gco_witness
    if wit is None:
        gco = False
        details.append(("gco: |g(u)/u - g'(0)| <= C u^theta", 0.0, -math.inf))
    else:
        C, theta = wit
        u = np.linspace(0.0, k / 10.0, n_samples + 1)[1:]
        slack = C * u**theta - np.abs(spec(u) / u - constants.g_prime_0)
        i = int(np.argmin(slack))
        gco = bool(slack[i] >= 0)
        details.append((f"gco: C={C:.6g}, theta={theta:g}", float(u[i]), float(slack[i])))

    return HypothesisReport(M_holds=M, ST_holds=st_margin >= 0, subtangent_at_0=sub_margin >= 0,
                            gco_holds=gco, details=details)
